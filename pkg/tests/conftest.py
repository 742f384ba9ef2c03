import hypothesis

# Deterministic CI runs: no wall-clock deadline (oracle calls dominate),
# derandomized example generation so failures reproduce byte-for-byte.
hypothesis.settings.register_profile(
    "kcdr", derandomize=True, deadline=None, max_examples=50
)
hypothesis.settings.load_profile("kcdr")
