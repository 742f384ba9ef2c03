"""Gaussian random maps: target dimension selection, sampling, scaling, probes.

The map G is a t x d matrix of iid standard normals.  Used raw it expands
norms by roughly sqrt(t); divided by sqrt(t) it is a Johnson-Lindenstrauss
map; scaled by alpha / (c0 * sqrt(d)) it preserves the k-center value up to a
factor O(alpha) at a target dimension far below the JL regime.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import pdist

from .geometry import PointSet

DEFAULT_C_JL = 8.0
DEFAULT_C_EXP = 9.0
DEFAULT_C0 = 3.0

VARIANTS = ("vanilla", "outliers", "constrained", "doubling")


def _standard_normal(seed: int, shape) -> np.ndarray:
    """Seeded standard normals: Philox counter-based uniforms through Box-Muller."""
    gen = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    u1 = gen.random(shape)
    u2 = gen.random(shape)
    # u1 in [0, 1), so 1 - u1 is in (0, 1] and the log is finite
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


@dataclass(frozen=True)
class GaussianMap:
    """A t x d Gaussian matrix with an optional scalar applied on use.

    entries are reproducible from (d, t, seed); scale starts at 1.0 and is set
    exactly once by scaled_for_kcenter.  t >= d is permitted (the map is then
    essentially an expensive identity) and flagged via is_identity_regime.
    """

    d: int
    t: int
    entries: np.ndarray
    scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.t < 1 or self.d < 1:
            raise ValueError("map dimensions must be >= 1")
        if self.scale <= 0:
            raise ValueError("scale must be > 0")
        entries = np.asarray(self.entries, dtype=np.float64)
        if entries.shape != (self.t, self.d):
            raise ValueError("entries must have shape (t, d)")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def is_identity_regime(self) -> bool:
        return self.t >= self.d


def sample_map(d: int, t: int, seed: int = 0) -> GaussianMap:
    """Sample a fresh unscaled map; identical (d, t, seed) gives identical entries."""
    return GaussianMap(d=d, t=t, entries=_standard_normal(seed, (t, d)), seed=seed)


@dataclass(frozen=True)
class TargetDimParams:
    alpha: float
    k: int
    d: int
    c_jl: float = DEFAULT_C_JL
    c_exp: float = DEFAULT_C_EXP
    z: int = 0
    eps: float | None = None
    ddim: float | None = None


def target_dimension(params: TargetDimParams, variant: str) -> int:
    """Target dimension t for the requested variant, always capped at d.

    vanilla:     ceil(c_jl * ln(k+2) + c_exp * d / alpha^2)
    outliers:    ceil(c_jl * ln((k+2)(z+2)) + c_exp * d / alpha^2)
    constrained: ceil(c_jl * ln(k+2) + c_exp * d / alpha)
    doubling:    ceil(c_jl * ln(k+2) / eps^2 + c_exp * ln(2/eps) * ddim / eps^2)
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if params.k < 1:
        raise ValueError("k must be >= 1")
    if params.d < 1:
        raise ValueError("d must be >= 1")
    if params.alpha <= 1 and variant in ("vanilla", "outliers", "constrained"):
        raise ValueError("alpha must be > 1")
    if params.c_jl <= 0 or params.c_exp <= 0:
        raise ValueError("constants must be positive")
    k, d, a = params.k, params.d, params.alpha
    if variant == "vanilla":
        t = params.c_jl * math.log(k + 2) + params.c_exp * d / a**2
    elif variant == "outliers":
        if params.z < 0:
            raise ValueError("outliers variant requires z >= 0")
        t = params.c_jl * math.log((k + 2) * (params.z + 2)) + params.c_exp * d / a**2
    elif variant == "constrained":
        t = params.c_jl * math.log(k + 2) + params.c_exp * d / a
    else:
        if params.eps is None or params.ddim is None:
            raise ValueError("doubling variant requires eps and ddim")
        if not 0 < params.eps < 1:
            raise ValueError("eps must be in (0, 1)")
        if params.ddim <= 0:
            raise ValueError("ddim must be positive")
        e = params.eps
        t = params.c_jl * math.log(k + 2) / e**2 + params.c_exp * math.log(2 / e) * params.ddim / e**2
    return min(int(math.ceil(t)), d)


def scaled_for_kcenter(m: GaussianMap, alpha: float, c0: float = DEFAULT_C0) -> GaussianMap:
    """Return a copy carrying scale = alpha / (c0 * sqrt(d)); rejects double scaling."""
    if m.scale != 1.0:
        raise ValueError("map is already scaled; scaling twice is rejected")
    if alpha <= 1:
        raise ValueError("alpha must be > 1")
    if c0 <= 0:
        raise ValueError("c0 must be > 0")
    return replace(m, scale=alpha / (c0 * math.sqrt(m.d)))


def apply_map(m: GaussianMap, ps: PointSet) -> PointSet:
    """Project a PointSet through scale * G, preserving order, weights, colors."""
    if ps.dim != m.d:
        raise ValueError("point set dimension does not match the map")
    projected = (ps.coords @ m.entries.T) * m.scale
    return PointSet(projected, ps.multiplicity, ps.color)


def expansion_probe(m: GaussianMap, trials: int = 64, seed: int = 0) -> float:
    """Lower estimate of the operator norm of the unscaled matrix.

    Runs 100 rounds of power iteration on G^T G from a seeded start and also
    takes the max of ||G x|| over `trials` random unit vectors; returns the
    larger of the two estimates.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    g = m.entries
    v = _standard_normal(seed, (m.d,))
    v /= np.linalg.norm(v)
    for _ in range(100):
        w = g @ v
        v = g.T @ w
        nv = np.linalg.norm(v)
        if nv == 0:
            break
        v /= nv
    power_est = float(np.linalg.norm(g @ v))
    xs = _standard_normal(seed + 1, (trials, m.d))
    xs /= np.linalg.norm(xs, axis=1, keepdims=True)
    sample_est = float(np.max(np.linalg.norm(xs @ g.T, axis=1)))
    return max(power_est, sample_est)


def tail_probe(t: int, r: float, trials: int, seed: int = 0) -> float:
    """Empirical Pr[||g|| >= r] for g standard normal in R^t.

    Only valid in the regime r >= sqrt(5 t), where the chi tail is bounded by
    exp(-r^2 / 5); outside it the probe refuses to run.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    if trials < 1000:
        raise ValueError("trials must be >= 1000")
    if r < math.sqrt(5.0 * t):
        raise ValueError("tail bound not applicable: r must be >= sqrt(5 t)")
    g = _standard_normal(seed, (trials, t))
    norms = np.linalg.norm(g, axis=1)
    return float(np.mean(norms >= r))


@dataclass(frozen=True)
class DistortionReport:
    pair_count: int
    eps: float
    min_ratio: float
    max_ratio: float
    outside_fraction: float
    max_unit_expansion: float
    t: int

    def to_dict(self) -> dict:
        return {
            "pair_count": self.pair_count,
            "eps": self.eps,
            "min_ratio": self.min_ratio,
            "max_ratio": self.max_ratio,
            "outside_fraction": self.outside_fraction,
            "max_unit_expansion": self.max_unit_expansion,
            "t": self.t,
        }


def distortion_report(m: GaussianMap, ps: PointSet, eps: float) -> DistortionReport:
    """Pairwise JL ratios ||G(p-q)|| / (sqrt(t) ||p-q||) under unit scale.

    Pairs at distance zero are skipped; errors out if no nonzero pair exists.
    outside_fraction counts ratios strictly outside [1-eps, 1+eps].
    """
    if not 0 < eps < 1:
        raise ValueError("eps must be in (0, 1)")
    if ps.n < 2:
        raise ValueError("need at least two points")
    if ps.dim != m.d:
        raise ValueError("point set dimension does not match the map")
    orig = pdist(ps.coords)
    proj = pdist(ps.coords @ m.entries.T)
    mask = orig > 0
    if not mask.any():
        raise ValueError("no nonzero pairs: all points identical")
    ratios = proj[mask] / (math.sqrt(m.t) * orig[mask])
    outside = (ratios < 1.0 - eps) | (ratios > 1.0 + eps)
    return DistortionReport(
        pair_count=int(mask.sum()),
        eps=eps,
        min_ratio=float(ratios.min()),
        max_ratio=float(ratios.max()),
        outside_fraction=float(outside.mean()),
        max_unit_expansion=float(np.max(proj[mask] / orig[mask])),
        t=m.t,
    )


# ---------------------------------------------------------------------------
# map serialization: header "d t scale seed", then t rows of d floats

def write_map_text(m: GaussianMap, path: str):
    with open(path, "w") as fh:
        fh.write(f"{m.d} {m.t} {m.scale!r} {m.seed}\n")
        for row in m.entries:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def read_map_text(path: str) -> GaussianMap:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4:
            raise ValueError("map header must be 'd t scale seed'")
        d, t = int(header[0]), int(header[1])
        scale, seed = float(header[2]), int(header[3])
        entries = np.zeros((t, d))
        for i in range(t):
            row = fh.readline().split()
            if len(row) != d:
                raise ValueError(f"map row {i} must have {d} entries")
            entries[i] = [float(x) for x in row]
    return GaussianMap(d=d, t=t, entries=entries, scale=scale, seed=seed)
