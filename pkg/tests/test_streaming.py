import math

import numpy as np
import pytest

from kcdr.dimred import GaussianMap
from kcdr.errors import (
    AllLevelsFailedError,
    ConstraintInfeasibleError,
    EmptyStreamError,
)
from kcdr.geometry import point_set
from kcdr.solvers import (
    AssignmentConstraint,
    exact_discrete_kcenter,
    exact_discrete_outliers,
)
from kcdr.streaming import (
    StreamConfig,
    StreamUpdate,
    cell_budget,
    guess_level_count,
    init_stream,
    process_update,
    query_constrained,
    query_outliers,
    query_vanilla,
    random_stream,
    read_stream_text,
    replay_survivors,
    sample_point,
    space_report,
    write_stream_text,
)


def feed(state, updates):
    for u in updates:
        process_update(state, u)
    return state


def inserts(points, color=None):
    return [StreamUpdate("insert", tuple(p), color) for p in points]


def identity_state(config: StreamConfig):
    # test fixture bypassing projection: unit-scale identity map, t == d
    assert config.t == config.d
    state = init_stream(config)
    state.map = GaussianMap(
        d=config.d, t=config.t, entries=np.eye(config.d), scale=1.0, seed=0
    )
    return state


def level_fields(state):
    out = []
    for lv in state.levels:
        entry = {
            "cells": dict(lv.cells),
            "points": {c: dict(m) for c, m in lv.cell_points.items()},
            "colors": None
            if lv.cell_colors is None
            else {c: dict(m) for c, m in lv.cell_colors.items()},
            "failed": lv.failed,
        }
        if lv.cell_sketch is not None:
            entry["sketch"] = dict(lv.cell_sketch.buckets)
            entry["sampler"] = dict(lv.sampler.buckets)
            if lv.color_sketches is not None:
                entry["color_sketches"] = [dict(s.buckets) for s in lv.color_sketches]
        out.append(entry)
    return out


class TestConfigAndInit:
    def test_guess_ladder_worked_example(self):
        cfg = StreamConfig(d=32, t=4, delta=1024, k=1, alpha=2.0)
        assert guess_level_count(cfg) == 15

    def test_budget_worked_example(self):
        cfg = StreamConfig(d=8, t=3, delta=64, k=3, eps=0.5)
        assert cell_budget(cfg) == (3 + 0 + 1) * 16**3

    def test_t_above_d_rejected(self):
        with pytest.raises(ValueError, match="t must be <= d"):
            StreamConfig(d=2, t=3, delta=16, k=1)

    def test_eps_domain(self):
        with pytest.raises(ValueError):
            StreamConfig(d=2, t=2, delta=16, k=1, eps=1.0)

    def test_same_config_same_behavior(self):
        updates = random_stream(2, 32, 30, 5, seed=3)
        results = []
        for _ in range(2):
            state = feed(init_stream(StreamConfig(d=2, t=2, delta=32, k=2, seed=7)), updates)
            results.append(query_vanilla(state))
        assert results[0] == results[1]


class TestProcessUpdate:
    def test_insert_delete_cancels_exactly(self):
        cfg = StreamConfig(d=2, t=2, delta=32, k=1, mode="sketch", n_hint=32, seed=1)
        a = feed(init_stream(cfg), inserts([(3, 4), (9, 9)]))
        b = init_stream(cfg)
        feed(b, inserts([(3, 4)]))
        feed(b, [StreamUpdate("insert", (7, 7)), StreamUpdate("delete", (7, 7))])
        feed(b, inserts([(9, 9)]))
        assert level_fields(a) == level_fields(b)

    def test_repeats_occupy_one_cell(self):
        cfg = StreamConfig(d=2, t=2, delta=32, k=1, seed=0)
        state = feed(init_stream(cfg), inserts([(5, 5)] * 40))
        for lv in state.levels:
            assert len(lv.cells) == 1
            assert list(lv.cells.values()) == [40]

    def test_paired_deletes_match_insert_only_replay(self):
        # 500 updates carrying 400 survivors equal the 400-insert stream
        updates = random_stream(2, 64, 400, 50, seed=11)
        cfg = StreamConfig(d=2, t=2, delta=64, k=3, seed=5)
        noisy = feed(init_stream(cfg), updates)
        survivors = replay_survivors(updates)
        plain = init_stream(cfg)
        for row, m in zip(survivors.coords, survivors.multiplicity):
            for _ in range(int(m)):
                process_update(plain, StreamUpdate("insert", tuple(int(x) for x in row)))
        assert query_vanilla(noisy) == query_vanilla(plain)

    def test_order_invariance(self):
        updates = random_stream(2, 32, 25, 10, seed=2)
        cfg = StreamConfig(d=2, t=2, delta=32, k=2, mode="sketch", n_hint=32, seed=9)
        a = feed(init_stream(cfg), updates)
        rng = np.random.Generator(np.random.Philox(key=np.uint64(1)))
        shuffled = [updates[i] for i in rng.permutation(len(updates))]
        # permutations may transiently delete points not yet inserted, which
        # only the exact-sim replay tracker would reject
        b = feed(init_stream(cfg), shuffled)
        assert level_fields(a) == level_fields(b)
        assert query_vanilla(a) == query_vanilla(b)

    def test_exact_sim_rejects_unmatched_delete(self):
        state = init_stream(StreamConfig(d=1, t=1, delta=16, k=1))
        with pytest.raises(ValueError, match="not present"):
            process_update(state, StreamUpdate("delete", (3,)))

    def test_sketch_mode_accepts_unmatched_delete(self):
        state = init_stream(StreamConfig(d=1, t=1, delta=16, k=1, mode="sketch", n_hint=16))
        process_update(state, StreamUpdate("delete", (3,)))
        process_update(state, StreamUpdate("insert", (3,)))
        assert state.net_weight == 0

    def test_domain_checks(self):
        state = init_stream(StreamConfig(d=2, t=1, delta=16, k=1))
        with pytest.raises(ValueError, match=r"\[1, delta\]"):
            process_update(state, StreamUpdate("insert", (0, 5)))
        with pytest.raises(ValueError, match="dimension"):
            process_update(state, StreamUpdate("insert", (5,)))
        with pytest.raises(ValueError, match="not colored"):
            process_update(state, StreamUpdate("insert", (5, 5), color=1))

    def test_colored_stream_requires_colors(self):
        state = init_stream(StreamConfig(d=1, t=1, delta=16, k=1, num_colors=2))
        with pytest.raises(ValueError, match="needs a color"):
            process_update(state, StreamUpdate("insert", (5,)))

    def test_grid_displacement_bound(self):
        cfg = StreamConfig(d=3, t=2, delta=64, k=2, seed=4)
        state = init_stream(cfg)
        rng = np.random.Generator(np.random.Philox(key=np.uint64(8)))
        for _ in range(30):
            p = tuple(int(x) for x in rng.integers(1, 65, size=3))
            process_update(state, StreamUpdate("insert", p))
            y = state.map.scale * (state.map.entries @ np.asarray(p, dtype=float))
            for j, lv in enumerate(state.levels):
                cell = np.floor(y / lv.side)
                rep = (cell + 0.5) * lv.side
                assert np.linalg.norm(y - rep) <= cfg.eps * 2.0**j / 2.0 + 1e-12


class TestQueryVanilla:
    def test_single_point_any_multiplicity(self):
        state = feed(
            init_stream(StreamConfig(d=2, t=2, delta=32, k=3)),
            inserts([(7, 9)] * 25),
        )
        res = query_vanilla(state)
        assert res.value == 0.0
        assert res.centers == ((7, 9),)

    def test_two_points_k2_slack_only(self):
        state = feed(
            init_stream(StreamConfig(d=2, t=2, delta=32, k=2, seed=2)),
            inserts([(2, 2), (30, 29)]),
        )
        res = query_vanilla(state)
        assert res.value <= state.config.eps * 2.0**res.level
        assert set(res.centers) == {(2, 2), (30, 29)}

    def test_identity_fixture_factor_four_of_oracle(self):
        # three separated integer clusters in [1024]^2, exact offline optimum
        centers = np.array([[100, 100], [500, 900], [900, 200]])
        for seed in range(20):
            rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
            pts = []
            for c in centers:
                pts.extend(c + rng.integers(-10, 11, size=(20, 2)))
            pts = [tuple(int(x) for x in p) for p in pts]
            state = identity_state(StreamConfig(d=2, t=2, delta=1024, k=3, seed=seed))
            feed(state, inserts(pts))
            res = query_vanilla(state)
            offline = exact_discrete_kcenter(replay_survivors(inserts(pts)), 3).value
            assert offline / 4.0 <= res.value <= 4.0 * offline

    def test_centers_are_stream_members(self):
        for seed in range(5):
            updates = random_stream(2, 64, 50, 10, seed=seed)
            state = feed(init_stream(StreamConfig(d=2, t=2, delta=64, k=3, seed=seed)), updates)
            survivors = {tuple(int(x) for x in r) for r in replay_survivors(updates).coords}
            res = query_vanilla(state)
            assert set(res.centers) <= survivors

    def test_empty_stream_rejected(self):
        state = init_stream(StreamConfig(d=1, t=1, delta=16, k=1))
        with pytest.raises(EmptyStreamError, match="empty stream"):
            query_vanilla(state)

    def test_emptied_stream_rejected(self):
        state = init_stream(StreamConfig(d=1, t=1, delta=16, k=1))
        process_update(state, StreamUpdate("insert", (5,)))
        process_update(state, StreamUpdate("delete", (5,)))
        with pytest.raises(EmptyStreamError, match="empty stream"):
            query_vanilla(state)

    def test_all_levels_failed_message(self):
        state = feed(
            init_stream(StreamConfig(d=1, t=1, delta=16, k=1)),
            inserts([(3,), (9,)]),
        )
        for lv in state.levels:
            lv.failed = True
        with pytest.raises(AllLevelsFailedError, match="budget exceeded at every guess"):
            query_vanilla(state)


class TestQueryOutliers:
    def test_z_swallows_stream(self):
        state = feed(
            init_stream(StreamConfig(d=1, t=1, delta=32, k=1, z=9)),
            inserts([(2,), (20,), (31,)]),
        )
        assert query_outliers(state, 9).value == 0.0

    def test_z_zero_matches_vanilla(self):
        updates = random_stream(2, 64, 40, 0, seed=6)
        state = feed(init_stream(StreamConfig(d=2, t=2, delta=64, k=2, seed=3)), updates)
        assert abs(query_outliers(state, 0).value - query_vanilla(state).value) <= 1e-9

    def test_tightness_fixture_band(self):
        # integer rendering of the one-outlier-cluster worst case: weights
        # 2/2/1 on a line, spacing 300 and 100
        pts = [(512, 300)] * 2 + [(212, 300)] * 2 + [(412, 300)]
        state = identity_state(StreamConfig(d=2, t=2, delta=1024, k=1, z=2, seed=1))
        feed(state, inserts(pts))
        res = query_outliers(state, 2)
        offline = exact_discrete_outliers(replay_survivors(inserts(pts)), 1, 2).value
        band = 4.0 * (1.0 + state.config.eps)
        assert offline / band <= res.value <= band * offline

    def test_negative_z_rejected(self):
        state = feed(init_stream(StreamConfig(d=1, t=1, delta=16, k=1)), inserts([(5,)]))
        with pytest.raises(ValueError):
            query_outliers(state, -1)


class TestQueryConstrained:
    def test_vacuous_capacity_matches_vanilla(self):
        state = feed(
            init_stream(StreamConfig(d=1, t=1, delta=1024, k=1, seed=2)),
            inserts([(100,), (900,)]),
        )
        cons = AssignmentConstraint(kind="capacitated", capacity=100)
        v = query_vanilla(state).value
        c = query_constrained(state, cons).value
        assert abs(v - c) <= 1e-9

    def test_worked_capacitated_identity_fixture(self):
        state = identity_state(StreamConfig(d=1, t=1, delta=1024, k=2, seed=0))
        feed(state, inserts([(1,), (2,), (11,), (12,)]))
        cons = AssignmentConstraint(kind="capacitated", capacity=2)
        res = query_constrained(state, cons)
        # offline anchored value 1, plus the level-0 grid slack eps
        assert res.level == 0
        assert res.value == pytest.approx(1.0 + 0.5)

    def test_fair_two_site_zero(self):
        cfg = StreamConfig(d=1, t=1, delta=1024, k=2, num_colors=2, seed=4)
        state = init_stream(cfg)
        for loc in (100, 900):
            for color in (1, 2):
                feed(state, inserts([(loc,)] * 2, color=color))
        cons = AssignmentConstraint(
            kind="fair", lower_frac=0.5, upper_frac=0.5, num_colors=2
        )
        assert query_constrained(state, cons).value == 0.0

    def test_infeasible_constraint_raises(self):
        state = feed(
            init_stream(StreamConfig(d=1, t=1, delta=64, k=2, seed=0)),
            inserts([(4,), (20,), (40,), (60,)]),
        )
        cons = AssignmentConstraint(kind="capacitated", capacity=1)
        with pytest.raises(ConstraintInfeasibleError, match="constraint infeasible"):
            query_constrained(state, cons)

    def test_fair_requires_colored_stream(self):
        state = feed(init_stream(StreamConfig(d=1, t=1, delta=64, k=1)), inserts([(5,)]))
        cons = AssignmentConstraint(
            kind="fair", lower_frac=0.0, upper_frac=1.0, num_colors=2
        )
        with pytest.raises(ValueError, match="colored"):
            query_constrained(state, cons)


class TestModeAgreement:
    def test_differential_vanilla(self):
        for seed in range(5):
            updates = random_stream(2, 32, 30, 8, seed=seed)
            values = []
            for mode in ("exact-sim", "sketch"):
                cfg = StreamConfig(
                    d=2, t=2, delta=32, k=2, mode=mode, n_hint=64, seed=17
                )
                values.append(query_vanilla(feed(init_stream(cfg), updates)))
            assert values[0].value == values[1].value
            assert values[0].centers == values[1].centers

    def test_differential_fair(self):
        updates = random_stream(2, 32, 24, 6, seed=3, num_colors=2)
        cons = AssignmentConstraint(
            kind="fair", lower_frac=0.0, upper_frac=1.0, num_colors=2
        )
        got = []
        for mode in ("exact-sim", "sketch"):
            cfg = StreamConfig(
                d=2, t=2, delta=32, k=2, mode=mode, num_colors=2, n_hint=64, seed=23
            )
            got.append(query_constrained(feed(init_stream(cfg), updates), cons).value)
        assert got[0] == got[1]


class TestSamplePoint:
    def test_empty_level(self):
        state = init_stream(StreamConfig(d=1, t=1, delta=16, k=1))
        assert sample_point(state, 0) is None

    def test_single_item(self):
        for mode in ("exact-sim", "sketch"):
            cfg = StreamConfig(d=2, t=1, delta=16, k=1, mode=mode, n_hint=16, seed=6)
            state = feed(init_stream(cfg), inserts([(3, 14)]))
            for seed in range(4):
                key, point = sample_point(state, 2, seed=seed)
                assert key.level == 2
                assert point == (3, 14)

    def test_samples_come_from_support(self):
        pts = [(i, 2 * i) for i in range(1, 11)]
        state = feed(init_stream(StreamConfig(d=2, t=2, delta=32, k=1, seed=8)), inserts(pts))
        seen = {sample_point(state, 0, seed=s)[1] for s in range(30)}
        assert seen <= set(pts)
        assert len(seen) > 1

    def test_level_out_of_range(self):
        state = init_stream(StreamConfig(d=1, t=1, delta=16, k=1))
        with pytest.raises(ValueError, match="guess_level"):
            sample_point(state, 99)


class TestSpaceReport:
    def test_fresh_state(self):
        cfg = StreamConfig(d=2, t=2, delta=64, k=2, mode="sketch", n_hint=32, seed=0)
        rep = space_report(init_stream(cfg))
        assert all(lv["cells"] == 0 for lv in rep["levels"])
        alloc = {lv["sketch_allocated_words"] for lv in rep["levels"]}
        assert len(alloc) == 1  # fixed per-level overhead
        assert rep["total_words"] == 0

    def test_multiplicity_free_storage(self):
        cfg = StreamConfig(d=2, t=2, delta=32, k=1, seed=0)
        once = feed(init_stream(cfg), inserts([(9, 9)]))
        many = feed(init_stream(cfg), inserts([(9, 9)] * 1000))
        a, b = space_report(once), space_report(many)
        assert a["total_words"] == b["total_words"]
        for la, lb in zip(a["levels"], b["levels"]):
            assert la["cell_store_words"] == lb["cell_store_words"]

    def test_selected_level_within_budget(self):
        updates = random_stream(3, 64, 500, 0, seed=5)
        cfg = StreamConfig(d=3, t=3, delta=64, k=3, eps=0.5, seed=5)
        state = feed(init_stream(cfg), updates)
        res = query_vanilla(state)
        rep = space_report(state)
        assert rep["budget_per_level"] == 4 * 16**3
        assert rep["levels"][res.level]["cells"] <= rep["budget_per_level"]


class TestStreamText:
    def test_round_trip(self, tmp_path):
        updates = random_stream(2, 16, 8, 3, seed=1, num_colors=3)
        path = tmp_path / "s.txt"
        write_stream_text(updates, 2, 16, str(path), n_hint=11)
        d, delta, n_hint, back = read_stream_text(str(path))
        assert (d, delta, n_hint) == (2, 16, 11)
        assert back == updates

    def test_bad_header(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("2 16\n")
        with pytest.raises(ValueError, match="header"):
            read_stream_text(str(path))

    def test_bad_op_token(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("1 16 1\n* 3\n")
        with pytest.raises(ValueError, match=r"\+ or -"):
            read_stream_text(str(path))


class TestRandomStreamAndReplay:
    def test_survivor_accounting(self):
        updates = random_stream(2, 32, 37, 12, seed=4)
        survivors = replay_survivors(updates)
        assert survivors.total_weight == 37
        assert len(updates) == 37 + 2 * 12

    def test_replay_rejects_net_negative(self):
        with pytest.raises(ValueError, match="negative"):
            replay_survivors([StreamUpdate("delete", (3, 3))])

    def test_replay_rejects_empty(self):
        ins = StreamUpdate("insert", (3, 3))
        dele = StreamUpdate("delete", (3, 3))
        with pytest.raises(ValueError, match="empty"):
            replay_survivors([ins, dele])

    def test_colors_forwarded(self):
        updates = random_stream(1, 16, 10, 0, seed=0, num_colors=2)
        survivors = replay_survivors(updates, num_colors=2)
        assert survivors.color is not None
        assert set(survivors.color.tolist()) <= {1, 2}
