"""Dynamic geometric streaming over integer points with insertions and deletions.

Each update is projected once through a scaled Gaussian map, then binned into
a ladder of grids whose cell side doubles per guess level.  Queries pick the
finest usable level, solve k-center (plain, with outliers, or constrained) on
the weighted cell centers, and pay an additive slack proportional to the cell
diameter.  Two modes share one interface: exact-sim keeps keyed collections
with budget enforcement (ideal sparse recovery), sketch keeps honest hashed
banks of one-sparse cells and decodes them at query time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dimred import GaussianMap, sample_map, scaled_for_kcenter
from .errors import (
    AllLevelsFailedError,
    EmptyStreamError,
    OracleBudgetError,
    SamplerDecodeError,
)
from .geometry import PointSet
from .sketches import CellSketch, TwoLevelSampler
from .solvers import (
    AssignmentConstraint,
    anchored_feasible_radius,
    exact_constrained,
    exact_discrete_outliers,
    gonzalez,
    peel_witness,
)

MODES = ("exact-sim", "sketch")
_CELL_BASE = 1 << 42


@dataclass(frozen=True)
class StreamConfig:
    """Static parameters of one streaming session.

    Points are integer vectors in [1, delta]^d.  The projection goes to R^t
    (t <= d) and is scaled by alpha / (c0 sqrt(d)).  n_hint sizes the hashed
    banks in sketch mode; it does not affect exact-sim behavior.
    """

    d: int
    t: int
    delta: int
    k: int
    z: int = 0
    eps: float = 0.5
    alpha: float = 2.0
    c0: float = 3.0
    seed: int = 0
    mode: str = "exact-sim"
    num_colors: int | None = None
    n_hint: int = 1024
    sketch_rows: int = 5
    sampler_rows: int = 10

    def __post_init__(self):
        if self.t > self.d:
            raise ValueError("t must be <= d")
        if self.t < 1:
            raise ValueError("t must be >= 1")
        if self.delta < 2:
            raise ValueError("delta must be >= 2")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.z < 0:
            raise ValueError("z must be >= 0")
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must be in (0, 1)")
        if self.alpha <= 1.0:
            raise ValueError("alpha must be > 1")
        if self.c0 <= 0.0:
            raise ValueError("c0 must be > 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.num_colors is not None and self.num_colors < 1:
            raise ValueError("num_colors must be >= 1 when given")


@dataclass(frozen=True)
class StreamUpdate:
    op: str  # "insert" | "delete"
    point: tuple[int, ...]
    color: int | None = None


@dataclass(frozen=True)
class GridKey:
    level: int
    cell: tuple[int, ...]


@dataclass
class LevelState:
    side: float
    cells: dict[tuple[int, ...], int] = field(default_factory=dict)
    cell_colors: dict[tuple[int, ...], dict[int, int]] | None = None
    cell_points: dict[tuple[int, ...], dict[tuple[int, ...], int]] = field(default_factory=dict)
    failed: bool = False
    peak_cells: int = 0
    cell_sketch: CellSketch | None = None
    color_sketches: list[CellSketch] | None = None
    sampler: TwoLevelSampler | None = None


@dataclass
class StreamState:
    config: StreamConfig
    map: GaussianMap
    J: int
    budget: int
    levels: list[LevelState]
    point_space: int
    replay: dict[tuple, int] | None
    net_weight: int = 0
    updates_processed: int = 0
    inserts: int = 0
    deletes: int = 0


def _zigzag(v: int) -> int:
    return 2 * v if v >= 0 else -2 * v - 1


def _unzigzag(z: int) -> int:
    return z // 2 if z % 2 == 0 else -(z + 1) // 2


def _cell_code(cell: tuple[int, ...]) -> int:
    code = 0
    for c in reversed(cell):
        z = _zigzag(c)
        if z >= _CELL_BASE:
            raise ValueError("cell coordinate out of encodable range")
        code = code * _CELL_BASE + z
    return code


def _cell_from_code(code: int, t: int) -> tuple[int, ...]:
    out = []
    for _ in range(t):
        code, z = divmod(code, _CELL_BASE)
        out.append(_unzigzag(z))
    return tuple(out)


def _point_id(point: tuple[int, ...], delta: int) -> int:
    pid = 0
    for x in reversed(point):
        pid = pid * delta + (x - 1)
    return pid


def _point_from_id(pid: int, delta: int, d: int) -> tuple[int, ...]:
    out = []
    for _ in range(d):
        pid, r = divmod(pid, delta)
        out.append(r + 1)
    return tuple(out)


def guess_level_count(config: StreamConfig) -> int:
    """Top guess level J; levels run 0..J and cover every projected diameter."""
    scale = config.alpha / (config.c0 * math.sqrt(config.d))
    span = scale * config.c0 * math.sqrt(config.d) * config.delta * math.sqrt(config.d)
    return int(math.ceil(math.log2(span))) + 1


def cell_budget(config: StreamConfig) -> int:
    return (config.k + config.z + 1) * int(math.ceil(8.0 / config.eps)) ** config.t


def init_stream(config: StreamConfig) -> StreamState:
    """Sample the scaled projection and allocate the guess-level ladder."""
    base = sample_map(config.d, config.t, seed=config.seed)
    gmap = scaled_for_kcenter(base, config.alpha, config.c0)
    J = guess_level_count(config)
    budget = cell_budget(config)
    point_space = config.delta**config.d
    rng = np.random.Generator(np.random.Philox(key=np.uint64(config.seed ^ 0x9E3779B9)))
    width = 1 << max(6, math.ceil(math.log2(max(2 * config.n_hint, 64))))
    sub_levels = max(4, math.ceil(math.log2(max(config.n_hint, 2))) + 2)
    levels = []
    for j in range(J + 1):
        side = config.eps * (2.0**j) / math.sqrt(config.t)
        lv = LevelState(side=side)
        if config.num_colors is not None:
            lv.cell_colors = {}
        if config.mode == "sketch":
            lv.cell_sketch = CellSketch.build(config.sketch_rows, width, rng)
            if config.num_colors is not None:
                lv.color_sketches = [
                    CellSketch.build(config.sketch_rows, width, rng)
                    for _ in range(config.num_colors)
                ]
            lv.sampler = TwoLevelSampler.build(
                config.sampler_rows, width, sub_levels, point_space, rng
            )
        levels.append(lv)
    return StreamState(
        config=config,
        map=gmap,
        J=J,
        budget=budget,
        levels=levels,
        point_space=point_space,
        replay={} if config.mode == "exact-sim" else None,
    )


def _bump(d: dict, key, delta: int):
    v = d.get(key, 0) + delta
    if v:
        d[key] = v
    else:
        d.pop(key, None)


def process_update(state: StreamState, update: StreamUpdate):
    """Apply one insertion or deletion to every guess level.

    The point is projected exactly once.  In exact-sim mode, deleting a point
    that is not currently present is an error; sketch mode cannot detect that
    and simply applies the signed update.
    """
    cfg = state.config
    if update.op not in ("insert", "delete"):
        raise ValueError(f"unknown op {update.op!r}")
    point = tuple(int(x) for x in update.point)
    if len(point) != cfg.d:
        raise ValueError("update point has wrong dimension")
    for x in point:
        if not 1 <= x <= cfg.delta:
            raise ValueError("update coordinates must lie in [1, delta]")
    if cfg.num_colors is not None:
        if update.color is None:
            raise ValueError("stream is colored: update needs a color")
        if not 1 <= update.color <= cfg.num_colors:
            raise ValueError("update color out of range")
    elif update.color is not None:
        raise ValueError("stream is not colored: update must not carry a color")

    delta = 1 if update.op == "insert" else -1
    if state.replay is not None:
        key = (point, update.color)
        if delta < 0 and state.replay.get(key, 0) < 1:
            raise ValueError("delete of a point that is not present")
        _bump(state.replay, key, delta)

    y = state.map.scale * (state.map.entries @ np.asarray(point, dtype=np.float64))
    pid = _point_id(point, cfg.delta)
    for lv in state.levels:
        cell = tuple(int(c) for c in np.floor(y / lv.side).astype(np.int64))
        _bump(lv.cells, cell, delta)
        if lv.cell_colors is not None:
            inner = lv.cell_colors.setdefault(cell, {})
            _bump(inner, update.color, delta)
            if not inner:
                del lv.cell_colors[cell]
        inner_pts = lv.cell_points.setdefault(cell, {})
        _bump(inner_pts, point, delta)
        if not inner_pts:
            del lv.cell_points[cell]
        n_cells = len(lv.cells)
        lv.peak_cells = max(lv.peak_cells, n_cells)
        if n_cells > state.budget:
            lv.failed = True
        if lv.cell_sketch is not None:
            code = _cell_code(cell)
            lv.cell_sketch.update(code, delta)
            if lv.color_sketches is not None:
                lv.color_sketches[update.color - 1].update(code, delta)
            lv.sampler.update(code, pid, delta)

    state.net_weight += delta
    state.updates_processed += 1
    if delta > 0:
        state.inserts += 1
    else:
        state.deletes += 1


def _decoded_cells(state: StreamState, lv: LevelState) -> dict[tuple[int, ...], int] | None:
    if state.config.mode == "exact-sim":
        return dict(lv.cells)
    decoded = lv.cell_sketch.decode()
    if decoded is None:
        return None
    out = {}
    for code, w in decoded.items():
        if w <= 0:
            return None
        out[_cell_from_code(code, state.config.t)] = w
    return out


def _decoded_colors(
    state: StreamState, lv: LevelState
) -> dict[tuple[int, ...], dict[int, int]] | None:
    if state.config.mode == "exact-sim":
        return {c: dict(inner) for c, inner in lv.cell_colors.items()}
    out: dict[tuple[int, ...], dict[int, int]] = {}
    for color, sk in enumerate(lv.color_sketches, start=1):
        decoded = sk.decode()
        if decoded is None:
            return None
        for code, w in decoded.items():
            if w <= 0:
                return None
            cell = _cell_from_code(code, state.config.t)
            out.setdefault(cell, {})[color] = w
    return out


def _select_level(state: StreamState, need_colors: bool = False):
    if state.net_weight <= 0:
        raise EmptyStreamError("empty stream")
    for j, lv in enumerate(state.levels):
        if lv.failed:
            continue
        cells = _decoded_cells(state, lv)
        if cells is None:
            continue
        if need_colors:
            colors = _decoded_colors(state, lv)
            if colors is None:
                continue
            return j, cells, colors
        return j, cells, None
    raise AllLevelsFailedError("budget exceeded at every guess")


def _cell_reps(state: StreamState, j: int, cells: list[tuple[int, ...]]) -> np.ndarray:
    side = state.levels[j].side
    return (np.asarray(cells, dtype=np.float64) + 0.5) * side


def _recover_original(state: StreamState, j: int, cell: tuple[int, ...]) -> tuple[int, ...]:
    lv = state.levels[j]
    if state.config.mode == "exact-sim":
        pts = lv.cell_points.get(cell)
        if not pts:
            raise SamplerDecodeError("no stored point for the requested cell")
        return min(pts)
    pid = lv.sampler.recover_point(_cell_code(cell))
    if pid is None:
        raise SamplerDecodeError("sampler could not isolate a point for the cell")
    return _point_from_id(pid, state.config.delta, state.config.d)


@dataclass(frozen=True)
class StreamQueryResult:
    kind: str
    value: float
    level: int
    cells_used: int
    centers: tuple[tuple[int, ...], ...]
    outlier_cells: tuple[tuple[tuple[int, ...], int], ...] | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "value": self.value,
            "level": self.level,
            "cells_used": self.cells_used,
            "centers": [list(c) for c in self.centers],
            "outlier_cells": None
            if self.outlier_cells is None
            else [[list(c), u] for c, u in self.outlier_cells],
        }


def _slacked(state: StreamState, j: int, raw_value: float) -> float:
    # a value of 0 means <= k occupied cells: report it without grid slack
    if raw_value <= 0.0:
        return 0.0
    return raw_value + state.config.eps * (2.0**j)


def query_vanilla(state: StreamState) -> StreamQueryResult:
    """k-center estimate: greedy on weighted cell centers plus grid slack."""
    j, cells, _ = _select_level(state)
    items = sorted(cells.items())
    reps = _cell_reps(state, j, [c for c, _ in items])
    ps = PointSet(reps, np.array([w for _, w in items], dtype=np.int64))
    run = gonzalez(ps, state.config.k, 0)
    centers = tuple(
        _recover_original(state, j, items[i][0]) for i in run.solution.center_indices
    )
    return StreamQueryResult(
        kind="vanilla",
        value=_slacked(state, j, run.solution.value),
        level=j,
        cells_used=len(items),
        centers=centers,
    )


def query_outliers(state: StreamState, z: int) -> StreamQueryResult:
    """k-center with z outliers on the cell multiset; exact while the cell
    count fits the oracle budget, peel-witness plus oracle beyond it."""
    if z < 0:
        raise ValueError("z must be >= 0")
    if z == 0:
        res = query_vanilla(state)
        return StreamQueryResult(
            kind="outliers",
            value=res.value,
            level=res.level,
            cells_used=res.cells_used,
            centers=res.centers,
            outlier_cells=(),
        )
    j, cells, _ = _select_level(state)
    items = sorted(cells.items())
    reps = _cell_reps(state, j, [c for c, _ in items])
    ps = PointSet(reps, np.array([w for _, w in items], dtype=np.int64))
    try:
        sol = exact_discrete_outliers(ps, state.config.k, z)
        base = ps
        row_cells = [c for c, _ in items]
    except OracleBudgetError:
        witness = peel_witness(ps, state.config.k, z)
        rep_to_cell = {tuple(r): c for r, (c, _) in zip(map(tuple, reps), items)}
        sol = exact_discrete_outliers(witness, state.config.k, z)
        base = witness
        row_cells = [rep_to_cell[tuple(r)] for r in witness.coords]
    centers = tuple(
        _recover_original(state, j, row_cells[i]) for i in sol.center_indices
    )
    dropped: dict[tuple[int, ...], int] = {}
    for i in sol.outlier_indices:
        dropped[row_cells[i]] = dropped.get(row_cells[i], 0) + 1
    return StreamQueryResult(
        kind="outliers",
        value=_slacked(state, j, sol.value),
        level=j,
        cells_used=len(items),
        centers=centers,
        outlier_cells=tuple(sorted(dropped.items())),
    )


def query_constrained(state: StreamState, constraint: AssignmentConstraint) -> StreamQueryResult:
    """Constrained k-center on the weighted (and, for fairness, colored) cells."""
    need_colors = constraint.kind == "fair"
    if need_colors and state.config.num_colors is None:
        raise ValueError("fair query requires a colored stream")
    j, cells, colors = _select_level(state, need_colors=need_colors)
    if need_colors:
        rows = []
        for cell in sorted(colors):
            for color in sorted(colors[cell]):
                rows.append((cell, color, colors[cell][color]))
        cell_list = [r[0] for r in rows]
        reps = _cell_reps(state, j, cell_list)
        ps = PointSet(
            reps,
            np.array([r[2] for r in rows], dtype=np.int64),
            np.array([r[1] for r in rows], dtype=np.int64),
        )
    else:
        items = sorted(cells.items())
        cell_list = [c for c, _ in items]
        reps = _cell_reps(state, j, cell_list)
        ps = PointSet(reps, np.array([w for _, w in items], dtype=np.int64))
    try:
        sol = exact_constrained(ps, state.config.k, constraint)
        anchor_rows = [i for i in sol.anchor_indices]
        value = sol.value
    except OracleBudgetError:
        run = gonzalez(ps, state.config.k, 0)
        anchor_rows = list(run.solution.center_indices)
        value, _ = anchored_feasible_radius(ps, anchor_rows, constraint)
    centers = tuple(
        _recover_original(state, j, cell_list[i]) for i in anchor_rows
    )
    return StreamQueryResult(
        kind="constrained",
        value=_slacked(state, j, value),
        level=j,
        cells_used=len(cells),
        centers=centers,
    )


def sample_point(
    state: StreamState, guess_level: int, seed: int | None = None
) -> tuple[GridKey, tuple[int, ...]] | None:
    """Draw one (grid cell, original point) pair from a guess level.

    Returns None when the level's support is empty.  exact-sim draws uniformly
    from the stored pairs using the given seed; sketch mode walks the sampler
    banks, whose hash seeds were fixed at init.
    """
    if not 0 <= guess_level <= state.J:
        raise ValueError("guess_level out of range")
    lv = state.levels[guess_level]
    if state.config.mode == "exact-sim":
        pairs = sorted(
            (cell, pt) for cell, pts in lv.cell_points.items() for pt in pts
        )
        if not pairs:
            return None
        rng = np.random.Generator(
            np.random.Philox(
                key=np.uint64(state.config.seed if seed is None else seed)
            )
        )
        cell, pt = pairs[int(rng.integers(0, len(pairs)))]
        return GridKey(guess_level, cell), pt
    got = lv.sampler.sample()
    if got is None:
        return None
    code, pid = got
    return (
        GridKey(guess_level, _cell_from_code(code, state.config.t)),
        _point_from_id(pid, state.config.delta, state.config.d),
    )


def space_report(state: StreamState) -> dict:
    """Word counts per guess level plus separate line items for the map and
    the exact-sim replay store.  Cell storage scales with distinct cells."""
    cfg = state.config
    t, d = cfg.t, cfg.d
    per_level = []
    total = 0
    for j, lv in enumerate(state.levels):
        cell_words = (t + 1) * len(lv.cells)
        color_words = 0
        if lv.cell_colors is not None:
            color_words = sum(t + 2 * len(inner) for inner in lv.cell_colors.values())
        point_words = sum(
            t + (d + 1) * len(inner) for inner in lv.cell_points.values()
        )
        sketch_alloc = 0
        sketch_resident = 0
        if lv.cell_sketch is not None:
            banks = [lv.cell_sketch] + (lv.color_sketches or [])
            sketch_alloc = sum(b.allocated_words for b in banks) + lv.sampler.allocated_words
            sketch_resident = (
                sum(b.resident_words for b in banks) + lv.sampler.resident_words
            )
        level_words = cell_words + color_words + point_words + sketch_resident
        total += level_words
        per_level.append(
            {
                "level": j,
                "side": lv.side,
                "cells": len(lv.cells),
                "peak_cells": lv.peak_cells,
                "failed": lv.failed,
                "cell_store_words": cell_words,
                "color_store_words": color_words,
                "point_store_words": point_words,
                "sketch_resident_words": sketch_resident,
                "sketch_allocated_words": sketch_alloc,
                "words": level_words,
            }
        )
    report = {
        "mode": cfg.mode,
        "levels": per_level,
        "budget_per_level": state.budget,
        "total_words": total,
        "map_words": d * t + 4,
        "replay_words": 0
        if state.replay is None
        else sum(d + 2 for _ in state.replay),
        "bits_estimate": 64 * total,
        "updates_processed": state.updates_processed,
        "net_weight": state.net_weight,
    }
    return report


# ---------------------------------------------------------------------------
# stream files and replay
#
# header line: "d delta n_hint"
# update lines: "+|-" then d integers, optionally "c=<color>"

def write_stream_text(updates, d: int, delta: int, path: str, n_hint: int | None = None):
    with open(path, "w") as fh:
        fh.write(f"{d} {delta} {n_hint if n_hint is not None else len(updates)}\n")
        for u in updates:
            parts = ["+" if u.op == "insert" else "-"]
            parts.extend(str(int(x)) for x in u.point)
            if u.color is not None:
                parts.append(f"c={u.color}")
            fh.write(" ".join(parts) + "\n")


def read_stream_text(path: str) -> tuple[int, int, int, list[StreamUpdate]]:
    """Returns (d, delta, n_hint, updates)."""
    updates = []
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError("stream header must be 'd delta n_hint'")
        d, delta, n_hint = (int(x) for x in header)
        for line_no, line in enumerate(fh, start=2):
            tokens = line.split()
            if not tokens:
                continue
            if tokens[0] not in ("+", "-"):
                raise ValueError(f"line {line_no}: update must start with + or -")
            if len(tokens) < 1 + d:
                raise ValueError(f"line {line_no}: expected {d} coordinates")
            point = tuple(int(x) for x in tokens[1 : 1 + d])
            color = None
            for tok in tokens[1 + d :]:
                if tok.startswith("c="):
                    color = int(tok[2:])
                else:
                    raise ValueError(f"line {line_no}: unrecognized token {tok!r}")
            updates.append(
                StreamUpdate("insert" if tokens[0] == "+" else "delete", point, color)
            )
    return d, delta, n_hint, updates


def replay_survivors(updates, num_colors: int | None = None) -> PointSet:
    """Offline ground truth: the net multiset of a finished stream, sorted."""
    counts: dict[tuple, int] = {}
    for u in updates:
        key = (u.point, u.color)
        _bump(counts, key, 1 if u.op == "insert" else -1)
    for key, c in counts.items():
        if c < 0:
            raise ValueError(f"net count negative for {key}")
    keys = sorted(counts)
    if not keys:
        raise ValueError("stream cancels to the empty set")
    coords = np.array([k[0] for k in keys], dtype=np.float64)
    mult = np.array([counts[k] for k in keys], dtype=np.int64)
    colors = None
    if num_colors is not None:
        colors = np.array([k[1] for k in keys], dtype=np.int64)
    return PointSet(coords, mult, colors)


def random_stream(
    d: int,
    delta: int,
    n_survivors: int,
    n_cancelled: int = 0,
    seed: int = 0,
    num_colors: int | None = None,
) -> list[StreamUpdate]:
    """Deterministic random stream: n_survivors points stay, n_cancelled are
    inserted and deleted again, with the deletions interleaved after their
    inserts by a seeded shuffle."""
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    total = n_survivors + n_cancelled
    pts = rng.integers(1, delta + 1, size=(total, d))
    colors = (
        rng.integers(1, num_colors + 1, size=total) if num_colors is not None else None
    )
    doomed = set(rng.choice(total, size=n_cancelled, replace=False).tolist())
    updates = []
    pending = []
    for i in range(total):
        color = int(colors[i]) if colors is not None else None
        point = tuple(int(x) for x in pts[i])
        updates.append(StreamUpdate("insert", point, color))
        if i in doomed:
            pending.append(StreamUpdate("delete", point, color))
        # flush a random prefix of pending deletes to interleave them
        while pending and rng.random() < 0.5:
            updates.append(pending.pop(0))
    updates.extend(pending)
    return updates
