"""Multilevel hierarchy construction, statistics and sample sizing.

A hierarchy is one base ensemble plus a stack of positively coupled
(fine, coarse) pair ensembles.  The multilevel mean is the base mean
plus the per-pair mean differences; its variance budget is controlled
either adaptively (variance-weighted sample sizes plus a finest-level
bias test) or by a fixed compute budget.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import (
    BudgetTooSmallError,
    EmptyEnsembleError,
    FileFormatError,
    InsufficientSamplesError,
    InvalidToleranceError,
    StructureError,
    ToleranceNotMetError,
)
from .sde import LevelGrid, OuParams, step_count
from .streams import NormalStream, StreamKey, StreamPurpose

Observable = Callable[[np.ndarray], np.ndarray]


def identity(x):
    return x


@dataclass(frozen=True)
class LevelPair:
    """Positively coupled samples of one difference estimator."""

    fine: np.ndarray
    coarse: np.ndarray

    def __post_init__(self):
        if len(self.fine) != len(self.coarse):
            raise StructureError(
                f"fine/coarse lengths differ: {len(self.fine)} vs {len(self.coarse)}"
            )
        if len(self.fine) == 0:
            raise EmptyEnsembleError("level pair is empty")


@dataclass(frozen=True)
class Hierarchy:
    """Base ensemble plus coupled pair ensembles for levels 1..L."""

    level0: np.ndarray
    pairs: Sequence[LevelPair] = field(default_factory=tuple)
    grids: Optional[Sequence[LevelGrid]] = None

    def __post_init__(self):
        if len(self.level0) == 0:
            raise EmptyEnsembleError("level-0 ensemble is empty")
        if self.grids is not None:
            if len(self.grids) != len(self.pairs) + 1:
                raise StructureError(
                    f"expected {len(self.pairs) + 1} grids, got {len(self.grids)}"
                )
            for l, grid in enumerate(self.grids):
                if grid.level != l:
                    raise StructureError(f"grid {l} has level {grid.level}")

    @property
    def top_level(self) -> int:
        return len(self.pairs)

    @property
    def sizes(self) -> list:
        return [len(self.level0)] + [len(p.fine) for p in self.pairs]

    @property
    def finest_fine(self) -> np.ndarray:
        """Fine samples of the finest pair (the base ensemble when L = 0)."""
        if self.pairs:
            return self.pairs[-1].fine
        return self.level0


@dataclass(frozen=True)
class LevelStats:
    """Per-level difference means, sample variances and unit costs."""

    means: np.ndarray
    variances: np.ndarray
    unit_costs: Optional[np.ndarray] = None

    def __post_init__(self):
        if np.any(self.variances < 0):
            raise ValueError("variances must be >= 0")


@dataclass(frozen=True)
class AdaptiveConfig:
    """Controls the adaptive sample-size / level-extension driver."""

    epsilon: float
    refinement: int = 2
    base_step: float = 0.5
    max_level: int = 10
    pilot_size: int = 100
    size_formula: str = "sqrt"

    def __post_init__(self):
        if self.epsilon <= 0:
            raise InvalidToleranceError(f"epsilon must be > 0, got {self.epsilon}")
        if self.pilot_size < 2:
            raise ValueError("pilot_size must be >= 2")


@dataclass(frozen=True)
class AdaptiveResult:
    hierarchy: Hierarchy
    stats: LevelStats
    epsilon: float
    total_cost: float
    iterations: int


def mc_mean(ensemble, f: Observable = identity) -> float:
    """Plain Monte Carlo mean of f over one ensemble."""
    values = np.asarray(ensemble, dtype=np.float64)
    if values.size == 0:
        raise EmptyEnsembleError("cannot average an empty ensemble")
    return float(np.mean(f(values)))


def level_difference_mean(pair: LevelPair, f: Observable = identity) -> float:
    """Mean of f(fine) - f(coarse) over the couples of one pair."""
    fine = np.asarray(pair.fine, dtype=np.float64)
    coarse = np.asarray(pair.coarse, dtype=np.float64)
    if fine.size == 0:
        raise EmptyEnsembleError("cannot average an empty pair ensemble")
    return float(np.mean(f(fine) - f(coarse)))


def mlmc_mean(h: Hierarchy, f: Observable = identity) -> float:
    """Base-level mean plus the telescoping pair corrections."""
    total = mc_mean(h.level0, f)
    for pair in h.pairs:
        total += level_difference_mean(pair, f)
    return total


def unit_costs(grids: Sequence[LevelGrid], horizon: float = 1.0) -> np.ndarray:
    """Propagation cost of one sample per level over ``horizon``.

    A level-l couple costs horizon/h_l * 3/2 (fine plus half for the
    coarse companion); the base level has no companion.
    """
    costs = np.empty(len(grids))
    for l, grid in enumerate(grids):
        factor = 1.0 if l == 0 else 1.5
        costs[l] = horizon / grid.step * factor
    return costs


def level_stats(h: Hierarchy, f: Observable = identity, horizon: float = 1.0) -> LevelStats:
    """Difference means and unbiased variances for every level."""
    samples = [np.asarray(f(np.asarray(h.level0, dtype=np.float64)))]
    for pair in h.pairs:
        samples.append(np.asarray(f(pair.fine) - f(pair.coarse), dtype=np.float64))
    for l, s in enumerate(samples):
        if s.size < 2:
            raise InsufficientSamplesError(
                f"level {l} has {s.size} samples; variance needs >= 2"
            )
    means = np.array([np.mean(s) for s in samples])
    variances = np.array([np.var(s, ddof=1) for s in samples])
    costs = unit_costs(h.grids, horizon) if h.grids is not None else None
    return LevelStats(means=means, variances=variances, unit_costs=costs)


def optimal_sample_sizes(stats: LevelStats, grids: Sequence[LevelGrid],
                         epsilon: float, formula: str = "sqrt") -> np.ndarray:
    """Variance-minimizing sample sizes for a target tolerance.

    ``formula="sqrt"`` uses the standard N_l = ceil(2 eps^-2 sqrt(V_l h_l)
    sum_n sqrt(V_n/h_n)); ``formula="linear"`` replaces sqrt(V_l h_l) by
    V_l h_l, the variant with the weight entering un-rooted.  The two
    agree only in special cases; both are exposed because published
    statements of the rule differ.
    """
    if epsilon <= 0:
        raise InvalidToleranceError(f"epsilon must be > 0, got {epsilon}")
    if formula not in ("sqrt", "linear"):
        raise ValueError(f"formula must be 'sqrt' or 'linear', got {formula!r}")
    v = np.asarray(stats.variances, dtype=np.float64)
    steps = np.array([g.step for g in grids])
    if len(steps) != len(v):
        raise StructureError(f"{len(v)} variances but {len(steps)} grids")
    total = np.sum(np.sqrt(v / steps))
    weight = np.sqrt(v * steps) if formula == "sqrt" else v * steps
    return np.ceil(2.0 * epsilon**-2 * weight * total).astype(np.int64)


def needs_new_level(stats: LevelStats, refinement: int, epsilon: float) -> bool:
    """Finest-level bias test: extend while |mean_L| >= (M-1)*eps/sqrt(2)."""
    finest = abs(float(stats.means[-1]))
    return finest >= (refinement - 1) * epsilon / math.sqrt(2.0)


def fixed_budget_sizes(c_max: float, horizon: float,
                       grids: Sequence[LevelGrid]) -> np.ndarray:
    """Sizes N_l = floor((2/3) * c_max * h_l / horizon) under a cost cap.

    c_max is the per-level propagation budget; every level's couples cost
    1.5 fine-step-equivalents per coarse-plus-fine sweep, whence the 2/3.
    """
    if c_max <= 0 or horizon <= 0:
        raise ValueError("c_max and horizon must be > 0")
    steps = np.array([g.step for g in grids])
    sizes = np.floor((2.0 / 3.0) * c_max / horizon * steps).astype(np.int64)
    if np.any(sizes < 1):
        raise BudgetTooSmallError(
            f"budget {c_max} over horizon {horizon} leaves an empty level: {sizes.tolist()}"
        )
    return sizes


def _batch_increments(grid: LevelGrid, n_steps: int, seed: int, level: int,
                      indices, purpose: StreamPurpose) -> np.ndarray:
    dw = np.empty((len(indices), n_steps))
    root = math.sqrt(grid.step)
    for row, i in enumerate(indices):
        key = StreamKey(seed, level, int(i), purpose)
        dw[row] = root * NormalStream(key).take(n_steps)
    return dw


def _terminal_single(params: OuParams, grid: LevelGrid, t_span, seed: int,
                     indices, x0: float,
                     purpose: StreamPurpose = StreamPurpose.PATH_NOISE) -> np.ndarray:
    n = step_count(t_span, grid.step)
    dw = _batch_increments(grid, n, seed, grid.level, indices, purpose)
    states = np.full(len(indices), float(x0))
    _kernels.ou_advance(states, dw, params.alpha, params.mu, params.noise_scale, grid.step)
    return states


def _terminal_coupled(params: OuParams, grid: LevelGrid, t_span, seed: int,
                      indices, x0: float,
                      purpose: StreamPurpose = StreamPurpose.PATH_NOISE):
    m = grid.refinement
    n_fine = step_count(t_span, grid.coarse_step) * m
    dw = _batch_increments(grid, n_fine, seed, grid.level, indices, purpose)
    fine = np.full(len(indices), float(x0))
    coarse = np.full(len(indices), float(x0))
    _kernels.ou_coupled_advance(
        fine, coarse, dw, params.alpha, params.mu, params.noise_scale, grid.step, m
    )
    return fine, coarse


def build_hierarchy(params: OuParams, sizes, t_span, seed: int, x0: float = 0.0,
                    base_step: float = 0.5, refinement: int = 2) -> Hierarchy:
    """Simulate a full hierarchy of terminal values at the end of t_span.

    Level l uses step base_step * refinement^-l; member i of level l
    draws from the stream keyed (seed, l, i), so two hierarchies with
    overlapping sizes share their common members exactly.
    """
    grids = [LevelGrid.for_level(l, base_step, refinement) for l in range(len(sizes))]
    level0 = _terminal_single(params, grids[0], t_span, seed, range(sizes[0]), x0)
    pairs = []
    for l in range(1, len(sizes)):
        fine, coarse = _terminal_coupled(params, grids[l], t_span, seed, range(sizes[l]), x0)
        pairs.append(LevelPair(fine=fine, coarse=coarse))
    return Hierarchy(level0=level0, pairs=tuple(pairs), grids=tuple(grids))


def _extend_hierarchy(h: Hierarchy, params: OuParams, sizes, t_span, seed: int,
                      x0: float) -> Hierarchy:
    """Grow ensembles to ``sizes``, reusing existing members unchanged."""
    grids = list(h.grids)
    for l in range(len(grids), len(sizes)):
        grids.append(LevelGrid.for_level(l, grids[0].step, grids[0].refinement))
    level0 = h.level0
    if sizes[0] > len(level0):
        extra = _terminal_single(params, grids[0], t_span, seed,
                                 range(len(level0), sizes[0]), x0)
        level0 = np.concatenate([level0, extra])
    pairs = list(h.pairs)
    for l in range(1, len(sizes)):
        have = len(pairs[l - 1].fine) if l - 1 < len(pairs) else 0
        if sizes[l] > have:
            fine, coarse = _terminal_coupled(params, grids[l], t_span, seed,
                                             range(have, sizes[l]), x0)
            if have:
                fine = np.concatenate([pairs[l - 1].fine, fine])
                coarse = np.concatenate([pairs[l - 1].coarse, coarse])
            pair = LevelPair(fine=fine, coarse=coarse)
            if l - 1 < len(pairs):
                pairs[l - 1] = pair
            else:
                pairs.append(pair)
    return Hierarchy(level0=level0, pairs=tuple(pairs), grids=tuple(grids))


def run_adaptive(x0: float, params: OuParams, t_span, config: AdaptiveConfig,
                 seed: int, f: Observable = identity,
                 max_iterations: int = 1000) -> AdaptiveResult:
    """Grow the hierarchy until the tolerance's variance/bias split holds.

    Each round re-estimates level variances, enlarges ensembles to the
    variance-optimal sizes (never below the pilot size), and finally adds
    a level while the finest-level bias test fails.  Because members are
    keyed by index, growing is incremental and the outcome does not
    depend on the visit order.
    """
    horizon = float(t_span[1]) - float(t_span[0])
    h = build_hierarchy(params, [config.pilot_size], t_span, seed, x0,
                        config.base_step, config.refinement)
    iterations = 0
    while True:
        iterations += 1
        if iterations > max_iterations:
            raise ToleranceNotMetError(
                f"no convergence after {max_iterations} iterations",
                result=AdaptiveResult(h, level_stats(h, f, horizon), config.epsilon,
                                      _total_cost(h, horizon), iterations),
            )
        stats = level_stats(h, f, horizon)
        target = optimal_sample_sizes(stats, h.grids, config.epsilon, config.size_formula)
        target = np.maximum(target, config.pilot_size)
        current = np.array(h.sizes)
        if np.any(target > current):
            h = _extend_hierarchy(h, params, np.maximum(target, current), t_span, seed, x0)
            continue
        if needs_new_level(stats, config.refinement, config.epsilon):
            if h.top_level >= config.max_level:
                raise ToleranceNotMetError(
                    f"level cap {config.max_level} reached with finest mean "
                    f"{stats.means[-1]:.3g} above the bias threshold",
                    result=AdaptiveResult(h, stats, config.epsilon,
                                          _total_cost(h, horizon), iterations),
                )
            h = _extend_hierarchy(h, params, h.sizes + [config.pilot_size],
                                  t_span, seed, x0)
            continue
        return AdaptiveResult(h, stats, config.epsilon, _total_cost(h, horizon), iterations)


def _total_cost(h: Hierarchy, horizon: float) -> float:
    return float(np.dot(h.sizes, unit_costs(h.grids, horizon)))


def write_hierarchy_csv(h: Hierarchy, path) -> None:
    """Columnar dump: level, sample_index, fine_value, coarse_value.

    Level-0 rows leave coarse_value empty (there is no coarse companion).
    Floats are written with repr, so reading back is exact.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["level", "sample_index", "fine_value", "coarse_value"])
        for i, v in enumerate(h.level0):
            writer.writerow([0, i, repr(float(v)), ""])
        for l, pair in enumerate(h.pairs, start=1):
            for i, (fv, cv) in enumerate(zip(pair.fine, pair.coarse)):
                writer.writerow([l, i, repr(float(fv)), repr(float(cv))])


def read_hierarchy_csv(path) -> Hierarchy:
    """Inverse of :func:`write_hierarchy_csv`; validates shape as it reads."""
    per_level: dict = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["level", "sample_index", "fine_value", "coarse_value"]:
            raise FileFormatError(f"unexpected header {header}")
        for row_no, row in enumerate(reader, start=1):
            if len(row) != 4:
                raise FileFormatError("expected 4 columns", row=row_no)
            try:
                level = int(row[0])
                index = int(row[1])
                fine = float(row[2])
            except ValueError as exc:
                raise FileFormatError(str(exc), row=row_no) from None
            if level < 0 or index < 0:
                raise FileFormatError("negative level or index", row=row_no)
            if level == 0:
                if row[3] != "":
                    raise FileFormatError("level 0 must not carry a coarse value",
                                          row=row_no)
                coarse = None
            else:
                try:
                    coarse = float(row[3])
                except ValueError:
                    raise FileFormatError("missing coarse value", row=row_no) from None
            per_level.setdefault(level, []).append((index, fine, coarse, row_no))
    if 0 not in per_level:
        raise FileFormatError("no level-0 rows")
    levels = sorted(per_level)
    if levels != list(range(len(levels))):
        raise FileFormatError(f"levels are not contiguous: {levels}")
    arrays = []
    for level in levels:
        rows = sorted(per_level[level])
        indices = [r[0] for r in rows]
        if indices != list(range(len(rows))):
            raise FileFormatError(
                f"level {level} sample indices are not 0..{len(rows) - 1}",
                row=rows[-1][3],
            )
        arrays.append(rows)
    level0 = np.array([r[1] for r in arrays[0]])
    pairs = tuple(
        LevelPair(fine=np.array([r[1] for r in rows]),
                  coarse=np.array([r[2] for r in rows]))
        for rows in arrays[1:]
    )
    return Hierarchy(level0=level0, pairs=pairs)
