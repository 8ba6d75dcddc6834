"""Single ensemble forecasts from a multilevel hierarchy.

Every level of the hierarchy is sorted once into order statistics; a
combined quantile evaluation then reads the base level at its own rank
index and adds, per pair, the fine-minus-coarse gap at that pair's rank
index.  Evaluating the combined map at N uniform draws fuses the whole
hierarchy into one ensemble whose mean is an unbiased estimate of the
multilevel mean.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import csv
import numpy as np

from . import _kernels
from .errors import DomainError, EmptyEnsembleError, FileFormatError, StructureError
from .mlmc import Hierarchy
from .streams import StreamKey, uniform


@dataclass(frozen=True)
class SortedHierarchy:
    """Per-level ascending order statistics of a hierarchy.

    Fine and coarse members of a pair are sorted independently; sorting
    is stable, so ties keep their original relative order and repeated
    runs agree exactly.
    """

    level0: np.ndarray
    pairs_fine: Sequence[np.ndarray]
    pairs_coarse: Sequence[np.ndarray]

    @classmethod
    def from_hierarchy(cls, h: Hierarchy) -> "SortedHierarchy":
        return cls(
            level0=np.sort(np.asarray(h.level0, dtype=np.float64), kind="stable"),
            pairs_fine=tuple(
                np.sort(np.asarray(p.fine, dtype=np.float64), kind="stable")
                for p in h.pairs
            ),
            pairs_coarse=tuple(
                np.sort(np.asarray(p.coarse, dtype=np.float64), kind="stable")
                for p in h.pairs
            ),
        )

    @property
    def base_size(self) -> int:
        return len(self.level0)


@dataclass(frozen=True)
class ForecastEnsemble:
    """The combined ensemble: values, the uniforms that produced them,
    and a link back to the hierarchy they came from."""

    values: np.ndarray
    uniforms: np.ndarray
    alpha: int
    base_size: int
    source: Optional[Hierarchy] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.alpha < 1:
            raise StructureError(f"alpha must be >= 1, got {self.alpha}")
        expected = self.alpha * self.base_size
        if len(self.values) != expected or len(self.uniforms) != expected:
            raise StructureError(
                f"forecast size must be alpha*N0 = {expected}, "
                f"got {len(self.values)} values / {len(self.uniforms)} uniforms"
            )

    def __len__(self):
        return len(self.values)


def _check_u(u) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if np.any(u < 0) or np.any(u > 1):
        raise DomainError("u must lie in [0, 1]")
    return u


def empirical_quantile(sorted_values, u: float) -> float:
    """Order statistic at rank ceil(N*u); u = 0 clamps to the minimum."""
    values = np.asarray(sorted_values, dtype=np.float64)
    if values.size == 0:
        raise EmptyEnsembleError("cannot take a quantile of an empty ensemble")
    _check_u(u)
    idx = min(max(int(np.ceil(values.size * u)), 1), values.size)
    return float(values[idx - 1])


def mlmc_quantile(sh: SortedHierarchy, u: float) -> float:
    """Combined quantile: base order statistic plus per-pair rank gaps.

    Within pair l, fine and coarse are both read at rank ceil(N_l * u).
    """
    _check_u(u)
    out = _kernels.forecast_values(
        sh.level0, sh.pairs_fine, sh.pairs_coarse, np.array([float(u)])
    )
    return float(out[0])


def generate_forecast(h: Hierarchy, alpha: int, stream: Optional[StreamKey] = None,
                      u_mode: str = "random") -> ForecastEnsemble:
    """Draw the combined ensemble of size alpha * N0 from a hierarchy.

    ``u_mode="random"`` draws the uniforms from ``stream``;
    ``u_mode="stratified"`` uses the deterministic grid u_i = i/N, under
    which (when every N_l divides N) the ensemble mean reproduces the
    multilevel mean exactly.
    """
    if alpha < 1:
        raise StructureError(f"alpha must be >= 1, got {alpha}")
    sh = SortedHierarchy.from_hierarchy(h)
    n = alpha * sh.base_size
    if u_mode == "random":
        if stream is None:
            raise ValueError("random u_mode needs a stream key")
        u = uniform(stream, n)
    elif u_mode == "stratified":
        u = np.arange(1, n + 1, dtype=np.float64) / n
    else:
        raise ValueError(f"u_mode must be 'random' or 'stratified', got {u_mode!r}")
    values = _kernels.forecast_values(sh.level0, sh.pairs_fine, sh.pairs_coarse, u)
    return ForecastEnsemble(values=values, uniforms=u, alpha=alpha,
                            base_size=sh.base_size, source=h)


def forecast_mean(fe: ForecastEnsemble) -> float:
    """Arithmetic mean of the combined ensemble."""
    if len(fe.values) == 0:
        raise EmptyEnsembleError("cannot average an empty forecast ensemble")
    return float(np.mean(fe.values))


def quantile_inversions(fe: ForecastEnsemble) -> int:
    """Count the local order violations of the combined quantile map.

    The per-pair corrections are not guaranteed monotone in u, so the
    realized values may dip as u grows.  Returns how many adjacent
    (by u) member pairs are out of order; no repair is attempted.
    """
    order = np.argsort(fe.uniforms, kind="stable")
    values = fe.values[order]
    return int(np.sum(values[1:] < values[:-1]))


def write_forecast_csv(fe: ForecastEnsemble, path) -> None:
    """Dump members as (index, u, value) rows; floats via repr, exact."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "u", "value"])
        for i, (u, v) in enumerate(zip(fe.uniforms, fe.values)):
            writer.writerow([i, repr(float(u)), repr(float(v))])


def read_forecast_csv(path) -> ForecastEnsemble:
    """Read back a forecast CSV.

    The file does not carry alpha, so the result is reconstructed with
    alpha = 1 and base_size = N; values and uniforms are exact.
    """
    uniforms = []
    values = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["index", "u", "value"]:
            raise FileFormatError(f"unexpected header {header}")
        for row_no, row in enumerate(reader, start=1):
            if len(row) != 3:
                raise FileFormatError("expected 3 columns", row=row_no)
            try:
                uniforms.append(float(row[1]))
                values.append(float(row[2]))
            except ValueError as exc:
                raise FileFormatError(str(exc), row=row_no) from None
    if not values:
        raise EmptyEnsembleError(f"no forecast members in {path}")
    return ForecastEnsemble(values=np.array(values), uniforms=np.array(uniforms),
                            alpha=1, base_size=len(values))
