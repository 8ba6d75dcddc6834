"""Ornstein-Uhlenbeck model and coupled Euler-Maruyama integrators.

The model is dX = alpha*(mu - X) dt + c dW.  The paper-facing parameter
is sigma2; how it maps to the noise coefficient c is set by the
convention switch on :class:`OuParams`:

* ``"stationary"`` (default): c = sqrt(sigma2), so the stationary law is
  N(mu, sigma2 / (2*alpha)).  This is the reading the experiment's
  analytic target distributions are built on.
* ``"literal"``: c = sigma2, matching the drift-diffusion form written
  with a sigma^2 coefficient on dW; stationary variance is then
  sigma2^2 / (2*alpha).

Level pairs are positively coupled: the coarse path consumes, in order,
the sums of the M fine Brownian increments spanning each coarse step.
"""

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import _kernels
from .errors import GridAlignmentError, InvalidStepError
from .streams import NormalStream, StreamKey


@dataclass(frozen=True)
class Gaussian:
    """A univariate normal law, used for analytic references."""

    mean: float
    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError(f"variance must be >= 0, got {self.variance}")


@dataclass(frozen=True)
class OuParams:
    """Mean-reverting model parameters.

    alpha: mean-reversion rate (1/time), > 0.
    mu: long-run mean (state units).
    sigma2: diffusion parameter (state^2/time), >= 0.
    convention: how sigma2 maps to the noise coefficient (see module docs).
    """

    alpha: float
    mu: float
    sigma2: float
    convention: Literal["stationary", "literal"] = "stationary"

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.sigma2 < 0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")
        if self.convention not in ("stationary", "literal"):
            raise ValueError(f"unknown convention {self.convention!r}")

    @property
    def noise_scale(self) -> float:
        """Coefficient multiplying dW in the SDE."""
        if self.convention == "stationary":
            return math.sqrt(self.sigma2)
        return self.sigma2

    def stationary_law(self) -> Gaussian:
        """Long-time law N(mu, noise_scale^2 / (2*alpha))."""
        return Gaussian(self.mu, self.noise_scale**2 / (2.0 * self.alpha))


@dataclass(frozen=True)
class LevelGrid:
    """Time grid of one resolution level: step = base_step * M^-level."""

    level: int
    step: float
    refinement: int = 2

    def __post_init__(self):
        if self.level < 0:
            raise ValueError(f"level must be >= 0, got {self.level}")
        if self.step <= 0:
            raise InvalidStepError(f"step must be > 0, got {self.step}")
        if self.refinement <= 1:
            raise ValueError(f"refinement must be > 1, got {self.refinement}")

    @classmethod
    def for_level(cls, level: int, base_step: float = 0.5, refinement: int = 2):
        return cls(level=level, step=base_step * refinement ** (-level), refinement=refinement)

    @property
    def coarse_step(self) -> float:
        """Step of the next-coarser level."""
        return self.step * self.refinement


@dataclass(frozen=True)
class CoupledPath:
    """Fine and coarse trajectories driven by the same Brownian increments.

    fine_states has one entry per fine step plus the initial state;
    coarse_states likewise at the coarse step.  Each coarse increment is
    the sum of the refinement-many fine increments it spans.
    """

    fine_states: np.ndarray
    coarse_states: np.ndarray
    stream: StreamKey
    grid: LevelGrid

    @property
    def terminal_fine(self) -> float:
        return float(self.fine_states[-1])

    @property
    def terminal_coarse(self) -> float:
        return float(self.coarse_states[-1])


def euler_maruyama_step(x: float, params: OuParams, h: float, dw: float) -> float:
    """One explicit step: x + alpha*(mu - x)*h + noise_scale*dw."""
    return (x + params.alpha * (params.mu - x) * h) + params.noise_scale * dw


def step_count(t_span, step: float) -> int:
    """Number of steps covering t_span; raises if not an integer fit."""
    t0, t1 = float(t_span[0]), float(t_span[1])
    span = t1 - t0
    if span <= 0:
        raise GridAlignmentError(f"t_span must have positive length, got {t_span}")
    n = round(span / step)
    if n < 1 or abs(n * step - span) > 1e-9 * max(1.0, abs(span)):
        raise GridAlignmentError(
            f"span {span} is not divisible by step {step}"
        )
    return n


def propagate_single(x0, params: OuParams, grid: LevelGrid, t_span, stream: StreamKey):
    """Euler-Maruyama trajectory at the grid's step over t_span.

    Returns the states at the grid points, initial state included, so
    entry k is the state at t_span[0] + k*grid.step.
    """
    n = step_count(t_span, grid.step)
    dw = math.sqrt(grid.step) * NormalStream(stream).take(n)
    return _kernels.ou_trajectory(
        float(x0), dw, params.alpha, params.mu, params.noise_scale, grid.step
    )


def propagate_coupled_pair(x0, params: OuParams, grid: LevelGrid, t_span,
                           stream: StreamKey) -> CoupledPath:
    """Coupled fine/coarse pair over t_span sharing one noise stream.

    The fine path advances at grid.step, the coarse at grid.coarse_step;
    t_span must be divisible by the coarse step.
    """
    if grid.level < 1:
        raise GridAlignmentError("coupled pairs need level >= 1")
    m = grid.refinement
    n_coarse = step_count(t_span, grid.coarse_step)
    n_fine = n_coarse * m
    dw = math.sqrt(grid.step) * NormalStream(stream).take(n_fine)
    fine, coarse = _kernels.ou_coupled_trajectory(
        float(x0), dw, params.alpha, params.mu, params.noise_scale, grid.step, m
    )
    return CoupledPath(fine_states=fine, coarse_states=coarse, stream=stream, grid=grid)
