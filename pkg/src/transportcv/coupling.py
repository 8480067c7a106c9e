"""One-step coupling kernels: synchronous, sticky (maximal/reflection), hybrid,
and the one-dimensional bounding chain that dominates the coupling distance.

All functions here are pure, single-step, numpy reference implementations of
the update rules; the trajectory engine re-implements the same arithmetic in
compiled form and is tested against these.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import ModelSpec, SimParams, contraction_envelope, em_step, max_time_step
from .errors import BlowUpError, ParameterError

__all__ = [
    "CoupledState",
    "CouplingNoise",
    "StickyStepReport",
    "mean_gap",
    "meeting_probability",
    "meeting_probability_1d",
    "reflect",
    "sticky_step",
    "sync_step",
    "hybrid_step",
    "bounding_chain_step",
]

log = logging.getLogger(__name__)

MERGED = "merged"
REFLECTED = "reflected"


@dataclass(frozen=True)
class CoupledState:
    """A coupled pair: x follows the perturbed chain, y the reference chain.

    ``met`` is true iff x and y are exactly equal componentwise (the merged
    branch copies states bitwise, so no epsilon-ball comparison is involved).
    """

    x: np.ndarray
    y: np.ndarray
    met: bool

    def __post_init__(self):
        object.__setattr__(self, "x", np.ascontiguousarray(self.x, dtype=np.float64))
        object.__setattr__(self, "y", np.ascontiguousarray(self.y, dtype=np.float64))
        if self.x.shape != self.y.shape:
            raise ParameterError(f"x and y have different shapes {self.x.shape} vs {self.y.shape}")
        if self.met != bool(np.array_equal(self.x, self.y)):
            raise ParameterError("met flag inconsistent with exact equality of x and y")

    @classmethod
    def from_pair(cls, x: np.ndarray, y: np.ndarray) -> "CoupledState":
        x = np.ascontiguousarray(x, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.float64)
        return cls(x, y, bool(np.array_equal(x, y)))


@dataclass(frozen=True)
class CouplingNoise:
    """One step's worth of driving noise: a standard Gaussian vector and an
    independent uniform draw deciding the merge branch."""

    g: np.ndarray
    u: float

    def __post_init__(self):
        object.__setattr__(self, "g", np.ascontiguousarray(self.g, dtype=np.float64))
        if not 0.0 <= self.u <= 1.0:
            raise ParameterError(f"u must lie in [0, 1], got {self.u}")


@dataclass(frozen=True)
class StickyStepReport:
    """Outcome of one sticky (or hybrid) step: the next state, the meeting
    probability used, which branch fired, and the reflection axis."""

    next: CoupledState
    p: float
    branch: str
    e: np.ndarray


def mean_gap(x: np.ndarray, y: np.ndarray, model: ModelSpec, p: SimParams):
    """Difference of the one-step transition means, mu_y - mu_x, and its
    normalization (the reflection axis; the zero vector when the gap is zero).

    mu_x includes the forcing term eta*F(x); mu_y is the unforced mean, so the
    gap is y - x + dt*(b(y) - b(x) - eta*F(x)).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    gap = y - x + p.dt * (model.drift(y) - model.drift(x) - p.eta * model.forcing.eval(x))
    norm = float(np.linalg.norm(gap))
    if norm == 0.0:
        return gap, np.zeros_like(gap)
    return gap, gap / norm


def meeting_probability(x, y, g, model: ModelSpec, p: SimParams) -> float:
    """Probability that the sticky coupling glues the chains in this step.

    This is min{1, ratio of the reference-kernel density to the perturbed-kernel
    density at the proposed merged point}, evaluated in log space so the result
    is finite (never NaN) for any finite inputs:

        log p = min{0, -(|g - a|^2 - |g|^2)/2},    a = sqrt(beta/(2 dt)) * gap.

    Averaged over g this saturates the total-variation coupling bound, which is
    what makes the coupling maximal.
    """
    g = np.ascontiguousarray(g, dtype=np.float64)
    gap, _ = mean_gap(x, y, model, p)
    a = math.sqrt(p.beta / (2.0 * p.dt)) * gap
    log_ratio = -0.5 * (float(np.sum((g - a) ** 2)) - float(np.sum(g**2)))
    return math.exp(min(0.0, log_ratio))


def meeting_probability_1d(x, y, g, model: ModelSpec, p: SimParams) -> float:
    """The same meeting probability computed through its one-dimensional form:
    the d-dimensional density ratio collapses onto the reflection axis,

        log p = min{0, -((A - s)^2 - s^2)/2},  A = sqrt(beta/(2 dt)) * |gap|,
                                               s = <axis, g>.

    Kept as an independent computation so the two routes can be checked against
    each other.
    """
    g = np.ascontiguousarray(g, dtype=np.float64)
    gap, unit = mean_gap(x, y, model, p)
    big_a = math.sqrt(p.beta / (2.0 * p.dt)) * float(np.linalg.norm(gap))
    s = float(unit @ g)
    log_ratio = -0.5 * ((big_a - s) ** 2 - s**2)
    return math.exp(min(0.0, log_ratio))


def reflect(g: np.ndarray, e: np.ndarray) -> np.ndarray:
    """Householder reflection (Id - 2 e e^T) g; the identity when e is zero."""
    g = np.ascontiguousarray(g, dtype=np.float64)
    e = np.ascontiguousarray(e, dtype=np.float64)
    norm = float(np.linalg.norm(e))
    if norm == 0.0:
        return g.copy()
    if abs(norm - 1.0) > 1e-12:
        raise ParameterError(f"reflection axis must be a unit (or zero) vector, |e|={norm}")
    return g - 2.0 * float(e @ g) * e


def sticky_step(s: CoupledState, n: CouplingNoise, model: ModelSpec, p: SimParams) -> StickyStepReport:
    """One step of the discrete sticky coupling.

    x always moves by the perturbed Euler-Maruyama update. With the meeting
    probability, y is set to the new x (merged); otherwise y moves by the
    unforced update driven by the Gaussian reflected across the axis separating
    the one-step means (reflected).
    """
    x_next = em_step(s.x, model, p, n.g)
    gap, unit = mean_gap(s.x, s.y, model, p)
    p_meet = meeting_probability(s.x, s.y, n.g, model, p)
    if n.u <= p_meet:
        y_next = x_next.copy()
        branch = MERGED
    else:
        y_next = s.y + p.dt * model.drift(s.y) + p.sigma * reflect(n.g, unit)
        branch = REFLECTED
        if not np.all(np.isfinite(y_next)):
            raise BlowUpError(f"non-finite reference state in sticky step of '{model.name}'", state=s.y)
    return StickyStepReport(CoupledState.from_pair(x_next, y_next), p_meet, branch, unit)


def sync_step(s: CoupledState, g: np.ndarray, model: ModelSpec, p: SimParams) -> CoupledState:
    """One synchronous step: both chains move with the identical Gaussian, x
    under the perturbed dynamics and y under the reference dynamics."""
    x_next = em_step(s.x, model, p, g)
    y_next = em_step(s.y, model, p.with_eta(0.0), g)
    return CoupledState.from_pair(x_next, y_next)


def hybrid_step(s: CoupledState, n: CouplingNoise, model: ModelSpec, p: SimParams) -> StickyStepReport:
    """One hybrid step: synchronous wherever the deterministic drift is locally
    contractive for the current pair, sticky otherwise.

    The contractivity test is <x - y, b(x) + eta*F(x) - b(y)> < 0 (a pair that
    has met counts as contractive); an inner product of exactly zero routes to
    the sticky branch. The report's p is 1 when the synchronous branch lands
    x' = y' and 0 otherwise, so the branch/probability invariant is preserved
    without consuming the uniform draw.
    """
    if s.met:
        contractive = True
    else:
        diff = s.x - s.y
        drift_gap = model.drift(s.x) + p.eta * model.forcing.eval(s.x) - model.drift(s.y)
        contractive = float(diff @ drift_gap) < 0.0
    if contractive:
        nxt = sync_step(s, n.g, model, p)
        return StickyStepReport(nxt, 1.0 if nxt.met else 0.0, MERGED if nxt.met else REFLECTED, np.zeros(model.dim))
    return sticky_step(s, n, model, p)


def _log_density_ratio_1d(shift: float, g: float) -> float:
    """log of phi(shift - g) / phi(g) for one-dimensional standard Gaussians."""
    return -0.5 * ((shift - g) ** 2 - g**2)


def bounding_chain_step(
    w: float,
    gcal: float,
    u: float,
    model: ModelSpec,
    p: SimParams,
    eta_star: Optional[float] = None,
) -> float:
    """One step of the scalar chain that dominates the coupling distance.

    From a distance bound w, the candidate next bound is
    a = envelope(w) + |eta| * F_sup * dt. With probability
    min{1, phi1(a*sqrt(beta/(2 dt)) - gcal)/phi1(gcal)} the chain drops to 0
    (the coupled pair would have merged); otherwise it moves to
    a - 2*sqrt(2 dt/beta)*gcal, floored at zero since the chain lives on [0, inf).
    """
    c = model.constants
    if c is None or c.F_sup is None:
        raise ParameterError("bounding chain needs a constants record with m and F_sup")
    if w < 0:
        raise ParameterError(f"w must be >= 0, got {w}")
    if not 0.0 <= u <= 1.0:
        raise ParameterError(f"u must lie in [0, 1], got {u}")
    if eta_star is None:
        eta_star = abs(p.eta)
    if not 0 < p.dt < max_time_step(c, eta_star):
        raise ParameterError(
            f"dt={p.dt} outside the admissible range (0, {max_time_step(c, eta_star)})"
        )
    a = contraction_envelope(w, 0.0, p.dt, c) + abs(p.eta) * c.F_sup * p.dt
    shift = a * math.sqrt(p.beta / (2.0 * p.dt))
    p_zero = math.exp(min(0.0, _log_density_ratio_1d(shift, gcal)))
    if u < p_zero:
        return 0.0
    w_next = a - 2.0 * p.sigma * gcal
    if w_next < 0.0:
        log.debug("bounding chain clamped a negative candidate %g to 0", w_next)
        return 0.0
    return w_next
