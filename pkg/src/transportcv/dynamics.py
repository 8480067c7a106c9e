"""Drift/forcing models, observables, the Euler-Maruyama step, and drift-contraction machinery.

The dynamics simulated everywhere in this package are overdamped Langevin chains

    x' = x + dt * (b(x) + eta * F(x)) + sqrt(2*dt/beta) * g,      g ~ N(0, Id),

where ``b`` is the model drift (``-grad U`` for the built-in potentials) and ``F``
is a non-gradient forcing of strength ``eta``. Models, forcings and observables
carry both a plain-numpy evaluator (the reference surface used by tests) and a
numba-compiled in-place kernel consumed by the fast trajectory engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from numba import njit

from .errors import BlowUpError, ParameterError, UnsupportedModelError

__all__ = [
    "ModelConstants",
    "ModelSpec",
    "SimParams",
    "Forcing",
    "Observable",
    "make_harmonic",
    "make_cosine_well",
    "make_lj_cluster",
    "make_model",
    "make_forcing",
    "make_observable",
    "zero_forcing",
    "linear_shear",
    "sinusoidal_shear",
    "lj_shear",
    "coordinate_covariance",
    "shear_mobility",
    "cluster_tilt",
    "em_step",
    "contraction_envelope",
    "max_time_step",
    "check_drift_control",
    "grad_check",
]


# ---------------------------------------------------------------------------
# parameter records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelConstants:
    """Regularity constants of a drift/forcing pair.

    m is the contraction rate outside a ball of radius M, L_b / L_F are
    Lipschitz constants, F_sup a uniform bound on the forcing. Only models
    for which these are actually known carry them; operations that need a
    missing constant fail fast with ParameterError rather than estimate it.
    """

    m: float
    M: float
    L_b: float
    L_F: Optional[float] = None
    F_sup: Optional[float] = None

    def __post_init__(self):
        if not self.m > 0:
            raise ParameterError(f"contraction rate m must be > 0, got {self.m}")
        if self.M < 0:
            raise ParameterError(f"contraction radius M must be >= 0, got {self.M}")
        if not self.L_b > 0:
            raise ParameterError(f"Lipschitz constant L_b must be > 0, got {self.L_b}")
        if self.m > self.L_b:
            # Cauchy-Schwarz forces the contraction rate below the Lipschitz
            # constant; larger values make the envelope ill-posed
            raise ParameterError(f"m={self.m} cannot exceed L_b={self.L_b}")
        if self.L_F is not None and self.L_F < 0:
            raise ParameterError(f"Lipschitz constant L_F must be >= 0, got {self.L_F}")
        if self.F_sup is not None and self.F_sup < 0:
            raise ParameterError(f"forcing bound F_sup must be >= 0, got {self.F_sup}")


@dataclass(frozen=True)
class SimParams:
    """Simulation parameters: time step, inverse temperature, perturbation, lengths, seed."""

    dt: float
    beta: float
    eta: float
    n_steps: int
    n_burnin: int = 0
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError(f"dt must be > 0, got {self.dt}")
        if not self.beta > 0:
            raise ParameterError(f"beta must be > 0, got {self.beta}")
        if self.n_steps < 1:
            raise ParameterError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.n_burnin < 0:
            raise ParameterError(f"n_burnin must be >= 0, got {self.n_burnin}")

    @property
    def sigma(self) -> float:
        """Noise amplitude sqrt(2*dt/beta) of one Euler-Maruyama step."""
        return math.sqrt(2.0 * self.dt / self.beta)

    def with_eta(self, eta: float) -> "SimParams":
        return replace(self, eta=eta)


# ---------------------------------------------------------------------------
# forcings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Forcing:
    """A non-gradient forcing F: R^d -> R^d.

    ``fill`` is an in-place jitted kernel fill(x, out); ``eval`` allocates.
    ``lipschitz`` is L_F when known. ``sup_norm(dim)`` reports the uniform bound
    for a given dimension, or None when the forcing is unbounded.
    """

    name: str
    fill: Callable
    lipschitz: Optional[float] = None
    _sup: Optional[Callable[[int], Optional[float]]] = None
    required_dim: Optional[int] = None
    any_dim: bool = False

    def eval(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        out = np.empty_like(x)
        self.fill(x, out)
        return out

    def sup_norm(self, dim: int) -> Optional[float]:
        return self._sup(dim) if self._sup is not None else None

    def check_dim(self, dim: int) -> None:
        if self.any_dim:
            return
        if self.required_dim is not None and dim != self.required_dim:
            raise ParameterError(
                f"forcing '{self.name}' requires dimension {self.required_dim}, model has {dim}"
            )
        if self.required_dim is None and dim % 2 != 0:
            raise ParameterError(f"forcing '{self.name}' requires an even dimension, got {dim}")


@lru_cache(maxsize=None)
def _zero_fill():
    @njit(cache=False, error_model="numpy")
    def fill(x, out):
        for i in range(x.shape[0]):
            out[i] = 0.0

    return fill


def zero_forcing() -> Forcing:
    """The trivial forcing F = 0 (used when a model is run unperturbed)."""
    return Forcing("none", _zero_fill(), lipschitz=0.0, _sup=lambda dim: 0.0, any_dim=True)


@lru_cache(maxsize=None)
def _linear_shear_fill():
    @njit(cache=False, error_model="numpy")
    def fill(x, out):
        out[0] = x[1]
        out[1] = 0.0

    return fill


def linear_shear() -> Forcing:
    """Linear shear F(x) = (x2, 0) on R^2.

    Used raw, without the compactly supported truncation that would make it
    bounded; the truncation has no effect at the scales simulated here, so
    sup_norm reports None (unknown/unbounded).
    """
    return Forcing("linear_shear", _linear_shear_fill(), lipschitz=1.0, required_dim=2)


@lru_cache(maxsize=None)
def _sinusoidal_shear_fill():
    @njit(cache=False, error_model="numpy")
    def fill(x, out):
        out[0] = math.sin(x[1])
        out[1] = 0.0

    return fill


def sinusoidal_shear() -> Forcing:
    """Sinusoidal shear F(x) = (sin x2, 0) on R^2; bounded by 1 with L_F = 1."""
    return Forcing(
        "sinusoidal_shear", _sinusoidal_shear_fill(), lipschitz=1.0, _sup=lambda dim: 1.0, required_dim=2
    )


@lru_cache(maxsize=None)
def _lj_shear_fill(L: float):
    @njit(cache=False, error_model="numpy")
    def fill(x, out):
        n = x.shape[0] // 2
        for k in range(n):
            out[2 * k] = math.sin(math.pi * x[2 * k + 1] / L)
            out[2 * k + 1] = 0.0

    return fill


def lj_shear(L: float) -> Forcing:
    """Per-particle shear on a planar cluster: the x1 component of particle k is
    sin(pi * x2^k / L), the x2 component is 0. Bounded by sqrt(n_particles)."""
    if not L > 0:
        raise ParameterError(f"lj_shear needs L > 0, got {L}")
    return Forcing(
        "lj_shear",
        _lj_shear_fill(float(L)),
        lipschitz=math.pi / L,
        _sup=lambda dim: math.sqrt(dim // 2),
    )


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    """A drift model, optionally with its potential and regularity constants.

    ``drift_fill`` is the jitted in-place kernel used by the fast engine;
    ``drift`` allocates and validates finiteness. ``potential`` is present for
    the built-in -grad U models and enables grad_check and the mobility
    observable. ``forcing`` defaults to the zero forcing and is attached with
    :meth:`with_forcing`.
    """

    name: str
    dim: int
    drift_fill: Callable
    potential: Optional[Callable[[np.ndarray], float]] = None
    constants: Optional[ModelConstants] = None
    forcing: Forcing = field(default_factory=zero_forcing)
    x0: Optional[np.ndarray] = None

    def drift(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ParameterError(f"state has shape {x.shape}, model '{self.name}' has dim {self.dim}")
        out = np.empty_like(x)
        self.drift_fill(x, out)
        if not np.all(np.isfinite(out)):
            raise BlowUpError(f"non-finite drift for model '{self.name}'", state=x)
        return out

    def with_forcing(self, forcing: Forcing) -> "ModelSpec":
        """Attach a forcing, merging its constants (L_F, F_sup) into the record."""
        forcing.check_dim(self.dim)
        constants = self.constants
        if constants is not None:
            constants = replace(
                constants, L_F=forcing.lipschitz, F_sup=forcing.sup_norm(self.dim)
            )
        return replace(self, forcing=forcing, constants=constants)

    def default_start(self) -> np.ndarray:
        if self.x0 is not None:
            return self.x0.copy()
        return np.zeros(self.dim)


@lru_cache(maxsize=None)
def _harmonic_fill():
    @njit(cache=False, error_model="numpy")
    def fill(x, out):
        for i in range(x.shape[0]):
            out[i] = -x[i]

    return fill


def make_harmonic() -> ModelSpec:
    """Two-dimensional harmonic model: U(x) = |x|^2 / 2, drift b(x) = -x.

    Globally contractive with rate 1, so the constants record is exact:
    m = 1, M = 0, L_b = 1.
    """

    def potential(x):
        x = np.asarray(x, dtype=np.float64)
        return 0.5 * float(x @ x)

    return ModelSpec(
        name="harmonic",
        dim=2,
        drift_fill=_harmonic_fill(),
        potential=potential,
        constants=ModelConstants(m=1.0, M=0.0, L_b=1.0),
    )


@lru_cache(maxsize=None)
def _cosine_well_fill(L: float):
    two_pi_over_L = 2.0 * math.pi / L

    @njit(cache=False, error_model="numpy")
    def fill(x, out):
        if max(abs(x[0]), abs(x[1])) < L:
            s0 = math.sin(two_pi_over_L * x[0])
            s1 = math.sin(two_pi_over_L * x[1])
            c0 = 1.0 - math.cos(two_pi_over_L * x[0])
            c1 = 1.0 - math.cos(two_pi_over_L * x[1])
            out[0] = -two_pi_over_L * s0 * c1
            out[1] = -two_pi_over_L * c0 * s1
        else:
            for i in range(2):
                ex = abs(x[i]) - L
                out[i] = -ex if (ex > 0.0 and x[i] > 0.0) else (ex if ex > 0.0 else 0.0)

    return fill


def make_cosine_well(L: float) -> ModelSpec:
    """Non-convex 2-d model: a product of raised cosines inside the box
    [-L, L]^2 and a quadratic one-sided confinement outside.

    The potential is C^1 across the box boundary (both pieces and their
    gradients vanish there). No constants record: the at-infinity contraction
    constants are not stated for this model.
    """
    if not L > 0:
        raise ParameterError(f"make_cosine_well needs L > 0, got {L}")
    L = float(L)

    def potential(x):
        x = np.asarray(x, dtype=np.float64)
        if np.max(np.abs(x)) < L:
            return float(
                (1.0 - math.cos(2.0 * math.pi * x[0] / L))
                * (1.0 - math.cos(2.0 * math.pi * x[1] / L))
            )
        ex = np.maximum(0.0, np.abs(x) - L)
        return 0.5 * float(ex @ ex)

    return ModelSpec(name="cosine_well", dim=2, drift_fill=_cosine_well_fill(L), potential=potential)


@lru_cache(maxsize=None)
def _lj_fill(n: int, alpha: float, L: float, epsilon: float, sigma6: float):
    @njit(cache=False, error_model="numpy")
    def fill(x, out):
        for i in range(2 * n):
            out[i] = 0.0
        for i in range(n):
            xi0 = x[2 * i]
            xi1 = x[2 * i + 1]
            # pair with the anchor fixed at the origin
            r2 = xi0 * xi0 + xi1 * xi1
            ir2 = 1.0 / r2
            s6 = sigma6 * ir2 * ir2 * ir2
            coef = 24.0 * epsilon * (2.0 * s6 * s6 - s6) * ir2
            out[2 * i] += coef * xi0
            out[2 * i + 1] += coef * xi1
            for j in range(i + 1, n):
                dx = xi0 - x[2 * j]
                dy = xi1 - x[2 * j + 1]
                r2 = dx * dx + dy * dy
                ir2 = 1.0 / r2
                s6 = sigma6 * ir2 * ir2 * ir2
                coef = 24.0 * epsilon * (2.0 * s6 * s6 - s6) * ir2
                out[2 * i] += coef * dx
                out[2 * i + 1] += coef * dy
                out[2 * j] -= coef * dx
                out[2 * j + 1] -= coef * dy
        for i in range(n):
            for c in range(2):
                v = x[2 * i + c]
                ex = abs(v) - L
                if ex > 0.0:
                    out[2 * i + c] -= alpha * ex if v > 0.0 else -alpha * ex

    return fill


def _triangular_sites(n: int) -> np.ndarray:
    """The n triangular-lattice sites (spacing 1) nearest the origin, origin excluded."""
    a1 = np.array([1.0, 0.0])
    a2 = np.array([0.5, 0.5 * math.sqrt(3.0)])
    span = int(math.ceil(math.sqrt(n))) + 2
    sites = []
    for i in range(-span, span + 1):
        for j in range(-span, span + 1):
            if i == 0 and j == 0:
                continue
            p = i * a1 + j * a2
            sites.append((round(float(p @ p), 9), float(p[0]), float(p[1])))
    sites.sort()
    return np.array([(sx, sy) for _, sx, sy in sites[:n]])


def make_lj_cluster(
    n_particles: int, alpha: float = 1.0, L: float = 5.0, epsilon: float = 1.0, sigma: float = 2.0 ** (-1.0 / 6.0)
) -> ModelSpec:
    """Planar Lennard-Jones cluster of ``n_particles`` free particles plus an
    anchor fixed at the origin, confined to the box [-L, L]^2 by a one-sided
    quadratic wall of strength alpha.

    The pair interaction is the raw 12-6 potential; no distance capping or
    smoothing is applied, so coincident particles or an excessive time step
    surface as blow-up errors. No constants record is carried (the contraction
    constants of this potential are not known).
    """
    if n_particles < 1:
        raise ParameterError(f"n_particles must be >= 1, got {n_particles}")
    if alpha < 0 or not L > 0 or not epsilon > 0 or not sigma > 0:
        raise ParameterError("lj_cluster needs alpha >= 0, L > 0, epsilon > 0, sigma > 0")
    n = int(n_particles)
    alpha, L, epsilon, sigma = float(alpha), float(L), float(epsilon), float(sigma)
    sigma6 = sigma**6

    def potential(x):
        x = np.asarray(x, dtype=np.float64).reshape(n, 2)
        pts = np.vstack([np.zeros((1, 2)), x])  # anchor first
        u = 0.0
        for i in range(n + 1):
            d = pts[i + 1 :] - pts[i]
            r2 = np.sum(d * d, axis=1)
            with np.errstate(divide="ignore"):
                s6 = sigma6 / (r2 * r2 * r2)
            u += float(np.sum(4.0 * epsilon * (s6 * s6 - s6)))
        ex = np.maximum(0.0, np.abs(x) - L)
        u += 0.5 * alpha * float(np.sum(ex * ex))
        return u

    return ModelSpec(
        name="lj_cluster",
        dim=2 * n,
        drift_fill=_lj_fill(n, alpha, L, epsilon, sigma6),
        potential=potential,
        x0=_triangular_sites(n).reshape(-1),
    )


_MODEL_KEYS = {"harmonic", "cosine_well", "lj_cluster"}


def make_model(key: str, **params) -> ModelSpec:
    """Build a model from its string key ('harmonic', 'cosine_well', 'lj_cluster')."""
    if key == "harmonic":
        if params:
            raise ParameterError(f"harmonic takes no parameters, got {sorted(params)}")
        return make_harmonic()
    if key == "cosine_well":
        return make_cosine_well(**params)
    if key == "lj_cluster":
        return make_lj_cluster(**params)
    raise ParameterError(f"unknown model key {key!r}; expected one of {sorted(_MODEL_KEYS)}")


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Observable:
    """A named scalar response function R: R^d -> R with mean zero under the
    reference stationary measure of the models it is used with.

    ``kernel`` is the jitted form obs(x, bx) -> float used by the fast engine;
    it receives the drift bx = b(x) already evaluated at x so that
    gradient-based observables cost no extra force evaluation.
    """

    name: str
    params: dict
    eval: Optional[Callable[[np.ndarray], float]] = None
    kernel: Optional[Callable] = None
    _binder: Optional[Callable[["ModelSpec"], tuple]] = None

    def bind(self, model: ModelSpec) -> "Observable":
        """Resolve any model dependence (e.g. the potential gradient) and
        validate dimensions; returns an observable with eval and kernel set."""
        if self.name == "cov" and model.dim != 2:
            raise ParameterError("the coordinate-covariance observable needs a 2-d model")
        if model.dim % 2 != 0:
            raise ParameterError(f"observable '{self.name}' needs an even dimension, got {model.dim}")
        if self._binder is None:
            return self
        ev, k = self._binder(model)
        return replace(self, eval=ev, kernel=k, _binder=None)


@lru_cache(maxsize=None)
def _cov_kernel():
    @njit(cache=False, error_model="numpy")
    def obs(x, bx):
        return x[0] * x[1]

    return obs


def coordinate_covariance() -> Observable:
    """R(x) = x1 * x2, the covariance response of the 2-d shear experiments."""
    return Observable("cov", {}, eval=lambda x: float(x[0] * x[1]), kernel=_cov_kernel())


@lru_cache(maxsize=None)
def _tilt_kernel(eps: float):
    @njit(cache=False, error_model="numpy")
    def obs(x, bx):
        n = x.shape[0] // 2
        acc = 0.0
        for k in range(n):
            acc += math.tanh(x[2 * k] / eps) * math.tanh(x[2 * k + 1] / eps)
        return acc

    return obs


def cluster_tilt(eps: float = 0.2) -> Observable:
    """Smoothed cluster tilt: sum over particles of tanh(x1/eps) * tanh(x2/eps).

    A regularization of the sign-product count of particles per quadrant;
    eps defaults to 1/5.
    """
    if not eps > 0:
        raise ParameterError(f"cluster_tilt needs eps > 0, got {eps}")
    eps = float(eps)

    def ev(x):
        x = np.asarray(x, dtype=np.float64).reshape(-1, 2)
        return float(np.sum(np.tanh(x[:, 0] / eps) * np.tanh(x[:, 1] / eps)))

    return Observable("tilt", {"eps": eps}, eval=ev, kernel=_tilt_kernel(eps))


@lru_cache(maxsize=None)
def _mobility_kernel(L: float):
    @njit(cache=False, error_model="numpy")
    def obs(x, bx):
        n = x.shape[0] // 2
        acc = 0.0
        for k in range(n):
            # gradient of the potential is -bx for -grad U drifts
            acc += math.sin(math.pi * x[2 * k + 1] / L) * (-bx[2 * k])
        return acc

    return obs


def shear_mobility(L: float) -> Observable:
    """Mobility response of a shear forcing: sum_k sin(pi*x2^k/L) * dU/dx1^k.

    Only defined for potential-form models (the gradient is taken as minus the
    drift); binding to a drift-only model raises UnsupportedModelError.
    """
    if not L > 0:
        raise ParameterError(f"shear_mobility needs L > 0, got {L}")
    L = float(L)

    def binder(model: ModelSpec):
        if model.potential is None:
            raise UnsupportedModelError(
                "the mobility observable needs a potential-form model (drift = -grad U)"
            )

        def ev(x):
            x = np.asarray(x, dtype=np.float64)
            grad = -model.drift(x)
            x2 = x.reshape(-1, 2)[:, 1]
            return float(np.sum(np.sin(np.pi * x2 / L) * grad.reshape(-1, 2)[:, 0]))

        return ev, _mobility_kernel(L)

    return Observable("mobility", {"L": L}, _binder=binder)


def make_observable(key: str, **params) -> Observable:
    """Build an observable from its string key ('cov', 'mobility', 'tilt')."""
    if key == "cov":
        if params:
            raise ParameterError(f"cov takes no parameters, got {sorted(params)}")
        return coordinate_covariance()
    if key == "mobility":
        return shear_mobility(**params)
    if key == "tilt":
        return cluster_tilt(**params)
    raise ParameterError(f"unknown observable key {key!r}; expected 'cov', 'mobility' or 'tilt'")


def make_forcing(key: str, **params) -> Forcing:
    """Build a forcing from its string key."""
    if key == "none":
        if params:
            raise ParameterError(f"'none' forcing takes no parameters, got {sorted(params)}")
        return zero_forcing()
    if key == "linear_shear":
        if params:
            raise ParameterError(f"linear_shear takes no parameters, got {sorted(params)}")
        return linear_shear()
    if key == "sinusoidal_shear":
        if params:
            raise ParameterError(f"sinusoidal_shear takes no parameters, got {sorted(params)}")
        return sinusoidal_shear()
    if key == "lj_shear":
        return lj_shear(**params)
    raise ParameterError(
        f"unknown forcing key {key!r}; expected 'none', 'linear_shear', 'sinusoidal_shear' or 'lj_shear'"
    )


# ---------------------------------------------------------------------------
# the Euler-Maruyama step
# ---------------------------------------------------------------------------


def em_step(x: np.ndarray, model: ModelSpec, p: SimParams, g: np.ndarray) -> np.ndarray:
    """One Euler-Maruyama step x + dt*(b(x) + eta*F(x)) + sqrt(2*dt/beta)*g.

    Deterministic given (x, g, p); raises BlowUpError when the result is not
    finite (a Lennard-Jones near-collision or an inadmissible time step).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    g = np.ascontiguousarray(g, dtype=np.float64)
    if x.shape != (model.dim,) or g.shape != (model.dim,):
        raise ParameterError(
            f"state/noise shapes {x.shape}/{g.shape} do not match model dim {model.dim}"
        )
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        b = np.empty_like(x)
        model.drift_fill(x, b)
        f = np.empty_like(x)
        model.forcing.fill(x, f)
        out = x + p.dt * (b + p.eta * f) + p.sigma * g
    if not np.all(np.isfinite(out)):
        raise BlowUpError(f"non-finite state after EM step of model '{model.name}'", state=x)
    return out


# ---------------------------------------------------------------------------
# drift contraction control
# ---------------------------------------------------------------------------


def max_time_step(constants: ModelConstants, eta_star: float) -> float:
    """Largest admissible time step min{1/m, m / (2 (L_b + eta_star*L_F)^2)}."""
    lip = _perturbed_lipschitz(constants, eta_star)
    return min(1.0 / constants.m, constants.m / (2.0 * lip * lip))


def _perturbed_lipschitz(constants: ModelConstants, eta_star: float) -> float:
    if eta_star < 0:
        raise ParameterError(f"eta_star must be >= 0, got {eta_star}")
    if eta_star > 0 and constants.L_F is None:
        raise ParameterError("constants record lacks L_F, required when eta_star > 0")
    return constants.L_b + eta_star * (constants.L_F or 0.0)


def _effective_radius(constants: ModelConstants, eta_star: float) -> float:
    """Radius below which only Lipschitz growth is guaranteed: max{M, 4*eta_star*F_sup/m}."""
    if eta_star > 0 and constants.F_sup is None:
        raise ParameterError("constants record lacks F_sup, required when eta_star > 0")
    return max(constants.M, 4.0 * eta_star * (constants.F_sup or 0.0) / constants.m)


def contraction_envelope(r: float, eta_star: float, dt: float, constants: Optional[ModelConstants]) -> float:
    """Piecewise-affine bound on the one-step deterministic displacement as a
    function of the pair distance r: Lipschitz growth up to the effective
    radius, contraction at rate 1 - dt*m/4 beyond it. Continuous at the knee.
    """
    if constants is None:
        raise ParameterError("this model carries no constants record")
    if r < 0:
        raise ParameterError(f"r must be >= 0, got {r}")
    lip = _perturbed_lipschitz(constants, eta_star)
    if not 0 < dt < constants.m / (2.0 * lip * lip):
        raise ParameterError(
            f"dt={dt} outside the admissible range (0, {constants.m / (2.0 * lip * lip)})"
        )
    knee = _effective_radius(constants, eta_star)
    grow = 1.0 + lip * dt
    if r <= knee:
        return grow * r
    return grow * knee + (1.0 - dt * constants.m / 4.0) * (r - knee)


def check_drift_control(
    x: np.ndarray, y: np.ndarray, model: ModelSpec, eta: float, eta_star: float, dt: float
) -> bool:
    """True iff the one-step deterministic map keeps |x - y| inside the
    contraction envelope: |x - y + dt*(b(x)-b(y) + eta*(F(x)-F(y)))| <= envelope(|x-y|)."""
    if abs(eta) > eta_star:
        raise ParameterError(f"|eta|={abs(eta)} exceeds eta_star={eta_star}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    disp = x - y + dt * (
        model.drift(x) - model.drift(y) + eta * (model.forcing.eval(x) - model.forcing.eval(y))
    )
    lhs = float(np.linalg.norm(disp))
    return lhs <= contraction_envelope(float(np.linalg.norm(x - y)), eta_star, dt, model.constants)


# ---------------------------------------------------------------------------
# gradient validation
# ---------------------------------------------------------------------------


def grad_check(model: ModelSpec, x: np.ndarray, h: float) -> float:
    """Worst componentwise relative error between the central finite difference
    of the potential and the analytic drift (-grad U)."""
    if model.potential is None:
        raise UnsupportedModelError(f"model '{model.name}' exposes no potential")
    if not h > 0:
        raise ParameterError(f"h must be > 0, got {h}")
    x = np.asarray(x, dtype=np.float64)
    analytic = -model.drift(x)
    worst = 0.0
    for i in range(model.dim):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        fd = (model.potential(xp) - model.potential(xm)) / (2.0 * h)
        worst = max(worst, abs(fd - analytic[i]) / max(1.0, abs(analytic[i])))
    return worst
