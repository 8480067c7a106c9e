"""Invariant suites behind the CLI ``check`` command.

Each check returns a CheckResult; the fast suite covers formula-level
invariants (two-form equivalence, reflections, drift control), the full suite
adds the Monte Carlo closure, pathwise dominance, and marginal-identity runs.
All checks are deterministic for a given seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import engine
from .coupling import bounding_chain_step, meeting_probability, meeting_probability_1d, reflect
from .dynamics import (
    ModelConstants,
    ModelSpec,
    SimParams,
    contraction_envelope,
    make_harmonic,
    sinusoidal_shear,
)
from .errors import ParameterError
from .estimators import _reference_trajectory
from .oracles import em_kernel_means, gaussian_tv_isotropic

__all__ = ["CheckResult", "run_checks", "FAST_CHECKS", "FULL_CHECKS"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


@njit(cache=False)
def _rotating_sin_fill(x, out):
    d = x.shape[0]
    for i in range(d):
        out[i] = math.sin(x[(i + 1) % d])


def _any_dim_model(dim: int) -> ModelSpec:
    """Contractive test model in an arbitrary dimension with a bounded,
    Lipschitz forcing: b(x) = -x, F_i(x) = sin(x_{i+1 mod d})."""
    from . import dynamics
    from .dynamics import Forcing

    forcing = Forcing("rotating_sin", _rotating_sin_fill, lipschitz=1.0, _sup=lambda d: math.sqrt(d), any_dim=True)
    model = ModelSpec(
        name=f"check_d{dim}",
        dim=dim,
        drift_fill=dynamics._harmonic_fill(),
        constants=ModelConstants(m=1.0, M=0.0, L_b=1.0),
    )
    return model.with_forcing(forcing)


def check_meeting_equivalence(n_tuples: int = 10_000, dims=(1, 2, 5, 36), seed: int = 0, tol: float = 1e-10) -> CheckResult:
    """Both meeting-probability routes agree pointwise on random tuples."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    per_dim = max(1, n_tuples // len(dims))
    for dim in dims:
        model = _any_dim_model(dim)
        for _ in range(per_dim):
            p = SimParams(
                dt=float(rng.uniform(1e-4, 0.4)),
                beta=float(rng.uniform(0.25, 4.0)),
                eta=float(rng.uniform(-0.5, 0.5)),
                n_steps=1,
            )
            x = rng.normal(scale=2.0, size=dim)
            y = rng.normal(scale=2.0, size=dim)
            g = rng.standard_normal(dim)
            a = meeting_probability(x, y, g, model, p)
            b = meeting_probability_1d(x, y, g, model, p)
            worst = max(worst, abs(a - b))
    return CheckResult(
        "meeting-probability-equivalence",
        worst <= tol,
        f"worst |p_d - p_1d| = {worst:.3e} over {per_dim * len(dims)} tuples, dims {dims}",
    )


def check_meeting_probability_range(n: int = 2_000, seed: int = 1) -> CheckResult:
    """p in [0,1], never NaN, exactly 1 when the mean gap vanishes."""
    rng = np.random.default_rng(seed)
    model = _any_dim_model(3)
    ok = True
    for scale in (1.0, 1e3, 1e8):
        for _ in range(n // 3):
            p = SimParams(dt=float(rng.uniform(1e-5, 0.4)), beta=float(rng.uniform(0.1, 10)), eta=0.2, n_steps=1)
            x = rng.normal(scale=scale, size=3)
            y = rng.normal(scale=scale, size=3)
            g = rng.standard_normal(3)
            val = meeting_probability(x, y, g, model, p)
            if not (0.0 <= val <= 1.0) or math.isnan(val):
                ok = False
    # with eta = 0 and x = y the gap is exactly zero, so p must be exactly 1
    p = SimParams(dt=0.01, beta=1.0, eta=0.0, n_steps=1)
    x = rng.normal(size=3)
    met_val = meeting_probability(x, x.copy(), rng.standard_normal(3), model, p)
    ok = ok and met_val == 1.0
    return CheckResult("meeting-probability-range", ok, f"range respected, p(gap=0) = {met_val}")


def check_reflection(n: int = 10_000, seed: int = 2) -> CheckResult:
    """Reflection is an involutive isometry; the zero axis acts as identity."""
    rng = np.random.default_rng(seed)
    worst_inv = 0.0
    worst_iso = 0.0
    for _ in range(n):
        d = int(rng.integers(1, 8))
        g = rng.normal(scale=3.0, size=d)
        e = rng.normal(size=d)
        norm = np.linalg.norm(e)
        e = e / norm if norm > 0 else e
        r = reflect(g, e)
        worst_inv = max(worst_inv, float(np.max(np.abs(reflect(r, e) - g))))
        worst_iso = max(worst_iso, abs(float(np.linalg.norm(r)) - float(np.linalg.norm(g))))
    g = rng.normal(size=4)
    ident_ok = np.array_equal(reflect(g, np.zeros(4)), g)
    passed = worst_inv <= 1e-12 and worst_iso <= 1e-12 and ident_ok
    return CheckResult(
        "reflection-involution",
        passed,
        f"max involution error {worst_inv:.2e}, max isometry error {worst_iso:.2e}, zero-axis identity {ident_ok}",
    )


def check_drift_control_sweep(n_pairs: int = 100_000, seed: int = 3) -> CheckResult:
    """The one-step deterministic displacement never exceeds the contraction
    envelope (harmonic drift, with and without a bounded shear)."""
    rng = np.random.default_rng(seed)
    violations = 0
    for eta_star, with_forcing in ((0.0, False), (0.1, True)):
        c = ModelConstants(m=1.0, M=0.0, L_b=1.0, L_F=1.0 if with_forcing else 0.0, F_sup=1.0 if with_forcing else 0.0)
        n = n_pairs // 2
        dt = float(rng.uniform(1e-4, 0.9 * 1.0 / (2.0 * (1.0 + eta_star) ** 2)))
        x = rng.normal(scale=3.0, size=(n, 2))
        y = rng.normal(scale=3.0, size=(n, 2))
        eta = rng.uniform(-eta_star, eta_star, size=n) if with_forcing else np.zeros(n)
        diff = x - y
        disp = diff * (1.0 - dt)
        if with_forcing:
            fd = np.zeros_like(diff)
            fd[:, 0] = np.sin(x[:, 1]) - np.sin(y[:, 1])
            disp = disp + dt * eta[:, None] * fd
        lhs = np.linalg.norm(disp, axis=1)
        r = np.linalg.norm(diff, axis=1)
        knee = max(c.M, 4.0 * eta_star * (c.F_sup or 0.0) / c.m)
        grow = 1.0 + (c.L_b + eta_star * (c.L_F or 0.0)) * dt
        env = np.where(r <= knee, grow * r, grow * knee + (1.0 - dt / 4.0) * (r - knee))
        violations += int(np.sum(lhs > env))
    return CheckResult("drift-control", violations == 0, f"{violations} violations over {n_pairs} pairs")


def check_envelope_continuity(seed: int = 4) -> CheckResult:
    """The two-piece envelope is continuous at its knee, zero at zero, and
    nondecreasing on samples."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    mono_ok = True
    for _ in range(200):
        lb = float(rng.uniform(0.2, 3.0))
        c = ModelConstants(
            m=float(rng.uniform(0.1, 1.0)) * lb,
            M=float(rng.uniform(0.0, 2.0)),
            L_b=lb,
            L_F=float(rng.uniform(0.0, 2.0)),
            F_sup=float(rng.uniform(0.0, 2.0)),
        )
        eta_star = float(rng.uniform(0.0, 0.3))
        lip = c.L_b + eta_star * c.L_F
        dt = float(rng.uniform(1e-5, 0.9 * c.m / (2.0 * lip * lip)))
        knee = max(c.M, 4.0 * eta_star * c.F_sup / c.m)
        if contraction_envelope(0.0, eta_star, dt, c) != 0.0:
            mono_ok = False
        if knee > 0:
            lo = contraction_envelope(knee * (1 - 1e-9), eta_star, dt, c)
            hi = contraction_envelope(knee * (1 + 1e-9), eta_star, dt, c)
            worst = max(worst, abs(hi - lo) / max(1.0, abs(hi)))
        rs = np.sort(rng.uniform(0, 4.0 * (knee + 1.0), size=8))
        vals = [contraction_envelope(float(r), eta_star, dt, c) for r in rs]
        if np.any(np.diff(vals) < -1e-12):
            mono_ok = False
    passed = worst <= 1e-7 and mono_ok
    return CheckResult("envelope-continuity", passed, f"worst knee jump {worst:.2e}, monotone {mono_ok}")


def check_bounding_monotone(n: int = 2_000, seed: int = 5) -> CheckResult:
    """The bounding-chain update is nondecreasing in the current bound for
    fixed draws."""
    rng = np.random.default_rng(seed)
    model = make_harmonic().with_forcing(sinusoidal_shear())
    ok = True
    for _ in range(n):
        p = SimParams(dt=float(rng.uniform(1e-4, 0.3)), beta=float(rng.uniform(0.25, 4)), eta=float(rng.uniform(0, 0.2)), n_steps=1)
        g = float(rng.normal())
        u = float(rng.random())
        ws = np.sort(rng.uniform(0, 5, size=6))
        vals = [bounding_chain_step(float(w), g, u, model, p, eta_star=0.2) for w in ws]
        if np.any(np.diff(vals) < -1e-12):
            ok = False
    return CheckResult("bounding-chain-monotone", ok, f"nondecreasing over {n} draw sets")


def check_maximal_closure(n_pairs: int = 20, n_draws: int = 100_000, seed: int = 6) -> CheckResult:
    """Monte Carlo mean of the meeting probability equals one minus the
    total-variation distance of the one-step kernels, within 3 binomial
    standard errors."""
    rng = np.random.default_rng(seed)
    model = make_harmonic().with_forcing(sinusoidal_shear())
    worst_z = 0.0
    for _ in range(n_pairs):
        p = SimParams(dt=float(rng.uniform(0.005, 0.2)), beta=float(rng.uniform(0.5, 2)), eta=float(rng.uniform(-0.3, 0.3)), n_steps=1)
        x = rng.normal(scale=1.5, size=2)
        y = rng.normal(scale=1.5, size=2)
        mu_x, mu_y, sig = em_kernel_means(x, y, model, p)
        target = 1.0 - gaussian_tv_isotropic(mu_x, mu_y, sig)
        gap = mu_y - mu_x
        a = math.sqrt(p.beta / (2.0 * p.dt)) * gap
        G = rng.standard_normal((n_draws, 2))
        log_ratio = -0.5 * (np.sum((G - a) ** 2, axis=1) - np.sum(G**2, axis=1))
        pvals = np.exp(np.minimum(0.0, log_ratio))
        se = math.sqrt(max(target * (1.0 - target), 1e-12) / n_draws)
        worst_z = max(worst_z, abs(float(pvals.mean()) - target) / se)
    return CheckResult("maximal-coupling-closure", worst_z <= 3.0, f"worst |z| = {worst_z:.2f} over {n_pairs} pairs")


def check_dominance(n_replicas: int = 100, n_steps: int = 10_000, seed: int = 7) -> CheckResult:
    """|x - y| stays below the bounding chain pathwise on shared draws."""
    model = make_harmonic().with_forcing(sinusoidal_shear())
    p = SimParams(dt=0.005, beta=1.0, eta=0.1, n_steps=n_steps, n_burnin=1_000, seed=seed)
    viol, clamps = engine.run_dominance(model, p, n_replicas=n_replicas)
    return CheckResult(
        "pathwise-dominance",
        viol <= 1e-12,
        f"max violation {viol:.3e} over {n_replicas} x {n_steps} steps ({clamps} clamps)",
    )


def check_marginal_identity(n_steps: int = 2_000, seed: int = 8) -> CheckResult:
    """All estimator kinds driven by the same streams produce the identical
    perturbed trajectory."""
    from .dynamics import coordinate_covariance, linear_shear

    model = make_harmonic().with_forcing(linear_shear())
    obs = coordinate_covariance()
    p = SimParams(dt=0.005, beta=1.0, eta=0.1, n_steps=n_steps, n_burnin=200, seed=seed)
    base = None
    ok = True
    for kind in engine.KINDS:
        _, rec = _reference_trajectory(kind, model, obs, p, record_x=True)
        if base is None:
            base = rec
        elif not np.array_equal(base, rec):
            ok = False
    return CheckResult("x-marginal-identity", ok, f"{len(engine.KINDS)} kinds x {n_steps} steps bitwise identical: {ok}")


def check_sticky_y_marginal(n_draws: int = 100_000, seed: int = 9) -> CheckResult:
    """One sticky step leaves the reference kernel exactly invariant
    (moment test at 5 sigma)."""
    from .coupling import CoupledState, CouplingNoise, sticky_step

    model = make_harmonic().with_forcing(sinusoidal_shear())
    p = SimParams(dt=0.05, beta=1.0, eta=0.3, n_steps=1)
    rng = np.random.default_rng(seed)
    x0 = np.array([0.4, -0.2])
    y0 = np.array([-0.1, 0.3])
    _, mu_y, sig = em_kernel_means(x0, y0, model, p)
    s0 = CoupledState.from_pair(x0, y0)
    ys = np.empty((n_draws, 2))
    for i in range(n_draws):
        ys[i] = sticky_step(s0, CouplingNoise(rng.standard_normal(2), rng.random()), model, p).next.y
    z_mean = np.abs(ys.mean(axis=0) - mu_y) / (sig / math.sqrt(n_draws))
    z_var = np.abs(ys.var(axis=0) - sig**2) / (sig**2 * math.sqrt(2.0 / n_draws))
    worst = float(max(z_mean.max(), z_var.max()))
    return CheckResult("sticky-y-marginal", worst <= 5.0, f"worst moment z-score {worst:.2f} over {n_draws} draws")


FAST_CHECKS = (
    check_meeting_equivalence,
    check_meeting_probability_range,
    check_reflection,
    check_drift_control_sweep,
    check_envelope_continuity,
    check_bounding_monotone,
)

FULL_CHECKS = FAST_CHECKS + (
    check_maximal_closure,
    check_dominance,
    check_marginal_identity,
    check_sticky_y_marginal,
)


def run_checks(level: str = "fast") -> list[CheckResult]:
    """Run the named invariant suite; level is 'fast' or 'full'."""
    if level == "fast":
        suite = FAST_CHECKS
    elif level == "full":
        suite = FULL_CHECKS
    else:
        raise ParameterError(f"unknown check level {level!r}; expected 'fast' or 'full'")
    return [fn() for fn in suite]
