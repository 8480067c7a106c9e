"""Trajectory-level estimators of the transport coefficient, the replication
harness, summary statistics, eta sweeps, and linear-response fits.

Every estimator averages summands evaluated at the post-step states n = 1..N:

    standard     (R(X_n) - r0_mean) / eta
    coupled      (R(X_n) - R(Y_n)) / eta

Replica r of a run draws its noise from the documented split streams
(SeedSequence([seed, r, 0]) Gaussians, SeedSequence([seed, r, 1]) uniforms), so
sweeps over (kind, eta) reuse the same replica streams and variance comparisons
are paired.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import engine
from .coupling import CoupledState, CouplingNoise, hybrid_step, sticky_step, sync_step
from .dynamics import Forcing, ModelSpec, Observable, SimParams, em_step
from .errors import BlowUpError, ParameterError
from .engine import TrajectoryStats, replica_streams

__all__ = [
    "COUPLED_KINDS",
    "ReplicaRecord",
    "ExperimentResult",
    "burn_in_init",
    "run_standard",
    "run_coupled",
    "batch_means_variance",
    "eta_sweep",
    "linear_response_fit",
]

COUPLED_KINDS = ("synchronous", "sticky", "hybrid")

# a sweep cell with more than this fraction of blown-up replicas is invalid
BLOWUP_TOLERANCE = 0.01


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------


def burn_in_init(model: ModelSpec, p: SimParams, replica: int = 0) -> CoupledState:
    """Run ``p.n_burnin`` unperturbed steps from the model's default start and
    return the coupled state (x, x): both chains start from the same burned-in
    configuration, exactly met."""
    g_rng, _ = replica_streams(p.seed, replica)
    x = model.default_start()
    p0 = p.with_eta(0.0)
    for k in range(p.n_burnin):
        try:
            x = em_step(x, model, p0, g_rng.standard_normal(model.dim))
        except BlowUpError as err:
            raise BlowUpError(
                f"blow-up during burn-in of model '{model.name}'", step=k, replica=replica, state=err.state
            ) from err
    return CoupledState(x, x.copy(), True)


# ---------------------------------------------------------------------------
# statistics helpers
# ---------------------------------------------------------------------------


def batch_means_variance(summands: np.ndarray, n_batches: int, dt: float = 1.0) -> float:
    """Batch-means estimate of the asymptotic variance of the time average.

    The series is split into ``n_batches`` equal batches of length m (tail
    remainder dropped) and the estimate is

        sigma2_hat = dt * m * Var(batch means, ddof=1),

    which targets the variance of the central limit theorem written at rate
    sqrt(N*dt): for i.i.d. summands with dt = 1 it estimates their variance,
    and in general it estimates the sum of the summand autocovariances times dt.
    """
    s = np.asarray(summands, dtype=np.float64)
    if s.ndim != 1:
        raise ParameterError("summands must be a one-dimensional series")
    if n_batches < 2:
        raise ParameterError(f"n_batches must be >= 2, got {n_batches}")
    if len(s) < 2 * n_batches:
        raise ParameterError(f"series of length {len(s)} is too short for {n_batches} batches")
    m = len(s) // n_batches
    bm = s[: m * n_batches].reshape(n_batches, m).mean(axis=1)
    return dt * m * float(np.var(bm, ddof=1))


def _stats_from_summands(
    summands: np.ndarray,
    dt: float,
    n_batches: int,
    meet_count: Optional[int],
    sq_dist_sum: Optional[float],
) -> TrajectoryStats:
    n = len(summands)
    mean = float(np.mean(summands))
    var = float(np.var(summands))
    discard = n // 10
    trimmed = summands[discard:]
    if len(trimmed) >= 2 * n_batches:
        asym = batch_means_variance(trimmed, n_batches, dt)
    else:
        asym = math.nan
    return TrajectoryStats(
        alpha_hat=mean,
        summand_var=var,
        asym_var_hat=asym,
        meet_fraction=math.nan if meet_count is None else meet_count / n,
        mean_sq_dist=math.nan if sq_dist_sum is None else sq_dist_sum / n,
        blowup=False,
    )


# ---------------------------------------------------------------------------
# single trajectories
# ---------------------------------------------------------------------------


def _reference_trajectory(
    kind: str,
    model: ModelSpec,
    obs: Observable,
    p: SimParams,
    replica: int = 0,
    n_batches: int = 50,
    r0_mean: float = 0.0,
    eta_divisor: Optional[float] = None,
    record_x: bool = False,
):
    """Pure-python trajectory of one replica (reference implementation); used
    for custom models and as the oracle the compiled engine is tested against.

    Returns (TrajectoryStats, recorded x states or None).
    """
    obs = obs.bind(model)
    eta_div = p.eta if eta_divisor is None else eta_divisor
    if eta_div == 0.0:
        raise ParameterError("eta must be nonzero (the estimator divides by it)")
    g_rng, u_rng = replica_streams(p.seed, replica)
    x = model.default_start()
    p0 = p.with_eta(0.0)
    for k in range(p.n_burnin):
        x = em_step(x, model, p0, g_rng.standard_normal(model.dim))
    state = CoupledState(x, x.copy(), True)

    summands = np.empty(p.n_steps)
    meet_count = 0
    sq_dist_sum = 0.0
    record = np.empty((p.n_steps, model.dim)) if record_x else None
    try:
        for k in range(p.n_steps):
            g = g_rng.standard_normal(model.dim)
            if kind == "standard":
                x = em_step(state.x, model, p, g)
                state = CoupledState(x, x.copy(), True)
                summands[k] = (obs.eval(state.x) - r0_mean) / eta_div
            elif kind == "synchronous":
                u_rng.random()  # keep the uniform stream aligned across kinds
                state = sync_step(state, g, model, p)
                summands[k] = (obs.eval(state.x) - obs.eval(state.y)) / eta_div
            elif kind == "sticky":
                state = sticky_step(state, CouplingNoise(g, u_rng.random()), model, p).next
                summands[k] = (obs.eval(state.x) - obs.eval(state.y)) / eta_div
            elif kind == "hybrid":
                state = hybrid_step(state, CouplingNoise(g, u_rng.random()), model, p).next
                summands[k] = (obs.eval(state.x) - obs.eval(state.y)) / eta_div
            else:
                raise ParameterError(f"unknown estimator kind {kind!r}")
            if kind != "standard":
                meet_count += int(state.met)
                sq_dist_sum += float(np.sum((state.x - state.y) ** 2))
            if record_x:
                record[k] = state.x
    except BlowUpError as err:
        raise BlowUpError(
            f"blow-up in {kind} trajectory of model '{model.name}'",
            step=k,
            replica=replica,
            state=err.state,
        ) from err
    if kind == "standard":
        stats = _stats_from_summands(summands, p.dt, n_batches, None, None)
    else:
        stats = _stats_from_summands(summands, p.dt, n_batches, meet_count, sq_dist_sum)
    return stats, record


def _supports_fast(model: ModelSpec, obs: Observable) -> bool:
    from numba.core.dispatcher import Dispatcher

    handles = [model.drift_fill, model.forcing.fill]
    bound = obs.bind(model)
    handles.append(bound.kernel)
    return all(isinstance(h, Dispatcher) for h in handles)


def _single_trajectory(
    kind, model, obs, p, replica, n_batches, r0_mean, use_reference=False
) -> TrajectoryStats:
    if use_reference or not _supports_fast(model, obs):
        stats, _ = _reference_trajectory(kind, model, obs, p, replica, n_batches, r0_mean)
        return stats
    stats, _, _ = engine.run_cell(
        kind, model, obs, p, n_replicas=1, n_batches=n_batches, r0_mean=r0_mean,
        replica_ids=[replica],
    )
    st = stats[0]
    if st.blowup:
        raise BlowUpError(
            f"blow-up in {kind} trajectory of model '{model.name}'", step=st.blow_step, replica=replica
        )
    return st


def run_standard(
    model: ModelSpec,
    forcing: Forcing,
    obs: Observable,
    p: SimParams,
    r0_mean: float = 0.0,
    replica: int = 0,
    n_batches: int = 50,
    use_reference: bool = False,
) -> TrajectoryStats:
    """Standard NEMD estimate from a single perturbed trajectory:
    mean of (R(X_n) - r0_mean)/eta over N post-step states.

    ``r0_mean`` is the reference-measure mean of R; it is exactly 0 for every
    built-in observable on the built-in models and configurable otherwise.
    """
    if p.eta == 0.0:
        raise ParameterError("the standard estimator needs eta != 0")
    composed = model.with_forcing(forcing)
    return _single_trajectory("standard", composed, obs, p, replica, n_batches, r0_mean, use_reference)


def run_coupled(
    kind: str,
    model: ModelSpec,
    forcing: Forcing,
    obs: Observable,
    p: SimParams,
    replica: int = 0,
    n_batches: int = 50,
    use_reference: bool = False,
) -> TrajectoryStats:
    """Coupled estimate from a single replica: mean of (R(X_n) - R(Y_n))/eta,
    stepping with the selected coupling kernel; diagnostics include the exact
    meeting fraction and the time-averaged squared coupling distance."""
    if kind not in COUPLED_KINDS:
        raise ParameterError(f"kind must be one of {COUPLED_KINDS}, got {kind!r}")
    if p.eta == 0.0:
        raise ParameterError("the coupled estimators need eta != 0")
    composed = model.with_forcing(forcing)
    return _single_trajectory(kind, composed, obs, p, replica, n_batches, 0.0, use_reference)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReplicaRecord:
    replica: int
    alpha_hat: float
    summand_var: float
    asym_var_hat: float
    meet_fraction: float
    mean_sq_dist: float
    blowup: bool


@dataclass(frozen=True)
class ExperimentResult:
    """Aggregated results of one (kind, eta) sweep cell."""

    kind: str
    eta: float
    alpha_hat: float
    se: float
    var_alpha: float
    asym_var_hat: float
    summand_var: float
    meet_fraction: float
    mean_sq_dist: float
    blowups: int
    n_replicas: int
    status: str
    config: dict = field(default_factory=dict)
    replicas: tuple = ()


def _aggregate_cell(kind, eta, stats: Sequence[TrajectoryStats], config: dict) -> ExperimentResult:
    records = tuple(
        ReplicaRecord(
            replica=r,
            alpha_hat=s.alpha_hat,
            summand_var=s.summand_var,
            asym_var_hat=s.asym_var_hat,
            meet_fraction=s.meet_fraction,
            mean_sq_dist=s.mean_sq_dist,
            blowup=s.blowup,
        )
        for r, s in enumerate(stats)
    )
    ok = [s for s in stats if not s.blowup]
    blowups = len(stats) - len(ok)
    status = "ok" if blowups <= BLOWUP_TOLERANCE * len(stats) and ok else "invalid-blowups"
    if not ok:
        nan = math.nan
        return ExperimentResult(
            kind, eta, nan, nan, nan, nan, nan, nan, nan, blowups, len(stats), status, config, records
        )
    alphas = np.array([s.alpha_hat for s in ok])
    if len(alphas) >= 2:
        var_alpha = float(np.var(alphas, ddof=1))
        se = math.sqrt(var_alpha / len(alphas))
    else:
        var_alpha = 0.0
        se = 0.0

    def nanmean(vals):
        vals = np.array(vals)
        return float(np.nanmean(vals)) if not np.all(np.isnan(vals)) else math.nan

    return ExperimentResult(
        kind=kind,
        eta=eta,
        alpha_hat=float(np.mean(alphas)),
        se=se,
        var_alpha=var_alpha,
        asym_var_hat=nanmean([s.asym_var_hat for s in ok]),
        summand_var=nanmean([s.summand_var for s in ok]),
        meet_fraction=nanmean([s.meet_fraction for s in ok]),
        mean_sq_dist=nanmean([s.mean_sq_dist for s in ok]),
        blowups=blowups,
        n_replicas=len(stats),
        status=status,
        config=config,
        replicas=records,
    )


def eta_sweep(
    kinds: Sequence[str],
    model: ModelSpec,
    forcing: Forcing,
    obs: Observable,
    etas: Sequence[float],
    replicas: int,
    p: SimParams,
    n_batches: int = 50,
    r0_mean: float = 0.0,
    use_reference: bool = False,
    progress=None,
) -> list[ExperimentResult]:
    """Run every (kind, eta) cell with ``replicas`` paired replicas each and
    return one ExperimentResult per cell, deterministic given the seed.

    Per-replica blow-ups are recorded and excluded; a cell whose blow-up
    fraction exceeds 1% is marked invalid instead of failing the sweep.
    """
    if not etas:
        raise ParameterError("etas must be non-empty")
    if any(eta == 0.0 for eta in etas):
        raise ParameterError("etas must all be nonzero")
    if replicas < 1:
        raise ParameterError(f"replicas must be >= 1, got {replicas}")
    for kind in kinds:
        if kind not in engine.KINDS:
            raise ParameterError(f"unknown estimator kind {kind!r}; expected one of {engine.KINDS}")
    composed = model.with_forcing(forcing)
    fast = not use_reference and _supports_fast(composed, obs)
    results = []
    for kind in kinds:
        for eta in etas:
            pe = p.with_eta(float(eta))
            cell_r0 = r0_mean if kind == "standard" else 0.0
            if fast:
                stats, _, _ = engine.run_cell(
                    kind, composed, obs, pe, n_replicas=replicas, n_batches=n_batches, r0_mean=cell_r0
                )
            else:
                stats = []
                for r in range(replicas):
                    try:
                        st, _ = _reference_trajectory(
                            kind, composed, obs, pe, replica=r, n_batches=n_batches, r0_mean=cell_r0
                        )
                    except BlowUpError as err:
                        st = TrajectoryStats(
                            math.nan, math.nan, math.nan, math.nan, math.nan, True, err.step
                        )
                    stats.append(st)
            config = {
                "model": model.name,
                "forcing": forcing.name,
                "observable": obs.name,
                "kind": kind,
                "eta": float(eta),
                "dt": p.dt,
                "beta": p.beta,
                "n_steps": p.n_steps,
                "n_burnin": p.n_burnin,
                "seed": p.seed,
                "replicas": replicas,
                "n_batches": n_batches,
                "r0_mean": cell_r0,
            }
            results.append(_aggregate_cell(kind, float(eta), stats, config))
            if progress is not None:
                progress(results[-1])
    return results


# ---------------------------------------------------------------------------
# linear response fit
# ---------------------------------------------------------------------------


def linear_response_fit(etas, alpha_hats, ses=None):
    """Weighted least-squares slope through the origin of the observed response
    eta * alpha_hat against eta; returns (slope, stderr).

    When per-point standard errors are supplied and positive, points are
    weighted by the inverse variance of the response; otherwise the fit is
    unweighted and the standard error is residual-based (0 for a single point
    or an exact fit).
    """
    etas = np.asarray(etas, dtype=np.float64)
    alpha_hats = np.asarray(alpha_hats, dtype=np.float64)
    if etas.shape != alpha_hats.shape or etas.ndim != 1 or len(etas) == 0:
        raise ParameterError("etas and alpha_hats must be equal-length non-empty vectors")
    if np.any(etas == 0.0):
        raise ParameterError("etas must be nonzero")
    if len(etas) >= 2 and np.all(etas == etas[0]):
        raise ParameterError("degenerate design: all etas are equal")
    resp = etas * alpha_hats
    if ses is not None:
        ses = np.asarray(ses, dtype=np.float64)
        if ses.shape != etas.shape:
            raise ParameterError("ses must match etas in length")
        resp_se = np.abs(etas) * ses
        if np.all(resp_se > 0):
            w = 1.0 / resp_se**2
            denom = float(np.sum(w * etas**2))
            slope = float(np.sum(w * etas * resp)) / denom
            return slope, math.sqrt(1.0 / denom)
    denom = float(np.sum(etas**2))
    slope = float(np.sum(etas * resp)) / denom
    n = len(etas)
    if n < 2:
        return slope, 0.0
    resid = resp - slope * etas
    return slope, math.sqrt(float(np.sum(resid**2)) / (n - 1) / denom)
