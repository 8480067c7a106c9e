"""Compiled trajectory engine.

Runs whole replica batches of the standard, synchronous, sticky and hybrid
chains in numba-jitted chunk kernels (prange over replicas), drawing noise from
per-replica numpy generators so that results are bitwise reproducible and
independent of the worker count. The per-step arithmetic mirrors the reference
step functions in :mod:`transportcv.coupling` exactly; replica r of a run with
master seed s draws its Gaussians from SeedSequence([s, r, 0]) and its uniforms
from SeedSequence([s, r, 1]).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit, prange

from .dynamics import ModelSpec, Observable, SimParams
from .errors import ParameterError

__all__ = [
    "KINDS",
    "TrajectoryStats",
    "replica_streams",
    "run_cell",
    "run_dominance",
    "set_worker_count",
]

KINDS = ("standard", "synchronous", "sticky", "hybrid")

# ~64 MB of chunk noise at a time
_CHUNK_BUDGET_DOUBLES = 8_000_000


def set_worker_count(n: Optional[int] = None) -> int:
    """Set the number of threads the kernels may use; defaults to the
    TRANSPORTCV_WORKERS environment variable, else all cores."""
    import numba

    if n is None:
        env = os.environ.get("TRANSPORTCV_WORKERS")
        n = int(env) if env else numba.config.NUMBA_DEFAULT_NUM_THREADS
    n = max(1, min(int(n), numba.config.NUMBA_DEFAULT_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def replica_streams(seed: int, replica: int):
    """Independent Gaussian and uniform generators for one replica.

    The splitting function is documented and fixed: stream k of replica r under
    master seed s is PCG64 seeded with SeedSequence([s mod 2^64, r, k]), k = 0
    for Gaussians and k = 1 for uniforms.
    """
    if replica < 0:
        raise ParameterError(f"replica index must be >= 0, got {replica}")
    s = int(seed) & 0xFFFFFFFFFFFFFFFF
    g_rng = np.random.default_rng(np.random.SeedSequence([s, int(replica), 0]))
    u_rng = np.random.default_rng(np.random.SeedSequence([s, int(replica), 1]))
    return g_rng, u_rng


@dataclass(frozen=True)
class TrajectoryStats:
    """Per-replica trajectory statistics."""

    alpha_hat: float
    summand_var: float
    asym_var_hat: float
    meet_fraction: float
    mean_sq_dist: float
    blowup: bool
    blow_step: Optional[int] = None


# ---------------------------------------------------------------------------
# chunk kernels (prange over replicas; per-replica work strictly sequential)
# ---------------------------------------------------------------------------


@njit(cache=False, parallel=True, error_model="numpy")
def _em_chunk(x, bx, G, dt, eta, sigma, alive, blow_step, k0, drift, forcing):
    n_rep, m, d = G.shape
    for r in prange(n_rep):
        if not alive[r]:
            continue
        xr = x[r]
        br = bx[r]
        fr = np.empty(d)
        for k in range(m):
            forcing(xr, fr)
            chk = 0.0
            for i in range(d):
                xr[i] = xr[i] + dt * (br[i] + eta * fr[i]) + sigma * G[r, k, i]
                chk += xr[i]
            drift(xr, br)
            for i in range(d):
                chk += br[i]
            if not np.isfinite(chk):
                alive[r] = False
                blow_step[r] = k0 + k
                break


@njit(cache=False, parallel=True, error_model="numpy")
def _standard_chunk(
    x, bx, G, dt, eta, sigma, eta_div, r0_mean, k0,
    alive, blow_step, sum_s, sum_s2,
    batch_sums, discard, bm_len, bm_total,
    drift, forcing, obs,
):
    n_rep, m, d = G.shape
    n_batches = batch_sums.shape[1]
    for r in prange(n_rep):
        if not alive[r]:
            continue
        xr = x[r]
        br = bx[r]
        fr = np.empty(d)
        for k in range(m):
            forcing(xr, fr)
            chk = 0.0
            for i in range(d):
                xr[i] = xr[i] + dt * (br[i] + eta * fr[i]) + sigma * G[r, k, i]
                chk += xr[i]
            drift(xr, br)
            for i in range(d):
                chk += br[i]
            if not np.isfinite(chk):
                alive[r] = False
                blow_step[r] = k0 + k
                break
            s = (obs(xr, br) - r0_mean) / eta_div
            sum_s[r] += s
            sum_s2[r] += s * s
            jj = k0 + k - discard
            if 0 <= jj < bm_total:
                b_idx = jj // bm_len
                if b_idx < n_batches:
                    batch_sums[r, b_idx] += s


@njit(cache=False, parallel=True, error_model="numpy")
def _sync_chunk(
    x, y, bx, by, G, dt, eta, sigma, eta_div, k0,
    alive, blow_step, sum_s, sum_s2, sum_d2, sum_met,
    batch_sums, discard, bm_len, bm_total,
    drift, forcing, obs,
):
    n_rep, m, d = G.shape
    n_batches = batch_sums.shape[1]
    for r in prange(n_rep):
        if not alive[r]:
            continue
        xr = x[r]
        yr = y[r]
        bxr = bx[r]
        byr = by[r]
        fr = np.empty(d)
        for k in range(m):
            forcing(xr, fr)
            chk = 0.0
            for i in range(d):
                g = G[r, k, i]
                xr[i] = xr[i] + dt * (bxr[i] + eta * fr[i]) + sigma * g
                yr[i] = yr[i] + dt * byr[i] + sigma * g
                chk += xr[i] + yr[i]
            drift(xr, bxr)
            drift(yr, byr)
            for i in range(d):
                chk += bxr[i] + byr[i]
            if not np.isfinite(chk):
                alive[r] = False
                blow_step[r] = k0 + k
                break
            d2 = 0.0
            same = True
            for i in range(d):
                diff = xr[i] - yr[i]
                d2 += diff * diff
                if xr[i] != yr[i]:
                    same = False
            # the summand is exactly zero on the diagonal; skip the evaluations
            s = 0.0 if same else (obs(xr, bxr) - obs(yr, byr)) / eta_div
            sum_s[r] += s
            sum_s2[r] += s * s
            sum_d2[r] += d2
            if same:
                sum_met[r] += 1
            jj = k0 + k - discard
            if 0 <= jj < bm_total:
                b_idx = jj // bm_len
                if b_idx < n_batches:
                    batch_sums[r, b_idx] += s


@njit(cache=False, error_model="numpy")
def _sticky_pair_update(xr, yr, bxr, byr, fr, gk, u, dt, eta, sigma, c_ab, en, tmp, drift):
    """Advance one replica of the sticky pair by one step; returns True if the
    merge branch fired. Arrays are updated in place; bxr/byr end as the drifts
    at the new states."""
    d = xr.shape[0]
    # gap between the one-step means, from the pre-step state
    s_shift = 0.0
    s_g = 0.0
    for i in range(d):
        en[i] = yr[i] - xr[i] + dt * (byr[i] - bxr[i] - eta * fr[i])
    norm2 = 0.0
    for i in range(d):
        norm2 += en[i] * en[i]
    for i in range(d):
        a = c_ab * en[i]
        gm = gk[i] - a
        s_shift += gm * gm
        s_g += gk[i] * gk[i]
    log_ratio = -0.5 * (s_shift - s_g)
    if log_ratio > 0.0:
        log_ratio = 0.0
    p_meet = math.exp(log_ratio)
    # perturbed chain always moves by the forced Euler-Maruyama update
    for i in range(d):
        xr[i] = xr[i] + dt * (bxr[i] + eta * fr[i]) + sigma * gk[i]
    merged = u <= p_meet
    if merged:
        for i in range(d):
            yr[i] = xr[i]
        drift(xr, bxr)
        for i in range(d):
            byr[i] = bxr[i]
    else:
        if norm2 > 0.0:
            norm = math.sqrt(norm2)
            edotg = 0.0
            for i in range(d):
                tmp[i] = en[i] / norm
                edotg += tmp[i] * gk[i]
            for i in range(d):
                yr[i] = yr[i] + dt * byr[i] + sigma * (gk[i] - 2.0 * edotg * tmp[i])
        else:
            for i in range(d):
                yr[i] = yr[i] + dt * byr[i] + sigma * gk[i]
        drift(xr, bxr)
        drift(yr, byr)
    return merged


@njit(cache=False, parallel=True, error_model="numpy")
def _sticky_chunk(
    x, y, bx, by, G, U, dt, eta, sigma, c_ab, eta_div, k0,
    alive, blow_step, sum_s, sum_s2, sum_d2, sum_met,
    batch_sums, discard, bm_len, bm_total,
    drift, forcing, obs,
):
    n_rep, m, d = G.shape
    n_batches = batch_sums.shape[1]
    for r in prange(n_rep):
        if not alive[r]:
            continue
        xr = x[r]
        yr = y[r]
        bxr = bx[r]
        byr = by[r]
        fr = np.empty(d)
        en = np.empty(d)
        tmp = np.empty(d)
        for k in range(m):
            forcing(xr, fr)
            _sticky_pair_update(xr, yr, bxr, byr, fr, G[r, k], U[r, k], dt, eta, sigma, c_ab, en, tmp, drift)
            chk = 0.0
            for i in range(d):
                chk += xr[i] + yr[i] + bxr[i] + byr[i]
            if not np.isfinite(chk):
                alive[r] = False
                blow_step[r] = k0 + k
                break
            d2 = 0.0
            same = True
            for i in range(d):
                diff = xr[i] - yr[i]
                d2 += diff * diff
                if xr[i] != yr[i]:
                    same = False
            s = 0.0 if same else (obs(xr, bxr) - obs(yr, byr)) / eta_div
            sum_s[r] += s
            sum_s2[r] += s * s
            sum_d2[r] += d2
            if same:
                sum_met[r] += 1
            jj = k0 + k - discard
            if 0 <= jj < bm_total:
                b_idx = jj // bm_len
                if b_idx < n_batches:
                    batch_sums[r, b_idx] += s


@njit(cache=False, parallel=True, error_model="numpy")
def _hybrid_chunk(
    x, y, bx, by, G, U, dt, eta, sigma, c_ab, eta_div, k0,
    alive, blow_step, sum_s, sum_s2, sum_d2, sum_met,
    batch_sums, discard, bm_len, bm_total,
    drift, forcing, obs,
):
    n_rep, m, d = G.shape
    n_batches = batch_sums.shape[1]
    for r in prange(n_rep):
        if not alive[r]:
            continue
        xr = x[r]
        yr = y[r]
        bxr = bx[r]
        byr = by[r]
        fr = np.empty(d)
        en = np.empty(d)
        tmp = np.empty(d)
        for k in range(m):
            forcing(xr, fr)
            same = True
            for i in range(d):
                if xr[i] != yr[i]:
                    same = False
            if same:
                contractive = True
            else:
                ip = 0.0
                for i in range(d):
                    ip += (xr[i] - yr[i]) * (bxr[i] + eta * fr[i] - byr[i])
                contractive = ip < 0.0
            if contractive:
                for i in range(d):
                    g = G[r, k, i]
                    xr[i] = xr[i] + dt * (bxr[i] + eta * fr[i]) + sigma * g
                    yr[i] = yr[i] + dt * byr[i] + sigma * g
                drift(xr, bxr)
                drift(yr, byr)
            else:
                _sticky_pair_update(xr, yr, bxr, byr, fr, G[r, k], U[r, k], dt, eta, sigma, c_ab, en, tmp, drift)
            chk = 0.0
            for i in range(d):
                chk += xr[i] + yr[i] + bxr[i] + byr[i]
            if not np.isfinite(chk):
                alive[r] = False
                blow_step[r] = k0 + k
                break
            d2 = 0.0
            same = True
            for i in range(d):
                diff = xr[i] - yr[i]
                d2 += diff * diff
                if xr[i] != yr[i]:
                    same = False
            s = 0.0 if same else (obs(xr, bxr) - obs(yr, byr)) / eta_div
            sum_s[r] += s
            sum_s2[r] += s * s
            sum_d2[r] += d2
            if same:
                sum_met[r] += 1
            jj = k0 + k - discard
            if 0 <= jj < bm_total:
                b_idx = jj // bm_len
                if b_idx < n_batches:
                    batch_sums[r, b_idx] += s


@njit(cache=False, parallel=True, error_model="numpy")
def _dominance_chunk(
    x, y, bx, by, w, G, U, dt, eta, sigma, c_ab,
    knee, grow, contract, fsup, max_viol, clamp_count,
    drift, forcing,
):
    n_rep, m, d = G.shape
    abs_eta = abs(eta)
    for r in prange(n_rep):
        xr = x[r]
        yr = y[r]
        bxr = bx[r]
        byr = by[r]
        fr = np.empty(d)
        en = np.empty(d)
        tmp = np.empty(d)
        for k in range(m):
            forcing(xr, fr)
            # reflection axis of the coupled pair, before the update
            for i in range(d):
                en[i] = yr[i] - xr[i] + dt * (byr[i] - bxr[i] - eta * fr[i])
            norm2 = 0.0
            for i in range(d):
                norm2 += en[i] * en[i]
            gcal = 0.0
            if norm2 > 0.0:
                norm = math.sqrt(norm2)
                for i in range(d):
                    gcal += (en[i] / norm) * G[r, k, i]
            u = U[r, k]
            _sticky_pair_update(xr, yr, bxr, byr, fr, G[r, k], u, dt, eta, sigma, c_ab, en, tmp, drift)
            # dominating scalar chain on the shared draws (gcal, u)
            wr = w[r]
            env = grow * wr if wr <= knee else grow * knee + contract * (wr - knee)
            a = env + abs_eta * fsup * dt
            shift = a * c_ab
            log_ratio = -0.5 * ((shift - gcal) * (shift - gcal) - gcal * gcal)
            if log_ratio > 0.0:
                log_ratio = 0.0
            if u < math.exp(log_ratio):
                w[r] = 0.0
            else:
                w_next = a - 2.0 * sigma * gcal
                if w_next < 0.0:
                    w_next = 0.0
                    clamp_count[r] += 1
                w[r] = w_next
            d2 = 0.0
            for i in range(d):
                diff = xr[i] - yr[i]
                d2 += diff * diff
            viol = math.sqrt(d2) - w[r]
            if viol > max_viol[r]:
                max_viol[r] = viol


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------


def _chunk_steps(n_steps: int, n_rep: int, dim: int) -> int:
    per_step = max(1, n_rep * dim)
    return max(256, min(n_steps, _CHUNK_BUDGET_DOUBLES // per_step))


def _draw_chunk(g_rngs, u_rngs, m: int, dim: int, with_u: bool):
    n_rep = len(g_rngs)
    G = np.empty((n_rep, m, dim))
    U = np.empty((n_rep, m)) if with_u else None
    for r in range(n_rep):
        G[r] = g_rngs[r].standard_normal((m, dim))
        if with_u:
            U[r] = u_rngs[r].random(m)
    return G, U


def _batch_layout(n_steps: int, n_batches: int):
    """Summand indices kept for batch means: the first 10% are discarded, the
    remainder split into n_batches equal batches (tail remainder dropped)."""
    discard = n_steps // 10
    bm_len = (n_steps - discard) // n_batches
    return discard, bm_len, bm_len * n_batches


def burn_in_states(model: ModelSpec, p: SimParams, n_replicas: int, replica_ids=None):
    """Unperturbed burn-in of ``n_replicas`` replicas from the model's default
    start; returns the (n_replicas, dim) state array (one row per replica).

    Bitwise identical to running :func:`transportcv.estimators.burn_in_init`
    per replica.
    """
    if replica_ids is None:
        replica_ids = range(n_replicas)
    replica_ids = list(replica_ids)
    dim = model.dim
    drift = model.drift_fill
    forcing = model.forcing.fill
    g_rngs = []
    u_rngs = []
    for r in replica_ids:
        g, u = replica_streams(p.seed, r)
        g_rngs.append(g)
        u_rngs.append(u)
    x = np.tile(model.default_start(), (len(replica_ids), 1))
    bx = np.empty_like(x)
    for r in range(len(replica_ids)):
        drift(x[r], bx[r])
    alive = np.ones(len(replica_ids), dtype=np.bool_)
    blow_step = np.full(len(replica_ids), -1, dtype=np.int64)
    done = 0
    while done < p.n_burnin:
        m = min(_chunk_steps(p.n_burnin, len(replica_ids), dim), p.n_burnin - done)
        G, _ = _draw_chunk(g_rngs, u_rngs, m, dim, with_u=False)
        _em_chunk(x, bx, G, p.dt, 0.0, p.sigma, alive, blow_step, done, drift, forcing)
        done += m
    if not np.all(alive):
        bad = int(np.argmin(alive))
        raise ParameterError(
            f"burn-in blew up for replica {replica_ids[bad]} at step {int(blow_step[bad])}"
        )
    return x


def run_cell(
    kind: str,
    model: ModelSpec,
    obs: Observable,
    p: SimParams,
    n_replicas: int,
    n_batches: int = 50,
    r0_mean: float = 0.0,
    eta_divisor: Optional[float] = None,
    replica_ids: Optional[Sequence[int]] = None,
):
    """Run ``n_replicas`` independent trajectories of one estimator kind and
    return (list of TrajectoryStats, final x array, final y array).

    All replicas burn in with the unperturbed chain from the model's default
    start, then measure ``p.n_steps`` post-step summands. ``eta_divisor``
    overrides the 1/eta factor of the summands (testing hook); it defaults to
    ``p.eta``. ``replica_ids`` selects which replica streams to run (default
    0..n_replicas-1).
    """
    if kind not in KINDS:
        raise ParameterError(f"unknown estimator kind {kind!r}; expected one of {KINDS}")
    obs = obs.bind(model)
    dim = model.dim
    eta_div = p.eta if eta_divisor is None else eta_divisor
    if eta_div == 0.0:
        raise ParameterError("eta must be nonzero (the estimator divides by it)")
    if replica_ids is None:
        replica_ids = range(n_replicas)
    replica_ids = list(replica_ids)
    if len(replica_ids) != n_replicas:
        raise ParameterError("replica_ids length must equal n_replicas")

    drift = model.drift_fill
    forcing = model.forcing.fill
    obs_kernel = obs.kernel

    g_rngs, u_rngs = [], []
    for r in replica_ids:
        g, u = replica_streams(p.seed, r)
        g_rngs.append(g)
        u_rngs.append(u)

    x = np.tile(model.default_start(), (n_replicas, 1))
    bx = np.empty_like(x)
    for r in range(n_replicas):
        drift(x[r], bx[r])
    alive = np.ones(n_replicas, dtype=np.bool_)
    blow_step = np.full(n_replicas, -1, dtype=np.int64)

    # burn-in: unperturbed chain, shared by every (kind, eta) cell of a sweep
    done = 0
    while done < p.n_burnin:
        m = min(_chunk_steps(p.n_burnin, n_replicas, dim), p.n_burnin - done)
        G, _ = _draw_chunk(g_rngs, u_rngs, m, dim, with_u=False)
        _em_chunk(x, bx, G, p.dt, 0.0, p.sigma, alive, blow_step, done, drift, forcing)
        done += m

    y = x.copy()
    by = bx.copy()

    sum_s = np.zeros(n_replicas)
    sum_s2 = np.zeros(n_replicas)
    sum_d2 = np.zeros(n_replicas)
    sum_met = np.zeros(n_replicas, dtype=np.int64)
    batch_sums = np.zeros((n_replicas, n_batches))
    discard, bm_len, bm_total = _batch_layout(p.n_steps, n_batches)
    c_ab = math.sqrt(p.beta / (2.0 * p.dt))

    done = 0
    while done < p.n_steps:
        m = min(_chunk_steps(p.n_steps, n_replicas, dim), p.n_steps - done)
        with_u = kind in ("sticky", "hybrid")
        G, U = _draw_chunk(g_rngs, u_rngs, m, dim, with_u=with_u)
        if kind == "standard":
            _standard_chunk(
                x, bx, G, p.dt, p.eta, p.sigma, eta_div, r0_mean, done,
                alive, blow_step, sum_s, sum_s2,
                batch_sums, discard, bm_len, bm_total,
                drift, forcing, obs_kernel,
            )
        elif kind == "synchronous":
            _sync_chunk(
                x, y, bx, by, G, p.dt, p.eta, p.sigma, eta_div, done,
                alive, blow_step, sum_s, sum_s2, sum_d2, sum_met,
                batch_sums, discard, bm_len, bm_total,
                drift, forcing, obs_kernel,
            )
        elif kind == "sticky":
            _sticky_chunk(
                x, y, bx, by, G, U, p.dt, p.eta, p.sigma, c_ab, eta_div, done,
                alive, blow_step, sum_s, sum_s2, sum_d2, sum_met,
                batch_sums, discard, bm_len, bm_total,
                drift, forcing, obs_kernel,
            )
        else:
            _hybrid_chunk(
                x, y, bx, by, G, U, p.dt, p.eta, p.sigma, c_ab, eta_div, done,
                alive, blow_step, sum_s, sum_s2, sum_d2, sum_met,
                batch_sums, discard, bm_len, bm_total,
                drift, forcing, obs_kernel,
            )
        done += m

    stats = []
    n = p.n_steps
    for r in range(n_replicas):
        if not alive[r]:
            stats.append(
                TrajectoryStats(
                    alpha_hat=math.nan,
                    summand_var=math.nan,
                    asym_var_hat=math.nan,
                    meet_fraction=math.nan,
                    mean_sq_dist=math.nan,
                    blowup=True,
                    blow_step=int(blow_step[r]),
                )
            )
            continue
        mean = sum_s[r] / n
        if not math.isfinite(mean):
            # a drift that went non-finite on the very last step can slip past
            # the in-loop check; surface it as a blow-up rather than a number
            stats.append(
                TrajectoryStats(
                    alpha_hat=math.nan, summand_var=math.nan, asym_var_hat=math.nan,
                    meet_fraction=math.nan, mean_sq_dist=math.nan, blowup=True, blow_step=n - 1,
                )
            )
            continue
        var = max(0.0, sum_s2[r] / n - mean * mean)
        if bm_len >= 2:
            bm = batch_sums[r] / bm_len
            asym = p.dt * bm_len * float(np.var(bm, ddof=1))
        else:
            asym = math.nan
        if kind == "standard":
            meet = math.nan
            msd = math.nan
        else:
            meet = sum_met[r] / n
            msd = sum_d2[r] / n
        stats.append(
            TrajectoryStats(
                alpha_hat=float(mean),
                summand_var=float(var),
                asym_var_hat=float(asym),
                meet_fraction=float(meet),
                mean_sq_dist=float(msd),
                blowup=False,
            )
        )
    return stats, x, y


def run_dominance(model: ModelSpec, p: SimParams, n_replicas: int, eta_star: Optional[float] = None):
    """Run sticky pairs together with their dominating scalar chains on shared
    draws and return (max violation of |x-y| <= w over all steps and replicas,
    number of negative-candidate clamps)."""
    c = model.constants
    if c is None or c.F_sup is None:
        raise ParameterError("dominance run needs a constants record with m and F_sup")
    from .dynamics import max_time_step

    if eta_star is None:
        eta_star = abs(p.eta)
    if not 0 < p.dt < max_time_step(c, eta_star):
        raise ParameterError(f"dt={p.dt} outside (0, {max_time_step(c, eta_star)})")

    dim = model.dim
    drift = model.drift_fill
    forcing = model.forcing.fill

    g_rngs, u_rngs = [], []
    for r in range(n_replicas):
        g, u = replica_streams(p.seed, r)
        g_rngs.append(g)
        u_rngs.append(u)

    x = np.tile(model.default_start(), (n_replicas, 1))
    bx = np.empty_like(x)
    for r in range(n_replicas):
        drift(x[r], bx[r])
    alive = np.ones(n_replicas, dtype=np.bool_)
    blow_step = np.full(n_replicas, -1, dtype=np.int64)
    done = 0
    while done < p.n_burnin:
        m = min(_chunk_steps(p.n_burnin, n_replicas, dim), p.n_burnin - done)
        G, _ = _draw_chunk(g_rngs, u_rngs, m, dim, with_u=False)
        _em_chunk(x, bx, G, p.dt, 0.0, p.sigma, alive, blow_step, done, drift, forcing)
        done += m
    if not np.all(alive):
        raise ParameterError("burn-in blew up during a dominance run")

    y = x.copy()
    by = bx.copy()
    w = np.zeros(n_replicas)  # starts at |x0 - y0| = 0
    max_viol = np.full(n_replicas, -np.inf)
    clamp_count = np.zeros(n_replicas, dtype=np.int64)

    # envelope of the unperturbed drift (eta_star = 0 in the piecewise bound)
    knee = c.M
    grow = 1.0 + c.L_b * p.dt
    contract = 1.0 - c.m * p.dt / 4.0
    c_ab = math.sqrt(p.beta / (2.0 * p.dt))

    done = 0
    while done < p.n_steps:
        m = min(_chunk_steps(p.n_steps, n_replicas, dim), p.n_steps - done)
        G, U = _draw_chunk(g_rngs, u_rngs, m, dim, with_u=True)
        _dominance_chunk(
            x, y, bx, by, w, G, U, p.dt, p.eta, p.sigma, c_ab,
            knee, grow, contract, c.F_sup, max_viol, clamp_count,
            drift, forcing,
        )
        done += m
    return float(np.max(max_viol)), int(np.sum(clamp_count))
