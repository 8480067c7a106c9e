import math

import numpy as np
import pytest

from conftest import zero_drift_model
from transportcv import (
    CoupledState,
    CouplingNoise,
    ParameterError,
    SimParams,
    bounding_chain_step,
    em_step,
    hybrid_step,
    linear_shear,
    make_cosine_well,
    make_harmonic,
    mean_gap,
    meeting_probability,
    meeting_probability_1d,
    reflect,
    sinusoidal_shear,
    sticky_step,
    sync_step,
)
from transportcv.coupling import MERGED, REFLECTED


class TestStateTypes:
    def test_met_flag_consistency(self):
        with pytest.raises(ParameterError):
            CoupledState(np.zeros(2), np.ones(2), True)
        with pytest.raises(ParameterError):
            CoupledState(np.zeros(2), np.zeros(2), False)
        s = CoupledState.from_pair(np.zeros(2), np.zeros(2))
        assert s.met

    def test_noise_u_range(self):
        with pytest.raises(ParameterError):
            CouplingNoise(np.zeros(2), 1.5)
        with pytest.raises(ParameterError):
            CouplingNoise(np.zeros(2), -0.1)


class TestMeanGap:
    def test_cancels_when_met_unperturbed(self):
        model = make_harmonic()
        p = SimParams(dt=0.1, beta=1.0, eta=0.0, n_steps=1)
        x = np.array([0.7, -0.3])
        gap, unit = mean_gap(x, x.copy(), model, p)
        assert np.array_equal(gap, np.zeros(2))
        assert np.array_equal(unit, np.zeros(2))

    def test_pure_noise_normalization(self):
        model = zero_drift_model(2)
        p = SimParams(dt=0.1, beta=1.0, eta=0.0, n_steps=1)
        gap, unit = mean_gap(np.zeros(2), np.array([3.0, 4.0]), model, p)
        assert gap == pytest.approx([3.0, 4.0])
        assert unit == pytest.approx([0.6, 0.8])

    def test_harmonic_value(self):
        model = make_harmonic()
        p = SimParams(dt=0.1, beta=1.0, eta=0.0, n_steps=1)
        gap, unit = mean_gap(np.zeros(2), np.array([1.0, 0.0]), model, p)
        assert gap == pytest.approx([0.9, 0.0])
        assert unit == pytest.approx([1.0, 0.0])


class TestMeetingProbability:
    def test_one_when_gap_zero(self, rng):
        model = make_harmonic()
        p = SimParams(dt=0.05, beta=2.0, eta=0.0, n_steps=1)
        x = rng.normal(size=2)
        assert meeting_probability(x, x.copy(), rng.normal(size=2), model, p) == 1.0

    def test_density_ratio_value(self):
        # beta = 2, dt = 1 makes the shift equal the gap itself
        model = zero_drift_model(2)
        p = SimParams(dt=1.0, beta=2.0, eta=0.0, n_steps=1)
        val = meeting_probability(np.zeros(2), np.array([1.0, 0.0]), np.zeros(2), model, p)
        assert val == pytest.approx(math.exp(-0.5))

    def test_reflection_symmetry_gives_one(self, rng):
        # when the shift equals twice the draw the two densities coincide
        model = zero_drift_model(3)
        p = SimParams(dt=1.0, beta=2.0, eta=0.0, n_steps=1)
        for _ in range(10):
            g = rng.normal(size=3)
            y = 2.0 * g
            assert meeting_probability(np.zeros(3), y, g, model, p) == 1.0

    def test_never_nan_for_extreme_inputs(self):
        model = zero_drift_model(2)
        p = SimParams(dt=1e-6, beta=10.0, eta=0.0, n_steps=1)
        val = meeting_probability(np.zeros(2), np.array([1e8, -1e8]), np.array([1e3, 1e3]), model, p)
        assert val == 0.0

    def test_equivalence_of_forms(self, rng):
        model = make_harmonic().with_forcing(sinusoidal_shear())
        worst = 0.0
        for _ in range(3000):
            p = SimParams(
                dt=float(rng.uniform(1e-4, 0.3)),
                beta=float(rng.uniform(0.25, 4.0)),
                eta=float(rng.uniform(-0.5, 0.5)),
                n_steps=1,
            )
            x = rng.normal(scale=2.0, size=2)
            y = rng.normal(scale=2.0, size=2)
            g = rng.normal(size=2)
            worst = max(
                worst,
                abs(meeting_probability(x, y, g, model, p) - meeting_probability_1d(x, y, g, model, p)),
            )
        assert worst <= 1e-10

    def test_monotone_decay_in_gap(self, rng):
        model = zero_drift_model(2)
        p = SimParams(dt=1.0, beta=2.0, eta=0.0, n_steps=1)
        g = rng.normal(size=2)
        u = np.array([1.0, 0.0])
        s = float(u @ g)
        start = max(0.0, s)
        vals = [
            meeting_probability_1d(np.zeros(2), (start + t) * u, g, model, p)
            for t in np.linspace(1e-6, 30.0, 60)
        ]
        assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1e-10


class TestReflect:
    def test_axis_flip(self):
        out = reflect(np.array([3.0, 4.0]), np.array([1.0, 0.0]))
        assert np.array_equal(out, np.array([-3.0, 4.0]))

    def test_orthogonal_unchanged(self):
        g = np.array([0.0, 5.0])
        assert np.array_equal(reflect(g, np.array([1.0, 0.0])), g)

    def test_involution_and_isometry(self, rng):
        for _ in range(200):
            d = int(rng.integers(1, 9))
            g = rng.normal(size=d)
            e = rng.normal(size=d)
            e = e / np.linalg.norm(e)
            r = reflect(g, e)
            assert np.max(np.abs(reflect(r, e) - g)) <= 1e-12
            assert abs(np.linalg.norm(r) - np.linalg.norm(g)) <= 1e-12

    def test_zero_axis_identity(self, rng):
        g = rng.normal(size=4)
        assert np.array_equal(reflect(g, np.zeros(4)), g)

    def test_non_unit_axis_rejected(self):
        with pytest.raises(ParameterError):
            reflect(np.ones(2), np.array([0.5, 0.0]))


def _scalar_sticky_reflected(x, y, g, dt, eta, beta):
    """Independent scalar re-implementation of the reflected branch for the
    harmonic drift with linear shear (plain python floats throughout)."""
    bx = [-x[0], -x[1]]
    by = [-y[0], -y[1]]
    fx = [x[1], 0.0]
    gap = [y[i] - x[i] + dt * (by[i] - bx[i] - eta * fx[i]) for i in range(2)]
    norm = math.hypot(gap[0], gap[1])
    e = [gap[0] / norm, gap[1] / norm]
    dot = e[0] * g[0] + e[1] * g[1]
    refl = [g[i] - 2.0 * dot * e[i] for i in range(2)]
    sig = math.sqrt(2.0 * dt / beta)
    return [y[i] + dt * by[i] + sig * refl[i] for i in range(2)]


class TestStickyStep:
    def test_glued_forever_when_unperturbed(self, rng):
        model = make_harmonic()
        p = SimParams(dt=0.01, beta=1.0, eta=0.0, n_steps=1)
        state = CoupledState.from_pair(np.array([0.5, -0.5]), np.array([0.5, -0.5]))
        for _ in range(100):
            rep = sticky_step(state, CouplingNoise(rng.normal(size=2), rng.random()), model, p)
            assert rep.p == 1.0 and rep.branch == MERGED
            state = rep.next
            assert state.met

    def test_u_zero_always_merges(self, rng):
        model = make_harmonic().with_forcing(linear_shear())
        p = SimParams(dt=0.01, beta=1.0, eta=0.3, n_steps=1)
        state = CoupledState.from_pair(rng.normal(size=2), rng.normal(size=2))
        rep = sticky_step(state, CouplingNoise(rng.normal(size=2), 0.0), model, p)
        assert rep.branch == MERGED
        assert np.array_equal(rep.next.x, rep.next.y)

    def test_x_marginal_is_em_step(self, rng):
        model = make_harmonic().with_forcing(linear_shear())
        p = SimParams(dt=0.01, beta=1.0, eta=0.1, n_steps=1)
        x, y = rng.normal(size=2), rng.normal(size=2)
        g = rng.normal(size=2)
        rep = sticky_step(CoupledState.from_pair(x, y), CouplingNoise(g, rng.random()), model, p)
        assert np.array_equal(rep.next.x, em_step(x, model, p, g))

    def test_reflected_branch_against_scalar_reimplementation(self, rng):
        model = make_harmonic().with_forcing(linear_shear())
        p = SimParams(dt=0.05, beta=1.0, eta=0.1, n_steps=1)
        checked = 0
        while checked < 20:
            x, y = rng.normal(size=2), rng.normal(size=2)
            g = rng.normal(size=2)
            pm = meeting_probability(x, y, g, model, p)
            if pm > 0.5:
                continue
            u = 0.5 * (1 + pm)  # strictly above the meeting probability
            rep = sticky_step(CoupledState.from_pair(x, y), CouplingNoise(g, u), model, p)
            assert rep.branch == REFLECTED
            expected = _scalar_sticky_reflected(list(x), list(y), list(g), p.dt, p.eta, p.beta)
            assert rep.next.y == pytest.approx(expected, rel=1e-12, abs=1e-14)
            checked += 1

    def test_report_invariant(self, rng):
        model = make_harmonic().with_forcing(sinusoidal_shear())
        p = SimParams(dt=0.02, beta=1.0, eta=0.2, n_steps=1)
        state = CoupledState.from_pair(rng.normal(size=2), rng.normal(size=2))
        for _ in range(300):
            n = CouplingNoise(rng.normal(size=2), rng.random())
            rep = sticky_step(state, n, model, p)
            assert 0.0 <= rep.p <= 1.0
            assert (rep.branch == MERGED) == (n.u <= rep.p)
            state = rep.next


class TestSyncStep:
    def test_noise_cancels_exactly(self, rng):
        model = make_harmonic()
        p = SimParams(dt=0.05, beta=1.0, eta=0.0, n_steps=1)
        for _ in range(20):
            x, y = rng.normal(size=2), rng.normal(size=2)
            nxt = sync_step(CoupledState.from_pair(x, y), rng.normal(size=2), model, p)
            assert np.linalg.norm(nxt.x - nxt.y) == pytest.approx(
                (1 - p.dt) * np.linalg.norm(x - y), rel=1e-13
            )

    def test_met_stays_met_unperturbed(self, rng):
        model = make_harmonic()
        p = SimParams(dt=0.05, beta=1.0, eta=0.0, n_steps=1)
        x = rng.normal(size=2)
        nxt = sync_step(CoupledState.from_pair(x, x.copy()), rng.normal(size=2), model, p)
        assert nxt.met

    def test_distance_growth_bound(self, rng):
        # pathwise: |x'-y'| <= (1-dt)|x-y| + dt*eta*|F(x)| with |F| <= 1
        model = make_harmonic().with_forcing(sinusoidal_shear())
        p = SimParams(dt=0.01, beta=1.0, eta=0.05, n_steps=1)
        state = CoupledState.from_pair(rng.normal(size=2), rng.normal(size=2))
        for _ in range(500):
            prev = np.linalg.norm(state.x - state.y)
            state = sync_step(state, rng.normal(size=2), model, p)
            bound = (1 - p.dt) * prev + p.dt * p.eta * 1.0
            assert np.linalg.norm(state.x - state.y) <= bound + 1e-12


class TestHybridStep:
    def test_contractive_pair_takes_sync_branch(self, rng):
        model = make_harmonic()
        p = SimParams(dt=0.05, beta=1.0, eta=0.0, n_steps=1)
        x, y = rng.normal(size=2), rng.normal(size=2)
        g = rng.normal(size=2)
        rep = hybrid_step(CoupledState.from_pair(x, y), CouplingNoise(g, rng.random()), model, p)
        expected = sync_step(CoupledState.from_pair(x, y), g, model, p)
        assert np.array_equal(rep.next.x, expected.x)
        assert np.array_equal(rep.next.y, expected.y)
        assert np.array_equal(rep.e, np.zeros(2))

    def test_met_pair_stays_glued_unperturbed(self, rng):
        model = make_harmonic()
        p = SimParams(dt=0.05, beta=1.0, eta=0.0, n_steps=1)
        x = rng.normal(size=2)
        state = CoupledState.from_pair(x, x.copy())
        for _ in range(50):
            rep = hybrid_step(state, CouplingNoise(rng.normal(size=2), rng.random()), model, p)
            assert rep.branch == MERGED
            state = rep.next
            assert state.met

    def test_expanding_pair_takes_sticky_branch(self):
        # across the central bump of the cosine well the drift separates the pair
        L = 2 * math.pi
        model = make_cosine_well(L)
        p = SimParams(dt=0.005, beta=1.0, eta=0.0, n_steps=1)
        delta = 0.3
        x = np.array([L / 2 + delta, L / 2])
        y = np.array([L / 2 - delta, L / 2])
        ip = float((x - y) @ (model.drift(x) - model.drift(y)))
        assert ip > 0
        rep = hybrid_step(CoupledState.from_pair(x, y), CouplingNoise(np.array([0.1, -0.2]), 0.999999), model, p)
        assert np.linalg.norm(rep.e) == pytest.approx(1.0)  # sticky machinery engaged

    def test_zero_inner_product_routes_to_sticky(self, rng):
        model = zero_drift_model(2)
        p = SimParams(dt=0.05, beta=1.0, eta=0.0, n_steps=1)
        x, y = rng.normal(size=2), rng.normal(size=2)
        rep = hybrid_step(CoupledState.from_pair(x, y), CouplingNoise(rng.normal(size=2), 0.9999999), model, p)
        assert np.linalg.norm(rep.e) == pytest.approx(1.0)


class TestBoundingChain:
    def test_absorbing_at_zero_unperturbed(self, rng):
        model = make_harmonic().with_forcing(sinusoidal_shear())
        p = SimParams(dt=0.005, beta=1.0, eta=0.0, n_steps=1)
        for _ in range(200):
            w = bounding_chain_step(0.0, float(rng.normal()), float(rng.random()), model, p)
            assert w == 0.0

    def test_drop_probability_one_at_zero_shift(self):
        # the zero-shift density ratio is exactly one, so any u < 1 drops to 0
        model = make_harmonic().with_forcing(sinusoidal_shear())
        p = SimParams(dt=0.005, beta=1.0, eta=0.0, n_steps=1)
        assert bounding_chain_step(0.0, -3.0, 0.999999999, model, p) == 0.0

    def test_monotone_in_w(self, rng):
        model = make_harmonic().with_forcing(sinusoidal_shear())
        p = SimParams(dt=0.005, beta=1.0, eta=0.1, n_steps=1)
        for _ in range(300):
            g, u = float(rng.normal()), float(rng.random())
            ws = np.sort(rng.uniform(0, 4, size=5))
            vals = [bounding_chain_step(float(w), g, u, model, p) for w in ws]
            assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_requires_constants(self):
        model = make_cosine_well(1.0)
        p = SimParams(dt=0.005, beta=1.0, eta=0.1, n_steps=1)
        with pytest.raises(ParameterError):
            bounding_chain_step(1.0, 0.0, 0.5, model, p)

    def test_dt_condition(self):
        model = make_harmonic().with_forcing(sinusoidal_shear())
        p = SimParams(dt=0.45, beta=1.0, eta=0.1, n_steps=1)
        with pytest.raises(ParameterError):
            bounding_chain_step(1.0, 0.0, 0.5, model, p)
