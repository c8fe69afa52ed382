import math

import numpy as np
import pytest

from irsdm.channel import los_channels
from irsdm.errors import InfeasibleError
from irsdm.precoding import ConstellationSpec, ci_margins, solve_min_power, stack_channels
from irsdm.weights import (
    alternate_optimize,
    default_penalty,
    penalty_upper_bound,
    solve_weights_for_amplitudes,
    update_amplitude,
)

from conftest import make_budget, make_small_scene
from oracles import golden_section_max


def aligned_setup(rng, n=6, amplitude=0.8, phase=0.6):
    """Channel/weights pair whose received point sits exactly on the target ray."""
    h = rng.normal(size=n) + 1j * rng.normal(size=n)
    w = h.conj() / np.linalg.norm(h) ** 2 * amplitude * np.exp(1j * phase)
    return h, w


class TestUpdateAmplitude:
    def test_aligned_case(self, rng):
        h, w = aligned_setup(rng, amplitude=0.8, phase=0.6)
        xi = 2.5
        assert update_amplitude(h, w, 0.6, xi) == pytest.approx(0.8 + 1.0 / (2.0 * xi), rel=1e-12)

    def test_large_penalty_limit(self, rng):
        h, w = aligned_setup(rng, amplitude=0.8, phase=0.6)
        assert update_amplitude(h, w, 0.6, 1e12) == pytest.approx(0.8, rel=1e-9)

    def test_maximizes_penalized_objective(self, rng):
        # The update is the argmax over t of t - xi * |t e^{j\phase} - hw|^2.
        h = rng.normal(size=5) + 1j * rng.normal(size=5)
        w = rng.normal(size=5) + 1j * rng.normal(size=5)
        phase = 1.1
        xi = 3.7
        y = complex(h @ w)
        def objective(t):
            return t - xi * abs(t * np.exp(1j * phase) - y) ** 2
        t_star = update_amplitude(h, w, phase, xi)
        t_gold = golden_section_max(objective, -10.0, 10.0, tol=1e-12)
        assert t_star == pytest.approx(t_gold, abs=1e-8)

    def test_stationarity(self, rng):
        # The objective is quadratic in t, so the central difference is exact
        # up to roundoff at the returned stationary point.
        h = rng.normal(size=5) + 1j * rng.normal(size=5)
        w = rng.normal(size=5) + 1j * rng.normal(size=5)
        phase, xi = 0.3, 1.9
        y = complex(h @ w)
        t_star = update_amplitude(h, w, phase, xi)
        eps = 1e-4
        def objective(t):
            return t - xi * abs(t * np.exp(1j * phase) - y) ** 2
        deriv = (objective(t_star + eps) - objective(t_star - eps)) / (2 * eps)
        assert abs(deriv) < 1e-10

    def test_rejects_nonpositive_penalty(self, rng):
        h, w = aligned_setup(rng)
        with pytest.raises(ValueError):
            update_amplitude(h, w, 0.0, 0.0)


class TestPenaltyBound:
    def test_unit_denominator(self, rng):
        h, w = aligned_setup(rng, amplitude=1.0, phase=0.0)
        # Re{h w} = 1.0, so a floor of 1.5 gives denominator 1 and bound 1.
        assert penalty_upper_bound(h, w, 0.0, 1.5) == pytest.approx(1.0, rel=1e-12)

    def test_inactive_constraint_sentinel(self, rng):
        h, w = aligned_setup(rng, amplitude=2.0, phase=0.0)
        assert penalty_upper_bound(h, w, 0.0, 1.0) == math.inf

    def test_bound_recovers_floor(self, rng):
        h, w = aligned_setup(rng, amplitude=0.4, phase=0.9)
        floor = 0.7
        xi_max = penalty_upper_bound(h, w, 0.9, floor)
        assert update_amplitude(h, w, 0.9, xi_max) == pytest.approx(floor, rel=1e-12)

    def test_schedule(self):
        assert default_penalty([math.inf, math.inf]) == 1.0
        assert default_penalty([2.0, math.inf, 4.0]) == pytest.approx(1.8)


class TestSolveForAmplitudes:
    def setup_rows(self, rng):
        scene = make_small_scene(rng, k_u=2)
        chs = los_channels(scene, make_budget())
        phases = np.zeros(chs.m)
        return stack_channels(chs, phases)

    def test_fixed_point_of_unchanged_amplitudes(self, rng):
        rows = self.setup_rows(rng)
        amps = np.array([3e-4, 4e-4])
        user_phases = np.array([0.5, 0.5])
        w1 = solve_weights_for_amplitudes(rows, amps, user_phases, 0.0, 1.2)
        w2 = solve_weights_for_amplitudes(rows, amps, user_phases, 0.0, 1.2)
        assert np.allclose(w1, w2)

    def test_homogeneity(self, rng):
        rows = self.setup_rows(rng)
        amps = np.array([3e-4, 4e-4])
        user_phases = np.array([0.5, 0.5])
        w1 = solve_weights_for_amplitudes(rows, amps, user_phases, 1e-5, 1.2)
        w3 = solve_weights_for_amplitudes(rows, 3.0 * amps, user_phases, 3e-5, 1.2)
        assert np.allclose(w3, 3.0 * w1, rtol=1e-10)

    def test_residuals_vanish(self, rng):
        rows = self.setup_rows(rng)
        amps = np.array([3e-4, 4e-4])
        user_phases = np.array([0.8, 0.8])
        w = solve_weights_for_amplitudes(rows, amps, user_phases, 0.0, 0.3)
        targets = np.concatenate([amps * np.exp(1j * user_phases), [0.0]])
        assert np.max(np.abs(rows @ w - targets)) < 1e-12


class TestAlternateOptimize:
    def setup_state(self, rng, p_max_scale=16.0):
        scene = make_small_scene(rng, k_u=2)
        budget = make_budget()
        chs = los_channels(scene, budget)
        const = ConstellationSpec.psk(4, rng)
        phases = np.zeros(chs.m)
        p_probe = 1e9
        margin = ci_margins(chs, const, 1e-4, 0.05, p_probe, budget.noise_power)
        state = solve_min_power(chs, const, margin, phases, p_probe, symbols=[0])
        rows = stack_channels(chs, phases)
        p_max = p_max_scale * state.p_min
        return rows, const, margin, state, p_max

    def test_budget_at_start_returns_initial(self, rng):
        rows, const, margin, state, _ = self.setup_state(rng)
        result = alternate_optimize(
            rows,
            np.full(2, const.user_phases[0]),
            margin.r_min_k,
            state.amplitudes[0],
            state.weights[0],
            const.eve_amplitude,
            float(const.eve_phases[0]),
            p_max=state.p_min,
        )
        assert np.allclose(result.amplitudes, state.amplitudes[0])
        assert np.allclose(result.weights, state.weights[0])

    def test_amplitude_sum_grows_until_budget(self, rng):
        rows, const, margin, state, p_max = self.setup_state(rng)
        result = alternate_optimize(
            rows,
            np.full(2, const.user_phases[0]),
            margin.r_min_k,
            state.amplitudes[0],
            state.weights[0],
            const.eve_amplitude,
            float(const.eve_phases[0]),
            p_max=p_max,
        )
        sums = [row[2] for row in result.trace]
        assert all(b >= a - 1e-15 for a, b in zip(sums, sums[1:]))
        assert sums[-1] > sums[0]
        assert result.p_min <= p_max * (1 + 1e-9)
        assert np.all(result.amplitudes >= margin.r_min_k - 1e-12)

    def test_infeasible_start_raises(self, rng):
        rows, const, margin, state, _ = self.setup_state(rng)
        with pytest.raises(InfeasibleError):
            alternate_optimize(
                rows,
                np.full(2, const.user_phases[0]),
                margin.r_min_k,
                state.amplitudes[0],
                state.weights[0],
                const.eve_amplitude,
                float(const.eve_phases[0]),
                p_max=state.p_min / 2.0,
            )

    def test_final_weights_meet_targets(self, rng):
        rows, const, margin, state, p_max = self.setup_state(rng)
        result = alternate_optimize(
            rows,
            np.full(2, const.user_phases[0]),
            margin.r_min_k,
            state.amplitudes[0],
            state.weights[0],
            const.eve_amplitude,
            float(const.eve_phases[0]),
            p_max=p_max,
        )
        targets = np.concatenate(
            [
                result.amplitudes * np.exp(1j * const.user_phases[0]),
                [const.eve_amplitude * np.exp(1j * const.eve_phases[0])],
            ]
        )
        assert np.max(np.abs(rows @ result.weights - targets)) < 1e-10
