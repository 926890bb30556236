import math

import numpy as np
import pytest

from levyem.engine import DriftSpec, drift_cos, drift_rough
from levyem.errors import DomainError, ResolutionError, StiffnessError
from levyem.models import (LevyModel, SubordinatorSpec, balance_check,
                           char_exponent_radial, kappa_exponent)
from levyem.spectral import (SpaceGrid, density_fft, grad_l1_norm,
                             gradient_scaling_exponent, holder_seminorm,
                             kolmogorov_residual, picard_solve,
                             resolvent_source, second_l1_norm, semigroup_apply,
                             suggest_grid)

STABLE15 = LevyModel.isotropic_stable(1.5)


def mode(grid, k):
    return np.cos(grid.dual[k] * grid.nodes)


class TestDensity:
    def test_brownian_half_is_standard_normal(self):
        # CF convention exp(-t |xi|^2) makes p_{0.5} the unit normal
        grid = SpaceGrid(40.0, 2048)
        tab = density_fft(LevyModel.brownian(), 0.5, grid)
        centre = tab.values[np.argmin(np.abs(grid.nodes))]
        assert centre == pytest.approx(1.0 / math.sqrt(2.0 * math.pi), abs=1e-9)
        assert tab.mass == pytest.approx(1.0, abs=1e-6)

    def test_cauchy_centre(self):
        model = LevyModel.isotropic_stable(1.0, strict=False)
        grid = SpaceGrid(4096.0, 2 ** 17)
        tab = density_fft(model, 1.0, grid)
        centre = tab.values[np.argmin(np.abs(grid.nodes))]
        assert centre == pytest.approx(1.0 / math.pi, abs=1e-6)

    def test_unit_mass_across_catalog(self):
        for model in (STABLE15, LevyModel.relativistic_stable(1.5, 1.0),
                      LevyModel.tempered_stable(1.5, 1.0)):
            grid = suggest_grid(model, 0.2, 0.5, tail_target=1e-6,
                                max_points=2 ** 18)
            tab = density_fft(model, 0.3, grid)
            assert abs(tab.mass - 1.0) <= 1e-6
            assert tab.values.min() >= 0.0

    def test_underresolved_grid_raises(self):
        with pytest.raises(ResolutionError):
            density_fft(STABLE15, 0.01, SpaceGrid(40.0, 64))

    def test_tail_target_met_for_light_tails(self):
        model = LevyModel.relativistic_stable(1.5, 1.0)
        grid = suggest_grid(model, 0.1, 0.4)
        tab = density_fft(model, 0.4, grid)
        assert tab.tail_estimate < 1e-8


class TestGradientNorms:
    def test_gaussian_grad_l1_is_twice_peak(self):
        # unimodal symmetric density: int |p'| = 2 p(0)
        grid = SpaceGrid(40.0, 2 ** 14)
        tab = density_fft(LevyModel.brownian(), 0.5, grid)
        assert grad_l1_norm(tab) == pytest.approx(2.0 / math.sqrt(2.0 * math.pi),
                                                  rel=1e-3)

    def test_stable_time_scaling_exact(self):
        # |p'| tails decay fast, so a modest box with fine spacing beats the
        # wide unit-mass grids here
        grid = SpaceGrid(64.0, 2 ** 15)
        base = grad_l1_norm(density_fft(STABLE15, 1.0, grid))
        for t in (0.01, 0.1, 0.5):
            val = grad_l1_norm(density_fft(STABLE15, t, grid))
            assert val == pytest.approx(t ** (-1.0 / 1.5) * base, rel=1e-3)

    def test_reflection_invariance(self):
        grid = SpaceGrid(40.0, 2048)
        tab = density_fft(LevyModel.brownian(), 0.5, grid)
        flipped = np.abs(tab.deriv1[::-1])
        direct = np.abs(tab.deriv1)
        assert float(np.trapezoid(flipped, dx=grid.h)) == pytest.approx(
            grad_l1_norm(tab), abs=1e-15)

    def test_self_similarity_invariant(self):
        grid = SpaceGrid(64.0, 2 ** 15)
        products = [grad_l1_norm(density_fft(STABLE15, t, grid)) * t ** (1.0 / 1.5)
                    for t in np.geomspace(0.01, 1.0, 5)]
        assert max(products) / min(products) - 1.0 < 1e-3


class TestGradientScaling:
    def test_brownian_slope(self):
        res = gradient_scaling_exponent(LevyModel.brownian(), np.geomspace(0.05, 0.8, 6))
        assert res.slope == pytest.approx(-0.5, abs=0.01)

    def test_stable_slope(self):
        res = gradient_scaling_exponent(STABLE15, np.geomspace(0.05, 0.8, 6))
        assert res.slope == pytest.approx(-1.0 / 1.5, abs=0.01)
        assert res.propagation_ok

    def test_relativistic_small_time_window(self):
        # at high frequency the exponent is comparable to the stable one, so
        # the small-t gradient scaling approaches -1/alpha
        model = LevyModel.relativistic_stable(1.5, 1.0)
        res = gradient_scaling_exponent(model, np.geomspace(1e-3, 1e-2, 5))
        assert abs(res.slope - (-1.0 / 1.5)) <= 0.1

    def test_needs_four_points(self):
        with pytest.raises(DomainError):
            gradient_scaling_exponent(STABLE15, (0.1, 0.2, 0.4))


class TestSemigroup:
    def test_preserves_constants(self):
        grid = SpaceGrid(16 * math.pi, 1024)
        out = semigroup_apply(np.ones(grid.n_points), 0.7, STABLE15, grid)
        assert np.max(np.abs(out - 1.0)) <= 1e-8

    def test_fourier_eigenfunction(self):
        grid = SpaceGrid(16 * math.pi, 1024)
        g = mode(grid, 5)
        out = semigroup_apply(g, 0.3, STABLE15, grid)
        lam = math.exp(-0.3 * char_exponent_radial(STABLE15, grid.dual[5]))
        assert np.max(np.abs(out - lam * g)) <= 1e-12

    def test_semigroup_property(self):
        grid = SpaceGrid(16 * math.pi, 1024)
        gen = np.random.default_rng(0)
        g = np.exp(-0.5 * grid.nodes ** 2) * np.cos(grid.nodes) + 0.1 * gen.standard_normal(grid.n_points)
        one = semigroup_apply(semigroup_apply(g, 0.2, STABLE15, grid), 0.3, STABLE15, grid)
        two = semigroup_apply(g, 0.5, STABLE15, grid)
        assert np.max(np.abs(one - two)) <= 1e-8

    def test_small_time_continuity_against_direct_convolution(self):
        grid = SpaceGrid(16 * math.pi, 2048)
        # smoothed indicator of [-2, 2]
        g = 0.5 * (np.tanh(4.0 * (grid.nodes + 2.0)) - np.tanh(4.0 * (grid.nodes - 2.0)))
        t = 1e-4
        out = semigroup_apply(g, t, STABLE15, grid)
        assert float(np.max(np.abs(out - g))) < 0.01  # sup-norm continuity as t -> 0

        # direct quadrature oracle at a few interior nodes: E g(x + L_t) by
        # convolving with the table of p_t
        tab = density_fft(STABLE15, t, SpaceGrid(16 * math.pi, 2 ** 18))
        y, py, hy = tab.grid.nodes, tab.values, tab.grid.h
        for x in (-2.0, 0.0, 1.5):
            j = int(round((x + grid.half_width) / grid.h))
            xg = grid.nodes[j]
            gx = 0.5 * (np.tanh(4.0 * (xg + y + 2.0)) - np.tanh(4.0 * (xg + y - 2.0)))
            oracle = float(np.trapezoid(gx * py, dx=hy))
            assert out[j] == pytest.approx(oracle, abs=5e-6)


class TestResolventSource:
    def test_constant_source_integrates_to_t(self):
        grid = SpaceGrid(16 * math.pi, 1024)
        u = resolvent_source(np.ones(grid.n_points), 0.7, STABLE15, grid)
        assert np.max(np.abs(u - 0.7)) <= 1e-12

    def test_single_mode_closed_form(self):
        grid = SpaceGrid(16 * math.pi, 1024)
        g = mode(grid, 7)
        t = 0.6
        psi0 = char_exponent_radial(STABLE15, grid.dual[7])
        u = resolvent_source(g, t, STABLE15, grid)
        assert np.max(np.abs(u - (1.0 - math.exp(-t * psi0)) / psi0 * g)) <= 1e-10

    def test_time_dependent_source(self):
        # g(s, x) = e^{-s} cos(xi0 x): per dual mode the integral has the
        # closed form (e^{-t psi} - e^{-t}) / (1 - psi) ... computed directly
        grid = SpaceGrid(16 * math.pi, 1024)
        k = 6
        xi0 = grid.dual[k]
        psi0 = char_exponent_radial(STABLE15, xi0)
        t = 0.8

        def g(s):
            return math.exp(-s) * mode(grid, k)

        u = resolvent_source(g, t, STABLE15, grid, n_nodes=512)
        target = (math.exp(-t) - math.exp(-t * psi0)) / (psi0 - 1.0)
        assert np.max(np.abs(u - target * mode(grid, k))) <= 1e-6

    def test_contractivity_bound(self):
        grid = SpaceGrid(16 * math.pi, 1024)
        gen = np.random.default_rng(1)
        g = np.cos(grid.nodes) + 0.3 * np.cos(3 * grid.nodes + 1.0)
        t = 0.9
        u = resolvent_source(g, t, STABLE15, grid)
        assert np.max(np.abs(u)) <= t * np.max(np.abs(g)) * (1.0 + 1e-12)

    def test_zero_horizon(self):
        grid = SpaceGrid(16 * math.pi, 512)
        u = resolvent_source(np.ones(grid.n_points), 0.0, STABLE15, grid)
        assert np.array_equal(u, np.zeros(grid.n_points))


class TestHolderSeminorm:
    def test_constant_is_zero(self):
        assert holder_seminorm(np.full(512, 3.7), 0.5, 0.01) == 0.0

    def test_linear_slope_one(self):
        x = np.linspace(-1.0, 1.0, 257)
        h = x[1] - x[0]
        assert holder_seminorm(x, 1.0, h) == pytest.approx(1.0, rel=1e-12)

    def test_square_root_cusp(self):
        x = np.linspace(-1.0, 1.0, 513)
        h = x[1] - x[0]
        vals = np.sqrt(np.abs(x))
        assert holder_seminorm(vals, 0.5, h) == pytest.approx(1.0, abs=1e-2)


class TestPicard:
    def test_zero_drift_reduces_to_resolvent_in_reversed_time(self):
        grid = SpaceGrid(16 * math.pi, 512)
        g = mode(grid, 3)
        T = 0.4
        zero = DriftSpec(lambda t, x: np.zeros_like(x), 1.0, 1.0, 1e-300)
        sol = picard_solve(zero, g, T, STABLE15, grid, n_time=64)
        assert len(sol.diffs) == 1  # recursion closes after a single correction
        for j in (0, 13, 50):
            t = sol.times[j]
            ref = resolvent_source(g, T - t, STABLE15, grid)
            assert np.max(np.abs(sol.u[j] - ref)) <= 1e-9

    def test_zero_source_is_zero(self):
        grid = SpaceGrid(16 * math.pi, 512)
        sol = picard_solve(drift_cos(), np.zeros(grid.n_points), 0.4, STABLE15,
                           grid, n_time=32)
        assert sol.diffs == ()
        assert np.array_equal(sol.u, np.zeros_like(sol.u))

    def test_terminal_condition_exact(self):
        grid = SpaceGrid(16 * math.pi, 512)
        sol = picard_solve(drift_cos(), np.cos(grid.nodes), 0.3, STABLE15, grid,
                           n_time=64)
        assert np.array_equal(sol.u[-1], np.zeros(grid.n_points))

    def test_contraction_below_half_once_certified(self):
        grid = SpaceGrid(16 * math.pi, 1024)
        g = np.cos(grid.nodes)
        sol = picard_solve(drift_cos(), g, 0.25, STABLE15, grid, n_time=128,
                           target_ratio=0.5)
        assert sol.converged and sol.certified
        assert len(sol.ratios) >= 5
        assert all(r <= 0.5 for r in sol.ratios)

    def test_certificate_shrinks_with_horizon(self):
        grid = SpaceGrid(16 * math.pi, 1024)
        g = np.cos(grid.nodes)
        cs = []
        for T in (0.3, 0.15, 0.075):
            sol = picard_solve(drift_cos(), g, T, STABLE15, grid, n_time=64)
            cs.append(sol.certificate["c_of_T"])
        assert cs[0] > cs[1] > cs[2]

    def test_unbalanced_pair_is_refused(self):
        model = LevyModel.isotropic_stable(1.05)
        rough = drift_rough(0.02)
        assert kappa_exponent(model.gradient_index, model.moments.gamma0,
                              rough.beta) >= 1.0
        grid = SpaceGrid(16 * math.pi, 512)
        with pytest.raises(DomainError):
            picard_solve(rough, np.cos(grid.nodes), 0.2, model, grid)
        sol = picard_solve(rough, np.cos(grid.nodes), 0.2, model, grid,
                           n_time=32, force_unbalanced=True)
        assert not sol.certified
        assert sol.kappa >= 1.0

    def test_stiffness_error_when_drift_overwhelms(self):
        grid = SpaceGrid(16 * math.pi, 256)
        huge = DriftSpec(lambda t, x: 500.0 * np.cos(x), 1.0, 1.0, 500.0)
        with pytest.raises(StiffnessError):
            picard_solve(huge, np.cos(grid.nodes), 4.0, STABLE15, grid,
                         n_time=32, max_halvings=2)


class TestKolmogorovResidual:
    def test_zero_everything(self):
        grid = SpaceGrid(16 * math.pi, 512)
        zero = DriftSpec(lambda t, x: np.zeros_like(x), 1.0, 1.0, 1e-300)
        sol = picard_solve(zero, np.zeros(grid.n_points), 0.3, STABLE15, grid,
                           n_time=32)
        assert kolmogorov_residual(sol, zero, np.zeros(grid.n_points), STABLE15) == 0.0

    def test_single_mode_zero_drift(self):
        grid = SpaceGrid(16 * math.pi, 1024)
        g = mode(grid, 4)
        zero = DriftSpec(lambda t, x: np.zeros_like(x), 1.0, 1.0, 1e-300)
        sol = picard_solve(zero, g, 0.25, STABLE15, grid, n_time=128)
        assert kolmogorov_residual(sol, zero, g, STABLE15) <= 1e-4

    def test_full_solve_residual_and_refinement(self):
        g_coarse = SpaceGrid(16 * math.pi, 1024)
        src = np.cos(g_coarse.nodes)
        sol = picard_solve(drift_cos(), src, 0.25, STABLE15, g_coarse, n_time=128)
        res_coarse = kolmogorov_residual(sol, drift_cos(), src, STABLE15)
        assert res_coarse <= 5e-3

        g_fine = SpaceGrid(16 * math.pi, 2048)
        src_f = np.cos(g_fine.nodes)
        sol_f = picard_solve(drift_cos(), src_f, 0.25, STABLE15, g_fine, n_time=256)
        res_fine = kolmogorov_residual(sol_f, drift_cos(), src_f, STABLE15)
        assert res_fine <= res_coarse / 2.0


class TestBalanceWitness:
    def test_kappa_below_one_iff_balance(self):
        rng = np.random.default_rng(17)
        for _ in range(300):
            alpha = rng.uniform(1.0 + 1e-9, 2.0)
            gamma0 = rng.uniform(1.0, 2.0)
            beta = rng.uniform(0.0, 1.0)
            assert (kappa_exponent(alpha, gamma0, beta) < 1.0) == balance_check(
                alpha, gamma0, beta)
