import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gmlattice import (
    PerturbationPatch,
    ScatterContext,
    SolverSettings,
    ValidationError,
    radiated_flux,
    solve_patch,
    transmission_reciprocity_check,
)


def uniform_patch(rng, L, sigma=0.05):
    a = math.sqrt(3.0) * sigma
    return PerturbationPatch(rng.uniform(-a, a, L))


class TestPatchValidation:
    def test_positive_mass_enforced(self):
        with pytest.raises(ValidationError):
            PerturbationPatch([0.2, -1.0])
        with pytest.raises(ValidationError):
            PerturbationPatch([-1.5])

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            PerturbationPatch([])

    def test_reversed(self):
        patch = PerturbationPatch([0.1, 0.2, 0.3])
        assert patch.reversed().mu == (0.3, 0.2, 0.1)


class TestUnperturbedIdentity:
    @pytest.mark.parametrize("L", [1, 7, 40])
    def test_zero_patch(self, params, wm, L):
        res = solve_patch(params, 0.5 * wm, PerturbationPatch([0.0] * L))
        assert res.R == 0.0
        assert res.T == 1.0
        assert res.D == 0.0
        assert res.energy_residual == 0.0


class TestScalarOracle:
    def test_single_site_reduction(self, params, wm):
        # L = 1 collapses to u1 = (1 - G00 d)^-1 G00 d uhat1, d = -m w^2 mu
        w = 0.5 * wm
        mu1 = 0.1
        res = solve_patch(params, w, PerturbationPatch([mu1]), audit=True)
        ctx = ScatterContext(params, w, 1)
        d = -params.m_s * w * w * mu1
        g00 = ctx.g_row[0]
        u1 = g00 * d / (1.0 - g00 * d) * (ctx.a_hat * ctx.z_sw)
        f1 = d * (u1 + ctx.a_hat * ctx.z_sw)
        r_scalar = f1 * ctx.z_sw / (ctx.a_hat * ctx.z_kprime)
        t_scalar = 1.0 + f1 / ctx.z_sw / (ctx.a_hat * ctx.z_kprime)
        assert abs(res.R - r_scalar) < 1e-12
        assert abs(res.T - t_scalar) < 1e-12
        assert res.energy_residual < 1e-6

    def test_born_linear_response(self, params, wm):
        # R/mu converges to the Born slope -m w^2 z_sw^2 / (z K') as mu -> 0
        w = 0.5 * wm
        ctx = ScatterContext(params, w, 1)
        born = -params.m_s * w * w * ctx.z_sw**2 / ctx.z_kprime
        slopes = []
        for mu1 in (1e-3, 1e-4):
            slopes.append(solve_patch(params, w, PerturbationPatch([mu1])).R / mu1)
        assert abs(slopes[1] - born) < 10.0 * abs(slopes[0] - born)
        assert slopes[1] == pytest.approx(born, rel=1e-3)


class TestEnergyConservation:
    def test_random_patches_three_frequencies(self, params, wm, rng):
        worst = 0.0
        for _ in range(20):
            patch = uniform_patch(rng, 40)
            for frac in (0.2, 0.5, 0.8):
                res = solve_patch(params, frac * wm, patch, audit=True)
                worst = max(worst, res.energy_residual)
                assert abs(res.R) ** 2 + abs(res.T) ** 2 <= 1.0 + 1e-12
        assert worst < 1e-6

    def test_flux_breakdown_zero_patch(self, params, wm):
        patch = PerturbationPatch([0.0] * 5)
        res = solve_patch(params, 0.5 * wm, patch)
        eb = radiated_flux(params, 0.5 * wm, patch, res.boundary_field)
        assert eb.e_ref == 0.0
        assert eb.e_half == 0.0
        assert eb.e_trans == pytest.approx(eb.e_inc, rel=1e-14)

    def test_work_functional_two_routes(self, params, wm, rng):
        patch = uniform_patch(rng, 10)
        res = solve_patch(params, 0.5 * wm, patch)
        eb = radiated_flux(params, 0.5 * wm, patch, res.boundary_field)
        assert eb.work_contour == pytest.approx(eb.work_direct, abs=1e-6 * eb.e_inc)

    def test_conservation_ratio(self, params, wm, rng):
        patch = uniform_patch(rng, 25)
        res = solve_patch(params, 0.5 * wm, patch)
        eb = radiated_flux(params, 0.5 * wm, patch, res.boundary_field)
        assert eb.residual < 1e-6
        # the contour loss agrees with the algebraic one
        assert eb.d_contour == pytest.approx(res.D, abs=1e-6)


class TestReciprocity:
    def test_zero_patch_exact(self, params, wm):
        assert transmission_reciprocity_check(
            params, 0.5 * wm, PerturbationPatch([0.0] * 6)
        ) == 0.0

    def test_palindromic_patch(self, params, wm):
        patch = PerturbationPatch([0.1, -0.05, 0.1])
        assert transmission_reciprocity_check(params, 0.5 * wm, patch) < 1e-14

    @settings(max_examples=15, deadline=None)
    @given(
        mu=st.lists(st.floats(-0.3, 0.3), min_size=2, max_size=12),
        frac=st.sampled_from([0.3, 0.5, 0.7]),
    )
    def test_random_patches(self, params, wm, mu, frac):
        value = transmission_reciprocity_check(params, frac * wm, PerturbationPatch(mu))
        assert value < 1e-10


class TestConventions:
    def test_amplitude_convention_coherence(self, params, wm, rng):
        patch = uniform_patch(rng, 12)
        res_n = solve_patch(params, 0.5 * wm, patch)
        res_u = solve_patch(params, 0.5 * wm, patch, SolverSettings(amplitude="unit"))
        assert abs(res_n.R - res_u.R) < 1e-12
        assert abs(res_n.T - res_u.T) < 1e-12

    def test_condition_estimate_attached(self, params, wm, rng):
        res = solve_patch(params, 0.5 * wm, uniform_patch(rng, 8))
        assert math.isfinite(res.cond_estimate) and res.cond_estimate >= 1.0
        assert not res.flagged


class TestFrequencyLimits:
    def test_transmission_limits_fixed_patch(self, params, wm):
        # |T|^2 -> 1 as omega -> 0 and -> 0 as omega -> omega_max
        rng = np.random.default_rng(7)
        patch = uniform_patch(rng, 40)
        low = solve_patch(params, 0.05 * wm, patch)
        high = solve_patch(params, 0.995 * wm, patch)
        assert abs(low.T) ** 2 > 0.99
        assert abs(high.T) ** 2 < 0.05
        # loss stays physical across the band
        for frac in (0.05, 0.3, 0.6, 0.9, 0.995):
            res = solve_patch(params, frac * wm, patch)
            assert -1e-12 <= res.D <= 1.0
