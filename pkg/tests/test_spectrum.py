import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gmlattice import (
    FrequencyOutOfBand,
    NoSurfaceBand,
    SurfaceParams,
    ValidationError,
    eigenfunction_samples,
    omega_max,
    solve_dispersion,
    solve_inverse_dispersion,
    spectral_data,
    weighted_inner,
)
from gmlattice._quad import full_band_nodes

# Frozen reference values, verified by 40-digit mpmath root-finds of the two
# coupled dispersion relations and the closed-form band edge.
OMEGA_MAX_REF = 1.707600330908031
OMEGA_PI2_REF = 1.2420205221000319
ETA_PI2_REF = 0.6640349918902932
VG_PI2_REF = 0.5663799081297794


class TestOmegaMax:
    def test_closed_form_value(self, params, wm):
        assert wm == pytest.approx(OMEGA_MAX_REF, abs=1e-12)

    def test_band_inside_0_2(self, wm):
        assert 0.0 < wm < 2.0

    def test_supremum_of_dispersion_branch(self, params, wm):
        # omega(k) approaches omega_max as k -> pi (band edge as a supremum)
        w_near = solve_dispersion(params, math.pi - 1e-7).omega
        assert w_near < wm
        assert wm - w_near < 1e-7

    def test_no_band_for_uniform_lattice(self):
        with pytest.raises(NoSurfaceBand):
            omega_max(SurfaceParams(1.0, 1.0))

    def test_no_band_alpha_above_mass(self):
        with pytest.raises(NoSurfaceBand):
            omega_max(SurfaceParams(1.5, 2.0))

    def test_unit_mass_linear_fallback(self):
        # a_s = m_s (m_s - 1) = 0 falls back to the linear root
        w = omega_max(SurfaceParams(1.0, 0.5))
        assert 0.0 < w < 2.0
        w_near = solve_dispersion(SurfaceParams(1.0, 0.5), math.pi - 1e-7).omega
        assert abs(w - w_near) < 1e-6


class TestDispersion:
    def test_reference_point(self, params):
        dp = solve_dispersion(params, math.pi / 2)
        assert dp.omega == pytest.approx(OMEGA_PI2_REF, abs=1e-12)
        assert dp.eta == pytest.approx(ETA_PI2_REF, abs=1e-12)
        assert dp.residual < 1e-12

    def test_symmetry_exact(self, params):
        a = solve_dispersion(params, math.pi / 2)
        b = solve_dispersion(params, -math.pi / 2)
        assert a.omega == b.omega
        assert a.eta == b.eta
        assert a.v_group == -b.v_group

    def test_group_velocity_formula_vs_finite_difference(self, params):
        dp = solve_dispersion(params, math.pi / 2)
        h = 1e-5
        fd = (
            solve_dispersion(params, math.pi / 2 + h).omega
            - solve_dispersion(params, math.pi / 2 - h).omega
        ) / (2 * h)
        assert dp.v_group == pytest.approx(VG_PI2_REF, abs=1e-12)
        assert dp.v_group == pytest.approx(fd, abs=1e-6)

    def test_band_monotone_on_grid(self, params, wm):
        ks = np.linspace(1e-3, math.pi - 1e-6, 100)
        oms = [solve_dispersion(params, float(k)).omega for k in ks]
        assert all(b > a for a, b in zip(oms, oms[1:]))
        assert oms[-1] < wm

    def test_k_zero_rejected(self, params):
        with pytest.raises(ValidationError):
            solve_dispersion(params, 0.0)

    @settings(max_examples=30, deadline=None)
    @given(
        m_s=st.floats(0.3, 5.0),
        ratio=st.floats(0.05, 0.95),
        k=st.floats(0.01, math.pi - 0.01),
    )
    def test_property_residuals_and_signs(self, m_s, ratio, k):
        p = SurfaceParams(m_s, ratio * m_s)
        dp = solve_dispersion(p, k)
        assert dp.residual < 1e-12
        assert dp.eta > 0.0
        assert 0.0 < dp.omega < 2.0
        assert dp.v_group > 0.0  # right-going for k in (0, pi)


class TestInverseDispersion:
    @pytest.mark.parametrize("k", [0.3, 1.0, 2.5])
    def test_round_trip(self, params, k):
        w = solve_dispersion(params, k).omega
        assert solve_inverse_dispersion(params, w).k_sw == pytest.approx(k, abs=1e-10)

    def test_half_band_residuals(self, params, wm):
        dp = solve_inverse_dispersion(params, 0.5 * wm)
        assert dp.residual < 1e-12
        assert 0.0 < dp.k_sw < math.pi

    def test_out_of_band(self, params, wm):
        with pytest.raises(FrequencyOutOfBand):
            solve_inverse_dispersion(params, 1.01 * wm)

    def test_guard_band(self, params, wm):
        with pytest.raises(FrequencyOutOfBand):
            solve_inverse_dispersion(params, 0.9999 * wm)  # default guard 1e-3


class TestSpectralData:
    def test_discrete_eigenvalue_relations(self, params, sd_half):
        w2 = sd_half.omega2
        r1 = abs(w2 - (2.0 + sd_half.gamma0 - 2.0 * math.cosh(sd_half.beta0)))
        r2 = abs(
            params.m_s * w2
            - (params.alpha_s * sd_half.gamma0 + 1.0 - math.exp(-sd_half.beta0))
        )
        assert max(r1, r2) < 1e-12
        assert sd_half.gamma0 > w2

    def test_rho0_closed_form(self, params, sd_half):
        expected = 1.0 / (params.alpha_s + 1.0 / math.expm1(2.0 * sd_half.beta0))
        assert sd_half.rho0 == pytest.approx(expected, rel=1e-14)

    def test_rho_positive_on_band(self, sd_half):
        lo, hi = sd_half.band
        g = np.linspace(lo + 1e-9, hi - 1e-9, 101)
        assert np.all(sd_half.rho(g) > 0.0)

    def test_k_of_gamma(self, sd_half):
        g = np.array([0.5, 1.0, 3.0])
        assert np.allclose(sd_half.k_of_gamma(g), np.arccos(1.0 - g / 2.0))

    def test_completeness_at_boundary_site(self, params, sd_half):
        # alpha_s (rho0 + int rho dgamma) = 1: the delta-expansion of the
        # boundary site in the weighted eigenbasis
        g, w = full_band_nodes(sd_half.omega2, 1200)
        total = sd_half.rho0 + float((sd_half.rho(g) * w).sum())
        assert params.alpha_s * total == pytest.approx(1.0, abs=1e-10)


class TestEigenfunctions:
    def test_discrete_mode_decays(self, params, wm, sd_half):
        psi = eigenfunction_samples(params, 0.5 * wm, sd_half.gamma0, 50)
        assert psi[0] == 1.0
        assert np.all(np.diff(np.abs(psi)) < 0.0)
        assert np.allclose(psi, np.exp(sd_half.beta0 * -np.arange(51)))

    def test_band_mode_bounded(self, params, wm, sd_half):
        w2 = sd_half.omega2
        for gamma in (0.3 * w2, 0.8 * w2, w2 - 2.0, w2 - 3.5):
            psi = eigenfunction_samples(params, 0.5 * wm, gamma, 500)
            zeta = float(sd_half.zeta_of_gamma(gamma))
            bound = 1.0 + abs(params.m_s * w2 - params.alpha_s * gamma - 1.0) / math.sin(
                zeta
            )
            assert np.max(np.abs(psi)) <= bound + 1e-12

    def test_discrete_orthonormality_truncated(self, params, wm, sd_half):
        # <phi0, phi0> on a depth-D truncation; error decreases with D
        errs = []
        for depth in (500, 2000):
            psi = eigenfunction_samples(params, 0.5 * wm, sd_half.gamma0, depth)
            ip = sd_half.rho0 * weighted_inner(psi, psi, params.alpha_s).real
            errs.append(abs(ip - 1.0))
        assert errs[-1] < 1e-4
        assert errs[1] <= errs[0]

    def test_out_of_spectrum_rejected(self, params, wm, sd_half):
        from gmlattice import GammaOutOfSpectrum

        with pytest.raises(GammaOutOfSpectrum):
            eigenfunction_samples(params, 0.5 * wm, sd_half.omega2 + 0.5, 10)


class TestParseval:
    def test_compact_vector_parseval(self, params, wm, sd_half, rng):
        # random compactly supported u; modal energy reproduces the weighted
        # norm once the band quadrature is refined
        depth_u = 20
        u = rng.normal(size=depth_u + 1) + 1j * rng.normal(size=depth_u + 1)
        norm2 = weighted_inner(u, u, params.alpha_s).real

        def modal_energy(n_nodes):
            psi0 = eigenfunction_samples(params, 0.5 * wm, sd_half.gamma0, depth_u)
            phi0 = math.sqrt(sd_half.rho0) * psi0
            total = abs(weighted_inner(u, phi0, params.alpha_s)) ** 2
            g, wq = full_band_nodes(sd_half.omega2, n_nodes)
            acc = 0.0
            for gi, wi in zip(g, wq):
                psi = eigenfunction_samples(params, 0.5 * wm, float(gi), depth_u)
                phi = math.sqrt(sd_half.rho(float(gi))) * psi
                acc += wi * abs(weighted_inner(u, phi, params.alpha_s)) ** 2
            return total + acc

        coarse = abs(modal_energy(300) - norm2) / norm2
        fine = abs(modal_energy(900) - norm2) / norm2
        assert fine < 1e-3
        assert fine <= coarse + 1e-12
