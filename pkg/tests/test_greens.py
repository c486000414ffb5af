import cmath
import math

import numpy as np
import pytest

from gmlattice import (
    Kernel,
    QuadratureNotConverged,
    ValidationError,
    build_boundary_table,
    greens_boundary,
    greens_boundary_extrapolated,
    greens_boundary_spectral,
    greens_interior,
    greens_interior_spectral,
    greens_table_spectral,
    kernel_eval,
    load_table,
    save_table,
    solve_inverse_dispersion,
)


class TestKernel:
    def test_inversion_symmetry(self, params, wm, rng):
        kern = Kernel(params, 0.5 * wm, 1e-2)
        z = np.exp(1j * rng.uniform(0.0, 2.0 * math.pi, 32))
        assert np.max(np.abs(kernel_eval(kern, z) - kernel_eval(kern, 1.0 / z))) < 1e-13

    def test_surface_pole_is_kernel_zero(self, params, wm):
        dp = solve_inverse_dispersion(params, 0.5 * wm)
        z_sw = cmath.exp(1j * dp.k_sw)
        assert abs(complex(Kernel(params, 0.5 * wm, 1e-10).eval(z_sw))) < 1e-8

    def test_lambda_at_pole_equals_decay(self, params, wm):
        dp = solve_inverse_dispersion(params, 0.5 * wm)
        z_sw = cmath.exp(1j * dp.k_sw)
        lam = complex(Kernel(params, 0.5 * wm, 0.0).lam(z_sw))
        assert abs(lam - math.exp(-dp.eta)) < 1e-10

    def test_lambda_bounded_on_contour(self, params, wm):
        kern = Kernel(params, 0.5 * wm, 1e-3)
        z = np.exp(1j * np.linspace(0.0, 2.0 * math.pi, 4096, endpoint=False))
        assert np.max(np.abs(kern.lam(z))) <= 1.0 + 1e-12

    def test_pole_newton_matches_dispersion(self, params, wm):
        dp = solve_inverse_dispersion(params, 0.5 * wm)
        z = Kernel(params, 0.5 * wm, 1e-8).surface_pole()
        assert abs(cmath.phase(z) - dp.k_sw) < 1e-9
        assert abs(z) < 1.0


class TestContourRoute:
    def test_even_in_x(self, params, wm):
        kern = Kernel(params, 0.5 * wm, 1e-2)
        a = greens_boundary(kern, 3, 1 << 13)
        b = greens_boundary(kern, -3, 1 << 13)
        assert a == b

    def test_boundary_defining_equation(self, params, wm):
        # alpha_s (G1 + G-1 - 2 G0) + G(0,-1) - G0 + m_s omega^2 G0 = 1
        # (the boundary row is not absorption-regularized, so plain omega^2)
        w = 0.5 * wm
        kern = Kernel(params, w, 1e-2)
        g = lambda x, y=0: greens_interior(kern, x, y, 1 << 13)
        lhs = (
            params.alpha_s * (g(1) + g(-1) - 2.0 * g(0))
            + g(0, -1)
            - g(0)
            + w * w * params.m_s * g(0)
        )
        assert abs(lhs - 1.0) < 1e-8

    def test_bulk_stencil(self, params, wm):
        # interior stencil carries the regularized frequency (omega + i eps)^2
        w, eps = 0.5 * wm, 1e-2
        kern = Kernel(params, w, eps)
        g = lambda x, y: greens_interior(kern, x, y, 1 << 13)
        lhs = (
            g(2, -1)
            + g(0, -1)
            + g(1, 0)
            + g(1, -2)
            - 4.0 * g(1, -1)
            + complex(w, eps) ** 2 * g(1, -1)
        )
        assert abs(lhs) < 1e-8

    def test_interior_reduces_to_boundary(self, params, wm):
        kern = Kernel(params, 0.5 * wm, 1e-2)
        assert greens_interior(kern, 2, 0, 1 << 13) == greens_boundary(kern, 2, 1 << 13)

    def test_depth_decay(self, params, wm):
        kern = Kernel(params, 0.5 * wm, 1e-1)
        mags = [abs(greens_interior(kern, 0, y, 1 << 12)) for y in range(0, -21, -1)]
        assert all(b < a for a, b in zip(mags, mags[1:]))

    def test_fourier_identity(self, params, wm, rng):
        # sum_x G[x,0] z^-x K_s(z) = 1, truncated at |x| <= 400 at eps = 0.1
        kern = Kernel(params, 0.5 * wm, 1e-1)
        big = 400
        from gmlattice.greens import _contour_values

        gv = _contour_values(kern, np.arange(big + 1), 0, 1 << 14, True)
        x = np.arange(-big, big + 1)
        for theta in rng.uniform(0.0, 2.0 * math.pi, 8):
            z = cmath.exp(1j * theta)
            s = complex((gv[np.abs(x)] * z ** (-x.astype(float))).sum())
            assert abs(s * complex(kern.eval(z)) - 1.0) < 5e-3

    def test_not_converged_raises(self, params, wm):
        # at eps = 1e-6 the branch points sit ~1e-6 off the contour: the
        # trapezoid cannot satisfy its own doubling audit at 2^14 nodes
        with pytest.raises(QuadratureNotConverged) as err:
            greens_boundary(Kernel(params, 0.5 * wm, 1e-6), 3, 1 << 14)
        assert "vs" in str(err.value)  # reports both values

    def test_epsilon_and_node_validation(self, params, wm):
        with pytest.raises(ValidationError):
            greens_boundary(Kernel(params, 0.5 * wm, 0.0), 1, 1 << 13)
        with pytest.raises(ValidationError):
            greens_boundary(Kernel(params, 0.5 * wm, 1e-2), 1, 1000)  # not power of 2


class TestSpectralRoute:
    def test_matches_contour_extrapolation(self, params, wm, sd_half):
        gs = greens_table_spectral(sd_half, 11)
        for x in (0, 1, 5, 10):
            ge = greens_boundary_extrapolated(params, 0.5 * wm, x, 1 << 13)
            assert abs(gs[x] - ge) < 1e-6

    def test_single_value_matches_table(self, sd_half):
        gs = greens_table_spectral(sd_half, 6)
        assert greens_boundary_spectral(sd_half, 4) == pytest.approx(gs[4], rel=1e-10)
        assert greens_boundary_spectral(sd_half, -4) == pytest.approx(gs[4], rel=1e-10)

    def test_node_doubling_converged(self, sd_half):
        a = greens_table_spectral(sd_half, 40)
        b = greens_table_spectral(sd_half, 40, 16384)
        assert np.max(np.abs(a - b)) < 1e-10

    def test_defining_equation_exact_limit(self, params, wm, sd_half):
        w = 0.5 * wm
        g = greens_table_spectral(sd_half, 2)
        g0m1 = greens_interior_spectral(sd_half, 0, -1)
        lhs = (
            params.alpha_s * (2.0 * g[1] - 2.0 * g[0])
            + g0m1
            - g[0]
            + w * w * params.m_s * g[0]
        )
        assert abs(lhs - 1.0) < 1e-8

    def test_bulk_stencil_exact_limit(self, params, wm, sd_half):
        w = 0.5 * wm
        g = lambda x, y: greens_interior_spectral(sd_half, x, y)
        lhs = g(2, -1) + g(0, -1) + g(1, 0) + g(1, -2) - 4.0 * g(1, -1) + w * w * g(1, -1)
        assert abs(lhs) < 1e-10


class TestTableCache:
    def test_round_trip(self, params, wm, tmp_path):
        table = build_boundary_table(params, 0.5 * wm, 8)
        path = tmp_path / "table.txt"
        save_table(table, path)
        loaded = load_table(path)
        assert loaded.values == table.values
        assert loaded.epsilon == table.epsilon
        assert loaded.quadrature_nodes == table.quadrature_nodes
        assert loaded.params == table.params
        assert loaded.first_column(8) == pytest.approx(table.first_column(8))

    def test_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "junk.txt"
        path.write_text("not a table\n")
        with pytest.raises(ValidationError):
            load_table(path)
