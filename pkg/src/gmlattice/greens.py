"""Boundary kernel and lattice Green's function of the structured half plane.

The Green's function with a unit point source at the boundary site (0, 0) is
the contour integral over the counter-clockwise unit circle T

    G[x, y] = (1/2 pi i) oint_T  lambda(z)^{-y} z^{|x|-1} / K_s(z)  dz,

where, with a small absorption eps > 0 attached to the frequency,

    K_s(z)   = lambda(z) + F_s(z)
    lambda(z)= (r(z) - h(z)) / (r(z) + h(z))
    h(z)     = sqrt(Q(z) - 2),   r(z) = sqrt(Q(z) + 2)
    Q(z)     = 4 - z - 1/z - (omega + i eps)^2
    F_s(z)   = m_s omega^2 - 1 + alpha_s (z + 1/z - 2).

K_s(z) = K_s(1/z); its zero z_sw near exp(i k_sw) sits inside the unit disk
for eps > 0 and carries the surface wave, with lambda(z_sw) = exp(-eta).

Two evaluation routes are provided:

* ``greens_boundary`` / ``greens_interior``: trapezoid quadrature on |z| = 1
  at eps > 0 (exponentially convergent for contour-analytic integrands), with
  optional analytic extraction of the surface poles and a node-doubling
  convergence audit.  An extrapolation helper removes the O(eps) bias.
* ``greens_table_spectral``: the exact eps -> 0+ limit through the transverse
  eigenmode expansion,

      G[x, 0] = rho(gamma0) z0^|x| / (z0 - 1/z0)
                + int_band rho(gamma) z_gamma^|x| / (z_gamma - 1/z_gamma) dgamma,

  with z_gamma = exp(i k(gamma)) on the radiative band (0, omega^2) and
  z_gamma = exp(-k(gamma)) on the evanescent band (omega^2 - 4, 0).  The
  band integrals are smooth after the sin^2 substitutions of ``_quad`` and
  converge spectrally, which is why this route is the production default for
  scattering solves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from . import _quad
from .errors import QuadratureNotConverged, RootFindFailure, ValidationError
from .spectrum import (
    SpectralData,
    SurfaceParams,
    k_evanescent,
    sin_k_of_gamma,
    solve_inverse_dispersion,
)


def _sqrt_lower(w):
    """Principal square root with the negative real axis approached from below.

    On the unit circle Im(Q -+ 2) = -2 omega eps <= 0, so the eps -> 0+ limit
    of the principal square root lands on the lower side of the cut:
    sqrt(-a + 0j) maps to -i sqrt(a).  Imaginary parts at rounding level are
    snapped onto the cut so the branch does not flip with sign noise.
    """
    w = np.asarray(w, dtype=complex)
    re, im = w.real, w.imag
    # absolute floor: absorption below ~1e-13 is treated as the exact limit
    on_cut = np.abs(im) <= np.maximum(1e-14 * np.abs(re), 1e-13)
    out = np.sqrt(np.where(on_cut, re + 0j, w))
    flip = on_cut & (re < 0.0)
    return np.where(flip, -out, out)


@dataclass(frozen=True)
class Kernel:
    """Boundary kernel K_s at fixed frequency and absorption.

    epsilon = 0 evaluates the eps -> 0+ limit (branch taken from Im omega > 0),
    which is what the density identities and the energy audit use on |z| = 1.
    """

    params: SurfaceParams
    omega: float
    epsilon: float = 0.0

    def __post_init__(self):
        if self.epsilon < 0.0:
            raise ValidationError(f"epsilon must be >= 0, got {self.epsilon}")

    @property
    def omega_c(self) -> complex:
        return complex(self.omega, self.epsilon)

    def q(self, z):
        z = np.asarray(z, dtype=complex)
        return 4.0 - z - 1.0 / z - self.omega_c**2

    def lam(self, z):
        """lambda(z) = (r - h)/(r + h); |lambda| <= 1 on the unit circle."""
        q = self.q(z)
        h = _sqrt_lower(q - 2.0)
        r = _sqrt_lower(q + 2.0)
        return (r - h) / (r + h)

    def f_s(self, z):
        z = np.asarray(z, dtype=complex)
        return self.params.m_s * self.omega**2 - 1.0 + self.params.alpha_s * (
            z + 1.0 / z - 2.0
        )

    def eval(self, z):
        """K_s(z) = lambda(z) + F_s(z)."""
        return self.lam(z) + self.f_s(z)

    def deriv(self, z):
        """Analytic derivative K_s'(z) on the same branch as ``eval``.

        lambda' = -4 Q' / (r h (r + h)^2) with Q' = -1 + z^{-2}, and
        F_s' = alpha_s (1 - z^{-2}).
        """
        z = np.asarray(z, dtype=complex)
        q = self.q(z)
        h = _sqrt_lower(q - 2.0)
        r = _sqrt_lower(q + 2.0)
        qp = -1.0 + z**-2
        lamp = -4.0 * qp / (r * h * (r + h) ** 2)
        return lamp + self.params.alpha_s * (1.0 - z**-2)

    def surface_pole(self, guard_delta: float = 1e-3) -> complex:
        """Zero z_sw of K_s inside the unit disk, by Newton from exp(i k_sw)."""
        dp = solve_inverse_dispersion(self.params, self.omega, guard_delta)
        z = complex(np.exp(1j * dp.k_sw))
        for _ in range(60):
            val = complex(self.eval(z))
            if abs(val) < 1e-14:
                break
            step = val / complex(self.deriv(z))
            z -= step
            if abs(step) < 1e-16 * abs(z):
                break
        else:
            raise RootFindFailure(
                f"surface-pole Newton did not converge at omega={self.omega}, "
                f"eps={self.epsilon}: |K_s|={abs(val):.3e}"
            )
        return z


def kernel_eval(kernel: Kernel, z):
    """Functional form of ``Kernel.eval`` (total on z != 0)."""
    return kernel.eval(z)


# ---------------------------------------------------------------------------
# contour (eps > 0) route
# ---------------------------------------------------------------------------


def _require_contour_args(kernel: Kernel, n_nodes: int):
    if kernel.epsilon <= 0.0:
        raise ValidationError("contour quadrature requires epsilon > 0")
    if n_nodes < 256 or (n_nodes & (n_nodes - 1)) != 0:
        raise ValidationError(f"n_nodes must be a power of two >= 256, got {n_nodes}")


def _pole_data(kernel: Kernel, depth: int):
    """Residue data of lambda^depth z^{|x|-1} / K_s at the pole pair z_sw, 1/z_sw."""
    z_in = kernel.surface_pole()
    z_out = 1.0 / z_in
    dk_in = complex(kernel.deriv(z_in))
    # K_s(z) = K_s(1/z)  =>  K_s'(1/z) = -z^2 K_s'(z)
    dk_out = -z_in**2 * dk_in
    lam_in = complex(kernel.lam(z_in)) ** depth
    lam_out = complex(kernel.lam(z_out)) ** depth
    return (z_in, lam_in / dk_in), (z_out, lam_out / dk_out)


def _contour_values(kernel: Kernel, xs, y: int, n_nodes: int, pole_extraction: bool):
    """Trapezoid values of G[x, y] for every |x| in ``xs`` at once (FFT).

    In the angle variable G[x, y] = (1/2 pi) int lambda^{-y} e^{i theta |x|}
    / K_s dtheta, so one inverse FFT of the nodal samples yields all x.
    Pole extraction subtracts the two simple-pole terms of the integrand
    (x-dependence factors out as z_*^{x-1}) and adds back their exact
    integrals: the interior pole contributes its residue, the exterior none.
    """
    theta = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
    z = np.exp(1j * theta)
    depth = -y
    u = kernel.lam(z) ** depth / kernel.eval(z)
    xs = np.abs(np.asarray(xs, dtype=int))
    if np.any(xs >= n_nodes):
        raise ValidationError(f"|x| must be < n_nodes={n_nodes}")
    full = np.fft.ifft(u)
    out = full[xs].astype(complex)
    if pole_extraction:
        (z_in, c_in), (z_out, c_out) = _pole_data(kernel, depth)
        trap_in = np.mean(z / (z - z_in))  # -> 1 (pole inside)
        trap_out = np.mean(z / (z - z_out))  # -> 0 (pole outside)
        out -= c_in * z_in ** (xs - 1.0) * (trap_in - 1.0)
        out -= c_out * z_out ** (xs - 1.0) * trap_out
    return out


def greens_boundary(
    kernel: Kernel,
    x: int,
    n_nodes: int,
    *,
    pole_extraction: bool = True,
    check: bool = True,
    rel_tol: float = 1e-10,
) -> complex:
    """G[x, 0] by trapezoid quadrature on the unit circle (eps > 0).

    With ``check`` the node count is doubled and the two values compared;
    disagreement beyond ``rel_tol`` (relative) raises QuadratureNotConverged
    reporting both values.  Depends on x only through |x|.
    """
    return greens_interior(
        kernel, x, 0, n_nodes, pole_extraction=pole_extraction, check=check, rel_tol=rel_tol
    )


def greens_interior(
    kernel: Kernel,
    x: int,
    y: int,
    n_nodes: int,
    *,
    pole_extraction: bool = True,
    check: bool = True,
    rel_tol: float = 1e-10,
) -> complex:
    """G[x, y] (y <= 0) by trapezoid quadrature with the lambda^{-y} factor."""
    _require_contour_args(kernel, n_nodes)
    if y > 0:
        raise ValidationError(f"y must be <= 0, got {y}")
    v1 = _contour_values(kernel, [x], y, n_nodes, pole_extraction)[0]
    if not check:
        return complex(v1)
    v2 = _contour_values(kernel, [x], y, 2 * n_nodes, pole_extraction)[0]
    if abs(v2 - v1) > rel_tol * max(1.0, abs(v2)):
        raise QuadratureNotConverged(
            f"G[{x},{y}] moved {abs(v2 - v1):.3e} when doubling nodes "
            f"{n_nodes}->{2 * n_nodes} at eps={kernel.epsilon}: {v1} vs {v2}"
        )
    return complex(v2)


def greens_boundary_extrapolated(
    params: SurfaceParams,
    omega: float,
    x: int,
    n_nodes: int = 1 << 16,
    eps_ladder: Tuple[float, ...] = (1e-2, 1e-3, 1e-4),
) -> complex:
    """Polynomial-in-eps extrapolation of the contour route to eps -> 0.

    Node counts grow down the ladder so each rung passes its own doubling
    audit (the integrand's distance to the contour shrinks like eps).
    """
    vals = []
    for i, eps in enumerate(eps_ladder):
        n = n_nodes * (1 << (2 * i))
        vals.append(
            greens_boundary(Kernel(params, omega, eps), x, n, check=False)
        )
    # Lagrange extrapolation to eps = 0
    out = 0.0 + 0.0j
    for i, (ei, vi) in enumerate(zip(eps_ladder, vals)):
        li = 1.0
        for j, ej in enumerate(eps_ladder):
            if j != i:
                li *= ej / (ej - ei)
        out += li * vi
    return complex(out)


# ---------------------------------------------------------------------------
# spectral (eps -> 0+ exact) route
# ---------------------------------------------------------------------------


def _band_mode_factors(sd: SpectralData, n_nodes: int):
    """Quadrature nodes with rho/(z - 1/z) weights over both band parts."""
    om2 = sd.omega2
    g_r, w_r = _quad.radiative_nodes(om2, n_nodes)
    g_e, w_e = _quad.evanescent_nodes(om2, n_nodes)
    z_r = np.exp(1j * np.arccos(1.0 - 0.5 * g_r))
    z_e = np.exp(-k_evanescent(g_e))
    denom_r = 2j * sin_k_of_gamma(g_r)
    denom_e = -2.0 * np.sinh(k_evanescent(g_e))
    z = np.concatenate([z_r, z_e.astype(complex)])
    coeff = np.concatenate([w_r * sd.rho(g_r) / denom_r, w_e * sd.rho(g_e) / denom_e])
    return z, coeff


def auto_band_nodes(L: int, base: int = 2048) -> int:
    """Node count for mode sums whose integrands oscillate like exp(i k x), x < L."""
    return max(base, 4 * int(L) + 256)


def greens_table_spectral(sd: SpectralData, L: int, n_nodes: int | None = None) -> np.ndarray:
    """Boundary Green's values G[0,0..L-1] in the exact eps -> 0+ limit.

    Surface-mode term plus the band integral of rho(gamma) z_gamma^x /
    (z_gamma - 1/z_gamma); outgoing/decaying branches selected by the
    absorption rule.  Cost O(n_nodes * L), chunked over x.
    """
    if L < 1:
        raise ValidationError(f"L must be >= 1, got {L}")
    if n_nodes is None:
        n_nodes = auto_band_nodes(L)
    z0 = np.exp(1j * sd.k_sw)
    surf = sd.rho0 / (z0 - 1.0 / z0)
    z, coeff = _band_mode_factors(sd, n_nodes)
    out = np.empty(L, dtype=complex)
    xs = np.arange(L)
    chunk = max(1, int(2e6) // max(len(z), 1))
    for i in range(0, L, chunk):
        xx = xs[i : i + chunk]
        out[i : i + chunk] = (coeff[:, None] * z[:, None] ** xx[None, :]).sum(axis=0)
    return out + surf * z0**xs


def greens_boundary_spectral(sd: SpectralData, x: int, n_nodes: int = 4096) -> complex:
    """Single boundary value G[x, 0] in the eps -> 0+ limit."""
    ax = abs(int(x))
    n = max(n_nodes, auto_band_nodes(ax + 1))
    z0 = np.exp(1j * sd.k_sw)
    z, coeff = _band_mode_factors(sd, n)
    return complex((coeff * z**ax).sum() + sd.rho0 / (z0 - 1.0 / z0) * z0**ax)


def greens_interior_spectral(
    sd: SpectralData, x: int, y: int, n_nodes: int = 4096
) -> complex:
    """Interior value G[x, y] (y <= 0) in the eps -> 0+ limit.

    The transverse profile psi_gamma(y) replaces the boundary value 1; the
    surface mode contributes exp(beta0 y).
    """
    if y > 0:
        raise ValidationError(f"y must be <= 0, got {y}")
    ax = abs(int(x))
    n = max(n_nodes, auto_band_nodes(ax + 1))
    om2 = sd.omega2
    p = sd.params
    z0 = np.exp(1j * sd.k_sw)
    surf = sd.rho0 * math.exp(sd.beta0 * y) / (z0 - 1.0 / z0) * z0**ax

    def psi(gamma):
        zeta = np.arccos(0.5 * (gamma + 2.0 - om2))
        a = p.m_s * om2 - p.alpha_s * gamma - 1.0
        return (a * np.sin(zeta * y) + np.sin(zeta * (y + 1.0))) / np.sin(zeta)

    g_r, w_r = _quad.radiative_nodes(om2, n)
    g_e, w_e = _quad.evanescent_nodes(om2, n)
    z_r = np.exp(1j * np.arccos(1.0 - 0.5 * g_r))
    z_e = np.exp(-k_evanescent(g_e))
    term_r = (w_r * sd.rho(g_r) * psi(g_r) / (2j * sin_k_of_gamma(g_r)) * z_r**ax).sum()
    term_e = (
        w_e * sd.rho(g_e) * psi(g_e) / (-2.0 * np.sinh(k_evanescent(g_e))) * z_e**ax
    ).sum()
    return complex(surf + term_r + term_e)


# ---------------------------------------------------------------------------
# tabulated values with cache I/O
# ---------------------------------------------------------------------------


@dataclass
class GreensTable:
    """Tabulated Green's values keyed by (x, y); symmetric in x -> -x.

    ``quadrature_nodes`` and ``epsilon`` record how the values were produced
    (epsilon = 0 marks the spectral route).
    """

    params: SurfaceParams
    omega: float
    epsilon: float
    quadrature_nodes: int
    values: Dict[Tuple[int, int], complex] = field(default_factory=dict)

    def get(self, x: int, y: int = 0) -> complex:
        return self.values[(abs(int(x)), int(y))]

    def first_column(self, L: int) -> np.ndarray:
        return np.array([self.get(x, 0) for x in range(L)], dtype=complex)


def build_boundary_table(
    params: SurfaceParams,
    omega: float,
    L: int,
    *,
    epsilon: float = 0.0,
    n_nodes: int | None = None,
    guard_delta: float = 1e-3,
) -> GreensTable:
    """Boundary row G[0..L-1, 0]; spectral route at epsilon = 0, contour else."""
    if epsilon == 0.0:
        from .spectrum import spectral_data

        sd = spectral_data(params, omega, guard_delta)
        if n_nodes is None:
            n_nodes = auto_band_nodes(L)
        vals = greens_table_spectral(sd, L, n_nodes)
    else:
        kernel = Kernel(params, omega, epsilon)
        if n_nodes is None:
            n_nodes = 1 << 14
        _require_contour_args(kernel, n_nodes)
        vals = _contour_values(kernel, np.arange(L), 0, n_nodes, True)
    table = GreensTable(params, omega, epsilon, int(n_nodes))
    table.values = {(x, 0): complex(v) for x, v in enumerate(vals)}
    return table


def save_table(table: GreensTable, path):
    """Columnar text cache: header of key fields, then rows ``x y re im``."""
    with open(path, "w") as fh:
        fh.write("# gmlattice greens table v1\n")
        fh.write(
            "# m_s=%.17g alpha_s=%.17g omega=%.17g epsilon=%.17g n_nodes=%d\n"
            % (
                table.params.m_s,
                table.params.alpha_s,
                table.omega,
                table.epsilon,
                table.quadrature_nodes,
            )
        )
        for (x, y), v in sorted(table.values.items()):
            fh.write("%d %d %.17g %.17g\n" % (x, y, v.real, v.imag))


def load_table(path) -> GreensTable:
    with open(path) as fh:
        magic = fh.readline()
        if "gmlattice greens table" not in magic:
            raise ValidationError(f"{path}: not a greens table cache")
        meta = dict(
            item.split("=") for item in fh.readline().lstrip("# ").strip().split()
        )
        table = GreensTable(
            SurfaceParams(float(meta["m_s"]), float(meta["alpha_s"])),
            float(meta["omega"]),
            float(meta["epsilon"]),
            int(meta["n_nodes"]),
        )
        for line in fh:
            xs, ys, re, im = line.split()
            table.values[(int(xs), int(ys))] = complex(float(re), float(im))
    return table
