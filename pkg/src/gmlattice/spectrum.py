"""Surface-wave dispersion and the transverse eigenbasis of the half plane.

Out-of-plane lattice motion on the square half plane {(x, y) : y <= 0} obeys

    u[x+1,y] + u[x-1,y] + u[x,y+1] + u[x,y-1] - 4 u[x,y] + omega^2 u[x,y] = 0

in the interior, while the boundary row y = 0 carries its own mass ratio m_s
and in-plane bond stiffness alpha_s:

    alpha_s (u[x+1,0] + u[x-1,0] - 2 u[x,0]) + u[x,-1] - u[x,0]
        + m_s omega^2 u[x,0] = 0.

A boundary-localized mode u = exp(i k x + eta y) with eta > 0 exists for
alpha_s < m_s; (omega, eta) solve the coupled pair

    omega^2       = 4 sin^2(k/2) + 2 - 2 cosh(eta),
    m_s omega^2   = 4 alpha_s sin^2(k/2) + 1 - exp(-eta),

which this module reduces to a quadratic in X = exp(-eta).  The band is
(0, omega_max) with omega_max in closed form.

Separating the lateral direction leaves a one-dimensional transverse operator
on y <= 0 whose spectrum is one discrete eigenvalue gamma0 > omega^2 (the
surface mode, profile exp(beta0 y)) plus the continuous band
(omega^2 - 4, omega^2).  The spectral densities

    rho(gamma0) = 1 / (alpha_s + 1/(e^{2 beta0} - 1)),
    rho(gamma)  = (2/pi) sqrt(P) / (P + M^2),
        P = (omega^2 - gamma)(gamma - omega^2 + 4),
        M = gamma (2 alpha_s - 1) + omega^2 (1 - 2 m_s),

normalize the eigenfunctions psi_gamma (psi_gamma(0) = 1) so that every
square-summable boundary column expands on them with a Parseval identity in
the weighted inner product  <u, v> = alpha_s u_0 conj(v_0) + sum_{y<0} ... .
Lateral wavenumbers follow from k(gamma) = arccos(1 - gamma/2) on (0, 4).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    FrequencyOutOfBand,
    GammaOutOfSpectrum,
    NonPositiveDiscriminant,
    NoSurfaceBand,
    RootFindFailure,
    ValidationError,
)

#: Residual tolerance enforced on every dispersion solve.
DISPERSION_TOL = 1e-12

#: Default guard band: frequencies above (1 - delta) * omega_max are rejected.
GUARD_DELTA = 1e-3


@dataclass(frozen=True)
class SurfaceParams:
    """Material constants of the structured boundary row.

    Parameters
    ----------
    m_s : float
        Boundary particle mass relative to the bulk mass; positive.
    alpha_s : float
        Boundary bond stiffness parallel to the surface relative to the bulk
        bond; positive.

    A propagating surface-wave band exists iff ``alpha_s < m_s``; operations
    that need the band raise :class:`NoSurfaceBand` otherwise.
    """

    m_s: float
    alpha_s: float

    def __post_init__(self):
        if not (self.m_s > 0.0 and math.isfinite(self.m_s)):
            raise ValidationError(f"m_s must be a positive finite real, got {self.m_s}")
        if not (self.alpha_s > 0.0 and math.isfinite(self.alpha_s)):
            raise ValidationError(
                f"alpha_s must be a positive finite real, got {self.alpha_s}"
            )

    @property
    def has_surface_band(self) -> bool:
        return self.alpha_s < self.m_s

    def require_band(self):
        if not self.has_surface_band:
            raise NoSurfaceBand(
                f"no surface-wave band for m_s={self.m_s}, alpha_s={self.alpha_s}: "
                "requires alpha_s < m_s"
            )


@dataclass(frozen=True)
class DispersionPoint:
    """One point on the surface-wave branch.

    k_sw is the lateral wavenumber in (-pi, pi) \\ {0}, omega the angular
    frequency, eta > 0 the depth attenuation exponent and v_group the group
    velocity d omega / d k (sites per unit time).  ``residual`` records the
    larger of the two dispersion-equation residuals.
    """

    k_sw: float
    omega: float
    eta: float
    v_group: float
    residual: float = 0.0


def omega_max(params: SurfaceParams) -> float:
    """Upper edge of the surface-wave band.

    omega_max = sqrt((-b + sqrt(b^2 - 4 a c)) / (2 a)) with
    a = m_s (m_s - 1), b = -8 alpha_s m_s + 4 alpha_s + 4 m_s + 1,
    c = 16 alpha_s^2 - 16 alpha_s - 4.  The root is evaluated in a
    cancellation-free form; a -> 0 (m_s = 1) falls back to the linear limit.

    Raises
    ------
    NoSurfaceBand
        If ``alpha_s >= m_s``.
    NonPositiveDiscriminant
        If b^2 - 4 a c < 0 (no real band edge for these parameters).
    """
    params.require_band()
    m, al = params.m_s, params.alpha_s
    a = m * (m - 1.0)
    b = -8.0 * al * m + 4.0 * al + 4.0 * m + 1.0
    c = 16.0 * al * al - 16.0 * al - 4.0
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        raise NonPositiveDiscriminant(
            f"band-edge discriminant negative for m_s={m}, alpha_s={al}: {disc}"
        )
    s = math.sqrt(disc)
    if a == 0.0:
        w2 = -c / b
    elif b > 0.0:
        # (-b + s)/(2a) == 2c/(-b - s); the latter avoids cancellation here.
        w2 = 2.0 * c / (-b - s)
    else:
        w2 = (-b + s) / (2.0 * a)
    if not (0.0 < w2 < 4.0):
        raise NonPositiveDiscriminant(
            f"band edge omega_max^2={w2} outside (0, 4) for m_s={m}, alpha_s={al}"
        )
    return math.sqrt(w2)


def _decay_root(params: SurfaceParams, s4: float) -> float:
    """Root X = exp(-eta) in (0, 1) of the dispersion elimination.

    Eliminating omega^2 between the two coupled relations gives

        (1 - m_s) X^2 + ((m_s - alpha_s) s4 + 2 m_s - 1) X - m_s = 0,

    with s4 = 4 sin^2(k/2).  The polynomial is negative at X=0 and positive
    at X=1 whenever alpha_s < m_s and k != 0, so exactly one root lies inside.
    """
    m, al = params.m_s, params.alpha_s
    qa = 1.0 - m
    qb = (m - al) * s4 + 2.0 * m - 1.0
    qc = -m
    if qa == 0.0:
        x = -qc / qb
        roots = [x]
    else:
        disc = qb * qb - 4.0 * qa * qc
        if disc < 0.0:
            raise RootFindFailure(
                f"dispersion elimination has no real root (s4={s4}, params={params})"
            )
        s = math.sqrt(disc)
        # stable pairing: q = -(qb + sign(qb) s)/2, roots q/qa and qc/q
        q = -0.5 * (qb + math.copysign(s, qb))
        roots = [r for r in (q / qa, qc / q if q != 0.0 else math.inf)]
    inside = [r for r in roots if 0.0 < r < 1.0]
    if len(inside) != 1:
        raise RootFindFailure(
            f"expected one decay root in (0,1), got {roots} (s4={s4}, params={params})"
        )
    x = inside[0]
    # one Newton polish on the quadratic
    if qa != 0.0:
        p = qa * x * x + qb * x + qc
        dp = 2.0 * qa * x + qb
        if dp != 0.0:
            x -= p / dp
    return x


def solve_dispersion(params: SurfaceParams, k_sw: float) -> DispersionPoint:
    """Solve the coupled surface-wave relations at lateral wavenumber k_sw.

    Returns the :class:`DispersionPoint` with both residuals below
    ``DISPERSION_TOL``.  omega and eta are even in k_sw, v_group is odd; the
    computation runs on |k_sw| so the symmetry is exact.

    Raises ``NoSurfaceBand`` outside the band regime and ``RootFindFailure``
    if the residual contract cannot be met.
    """
    params.require_band()
    if not (-math.pi < k_sw < math.pi) or k_sw == 0.0:
        raise ValidationError(f"k_sw must lie in (-pi, pi) excluding 0, got {k_sw}")
    k = abs(k_sw)
    if k < 1e-7:
        # the decay root collides with X = 1 in double precision below this
        raise ValidationError(f"|k_sw|={k} below the 1e-7 solver floor")
    s4 = 4.0 * math.sin(0.5 * k) ** 2
    x = _decay_root(params, s4)
    eta = -math.log(x)
    w2 = s4 + 2.0 - x - 1.0 / x
    if w2 <= 0.0:
        raise RootFindFailure(f"non-positive omega^2={w2} at k={k}")
    omega = math.sqrt(w2)
    r1 = abs(w2 - (s4 + 2.0 - 2.0 * math.cosh(eta)))
    r2 = abs(params.m_s * w2 - (params.alpha_s * s4 + 1.0 - math.exp(-eta)))
    residual = max(r1, r2)
    if residual > DISPERSION_TOL:
        raise RootFindFailure(
            f"dispersion residual {residual:.3e} exceeds {DISPERSION_TOL} at k={k}"
        )
    g = math.expm1(2.0 * eta)  # e^{2 eta} - 1 > 0
    v = (math.sin(k) / omega) * (params.alpha_s + 1.0 / g) / (params.m_s + 1.0 / g)
    if k_sw < 0.0:
        v = -v
    return DispersionPoint(k_sw=k_sw, omega=omega, eta=eta, v_group=v, residual=residual)


def guarded_omega_max(params: SurfaceParams, guard_delta: float = GUARD_DELTA) -> float:
    """Largest admissible frequency, (1 - guard_delta) * omega_max."""
    return (1.0 - guard_delta) * omega_max(params)


def check_band(params: SurfaceParams, omega: float, guard_delta: float = GUARD_DELTA):
    """Raise FrequencyOutOfBand unless 0 < omega <= (1 - guard_delta) omega_max."""
    top = guarded_omega_max(params, guard_delta)
    if not (0.0 < omega <= top):
        raise FrequencyOutOfBand(
            f"omega={omega} outside guarded band (0, {top}] "
            f"(omega_max={omega_max(params)}, guard_delta={guard_delta})"
        )


def solve_inverse_dispersion(
    params: SurfaceParams, omega: float, guard_delta: float = GUARD_DELTA
) -> DispersionPoint:
    """Right-going surface-wave point at the given frequency.

    omega(k) is strictly increasing on (0, pi) for banded parameters, so a
    bisection bracket always exists; a Newton step with the known group
    velocity polishes the wavenumber.
    """
    check_band(params, omega, guard_delta)
    lo, hi = 1e-6, math.pi - 1e-12
    f_lo = solve_dispersion(params, lo).omega - omega
    f_hi = solve_dispersion(params, hi).omega - omega
    if f_lo > 0.0:
        raise FrequencyOutOfBand(
            f"omega={omega} below the k={lo} solver floor (omega({lo})={f_lo + omega})"
        )
    if f_hi < 0.0:
        raise RootFindFailure(
            f"inverse dispersion bracket failed: omega={omega}, "
            f"f(lo)={f_lo:.3e}, f(hi)={f_hi:.3e}"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        dp = solve_dispersion(params, mid)
        err = dp.omega - omega
        if err == 0.0:
            lo = hi = mid
            break
        if err < 0.0:
            lo = mid
        else:
            hi = mid
        # Newton polish once the bracket is tight; v_group = d omega / d k
        if hi - lo < 1e-6:
            k_n = mid - err / dp.v_group
            if lo < k_n < hi:
                lo = hi = k_n
                break
        if hi - lo < 1e-15:
            break
    dp = solve_dispersion(params, 0.5 * (lo + hi))
    if abs(dp.omega - omega) > 1e-10 * max(1.0, omega):
        raise RootFindFailure(
            f"inverse dispersion did not converge: target omega={omega}, "
            f"reached {dp.omega} at k={dp.k_sw}"
        )
    return dp


@dataclass(frozen=True)
class SpectralData:
    """Eigenbasis data of the transverse operator at a fixed frequency.

    gamma0 > omega^2 is the discrete eigenvalue carrying the surface mode
    with depth profile exp(beta0 y); rho0 its spectral density.  ``rho`` and
    ``k_of_gamma`` are vectorized handles for the continuous density on
    (omega^2 - 4, omega^2) and the lateral wavenumber map on (0, 4).
    """

    params: SurfaceParams
    omega: float
    gamma0: float
    beta0: float
    rho0: float
    rho: Callable[[np.ndarray], np.ndarray]
    k_of_gamma: Callable[[np.ndarray], np.ndarray]
    k_sw: float
    v_group: float

    @property
    def omega2(self) -> float:
        return self.omega * self.omega

    @property
    def band(self) -> tuple:
        """Endpoints of the continuous transverse band."""
        return (self.omega2 - 4.0, self.omega2)

    def zeta_of_gamma(self, gamma):
        """Transverse phase on the band: cos(zeta) = (gamma + 2 - omega^2)/2."""
        g = np.asarray(gamma, dtype=float)
        c = 0.5 * (g + 2.0 - self.omega2)
        if np.any(np.abs(c) > 1.0):
            raise GammaOutOfSpectrum(f"gamma outside band {self.band}")
        return np.arccos(c)


def _rho_handle(params: SurfaceParams, omega2: float):
    al, m = params.alpha_s, params.m_s

    def rho(gamma):
        g = np.asarray(gamma, dtype=float)
        p = (omega2 - g) * (g - omega2 + 4.0)
        if np.any(p < 0.0):
            raise GammaOutOfSpectrum(
                f"gamma outside continuous band ({omega2 - 4.0}, {omega2})"
            )
        mterm = g * (2.0 * al - 1.0) + omega2 * (1.0 - 2.0 * m)
        out = (2.0 / math.pi) * np.sqrt(p) / (p + mterm * mterm)
        return out if out.ndim else float(out)

    return rho


def k_of_gamma(gamma):
    """Lateral wavenumber of a propagative mode: k = arccos(1 - gamma/2) on (0, 4)."""
    g = np.asarray(gamma, dtype=float)
    if np.any((g <= 0.0) | (g >= 4.0)):
        raise GammaOutOfSpectrum(f"propagative gamma must lie in (0, 4)")
    out = np.arccos(1.0 - 0.5 * g)
    return out if out.ndim else float(out)


def sin_k_of_gamma(gamma):
    """sin k(gamma) = sqrt(gamma (4 - gamma)) / 2, stable at both edges."""
    g = np.asarray(gamma, dtype=float)
    out = 0.5 * np.sqrt(g * (4.0 - g))
    return out if out.ndim else float(out)


def k_evanescent(gamma):
    """Decay rate of an evanescent lateral mode, gamma < 0:
    k = ln(1 - gamma/2 + sqrt(gamma (gamma - 4)) / 2) > 0."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g >= 0.0):
        raise GammaOutOfSpectrum("evanescent gamma must be negative")
    out = np.log(1.0 - 0.5 * g + 0.5 * np.sqrt(g * (g - 4.0)))
    return out if out.ndim else float(out)


def spectral_data(
    params: SurfaceParams, omega: float, guard_delta: float = GUARD_DELTA
) -> SpectralData:
    """Assemble the normalized eigenbasis data at frequency omega.

    gamma0 and beta0 are obtained from the surface branch (gamma0 =
    2 - 2 cos k_sw, beta0 = eta), rho0 from the closed form, and the
    continuous density/wavenumber maps are returned as vectorized handles.
    """
    dp = solve_inverse_dispersion(params, omega, guard_delta)
    omega2 = omega * omega
    gamma0 = 2.0 - 2.0 * math.cos(dp.k_sw)
    beta0 = dp.eta
    # residuals of the discrete-eigenvalue pair, same relations as dispersion
    r1 = abs(omega2 - (2.0 + gamma0 - 2.0 * math.cosh(beta0)))
    r2 = abs(
        params.m_s * omega2 - (params.alpha_s * gamma0 + 1.0 - math.exp(-beta0))
    )
    if max(r1, r2) > 10.0 * DISPERSION_TOL:
        raise RootFindFailure(
            f"discrete eigenvalue residual {max(r1, r2):.3e} too large at omega={omega}"
        )
    rho0 = 1.0 / (params.alpha_s + 1.0 / math.expm1(2.0 * beta0))
    return SpectralData(
        params=params,
        omega=omega,
        gamma0=gamma0,
        beta0=beta0,
        rho0=rho0,
        rho=_rho_handle(params, omega2),
        k_of_gamma=k_of_gamma,
        k_sw=dp.k_sw,
        v_group=dp.v_group,
    )


def eigenfunction_samples(
    params: SurfaceParams,
    omega: float,
    gamma: float,
    depth: int,
    guard_delta: float = GUARD_DELTA,
) -> np.ndarray:
    """Unnormalized transverse eigenfunction psi_gamma on y = 0, -1, ..., -depth.

    For gamma on the continuous band,
        psi_gamma(y) = [ (m_s omega^2 - alpha_s gamma - 1) sin(zeta y)
                         + sin(zeta (y + 1)) ] / sin(zeta),
    with cos(zeta) = (gamma + 2 - omega^2)/2; for the discrete eigenvalue,
    psi(y) = exp(beta0 y).  Normalization: psi_gamma(0) = 1.
    """
    if depth < 1:
        raise ValidationError(f"depth must be >= 1, got {depth}")
    sd = spectral_data(params, omega, guard_delta)
    y = -np.arange(depth + 1, dtype=float)
    if math.isclose(gamma, sd.gamma0, rel_tol=1e-12, abs_tol=1e-12):
        return np.exp(sd.beta0 * y)
    lo, hi = sd.band
    if not (lo < gamma < hi):
        raise GammaOutOfSpectrum(
            f"gamma={gamma} not in band ({lo}, {hi}) nor equal to gamma0={sd.gamma0}"
        )
    zeta = float(sd.zeta_of_gamma(gamma))
    a = params.m_s * omega * omega - params.alpha_s * gamma - 1.0
    return (a * np.sin(zeta * y) + np.sin(zeta * (y + 1.0))) / math.sin(zeta)


def weighted_inner(u, v, alpha_s: float) -> complex:
    """Weighted l^2 inner product on y = 0, -1, ...:
    alpha_s u_0 conj(v_0) + sum_{y<0} u_y conj(v_y)."""
    u = np.asarray(u)
    v = np.asarray(v)
    prod = u * np.conj(v)
    return complex(alpha_s * prod[0] + prod[1:].sum())
