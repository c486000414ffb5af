"""Quadrature helpers for the transverse spectral band.

The continuous transverse spectrum is (omega^2 - 4, omega^2).  Integrands met
in practice carry inverse-square-root singularities at gamma = 0 (where the
in-plane wavenumber k(gamma) vanishes) and square-root behaviour at the band
edges, so the band is split at gamma = 0 and mapped with sin^2 substitutions
that render the integrands smooth:

    radiative part  (0, omega^2):        gamma = omega^2 sin^2(phi)
    evanescent part (omega^2 - 4, 0):    gamma = -(4 - omega^2) sin^2(phi)

with phi in (0, pi/2).  Gauss-Legendre in phi then converges spectrally.
"""

from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

#: single-rule cap; larger requests use composite panels of this size
_PANEL = 2048


@lru_cache(maxsize=64)
def _leggauss(n):
    x, w = roots_legendre(int(n))
    return x, w


def gauss_legendre(a, b, n):
    """Gauss-Legendre nodes and weights on (a, b).

    Requests above the single-rule cap are served by composite panels of
    cached 2048-point rules, keeping setup cost O(n) for any n.
    """
    if n <= 2 * _PANEL:
        x, w = _leggauss(n)
        half = 0.5 * (b - a)
        return a + half * (x + 1.0), half * w
    npan = int(np.ceil(n / _PANEL))
    edges = np.linspace(a, b, npan + 1)
    x, w = _leggauss(_PANEL)
    half = 0.5 * (edges[1] - edges[0])
    nodes = (edges[:-1, None] + half * (x + 1.0)[None, :]).ravel()
    weights = np.broadcast_to(half * w, (npan, _PANEL)).ravel().copy()
    return nodes, weights


def radiative_nodes(omega2, n):
    """Nodes/weights for integrals over gamma in (0, omega^2).

    Weights absorb the Jacobian of gamma = omega^2 sin^2(phi); summing
    f(gamma) * w reproduces the gamma-integral of f.
    """
    phi, w = gauss_legendre(0.0, 0.5 * np.pi, n)
    s = np.sin(phi)
    gamma = omega2 * s * s
    jac = omega2 * np.sin(2.0 * phi)
    return gamma, w * jac


def evanescent_nodes(omega2, n):
    """Nodes/weights for integrals over gamma in (omega^2 - 4, 0)."""
    width = 4.0 - omega2
    phi, w = gauss_legendre(0.0, 0.5 * np.pi, n)
    s = np.sin(phi)
    gamma = -width * s * s
    jac = width * np.sin(2.0 * phi)
    return gamma, w * jac


def full_band_nodes(omega2, n):
    """Nodes/weights for the whole band (omega^2 - 4, omega^2).

    Parametrized by the transverse phase zeta in (0, pi) through
    gamma = omega^2 - 2 + 2 cos(zeta); removes the edge square roots.
    """
    zeta, w = gauss_legendre(0.0, np.pi, n)
    gamma = omega2 - 2.0 + 2.0 * np.cos(zeta)
    return gamma, w * 2.0 * np.sin(zeta)
