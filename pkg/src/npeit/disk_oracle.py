"""Closed-form reference solutions on the concentric-disk scene.

Everything here is produced by separation of variables for the inclusion
``|x| < r0`` inside the unit disk, independently of the quadrature and
layer-potential machinery, so it can serve as an oracle for the numerical
solvers.  A pure Fourier mode ``f = f_c cos(m theta)`` (or ``sin``) of
Neumann data excites exactly one radial mode:

* inside the inclusion:   ``u = A rho^m trig(m theta)``
* between the curves:     ``u = (B rho^m + C rho^-m) trig(m theta)``

with the coefficients fixed by continuity of the potential and of the
conormal flux at ``rho = r0`` and by the outer Neumann condition.  The
module also carries the mode action of the single-layer potential in the
zero-outer-flux normalization and the spectrum of the flux-average
operator on a concentric circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "OracleMode",
    "oracle_transmission_mode",
    "oracle_limit_trace_coefficient",
    "oracle_flux_average_eigenvalue",
    "oracle_mode_trace",
    "single_layer_mode_field",
    "mode_gradient_energy",
]


def oracle_flux_average_eigenvalue(m: int, r0: float) -> float:
    """Eigenvalue ``mu_m = -r0^(2m)/2`` of the flux-average operator for
    the circle of radius ``r0`` centered in the unit disk.

    The operator is the adjoint double-layer operator built from the
    unit-disk kernel; on the concentric circle its eigenfunctions are the
    pure modes ``cos(m theta)``, ``sin(m theta)`` with a twofold-degenerate
    eigenvalue for each ``m >= 1``.
    """
    if m < 1:
        raise ValueError(f"mode index must be >= 1, got {m}")
    return -0.5 * r0 ** (2 * m)


def oracle_mode_trace(m: int, r0: float) -> float:
    """Eigenvalue ``T_m = -(r0/2m) (1 + r0^(2m))`` of the single-layer
    trace on the concentric circle (zero-outer-flux normalization,
    sign convention with positive-definite energy form)."""
    if m < 1:
        raise ValueError(f"mode index must be >= 1, got {m}")
    return -(r0 / (2.0 * m)) * (1.0 + r0 ** (2 * m))


def single_layer_mode_field(m: int, r0: float, points, kind: str = "cos"):
    """Single-layer potential of the density ``trig(m theta)`` on the
    circle of radius ``r0``, unit-disk normalization, at arbitrary points.

    The radial profile is ``-(r0/2m) [(rho/r0)^m + (rho r0)^m]`` inside the
    circle and ``-(r0/2m) [(r0/rho)^m + (rho r0)^m]`` between the circle
    and the unit circle; the two branches agree at ``rho = r0`` and the
    normal derivative of the field vanishes on average over the unit
    circle (it is ``0`` pointwise for ``m >= 1``).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    rho = np.hypot(pts[:, 0], pts[:, 1])
    theta = np.arctan2(pts[:, 1], pts[:, 0])
    inner = (rho / r0) ** m + (rho * r0) ** m
    outer = np.divide(r0, np.maximum(rho, 1e-300)) ** m + (rho * r0) ** m
    radial = -(r0 / (2.0 * m)) * np.where(rho <= r0, inner, outer)
    trig = np.cos if kind == "cos" else np.sin
    return radial * trig(m * theta)


@dataclass(frozen=True)
class OracleMode:
    """Mode solution of the transmission problem on concentric disks.

    ``u = A rho^m trig`` inside the inclusion and
    ``u = (B rho^m + C rho^-m) trig`` in the annulus, where
    ``trig = trig(m theta)`` and the data is ``f = f_c trig`` on the unit
    circle.  ``density_coeff`` is the coefficient ``p`` such that the
    representation ``u = u0 + (single layer of p trig on |x| = r0)``
    reproduces the solution, with the background
    ``u0 = f_c/(k0 m) rho^m trig``.
    """

    m: int
    k: float
    k0: float
    r0: float
    f_c: float
    kind: str
    A: float
    B: float
    C: float
    residual: float

    @property
    def trace_coeff(self) -> float:
        """Coefficient of ``trig(m theta)`` in the outer boundary trace."""
        return self.B + self.C

    @property
    def inclusion_trace_coeff(self) -> float:
        """Coefficient of ``trig`` in the trace on the inclusion circle."""
        return self.A * self.r0 ** self.m

    @property
    def interior_flux_coeff(self) -> float:
        """Coefficient of ``trig`` in the interior normal derivative on
        the inclusion circle (derivative of the inside branch)."""
        return self.A * self.m * self.r0 ** (self.m - 1)

    @property
    def exterior_flux_coeff(self) -> float:
        """Same for the annulus branch of the normal derivative."""
        return self.m * (self.B * self.r0 ** (self.m - 1)
                         - self.C * self.r0 ** (-self.m - 1))

    @property
    def background_coeff(self) -> float:
        """Coefficient of ``rho^m trig`` in the background potential."""
        return self.f_c / (self.k0 * self.m)

    @property
    def density_coeff(self) -> float:
        """Layer density ``p`` with ``u - u0 = single layer of p trig``."""
        beta = self.background_coeff
        return -(self.A - beta) * (2.0 * self.m) / (
            self.r0 ** (1 - self.m) * (1.0 + self.r0 ** (2 * self.m)))

    def field(self, points):
        """Evaluate ``u`` at points anywhere in the closed unit disk."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        rho = np.hypot(pts[:, 0], pts[:, 1])
        theta = np.arctan2(pts[:, 1], pts[:, 0])
        inner = self.A * rho ** self.m
        with np.errstate(divide="ignore"):
            annulus = (self.B * rho ** self.m
                       + self.C * np.maximum(rho, 1e-300) ** (-self.m))
        radial = np.where(rho <= self.r0, inner, annulus)
        trig = np.cos if self.kind == "cos" else np.sin
        return radial * trig(self.m * theta)

    def gradient_energy_inside(self) -> float:
        """``int_{rho<r0} |grad u|^2``."""
        return math.pi * self.m * self.A**2 * self.r0 ** (2 * self.m)

    def gradient_energy_annulus(self) -> float:
        """``int_{r0<rho<1} |grad u|^2``."""
        s = self.r0 ** (2 * self.m)
        return math.pi * self.m * (self.B**2 * (1.0 - s)
                                   + self.C**2 * (1.0 / s - 1.0))


def oracle_transmission_mode(m: int, k: float, k0: float, r0: float,
                             f_c: float = 1.0, kind: str = "cos") -> OracleMode:
    """Solve the concentric transmission problem for one Fourier mode.

    Matching conditions (rows of the 3x3 system in ``A, B, C``):

    1. continuity of ``u`` at ``rho = r0``
    2. continuity of the conormal flux ``a du/dnu`` at ``rho = r0``
    3. outer Neumann condition ``k0 du/dnu = f`` at ``rho = 1``

    The residual of the solved system is recorded and must be tiny; a
    closed form for the outer trace coefficient is

        ``(B + C) = f_c (1 - tau) / (k0 m (1 + tau))``,
        ``tau = r0^(2m) (k - k0) / (k + k0)``.
    """
    if m < 1:
        raise ValueError(f"mode index must be >= 1, got {m}")
    if k <= 0 or k0 <= 0:
        raise ValueError("conductivities must be positive")
    if not 0 < r0 < 1:
        raise ValueError(f"inclusion radius must lie in (0, 1), got {r0}")
    if kind not in ("cos", "sin"):
        raise ValueError(f"kind must be 'cos' or 'sin', got {kind!r}")

    rm, rmm = r0**m, r0 ** (-m)
    mat = np.array([
        [rm, -rm, -rmm],
        [k * m * r0 ** (m - 1), -k0 * m * r0 ** (m - 1), k0 * m * r0 ** (-m - 1)],
        [0.0, k0 * m, -k0 * m],
    ])
    rhs = np.array([0.0, 0.0, f_c])
    coeffs = np.linalg.solve(mat, rhs)
    residual = float(np.max(np.abs(mat @ coeffs - rhs)))
    A, B, C = (float(v) for v in coeffs)
    return OracleMode(m=m, k=float(k), k0=float(k0), r0=float(r0),
                      f_c=float(f_c), kind=kind, A=A, B=B, C=C,
                      residual=residual)


def oracle_limit_trace_coefficient(m: int, k0: float, r0: float,
                                   f_c: float = 1.0) -> float:
    """Outer-trace coefficient of the infinite-contrast limit problem.

    Both high-contrast limits (grounded inclusion after mean alignment,
    and perfect conductor) share this trace for mean-free data; it is the
    ``k -> infinity`` limit of the transmission trace:

        ``f_c (1 - r0^(2m)) / (k0 m (1 + r0^(2m)))``.
    """
    if m < 1:
        raise ValueError(f"mode index must be >= 1, got {m}")
    s = r0 ** (2 * m)
    return f_c * (1.0 - s) / (k0 * m * (1.0 + s))


def mode_gradient_energy(m: int, coeff_pos: float, coeff_neg: float,
                         rho_in: float, rho_out: float) -> float:
    """``int |grad u|^2`` over the annulus ``rho_in < rho < rho_out`` for
    ``u = (coeff_pos rho^m + coeff_neg rho^-m) trig(m theta)``.

    Closed form ``pi m [coeff_pos^2 (rho_out^(2m) - rho_in^(2m)) +
    coeff_neg^2 (rho_in^(-2m) - rho_out^(-2m))]`` (the cross term
    integrates to zero).  ``rho_in = 0`` is allowed when ``coeff_neg = 0``.
    """
    if m < 1:
        raise ValueError(f"mode index must be >= 1, got {m}")
    pos = coeff_pos**2 * (rho_out ** (2 * m) - rho_in ** (2 * m))
    if coeff_neg == 0.0:
        neg = 0.0
    else:
        if rho_in <= 0:
            raise ValueError("rho^-m term requires rho_in > 0")
        neg = coeff_neg**2 * (rho_in ** (-2 * m) - rho_out ** (-2 * m))
    return math.pi * m * (pos + neg)
