"""Periodic Nystrom quadrature for logarithmic boundary kernels.

The single-layer kernel on a smooth closed curve splits into a periodic
logarithmic convolution plus a smooth remainder,

    ``ln|q(t) - q(s)| = ln(2 |sin((t-s)/2)|) + M(t, s)``,

with ``M`` analytic for analytic curves and diagonal value ``ln|q'(t)|``.
The convolution part is integrated by the classical trigonometric rule
whose weights are exact on trigonometric polynomials up to the grid
bandwidth (its discrete symbol is ``-1/|k|``); the remainder and every
other smooth kernel use the plain trapezoidal rule, which is spectrally
accurate for periodic integrands.  All matrices here use the free-space
kernel ``ln|x - y| / (2 pi)``; domain-adapted corrections are layered on
top elsewhere.

Matrices act on vectors of nodal density values and produce nodal values
of the potential (arc-length weights are folded into the matrices).
"""

from __future__ import annotations

import numpy as np

from .geometry import BoundaryCurve

__all__ = [
    "log_weights",
    "free_single_layer_self",
    "free_adjoint_double_layer_self",
    "free_single_layer_eval",
    "free_single_layer_gradient",
]


def log_weights(n: int) -> np.ndarray:
    """Convolution weights ``w_d`` of the periodic logarithm rule.

    The rule ``sum_j w_((i-j) mod n) h(t_j)`` approximates

        ``(1/pi) * int_0^{2 pi} ln(2 |sin((t_i - s)/2)|) h(s) ds``

    on the equispaced grid ``t_j = 2 pi j / n`` and is exact whenever
    ``h`` is a trigonometric polynomial of degree at most ``n/2`` (the
    discrete symbol is ``-1/|k|`` for ``0 < |k| < n/2``, ``0`` at
    ``k = 0``, and ``-2/n`` at the Nyquist mode).

    Parameters
    ----------
    n : int
        Number of grid points; must be even.
    """
    if n < 4 or n % 2 != 0:
        raise ValueError(f"grid size must be even and >= 4, got {n}")
    half = n // 2
    d = np.arange(n)
    tau = 2.0 * np.pi * d / n
    m = np.arange(1, half)
    w = -(2.0 / n) * (np.cos(np.outer(tau, m)) / m).sum(axis=1)
    w -= ((-1.0) ** d) / (half * n)
    return w


def free_single_layer_self(curve: BoundaryCurve) -> np.ndarray:
    """Self matrix of the free single layer ``(1/2 pi) ln|x - y|``.

    Entry ``(i, j)`` carries the quadrature weight, so ``S @ g`` gives the
    potential at the curve nodes for nodal density values ``g``.
    """
    n = curve.n
    w = log_weights(n)
    t = curve.t
    dt = t[:, None] - t[None, :]
    dx = curve.nodes[:, None, :] - curve.nodes[None, :, :]
    dist = np.hypot(dx[..., 0], dx[..., 1])
    sin_half = 2.0 * np.abs(np.sin(0.5 * dt))
    with np.errstate(divide="ignore", invalid="ignore"):
        m_smooth = np.log(dist / sin_half)
    np.fill_diagonal(m_smooth, np.log(curve.speed))
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return (0.5 * w[idx] + m_smooth / n) * curve.speed[None, :]


def free_adjoint_double_layer_self(curve: BoundaryCurve) -> np.ndarray:
    """Self matrix of the free adjoint double layer.

    Kernel ``<x - y, nu(x)> / (2 pi |x - y|^2)`` with the continuous
    diagonal limit ``kappa(x) / (4 pi)``; smooth on smooth curves, so the
    trapezoidal rule applies.  Arc weights are folded in.
    """
    dx = curve.nodes[:, None, :] - curve.nodes[None, :, :]
    r2 = dx[..., 0] ** 2 + dx[..., 1] ** 2
    num = dx[..., 0] * curve.normals[:, 0][:, None] + \
        dx[..., 1] * curve.normals[:, 1][:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        kern = num / (2.0 * np.pi * r2)
    np.fill_diagonal(kern, curve.curvature / (4.0 * np.pi))
    return kern * curve.weights[None, :]


def free_single_layer_eval(curve: BoundaryCurve, points) -> np.ndarray:
    """Evaluation matrix of the free single layer at off-curve points.

    ``A[p, j] = (1/2 pi) ln|x_p - q_j| w_j``; plain trapezoid, so the
    points must stay several node spacings away from the curve (enforced
    by callers, not here).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dx = pts[:, None, :] - curve.nodes[None, :, :]
    dist = np.hypot(dx[..., 0], dx[..., 1])
    return np.log(dist) * curve.weights[None, :] / (2.0 * np.pi)


def free_single_layer_gradient(curve: BoundaryCurve, points) -> np.ndarray:
    """Gradient of the free single layer at off-curve points.

    Returns shape ``(n_points, n_nodes, 2)`` with
    ``G[p, j] = (x_p - q_j) w_j / (2 pi |x_p - q_j|^2)``, so that
    ``np.einsum('pjd,j->pd', G, g)`` is the potential gradient.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dx = pts[:, None, :] - curve.nodes[None, :, :]
    r2 = dx[..., 0] ** 2 + dx[..., 1] ** 2
    return dx * (curve.weights[None, :] / (2.0 * np.pi * r2))[..., None]
