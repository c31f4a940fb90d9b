"""Layer-potential operators of an inclusion scene.

All operators live on the inclusion boundary and are built against the
outer-domain kernel, so the fields they represent automatically carry
zero-mean, constant-flux data on the outer boundary.  Three coupled
objects matter downstream:

* the flux-average operator ``K*`` (adjoint double layer): the average of
  the two one-sided normal derivatives of a single layer, with the jump
  relation ``flux(+/-) = (+/- 1/2 + K*) g``;
* the energy form ``S``: with the sign flipped relative to the raw trace
  of the single layer, ``(g | S g)`` equals the squared gradient norm of
  the potential over the whole domain, so ``S`` is a positive-definite
  Gram matrix on densities (positivity holds on all of L^2 here, not just
  mean-free densities, thanks to the outer normalization);
* the energy difference ``-2 (g | K S h)``: interior-minus-exterior
  gradient energy of the potentials, the bilinear form whose quotient
  against ``S`` is extremized by the spectral densities.

Matrices are kept in two representations: "plain" (acting on nodal
values, quadrature weights folded in) and "hat" (conjugated by the square
root of the weights), in which ``S`` is exactly symmetric and adjoints
are exact transposes.  The mean-free constraint is handled by an
orthonormal basis of the hat subspace orthogonal to the weight vector.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import EvaluationDomainError
from .geometry import BoundaryCurve, InclusionScene, distance_to_boundary
from .green import make_green
from .quadrature import (
    free_adjoint_double_layer_self,
    free_single_layer_eval,
    free_single_layer_gradient,
    free_single_layer_self,
)

__all__ = [
    "SceneOperators",
    "build_scene_operators",
    "PotentialField",
]

log = logging.getLogger(__name__)

_EVAL_MARGIN_SPACINGS = 3.0


def _mean_free_basis(w0: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the hyperplane orthogonal to ``w0``.

    Columns of the returned ``(n, n-1)`` matrix are the trailing columns
    of the Householder reflection exchanging ``w0`` with a coordinate
    axis; deterministic and exactly orthonormal.
    """
    n = w0.shape[0]
    v = w0.copy()
    v[0] += np.sign(w0[0]) if w0[0] != 0 else 1.0
    h = np.eye(n) - 2.0 * np.outer(v, v) / (v @ v)
    return h[:, 1:]


@dataclass
class SceneOperators:
    """Assembled boundary operators for one scene.

    Attributes
    ----------
    scene : InclusionScene
    green : DiskGreen or NumericGreen
        Outer-domain kernel the operators were built against.
    s_plain : ndarray
        Energy-sign single-layer trace matrix (positive definite form):
        the potential trace on the inclusion is ``-s_plain @ g``.
    kstar_plain : ndarray
        Flux-average operator on nodal values.
    s_hat, kstar_hat, k_hat : ndarray
        Hat-space versions; ``s_hat`` is exactly symmetric and
        ``k_hat = kstar_hat.T``.
    mean_free : ndarray, shape (n, n-1)
        Orthonormal basis of the mean-free hat subspace.
    correction_defect : float
        Asymmetry of the kernel correction block before symmetrization
        (zero for the closed-form disk kernel).
    """

    scene: InclusionScene
    green: object
    s_plain: np.ndarray = field(repr=False)
    kstar_plain: np.ndarray = field(repr=False)
    s_hat: np.ndarray = field(repr=False)
    kstar_hat: np.ndarray = field(repr=False)
    k_hat: np.ndarray = field(repr=False)
    sqrt_w: np.ndarray = field(repr=False)
    mean_free: np.ndarray = field(repr=False)
    correction_defect: float = 0.0

    # -- representations ------------------------------------------------------

    @property
    def curve(self) -> BoundaryCurve:
        return self.scene.inclusion

    def hat(self, g: np.ndarray) -> np.ndarray:
        """Nodal values to hat coordinates."""
        return self.sqrt_w * g

    def unhat(self, g_hat: np.ndarray) -> np.ndarray:
        return g_hat / self.sqrt_w

    def project_mean_free(self, g: np.ndarray) -> np.ndarray:
        """Remove the weighted mean from nodal values."""
        w = self.curve.weights
        return g - (w @ g) / np.sum(w)

    # -- operator actions -----------------------------------------------------

    def potential_trace(self, g: np.ndarray) -> np.ndarray:
        """Trace of the single-layer potential of ``g`` on the inclusion."""
        return -(self.s_plain @ g)

    def side_flux(self, g: np.ndarray, side: int) -> np.ndarray:
        """One-sided normal derivative of the potential on the inclusion:
        ``side = +1`` from outside, ``-1`` from inside."""
        if side not in (+1, -1):
            raise ValueError(f"side must be +1 or -1, got {side}")
        return 0.5 * side * g + self.kstar_plain @ g

    def flux_average(self, g: np.ndarray) -> np.ndarray:
        return self.kstar_plain @ g

    # -- energy forms ---------------------------------------------------------

    def energy_norm2(self, g: np.ndarray, h: np.ndarray | None = None) -> float:
        """``(g | S h)`` = full-domain gradient energy of the potentials."""
        h = g if h is None else h
        return float(self.hat(g) @ (self.s_hat @ self.hat(h)))

    def energy_difference(self, g: np.ndarray, h: np.ndarray | None = None) -> float:
        """Interior-minus-exterior gradient energy, ``-2 (g | K S h)``."""
        h = g if h is None else h
        return float(-2.0 * self.hat(g) @ (self.k_hat @ (self.s_hat @ self.hat(h))))

    def energy_quotient(self, g: np.ndarray) -> float:
        """Rayleigh quotient of the difference form against the energy."""
        denom = self.energy_norm2(g)
        if denom <= 0:
            raise ValueError("density has nonpositive energy; cannot form quotient")
        return self.energy_difference(g) / denom

    # -- fields ---------------------------------------------------------------

    def potential(self, g: np.ndarray, constant: float = 0.0) -> "PotentialField":
        """Single-layer potential of nodal density ``g`` on the inclusion."""
        return PotentialField(self.green, self.curve, np.asarray(g, float),
                              float(constant))

    def outer_trace(self, g: np.ndarray) -> np.ndarray:
        """Trace of the potential of ``g`` on the outer-boundary nodes."""
        src = self.curve
        return self.green.outer_trace_kernel(src.nodes) @ (g * src.weights)


def build_scene_operators(scene: InclusionScene, green=None,
                          method: str = "auto") -> SceneOperators:
    """Assemble the boundary operators of a scene.

    Parameters
    ----------
    scene : InclusionScene
    green : optional
        Prebuilt outer kernel (otherwise constructed per ``method``).
    method : str
        Passed to :func:`npeit.green.make_green` when building the kernel.
    """
    if green is None:
        green = make_green(scene.outer, method)
    curve = scene.inclusion
    w = curve.weights
    sqrt_w = np.sqrt(w)

    corr = green.correction(curve.nodes, curve.nodes)
    defect = float(np.max(np.abs(corr - corr.T)))
    if defect > 1e-9:
        log.warning("kernel correction asymmetry %.3e; symmetrizing", defect)
    corr = 0.5 * (corr + corr.T)

    s_op_plain = free_single_layer_self(curve) + corr * w[None, :]
    s_plain = -s_op_plain

    dcorr = green.correction_gradient_x(curve.nodes, curve.nodes)
    dnu_corr = np.einsum("ijd,id->ij", dcorr, curve.normals)
    kstar_plain = free_adjoint_double_layer_self(curve) + dnu_corr * w[None, :]

    s_hat = sqrt_w[:, None] * s_plain / sqrt_w[None, :]
    s_hat = 0.5 * (s_hat + s_hat.T)  # symmetric up to roundoff by construction
    kstar_hat = sqrt_w[:, None] * kstar_plain / sqrt_w[None, :]

    w0 = sqrt_w / np.linalg.norm(sqrt_w)
    basis = _mean_free_basis(w0)

    return SceneOperators(
        scene=scene, green=green, s_plain=s_plain, kstar_plain=kstar_plain,
        s_hat=s_hat, kstar_hat=kstar_hat, k_hat=kstar_hat.T.copy(),
        sqrt_w=sqrt_w, mean_free=basis, correction_defect=defect,
    )


@dataclass
class PotentialField:
    """Single-layer potential ``x -> int N(x, y) g(y) dsigma(y) + c``.

    Evaluation is restricted to points at least three node spacings away
    from the source curve (the trapezoidal rule degrades closer in) and
    within the outer domain; traces on the two boundaries go through the
    dedicated quadrature paths instead of this generic evaluator.
    """

    green: object
    source: BoundaryCurve
    density: np.ndarray
    constant: float = 0.0

    def _guard(self, pts):
        margin = _EVAL_MARGIN_SPACINGS * self.source.max_spacing()
        for p in pts:
            if distance_to_boundary(self.source, p) < margin:
                raise EvaluationDomainError(
                    f"evaluation point {tuple(p)} is within {margin:.3g} of "
                    "the source curve; move away or refine the grid"
                )

    def evaluate(self, points) -> np.ndarray:
        """Field values at interior points away from the source curve."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        self._guard(pts)
        gw = self.density * self.source.weights
        return self.green.kernel(pts, self.source.nodes) @ gw + self.constant

    def gradient(self, points) -> np.ndarray:
        """Field gradient at interior points away from the source curve."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        self._guard(pts)
        free = np.einsum("pjd,j->pd",
                         free_single_layer_gradient(self.source, pts),
                         self.density)
        corr = np.einsum("pjd,j->pd",
                         self.green.correction_gradient_x(pts, self.source.nodes),
                         self.density * self.source.weights)
        return free + corr

    def outer_trace(self) -> np.ndarray:
        """Trace on the outer-boundary nodes."""
        gw = self.density * self.source.weights
        return self.green.outer_trace_kernel(self.source.nodes) @ gw + self.constant
