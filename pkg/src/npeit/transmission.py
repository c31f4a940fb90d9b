"""Transmission solves across conductivity contrasts, their infinite-
contrast limits, and spectral diagnostics built on them.

The conductivity problem with coefficient ``k`` on the inclusion and
``k0`` outside, driven by Neumann data ``f`` on the outer boundary, is
reduced to a second-kind equation for a single-layer density ``phi`` on
the inclusion boundary:

    ``(lambda I - K*) phi = d/dnu u0  on the inclusion,``
    ``lambda = (k + k0) / (2 (k - k0))``,

with ``u0`` the inclusion-free background.  Because ``|lambda| > 1/2``
for every positive contrast while ``K*`` has spectral radius below 1/2
on mean-free densities, the solve is uniformly well posed; it is carried
out on the mean-free subspace in symmetrized variables.

Two infinite-contrast limits are provided as bordered linear systems:
the grounded limit (zero trace on the inclusion, arbitrary total input
flux) and the conductor limit (constant trace, flux-free inclusion,
mean-free data); for mean-free data the two coincide.  On top of the
solves sit diagnostics used by the experiments: weighted trace
distances, gradient energies via boundary identities, an a priori
gradient bound with a computable trace constant, the ladder of
conductivity derivatives, and the expansion of the solution in the
spectral densities of the flux-average operator.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import SolverError
from .geometry import InclusionScene
from .green import InteriorNeumannSolver
from .layers import PotentialField, SceneOperators
from .quadrature import free_single_layer_eval, free_single_layer_gradient
from .spectrum import NPSpectrum

__all__ = [
    "BackgroundField",
    "solve_background",
    "TransmissionSolution",
    "solve_transmission",
    "LimitSolution",
    "solve_limit",
    "trace_distance",
    "trace_constant",
    "gradient_bound",
    "derivative_ladder",
    "taylor_outer_trace",
    "ExpansionResult",
    "expansion_coefficients",
]

log = logging.getLogger(__name__)

# margin (in units of |lambda| - 1/2) below which the second-kind solve
# is flagged as nearly resonant
_RESONANCE_MARGIN = 1e-6


# ---------------------------------------------------------------------------
# background field
# ---------------------------------------------------------------------------

@dataclass
class BackgroundField:
    """Inclusion-free potential with outer Neumann data ``f``.

    Solves ``k0 Delta u0 = 0`` in the full domain with
    ``k0 du0/dnu = f`` and zero boundary mean, represented as a free
    single layer on the outer curve plus a constant.  Pure-Neumann
    compatibility requires mean-free data, so the boundary mean of the
    supplied ``f`` is removed before solving and reported in
    ``removed_mean``; ``f`` stores the projected data actually used.
    """

    scene: InclusionScene
    f: np.ndarray
    psi: np.ndarray = field(repr=False)
    constant: float
    trace: np.ndarray = field(repr=False)  # zero-mean values on outer nodes
    removed_mean: float = 0.0

    def evaluate(self, points) -> np.ndarray:
        """Values at interior points (several outer spacings inside)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return free_single_layer_eval(self.scene.outer, pts) @ self.psi \
            + self.constant

    def gradient(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.einsum("pjd,j->pd",
                         free_single_layer_gradient(self.scene.outer, pts),
                         self.psi)

    def inclusion_values(self) -> np.ndarray:
        return self.evaluate(self.scene.inclusion.nodes)

    def inclusion_flux(self) -> np.ndarray:
        """Normal derivative on the inclusion nodes."""
        grad = self.gradient(self.scene.inclusion.nodes)
        return np.einsum("pd,pd->p", grad, self.scene.inclusion.normals)


def solve_background(ops: SceneOperators, f: np.ndarray) -> BackgroundField:
    """Solve the inclusion-free problem, projecting ``f`` to zero mean."""
    scene = ops.scene
    outer = scene.outer
    f = np.asarray(f, dtype=float)
    removed = float(outer.weights @ f) / outer.length()
    h = f - removed
    neumann = _outer_neumann(ops)
    psi_cols, border = neumann.solve(h / scene.k0)
    psi = psi_cols[:, 0]
    if np.max(np.abs(border)) > 1e-8 * max(1.0, float(np.max(np.abs(h)))):
        raise SolverError(
            f"background solve compatibility defect {float(np.max(np.abs(border))):.3e}"
        )
    raw_trace = neumann.s_self @ psi
    constant = -float(outer.weights @ raw_trace) / outer.length()
    return BackgroundField(scene=scene, f=h, psi=psi, constant=constant,
                           trace=raw_trace + constant, removed_mean=removed)


def _outer_neumann(ops: SceneOperators) -> InteriorNeumannSolver:
    """One interior Neumann solver per operator set, built lazily (the
    numeric outer kernel already owns one)."""
    solver = getattr(ops.green, "neumann", None)
    if solver is None:
        solver = getattr(ops, "_neumann_cache", None)
        if solver is None:
            solver = InteriorNeumannSolver(ops.scene.outer)
            ops._neumann_cache = solver
    return solver


# ---------------------------------------------------------------------------
# finite-contrast transmission
# ---------------------------------------------------------------------------

@dataclass
class TransmissionSolution:
    """Solution ``u = u0 + (single layer of phi)`` at contrast ``k``."""

    ops: SceneOperators
    k: float
    lam: float
    background: BackgroundField
    phi: np.ndarray = field(repr=False)

    @property
    def scene(self) -> InclusionScene:
        return self.ops.scene

    @property
    def removed_mean(self) -> float:
        """Boundary mean subtracted from the supplied Neumann data."""
        return self.background.removed_mean

    def layer(self) -> PotentialField:
        return self.ops.potential(self.phi)

    def outer_trace(self) -> np.ndarray:
        """Zero-mean solution trace on the outer nodes."""
        tr = self.background.trace + self.ops.outer_trace(self.phi)
        w = self.scene.outer.weights
        return tr - (w @ tr) / np.sum(w)

    def inclusion_trace(self) -> np.ndarray:
        return self.background.inclusion_values() \
            + self.ops.potential_trace(self.phi)

    def side_flux(self, side: int) -> np.ndarray:
        return self.background.inclusion_flux() + self.ops.side_flux(self.phi, side)

    def evaluate(self, points) -> np.ndarray:
        return self.background.evaluate(points) + self.layer().evaluate(points)

    def gradient(self, points) -> np.ndarray:
        return self.background.gradient(points) + self.layer().gradient(points)

    def flux_matching_residual(self) -> float:
        """Defect of the conormal matching ``k flux(-) = k0 flux(+)``."""
        k0 = self.scene.k0
        r = self.k * self.side_flux(-1) - k0 * self.side_flux(+1)
        return float(np.max(np.abs(r)))

    def gradient_energy(self) -> float:
        """``int_Omega |grad u|^2`` via boundary identities:
        ``oint (f/k0) u - oint_inclusion phi u``."""
        scene = self.scene
        outer_part = scene.outer.weights @ (
            (self.background.f / scene.k0) * self.outer_trace())
        inner_part = scene.inclusion.weights @ (self.phi * self.inclusion_trace())
        return float(outer_part - inner_part)


def contrast_parameter(k: float, k0: float) -> float:
    """``lambda = (k + k0) / (2 (k - k0))`` (infinite at ``k = k0``)."""
    if k <= 0 or k0 <= 0:
        raise ValueError("conductivities must be positive")
    if k == k0:
        return math.inf
    return (k + k0) / (2.0 * (k - k0))


def solve_transmission(ops: SceneOperators, f: np.ndarray,
                       k: float) -> TransmissionSolution:
    """Solve the transmission problem at inclusion conductivity ``k``.

    Neumann compatibility requires mean-free data, so ``f`` is projected
    to zero boundary mean; the subtracted constant is reported on the
    solution as ``removed_mean``.  ``k = k0`` returns the background
    itself.
    """
    scene = ops.scene
    background = solve_background(ops, f)
    lam = contrast_parameter(k, scene.k0)
    n = ops.curve.n
    if math.isinf(lam):
        return TransmissionSolution(ops=ops, k=float(k), lam=lam,
                                    background=background, phi=np.zeros(n))
    if abs(lam) - 0.5 < _RESONANCE_MARGIN:
        log.warning("contrast parameter %.12g is within %.1e of the "
                    "essential spectrum edge 1/2; the solve may lose accuracy",
                    lam, _RESONANCE_MARGIN)
    rhs = background.inclusion_flux()
    phi = _solve_second_kind(ops, lam, rhs)
    return TransmissionSolution(ops=ops, k=float(k), lam=lam,
                                background=background, phi=phi)


def _solve_second_kind(ops: SceneOperators, lam: float,
                       rhs_plain: np.ndarray) -> np.ndarray:
    """Solve ``(lam I - K*) phi = rhs`` on the mean-free subspace."""
    p = ops.mean_free
    rhs_hat = p.T @ ops.hat(rhs_plain)
    reduced = lam * np.eye(p.shape[1]) - p.T @ ops.kstar_hat @ p
    try:
        sol = scipy.linalg.solve(reduced, rhs_hat)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover
        raise SolverError(f"second-kind solve failed at lambda={lam}") from exc
    return ops.unhat(p @ sol)


# ---------------------------------------------------------------------------
# infinite-contrast limits
# ---------------------------------------------------------------------------

@dataclass
class LimitSolution:
    """Infinite-contrast solution (grounded or conductor inclusion).

    The unnormalized field is ``u0(h) + beta N(., y_c) + (single layer
    of psi) + alpha`` where ``h`` is the mean-free part of ``f``,
    ``beta`` the total input flux over ``k0`` (zero in the conductor
    case), ``y_c`` the inclusion center, and ``alpha`` the bordered
    constant.  The stored ``trace`` is zero-mean on the outer boundary
    (``outer_mean`` was subtracted); ``inclusion_value`` is the constant
    the normalized solution takes on the inclusion boundary.
    """

    ops: SceneOperators
    kind: str
    background: BackgroundField
    beta: float
    psi: np.ndarray = field(repr=False)
    alpha: float
    outer_mean: float
    trace: np.ndarray = field(repr=False)
    inclusion_value: float

    def evaluate(self, points) -> np.ndarray:
        """Values in the region between the curves (normalized)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        vals = self.background.evaluate(pts) \
            + self.ops.potential(self.psi).evaluate(pts)
        if self.beta != 0.0:
            center = self.ops.curve.center
            vals += self.beta * self.ops.green.kernel(pts, [center])[:, 0]
        return vals + self.alpha - self.outer_mean

    def annulus_gradient_energy(self) -> float:
        """``int |grad u|^2`` between the curves, via boundary identities.

        The outer term uses the unnormalized trace; the inclusion term
        vanishes in both limits (zero trace for the grounded case, zero
        total flux against a constant trace for the conductor case).
        """
        scene = self.ops.scene
        unnormalized = self.trace + self.outer_mean
        return float(scene.outer.weights @ (
            (self.background.f / scene.k0) * unnormalized))


def solve_limit(ops: SceneOperators, f: np.ndarray, kind: str) -> LimitSolution:
    """Solve an infinite-contrast limit problem.

    ``kind = 'grounded'``: zero trace on the inclusion; ``f`` may carry
    net flux (absorbed by a source term at the inclusion center).
    ``kind = 'conductor'``: constant trace and flux-free inclusion; the
    mean-free part of ``f`` is used.
    """
    if kind not in ("grounded", "conductor"):
        raise ValueError(f"unknown limit kind {kind!r}")
    scene = ops.scene
    outer, curve = scene.outer, scene.inclusion
    f = np.asarray(f, dtype=float)
    total = float(outer.weights @ f)
    if abs(total) <= 1e-12 * max(1.0, float(np.max(np.abs(f), initial=0.0))):
        total = 0.0
    h = f - total / outer.length()
    background = solve_background(ops, h)
    beta = total / scene.k0 if kind == "grounded" else 0.0

    rhs_vals = background.inclusion_values()
    if beta != 0.0:
        rhs_vals = rhs_vals + beta * ops.green.kernel(
            curve.nodes, [curve.center])[:, 0]

    n = curve.n
    trace_op = -ops.s_plain  # operational single-layer trace on the inclusion
    sign = +1.0 if kind == "grounded" else -1.0
    bordered = np.zeros((n + 1, n + 1))
    bordered[:n, :n] = trace_op
    bordered[:n, n] = sign
    bordered[n, :n] = curve.weights
    rhs = np.zeros(n + 1)
    rhs[:n] = -rhs_vals
    sol = scipy.linalg.solve(bordered, rhs)
    psi, extra = sol[:n], float(sol[n])
    # grounded: extra is the additive constant alpha, inclusion trace 0
    # conductor: extra is the inclusion trace constant, alpha = 0
    alpha = extra if kind == "grounded" else 0.0
    inclusion_const = 0.0 if kind == "grounded" else extra

    raw_trace = background.trace + ops.outer_trace(psi) \
        + (beta * ops.green.outer_trace_kernel([curve.center])[:, 0]
           if beta != 0.0 else 0.0) + alpha
    w = outer.weights
    mean = float(w @ raw_trace) / outer.length()
    return LimitSolution(ops=ops, kind=kind, background=background, beta=beta,
                         psi=psi, alpha=alpha, outer_mean=mean,
                         trace=raw_trace - mean,
                         inclusion_value=inclusion_const - mean)


# ---------------------------------------------------------------------------
# trace diagnostics and the gradient bound
# ---------------------------------------------------------------------------

def trace_distance(outer, tr_a: np.ndarray, tr_b: np.ndarray) -> float:
    """Weighted ``L^2`` distance of two zero-mean boundary traces."""
    w = outer.weights
    a = tr_a - (w @ tr_a) / np.sum(w)
    b = tr_b - (w @ tr_b) / np.sum(w)
    return float(np.sqrt(w @ (a - b) ** 2))


def trace_constant(ops: SceneOperators, n_harmonics: int = 12) -> float:
    """Constant ``C0`` with ``|w|_{L2(outer)} <= C0 |grad w|_{L2}`` over
    the region between the curves, for ``w`` with mean-free outer trace.

    The extremal fields are harmonic with an insulated inclusion
    (zero normal derivative on its boundary); the constant is the
    reciprocal square root of the smallest nonzero Steklov value of
    that configuration.  Concentric circles have the closed form
    ``C0 = 1 / sqrt(min_m sigma_m)`` with
    ``sigma_0 = 1/(rho ln(rho/r0))`` and
    ``sigma_m = (m/rho) (1 - s^{2m}) / (1 + s^{2m})``, ``s = r0/rho``.
    Otherwise the constant is estimated by Rayleigh-Ritz on insulated
    solves over a Fourier family of outer Neumann loads; the restriction
    underestimates the supremum, so a 1.5 safety factor is applied
    (recorded in the returned value).
    """
    scene = ops.scene
    outer, curve = scene.outer, scene.inclusion
    if (outer.kind == "circle" and curve.kind == "circle"
            and np.allclose(outer.center, curve.center, atol=1e-14)):
        rho, r0 = float(outer.params[0]), float(curve.params[0])
        s = r0 / rho
        sigma = 1.0 / (rho * math.log(rho / r0))
        for m in range(1, n_harmonics + 1):
            sigma = min(sigma, (m / rho) * (1 - s ** (2 * m)) / (1 + s ** (2 * m)))
        return 1.0 / math.sqrt(sigma)

    loads = []
    for m in range(1, n_harmonics + 1):
        loads.append(np.cos(m * outer.t))
        loads.append(np.sin(m * outer.t))
    w = outer.weights
    traces = []
    for g in loads:
        bg = solve_background(ops, scene.k0 * g)
        # cancel the inclusion flux: exterior-side layer flux is
        # (1/2 + K*) psi, i.e. the lam = -1/2 second-kind problem
        psi = _solve_second_kind(ops, -0.5, bg.inclusion_flux())
        traces.append(bg.trace + ops.outer_trace(psi))
    traces = np.column_stack(traces)
    k = len(loads)
    e = np.empty((k, k))
    t_gram = np.empty((k, k))
    for p in range(k):
        for q in range(k):
            e[p, q] = w @ (loads[p] * traces[:, q])
            t_gram[p, q] = w @ (traces[:, p] * traces[:, q])
    e = 0.5 * (e + e.T)
    t_gram = 0.5 * (t_gram + t_gram.T)
    theta = scipy.linalg.eigh(t_gram, e, eigvals_only=True)
    return 1.5 * math.sqrt(float(np.max(theta)))


@dataclass(frozen=True)
class GradientBound:
    """A priori bounds on the difference field ``v = u(k) - u_limit``.

    With ``M = |grad u_limit|_{L2(annulus)} + C0 |f|_{L2(outer)} / k0``,
    the difference field satisfies ``|grad v|_{L2(annulus)} <= M`` and
    ``|grad v|_{L2(inclusion)} <= M / sqrt(k)``; ``ratio`` and
    ``annulus_ratio`` report the measured left sides over the bounds.
    """

    k: float
    k0: float
    inclusion_gradient: float
    annulus_gradient: float
    limit_gradient: float
    data_norm: float
    c0: float

    @property
    def m_constant(self) -> float:
        return self.limit_gradient + self.c0 * self.data_norm / self.k0

    @property
    def ratio(self) -> float:
        """``|grad v|_{L2(inclusion)} sqrt(k) / M`` (at most 1)."""
        return self.inclusion_gradient * math.sqrt(self.k) / self.m_constant

    @property
    def annulus_ratio(self) -> float:
        """``|grad v|_{L2(annulus)} / M`` (at most 1)."""
        return self.annulus_gradient / self.m_constant


def gradient_bound(ops: SceneOperators, f: np.ndarray, k: float,
                   limit: LimitSolution | None = None,
                   c0: float | None = None) -> GradientBound:
    """Measure the difference field ``v = u(k) - u_limit`` against its
    a priori bounds (grounded limit, mean-free projection of ``f``).

    The limit field is constant inside the inclusion, so the inclusion
    part of ``grad v`` is that of ``u(k)`` alone; both Dirichlet
    energies come from boundary identities (no volume quadrature).
    """
    scene = ops.scene
    curve = scene.inclusion
    sol = solve_transmission(ops, f, k)
    h = sol.background.f
    if limit is None:
        limit = solve_limit(ops, h, "grounded")
    elif limit.beta != 0.0:
        raise ValueError("gradient bound needs the grounded limit of the "
                         "mean-free projection (zero net flux)")
    if c0 is None:
        c0 = trace_constant(ops)

    tr_u = sol.inclusion_trace()
    w_d = curve.weights
    # int_D |grad u|^2 = oint u (du/dnu)|- on the inclusion boundary
    e_inc = float(w_d @ (tr_u * sol.side_flux(-1)))
    # int_annulus |grad v|^2 = -oint v (dv/dnu)|+ : the outer term
    # vanishes (equal Neumann data) and additive constants drop against
    # the flux difference, whose net integral is zero
    flux_lim = limit.background.inclusion_flux() + ops.side_flux(limit.psi, +1)
    e_ann = -float(w_d @ (tr_u * (sol.side_flux(+1) - flux_lim)))

    data_norm = float(np.sqrt(scene.outer.weights @ h**2))
    return GradientBound(
        k=float(k),
        k0=scene.k0,
        inclusion_gradient=math.sqrt(max(e_inc, 0.0)),
        annulus_gradient=math.sqrt(max(e_ann, 0.0)),
        limit_gradient=math.sqrt(max(limit.annulus_gradient_energy(), 0.0)),
        data_norm=data_norm,
        c0=float(c0),
    )


# ---------------------------------------------------------------------------
# derivatives in the conductivity parameter
# ---------------------------------------------------------------------------

def derivative_ladder(ops: SceneOperators, f: np.ndarray, k: float,
                      j_max: int) -> tuple[TransmissionSolution, list[np.ndarray]]:
    """Densities of the conductivity derivatives at contrast ``k``.

    The ``j``-th derivative of the solution map is a pure single layer
    ``u^(j) = S phi_j`` with

        ``(lambda I - K*) phi_j = (j/(k - k0)) * d/dnu u^(j-1)|inside``,

    seeded by the solution itself (``u^(0) = u(k)``).  Returns the base
    solution and ``[phi_1, ..., phi_jmax]``.
    """
    if j_max < 1:
        raise ValueError(f"j_max must be >= 1, got {j_max}")
    scene = ops.scene
    k0 = scene.k0
    if k == k0:
        raise ValueError("derivatives require k != k0 (the map is analytic "
                         "there but this ladder parameterizes by lambda)")
    sol = solve_transmission(ops, f, k)
    lam = sol.lam
    phis: list[np.ndarray] = []
    inner_flux = sol.side_flux(-1)
    for j in range(1, j_max + 1):
        rhs = (j / (k - k0)) * inner_flux
        phi_j = _solve_second_kind(ops, lam, rhs)
        phis.append(phi_j)
        inner_flux = ops.side_flux(phi_j, -1)
    return sol, phis


def taylor_outer_trace(ops: SceneOperators, sol: TransmissionSolution,
                       phis: list[np.ndarray], delta: float,
                       j_max: int | None = None) -> np.ndarray:
    """Outer trace of the Taylor polynomial at contrast ``k + delta``."""
    if j_max is None:
        j_max = len(phis)
    tr = sol.outer_trace().copy()
    fact = 1.0
    for j in range(1, j_max + 1):
        fact *= j
        tr = tr + (delta**j / fact) * ops.outer_trace(phis[j - 1])
    w = ops.scene.outer.weights
    return tr - (w @ tr) / np.sum(w)


def derivative_norm_ratios(ops: SceneOperators, phis: list[np.ndarray],
                           k: float) -> list[float]:
    """Scaled energy norms ``|u^(j)|_V / (j! phi(k)^(j+1))`` with
    ``phi(k) = 1/min(k, k0)``; bounded uniformly in ``j`` and ``k`` when
    the solution map is analytic with the expected radius."""
    k0 = ops.scene.k0
    scale = 1.0 / min(k, k0)
    out = []
    fact = 1.0
    for j, phi in enumerate(phis, start=1):
        fact *= j
        vnorm = math.sqrt(max(ops.energy_norm2(phi), 0.0))
        out.append(vnorm / (fact * scale ** (j + 1)))
    return out


# ---------------------------------------------------------------------------
# spectral expansion of the solution
# ---------------------------------------------------------------------------

@dataclass
class ExpansionResult:
    """Spectral coefficients of ``u(k) - u_limit`` over mode potentials.

    ``a_system`` solves the Galerkin system of the weak form restricted
    to the mode potentials; ``a_projection`` evaluates the closed-form
    coefficient (energy projection of the transmission density plus the
    limit flux moment).  The two routes agree up to truncation.
    """

    modes: list
    a_system: np.ndarray
    a_projection: np.ndarray
    b_moment: np.ndarray
    solution: TransmissionSolution
    limit: LimitSolution

    def max_route_gap(self) -> float:
        return float(np.max(np.abs(self.a_system - self.a_projection)))

    def reconstructed_outer_trace(self, ops: SceneOperators) -> np.ndarray:
        tr = self.limit.trace.copy()
        for a, mode in zip(self.a_system, self.modes):
            tr = tr + a * ops.outer_trace(mode.density)
        w = ops.scene.outer.weights
        return tr - (w @ tr) / np.sum(w)


def expansion_coefficients(ops: SceneOperators, spectrum: NPSpectrum,
                           f: np.ndarray, k: float) -> ExpansionResult:
    """Expand ``u(k) - u_limit`` in the spectral mode potentials.

    The difference is a pure layer potential, so with ``S``-orthonormal
    modes ``w_j`` the weak form against each ``w_j`` closes into

        ``(k - k0) sum_i a_i (grad w_i, grad w_j)_D + k0 a_j = k0 b_j``,

    where the interior Gram is ``(e + d)/2`` from the energy and
    difference forms and ``b_j`` is the limit-flux moment
    ``oint (d/dnu u_limit|+) w_j`` over the inclusion.  The projection
    route evaluates ``a_j = (phi | S g_j) + b_j`` directly from the
    transmission density ``phi``.
    """
    scene = ops.scene
    k0 = scene.k0
    modes = list(spectrum.modes)
    if not modes:
        raise ValueError("spectrum carries no modes")
    # both fields must be driven by the same effective (mean-free) data,
    # otherwise their difference is not a pure inclusion layer
    f = np.asarray(f, dtype=float)
    w_out = scene.outer.weights
    h = f - float(w_out @ f) / scene.outer.length()
    sol = solve_transmission(ops, h, k)
    limit = solve_limit(ops, h, "grounded")

    densities = np.column_stack([m.density for m in modes])
    dens_hat = ops.sqrt_w[:, None] * densities
    e_gram = dens_hat.T @ (ops.s_hat @ dens_hat)
    d_gram = -2.0 * dens_hat.T @ (ops.k_hat @ (ops.s_hat @ dens_hat))
    interior_gram = 0.5 * (e_gram + d_gram)
    interior_gram = 0.5 * (interior_gram + interior_gram.T)

    # limit flux moment against the mode potential traces
    flux_plus = limit.background.inclusion_flux() \
        + ops.side_flux(limit.psi, +1)
    w_d = ops.curve.weights
    traces = -(ops.s_plain @ densities)  # mode potential traces on the inclusion
    b = traces.T @ (w_d * flux_plus)

    n = len(modes)
    system = (k - k0) * interior_gram + k0 * np.eye(n)
    a_system = scipy.linalg.solve(system, k0 * b)

    phi_hat = ops.hat(sol.phi)
    a_projection = dens_hat.T @ (ops.s_hat @ phi_hat) + b

    return ExpansionResult(modes=modes, a_system=a_system,
                           a_projection=a_projection, b_moment=b,
                           solution=sol, limit=limit)
