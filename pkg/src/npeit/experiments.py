"""Experiment drivers behind the command line.

Each ``run_*`` function takes a validated :class:`ExperimentConfig` and an
output directory, runs one study, writes one CSV file, and returns the
in-memory result.  All numeric CSV output uses full round-trip precision
(17 significant digits) and the files are byte-identical across reruns of
the same config: nothing here is sampled, perturbation ladders are
enumerated, and concurrent ladder evaluation is joined in index order.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.stats

from .config import ExperimentConfig
from .disk_oracle import (oracle_limit_trace_coefficient,
                          oracle_transmission_mode)
from .exceptions import ConditioningError, ConfigError, SolverError
from .geometry import (InclusionScene, distance_to_boundary,
                       hausdorff_distance, modified_distance,
                       parse_curve_spec)
from .layers import SceneOperators, build_scene_operators
from .spectrum import NPSpectrum, solve_spectrum
from .transmission import (ExpansionResult, expansion_coefficients,
                           gradient_bound, solve_limit, solve_transmission,
                           trace_constant, trace_distance)

__all__ = [
    "SWEEP_HEADER",
    "STABILITY_HEADER",
    "SPECTRUM_HEADER",
    "EXPANSION_HEADER",
    "ORACLE_HEADER",
    "TRIPLE_LOG_THRESHOLD",
    "SweepResult",
    "StabilityRow",
    "build_operators",
    "format_number",
    "run_expansion",
    "run_oracle_check",
    "run_spectrum",
    "run_stability",
    "run_sweep",
    "triple_log_reference",
]

log = logging.getLogger("npeit.experiments")

SWEEP_HEADER = "k,dist_dirichlet,dist_conductor,grad_ratio"
STABILITY_HEADER = "pair_id,d_H,d_m,Lambda,ref_triple_log"
SPECTRUM_HEADER = "index,family,mu,lambda,residual"
EXPANSION_HEADER = "family,index,A_system,A_projection,gap"
ORACLE_HEADER = "check,value,bound,status"

#: traces closer than this admit a finite triple-log reference value
TRIPLE_LOG_THRESHOLD = math.exp(-math.e)

_MAX_WORKERS = 8


def format_number(x) -> str:
    """Full round-trip decimal rendering (17 significant digits)."""
    return "%.17g" % float(x)


def _write_csv(path: Path, header: str, rows) -> Path:
    lines = [header]
    for row in rows:
        lines.append(row if isinstance(row, str) else ",".join(row))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def build_operators(config: ExperimentConfig,
                    inclusion_spec: str | None = None) -> SceneOperators:
    """Assemble the dense operator set for the configured scene (with an
    optional replacement inclusion, used by the stability pairs)."""
    outer = parse_curve_spec(config.outer, config.n)
    inclusion = parse_curve_spec(inclusion_spec or config.inclusion, config.n)
    return build_scene_operators(InclusionScene(outer, inclusion, config.k0))


# ---------------------------------------------------------------------------
# frequency sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepResult:
    """Per-ladder-point distances to the two high-contrast limits and the
    gradient-bound ratio, plus the fitted log-log decay slope of the
    grounded-limit distance (over the last four points).  ``lam`` is the
    sup over the ladder of the trace distance to a second inclusion's
    solution when one was supplied, else None."""

    ks: tuple[float, ...]
    dist_dirichlet: tuple[float, ...]
    dist_conductor: tuple[float, ...]
    grad_ratio: tuple[float, ...]
    slope: float | None
    lam: float | None = None


def _fit_tail_slope(ks, dists, tail: int = 4) -> float | None:
    pairs = [(k, d) for k, d in zip(ks[-tail:], dists[-tail:]) if d > 0.0]
    if len(pairs) < 2:
        return None
    lk = np.log([p[0] for p in pairs])
    ld = np.log([p[1] for p in pairs])
    return float(np.polyfit(lk, ld, 1)[0])


def run_sweep(config: ExperimentConfig, out_dir,
              against: str | None = None) -> SweepResult:
    """Sweep the conductivity ladder and measure convergence to the
    high-contrast limits; writes ``sweep.csv``.

    ``against`` names a second inclusion curve; when given, the sup over
    the ladder of the trace distance between the two scenes' solutions
    is recorded in the result (the quantity the stability experiment
    ranks pairs by).

    A solver failure mid-ladder flushes the rows computed so far with a
    ``# aborted`` marker line and re-raises.
    """
    ops = build_operators(config)
    outer = ops.scene.outer
    f = config.data_vector(outer.t)
    grounded = solve_limit(ops, f, "grounded")
    conductor = solve_limit(ops, f, "conductor")
    if grounded.beta == 0.0:
        bound_limit = grounded
    else:  # the gradient bound compares against the mean-free problem
        bound_limit = solve_limit(ops, grounded.background.f, "grounded")
    c0 = trace_constant(ops)
    ops_b = build_operators(config, against) if against is not None else None
    ks = config.k_ladder()

    def point(k: float):
        tr = solve_transmission(ops, f, k).outer_trace()
        d_dir = trace_distance(outer, tr, grounded.trace)
        d_con = trace_distance(outer, tr, conductor.trace)
        ratio = gradient_bound(ops, f, k, limit=bound_limit, c0=c0).ratio
        gap = 0.0
        if ops_b is not None:
            tr_b = solve_transmission(ops_b, f, k).outer_trace()
            gap = trace_distance(outer, tr, tr_b)
        return d_dir, d_con, ratio, gap

    path = Path(out_dir) / "sweep.csv"
    rows: list = []
    d_dir_all, d_con_all, ratio_all, gap_all = [], [], [], []
    with ThreadPoolExecutor(max_workers=min(_MAX_WORKERS, len(ks))) as pool:
        futures = [pool.submit(point, k) for k in ks]
        for k, future in zip(ks, futures):
            try:
                d_dir, d_con, ratio, gap = future.result()
            except (SolverError, ConditioningError) as exc:
                rows.append(f"# aborted: {exc}")
                _write_csv(path, SWEEP_HEADER, rows)
                log.error("sweep aborted at k=%g after %d rows: %s",
                          k, len(rows) - 1, exc)
                raise
            rows.append((format_number(k), format_number(d_dir),
                         format_number(d_con), format_number(ratio)))
            d_dir_all.append(d_dir)
            d_con_all.append(d_con)
            ratio_all.append(ratio)
            gap_all.append(gap)
    _write_csv(path, SWEEP_HEADER, rows)
    return SweepResult(
        ks=tuple(ks),
        dist_dirichlet=tuple(d_dir_all),
        dist_conductor=tuple(d_con_all),
        grad_ratio=tuple(ratio_all),
        slope=_fit_tail_slope(ks, d_dir_all),
        lam=max(gap_all) if ops_b is not None else None,
    )


# ---------------------------------------------------------------------------
# spectrum and expansion reports
# ---------------------------------------------------------------------------

_FAMILY_RANK = {"+": 0, "-": 1, "0": 2}


def run_spectrum(config: ExperimentConfig, out_dir) -> NPSpectrum:
    """Report the leading ``n_modes`` eigenpairs (largest ``|lambda|``
    across families); writes ``spectrum.csv``."""
    ops = build_operators(config)
    spectrum = solve_spectrum(ops, config.n_modes)
    ranked = sorted(
        spectrum.modes,
        key=lambda m: (-abs(m.lam), _FAMILY_RANK[m.family], m.index))
    keep = {id(m) for m in ranked[:config.n_modes]}
    selected = [m for m in spectrum.modes if id(m) in keep]
    rows = [(str(m.index), m.family, format_number(m.mu),
             format_number(m.lam), format_number(m.residual))
            for m in selected]
    _write_csv(Path(out_dir) / "spectrum.csv", SPECTRUM_HEADER, rows)
    return NPSpectrum(selected, ops)


def _truncate_per_family(modes, j: int):
    counts: dict[str, int] = {}
    kept = []
    for mode in modes:
        seen = counts.get(mode.family, 0)
        if seen < j:
            kept.append(mode)
            counts[mode.family] = seen + 1
    return kept


def run_expansion(config: ExperimentConfig, out_dir) -> ExpansionResult:
    """Expand the transmission solution at the ladder base conductivity
    over the leading ``j`` modes of each family, reporting both
    coefficient routes and their gap; writes ``expansion.csv``."""
    ops = build_operators(config)
    spectrum = solve_spectrum(ops, max(config.n_modes, config.j_trunc))
    selected = _truncate_per_family(spectrum.modes, config.j_trunc)
    f = config.data_vector(ops.scene.outer.t)
    result = expansion_coefficients(ops, NPSpectrum(selected, ops), f,
                                    config.ladder_base)
    rows = [(mode.family, str(mode.index), format_number(a_sys),
             format_number(a_proj), format_number(abs(a_sys - a_proj)))
            for mode, a_sys, a_proj in zip(result.modes, result.a_system,
                                           result.a_projection)]
    _write_csv(Path(out_dir) / "expansion.csv", EXPANSION_HEADER, rows)
    return result


# ---------------------------------------------------------------------------
# stability experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StabilityRow:
    """Geometry distances and ladder trace gap for one inclusion pair;
    ``reference`` is the triple-log comparison value (nan when the gap
    is zero or too large for the triple logarithm)."""

    pair_id: int
    d_h: float
    d_m: float
    lam: float
    reference: float


def triple_log_reference(lam: float) -> float:
    """``1 / ln(ln(-ln(lam)))`` where defined (``0 < lam < e^-e``),
    nan elsewhere."""
    if 0.0 < lam < TRIPLE_LOG_THRESHOLD:
        return 1.0 / math.log(math.log(-math.log(lam)))
    return math.nan


def _ladder_trace_gap(ops_a: SceneOperators, ops_b: SceneOperators,
                      f: np.ndarray, ks) -> float:
    outer = ops_a.scene.outer

    def gap(k: float) -> float:
        return trace_distance(outer,
                              solve_transmission(ops_a, f, k).outer_trace(),
                              solve_transmission(ops_b, f, k).outer_trace())

    with ThreadPoolExecutor(max_workers=min(_MAX_WORKERS, len(ks))) as pool:
        return float(max(pool.map(gap, ks)))


def _warn_if_separated(pair_id: int, a, b) -> None:
    tol = 3.0 * max(a.max_spacing(), b.max_spacing())
    gap = min(min(distance_to_boundary(b, x) for x in a.nodes),
              min(distance_to_boundary(a, x) for x in b.nodes))
    if gap > tol:
        log.warning(
            "stability pair %d: inclusion boundaries do not touch "
            "(min gap %.3g exceeds %.3g); the contact assumption behind "
            "the stability comparison is violated", pair_id, gap, tol)


def run_stability(config: ExperimentConfig, out_dir) -> list[StabilityRow]:
    """Rank inclusion pairs by their ladder trace gap against geometric
    distances; writes ``stability.csv``.

    Each pair is expected to share a boundary point (checked within node
    tolerance, warned if violated).  Identical pairs short-circuit to a
    zero row with an undefined reference value.  With at least two
    pairs, a non-positive Spearman rank correlation between ``d_H`` and
    the trace gap raises AssertionError (after the CSV is written).
    """
    if not config.stability_pairs:
        raise ConfigError("stability experiment needs [stability] pairs "
                          "or an offset ladder")
    ks = config.k_ladder()
    rows: list[StabilityRow] = []
    for pair_id, (spec_a, spec_b) in enumerate(config.stability_pairs, 1):
        if spec_a == spec_b:
            rows.append(StabilityRow(pair_id, 0.0, 0.0, 0.0, math.nan))
            continue
        ops_a = build_operators(config, spec_a)
        ops_b = build_operators(config, spec_b)
        inc_a, inc_b = ops_a.scene.inclusion, ops_b.scene.inclusion
        _warn_if_separated(pair_id, inc_a, inc_b)
        f = config.data_vector(ops_a.scene.outer.t)
        lam = _ladder_trace_gap(ops_a, ops_b, f, ks)
        rows.append(StabilityRow(
            pair_id=pair_id,
            d_h=hausdorff_distance(inc_a, inc_b),
            d_m=modified_distance(inc_a, inc_b),
            lam=lam,
            reference=triple_log_reference(lam),
        ))
    _write_csv(Path(out_dir) / "stability.csv", STABILITY_HEADER,
               [(str(r.pair_id), format_number(r.d_h), format_number(r.d_m),
                 format_number(r.lam), format_number(r.reference))
                for r in rows])
    if len(rows) >= 2:
        rho = scipy.stats.spearmanr([r.d_h for r in rows],
                                    [r.lam for r in rows]).statistic
        if math.isfinite(rho) and rho <= 0:
            raise AssertionError(
                "stability association violated: Spearman correlation "
                f"between d_H and the trace gap is {rho:.3g} (expected > 0)")
    return rows


# ---------------------------------------------------------------------------
# oracle self-checks
# ---------------------------------------------------------------------------

_ORACLE_GRID = {
    "m": (1, 2, 3, 5, 8),
    "k": (0.2, 3.0, 10.0, 100.0),
    "r0": (0.3, 0.5, 0.7),
    "k0": (1.0, 2.0),
}

_ORACLE_BOUNDS = {
    "matching_residual": 1e-13,
    "flux_jump_identity": 1e-12,
    "trace_closed_form": 1e-12,
    "energy_identity": 1e-11,
    "infinite_contrast_limit": 1e-10,
}


def run_oracle_check(config: ExperimentConfig, out_dir) -> list[tuple]:
    """Validate the concentric-disk closed forms against themselves over
    a parameter grid; writes ``oracle.csv`` and raises AssertionError if
    any check exceeds its bound.

    Checks: the matching residual of each mode solve; the layer-density
    jump identity (annulus-side flux minus inside flux equals the
    density); the closed-form outer trace coefficient; the energy
    identity ``k E_in + k0 E_ann = oint f u``; and agreement of the
    ``k -> infinity`` trace with the infinite-contrast coefficient.
    The scene in the config is not used: the grid is fixed.
    """
    worst = dict.fromkeys(_ORACLE_BOUNDS, 0.0)
    for m in _ORACLE_GRID["m"]:
        for r0 in _ORACLE_GRID["r0"]:
            for k0 in _ORACLE_GRID["k0"]:
                for k in _ORACLE_GRID["k"]:
                    mode = oracle_transmission_mode(m, k, k0, r0)
                    worst["matching_residual"] = max(
                        worst["matching_residual"], mode.residual)
                    jump = (mode.exterior_flux_coeff
                            - mode.interior_flux_coeff - mode.density_coeff)
                    worst["flux_jump_identity"] = max(
                        worst["flux_jump_identity"], abs(jump))
                    tau = r0 ** (2 * m) * (k - k0) / (k + k0)
                    closed = (1.0 - tau) / (k0 * m * (1.0 + tau))
                    worst["trace_closed_form"] = max(
                        worst["trace_closed_form"],
                        abs(mode.trace_coeff - closed))
                    energy = (k * mode.gradient_energy_inside()
                              + k0 * mode.gradient_energy_annulus()
                              - math.pi * mode.f_c * mode.trace_coeff)
                    worst["energy_identity"] = max(
                        worst["energy_identity"], abs(energy))
                limit_gap = abs(
                    oracle_transmission_mode(m, 1e12, k0, r0).trace_coeff
                    - oracle_limit_trace_coefficient(m, k0, r0))
                worst["infinite_contrast_limit"] = max(
                    worst["infinite_contrast_limit"], limit_gap)

    rows = []
    failures = []
    for name, bound in _ORACLE_BOUNDS.items():
        status = "PASS" if worst[name] <= bound else "FAIL"
        if status == "FAIL":
            failures.append(f"{name}={worst[name]:.3g} > {bound:g}")
        rows.append((name, format_number(worst[name]),
                     format_number(bound), status))
    _write_csv(Path(out_dir) / "oracle.csv", ORACLE_HEADER, rows)
    if failures:
        raise AssertionError("oracle self-check failed: "
                             + "; ".join(failures))
    return rows
