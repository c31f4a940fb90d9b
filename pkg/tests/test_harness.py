"""Config parsing, experiment drivers, CSV contracts, CLI exit codes.

Pinned behavior:
  * config parse -> render -> parse is lossless; unknown keys rejected
  * CSV headers: sweep ``k,dist_dirichlet,dist_conductor,grad_ratio``;
    stability ``pair_id,d_H,d_m,Lambda,ref_triple_log``; spectrum
    ``index,family,mu,lambda,residual``; expansion
    ``family,index,A_system,A_projection,gap``
  * numbers in CSV carry 17 significant digits; reruns are byte-identical
  * triple-log reference finite exactly on 0 < Lambda < e^-e
  * exit codes: 0 ok, 2 config/assertion, 3 solver
"""

import math
import textwrap

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from npeit import cli, experiments
from npeit.config import (ExperimentConfig, FourierTerm, config_text,
                          load_config, parse_config, parse_f_terms)
from npeit.exceptions import ConfigError, SolverError
from npeit.experiments import (EXPANSION_HEADER, ORACLE_HEADER,
                               SPECTRUM_HEADER, STABILITY_HEADER,
                               SWEEP_HEADER, TRIPLE_LOG_THRESHOLD,
                               format_number, run_expansion,
                               run_oracle_check, run_spectrum,
                               run_stability, run_sweep,
                               triple_log_reference)

MINI_SCENE = """
[scene]
outer = circle 0 0 1
inclusion = circle 0 0 0.5
n = 64

[sweep]
count = 4
"""

TANGENT_LADDER = """
[scene]
outer = circle 0 0 1
inclusion = circle 0 0 0.4
n = 64

[sweep]
count = 3

[stability]
center = 0 0
radius = 0.4
offsets = 0.02 0.05 0.1
"""


def write_cfg(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text), encoding="utf-8")
    return path


def read_rows(path):
    header, *lines = path.read_text(encoding="utf-8").strip().splitlines()
    return header, [line.split(",") for line in lines
                    if not line.startswith("#")]


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

class TestConfig:
    def test_empty_text_gives_defaults(self):
        assert parse_config("") == ExperimentConfig()

    def test_full_round_trip_is_lossless(self):
        config = parse_config(textwrap.dedent("""
            [scene]
            outer = ellipse 0 0 1.5 1
            inclusion = star 0.1 -0.05 0.3 3:0.08
            n = 96

            [physics]
            k0 = 2.5
            f = const:0.5 cos:1:1 sin:3:-0.25

            [sweep]
            base = 2
            ratio = 8
            count = 5

            [spectrum]
            n_modes = 10
            j = 6

            [stability]
            pairs =
                circle 0 0 0.4 ; circle 0.02 0 0.38
                circle 0 0 0.4 ; circle 0 0 0.4

            [output]
            dir = results
        """))
        assert parse_config(config_text(config)) == config

    def test_curve_specs_are_canonicalized(self):
        a = parse_config("[scene]\nouter = circle 0.0 0.0 1.0\n")
        b = parse_config("[scene]\nouter = circle 0 0 1\n")
        assert a == b

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match=r"\[plotting\]"):
            parse_config("[plotting]\nstyle = dark\n")

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="radius"):
            parse_config("[scene]\nradius = 1\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("[scene]\nn = 64\nn = 128\n")

    def test_malformed_curve_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("[scene]\nouter = circle 0 0\n")

    @pytest.mark.parametrize("term", ["cos:0:1", "tri:1:1", "cos:a:1",
                                      "cos:1", "const", "sin:2:x"])
    def test_malformed_data_term_rejected(self, term):
        with pytest.raises(ConfigError):
            parse_f_terms(term)

    def test_empty_data_rejected(self):
        with pytest.raises(ConfigError):
            parse_f_terms("   ")

    @pytest.mark.parametrize("line", ["n = 63", "n = 6", "n = -8", "n = x"])
    def test_bad_node_count_rejected(self, line):
        with pytest.raises(ConfigError):
            parse_config(f"[scene]\n{line}\n")

    @pytest.mark.parametrize("section,line", [
        ("physics", "k0 = 0"), ("physics", "k0 = -1"),
        ("sweep", "base = 0"), ("sweep", "ratio = -2"),
        ("sweep", "count = 0"), ("spectrum", "n_modes = 0"),
    ])
    def test_nonpositive_numbers_rejected(self, section, line):
        with pytest.raises(ConfigError):
            parse_config(f"[{section}]\n{line}\n")

    def test_pairs_and_offsets_exclusive(self):
        with pytest.raises(ConfigError, match="not both"):
            parse_config("[stability]\npairs =\n    circle 0 0 0.4 ; "
                         "circle 0.1 0 0.3\noffsets = 0.1\n")

    def test_offset_outside_radius_rejected(self):
        with pytest.raises(ConfigError, match="offset"):
            parse_config("[stability]\nradius = 0.4\noffsets = 0.5\n")

    def test_offset_ladder_builds_tangent_pairs(self):
        config = parse_config("[stability]\ncenter = 0.1 0\nradius = 0.4\n"
                              "offsets = 0.05 0.1\n")
        assert len(config.stability_pairs) == 2
        for t, (spec_a, spec_b) in zip([0.05, 0.1], config.stability_pairs):
            ca = [float(tok) for tok in spec_a.split()[1:]]
            cb = [float(tok) for tok in spec_b.split()[1:]]
            assert ca == pytest.approx([0.1, 0.0, 0.4])
            assert cb == pytest.approx([0.1 + t, 0.0, 0.4 - t])
            # internal tangency: center gap equals radius difference
            assert abs(cb[0] - ca[0]) == pytest.approx(ca[2] - cb[2])

    def test_data_vector_evaluates_terms(self):
        config = parse_config("[physics]\nf = const:1 cos:2:0.5 sin:1:-2\n")
        t = np.linspace(0.0, 2.0 * np.pi, 17)[:-1]
        expected = 1.0 + 0.5 * np.cos(2 * t) - 2.0 * np.sin(t)
        assert config.data_vector(t) == pytest.approx(expected, abs=1e-15)

    def test_ladder_values(self):
        config = parse_config("[sweep]\nbase = 3\nratio = 2\ncount = 4\n")
        assert config.k_ladder() == [3.0, 6.0, 12.0, 24.0]

    def test_load_missing_file_raises(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.cfg")

    @given(
        cx=st.floats(-0.2, 0.2), r=st.floats(0.2, 0.45),
        k0=st.floats(0.1, 5.0), amp=st.floats(-10, 10),
        m=st.integers(1, 6), n=st.sampled_from([8, 16, 64]),
        base=st.floats(0.5, 8.0), count=st.integers(1, 5),
    )
    @settings(max_examples=40, deadline=None)
    def test_round_trip_property(self, cx, r, k0, amp, m, n, base, count):
        config = parse_config(textwrap.dedent(f"""
            [scene]
            outer = circle 0 0 1
            inclusion = circle {cx!r} 0 {r!r}
            n = {n}

            [physics]
            k0 = {k0!r}
            f = cos:{m}:{amp!r} const:1

            [sweep]
            base = {base!r}
            count = {count}
        """))
        assert parse_config(config_text(config)) == config


# ---------------------------------------------------------------------------
# sweep driver
# ---------------------------------------------------------------------------

class TestSweep:
    def test_concentric_sweep_decreases_with_good_slope(self, tmp_path):
        config = parse_config(MINI_SCENE.replace("count = 4", "count = 6"))
        result = run_sweep(config, tmp_path)
        d = result.dist_dirichlet
        assert all(a > b for a, b in zip(d, d[1:]))
        assert result.slope is not None and result.slope <= -0.45
        assert all(r <= 1.0 for r in result.grad_ratio)
        assert result.lam is None
        header, rows = read_rows(tmp_path / "sweep.csv")
        assert header == SWEEP_HEADER
        assert len(rows) == 6

    def test_single_point_ladder_has_no_slope(self, tmp_path):
        config = parse_config(MINI_SCENE.replace("count = 4", "count = 1"))
        result = run_sweep(config, tmp_path)
        assert result.slope is None
        assert len(result.ks) == 1

    def test_net_flux_data_separates_the_two_limits(self, tmp_path):
        config = parse_config("""
[scene]
outer = circle 0 0 1
inclusion = circle 0.3 0 0.35
n = 96

[physics]
f = const:1 cos:1:1

[sweep]
count = 5
""")
        result = run_sweep(config, tmp_path)
        d_con = result.dist_conductor
        assert all(a > b for a, b in zip(d_con, d_con[1:]))
        assert d_con[-1] < 1e-3
        d_dir = result.dist_dirichlet
        # grounded-limit distance stalls at the net-flux gap
        assert d_dir[-1] > 0.1
        assert abs(d_dir[-1] - d_dir[-2]) < 0.01 * d_dir[-1]

    def test_second_inclusion_records_trace_gap(self, tmp_path):
        config = parse_config(MINI_SCENE)
        result = run_sweep(config, tmp_path, against="circle 0.1 0 0.4")
        assert result.lam is not None and result.lam > 1e-3

    def test_solver_failure_flushes_partial_csv(self, tmp_path, monkeypatch):
        config = parse_config(MINI_SCENE)
        real = experiments.solve_transmission

        def failing(ops, f, k):
            if k >= 64.0:
                raise SolverError(f"injected failure at k={k}")
            return real(ops, f, k)

        monkeypatch.setattr(experiments, "solve_transmission", failing)
        with pytest.raises(SolverError):
            run_sweep(config, tmp_path)
        text = (tmp_path / "sweep.csv").read_text(encoding="utf-8")
        lines = text.strip().splitlines()
        assert lines[0] == SWEEP_HEADER
        assert lines[-1].startswith("# aborted: ")
        assert len(lines) == 2 + 2  # header, two completed rows, marker


# ---------------------------------------------------------------------------
# spectrum and expansion drivers
# ---------------------------------------------------------------------------

class TestSpectrumExpansion:
    def test_spectrum_row_count_matches_n_modes(self, tmp_path):
        config = parse_config(MINI_SCENE + "\n[spectrum]\nn_modes = 9\n")
        spectrum = run_spectrum(config, tmp_path)
        header, rows = read_rows(tmp_path / "spectrum.csv")
        assert header == SPECTRUM_HEADER
        assert len(rows) == 9 == len(spectrum.modes)
        lams = [abs(float(row[3])) for row in rows]
        # leading concentric eigenvalues r0^(2m), each twice
        assert lams[:4] == pytest.approx([0.25, 0.25, 0.0625, 0.0625],
                                         abs=1e-9)

    def test_expansion_routes_agree_in_csv(self, tmp_path):
        config = parse_config(MINI_SCENE + "\n[spectrum]\nn_modes = 8\nj = 8\n")
        result = run_expansion(config, tmp_path)
        header, rows = read_rows(tmp_path / "expansion.csv")
        assert header == EXPANSION_HEADER
        assert len(rows) == len(result.modes)
        gaps = [float(row[4]) for row in rows]
        assert max(gaps) <= 1e-10
        for row, a_sys, a_proj in zip(rows, result.a_system,
                                      result.a_projection):
            assert float(row[2]) == a_sys
            assert float(row[3]) == a_proj


# ---------------------------------------------------------------------------
# stability driver
# ---------------------------------------------------------------------------

class TestStability:
    def test_tangent_ladder_ranks_with_distance(self, tmp_path):
        config = parse_config(TANGENT_LADDER)
        rows = run_stability(config, tmp_path)
        assert [r.d_h for r in rows] == pytest.approx([0.04, 0.1, 0.2],
                                                      abs=1e-12)
        lams = [r.lam for r in rows]
        assert all(a < b for a, b in zip(lams, lams[1:]))
        header, csv_rows = read_rows(tmp_path / "stability.csv")
        assert header == STABILITY_HEADER
        for row, r in zip(csv_rows, rows):
            ref = float(row[4])
            if 0.0 < r.lam < TRIPLE_LOG_THRESHOLD:
                assert math.isfinite(ref) and ref > 0
            else:
                assert math.isnan(ref)

    def test_identical_pair_gives_zero_row(self, tmp_path):
        config = parse_config("""
[scene]
outer = circle 0 0 1
n = 64

[stability]
pairs =
    circle 0 0 0.4 ; circle 0.0 0.0 0.4
""")
        rows = run_stability(config, tmp_path)
        assert rows[0].d_h == 0.0 and rows[0].d_m == 0.0
        assert rows[0].lam == 0.0
        assert math.isnan(rows[0].reference)
        header, csv_rows = read_rows(tmp_path / "stability.csv")
        assert csv_rows[0][4] == "nan"

    def test_missing_pairs_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            run_stability(parse_config(MINI_SCENE), tmp_path)

    def test_separated_pair_warns(self, tmp_path, caplog):
        config = parse_config("""
[scene]
outer = circle 0 0 1
n = 64

[sweep]
count = 1

[stability]
pairs =
    circle -0.3 0 0.2 ; circle 0.3 0 0.2
""")
        with caplog.at_level("WARNING", logger="npeit.experiments"):
            run_stability(config, tmp_path)
        assert any("do not touch" in rec.message for rec in caplog.records)

    def test_negative_association_raises_after_csv(self, tmp_path,
                                                   monkeypatch):
        config = parse_config(TANGENT_LADDER)
        gaps = iter([0.3, 0.2, 0.1])  # anti-ordered against d_H
        monkeypatch.setattr(experiments, "_ladder_trace_gap",
                            lambda *a, **kw: next(gaps))
        with pytest.raises(AssertionError, match="Spearman"):
            run_stability(config, tmp_path)
        assert (tmp_path / "stability.csv").exists()

    def test_triple_log_reference_domain(self):
        assert math.isnan(triple_log_reference(0.0))
        assert math.isnan(triple_log_reference(TRIPLE_LOG_THRESHOLD))
        assert math.isnan(triple_log_reference(0.5))
        value = triple_log_reference(1e-12)
        assert math.isfinite(value) and value > 0
        # hand value: 1/ln(ln(12 ln 10))
        assert value == pytest.approx(1.0 / math.log(math.log(
            12.0 * math.log(10.0))), rel=1e-12)

    @given(st.floats(1e-300, 0.98, allow_nan=False))
    @settings(max_examples=200, deadline=None)
    def test_triple_log_reference_finite_iff_below_threshold(self, lam):
        value = triple_log_reference(lam)
        if lam < TRIPLE_LOG_THRESHOLD:
            assert math.isfinite(value) and value > 0
        else:
            assert math.isnan(value)

    @given(st.floats(1e-200, 1e-2), st.floats(1e-200, 1e-2))
    @settings(max_examples=100, deadline=None)
    def test_triple_log_reference_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert triple_log_reference(lo) <= triple_log_reference(hi)


# ---------------------------------------------------------------------------
# oracle self-check driver
# ---------------------------------------------------------------------------

class TestOracleCheck:
    def test_all_checks_pass(self, tmp_path):
        rows = run_oracle_check(ExperimentConfig(), tmp_path)
        assert all(row[3] == "PASS" for row in rows)
        header, csv_rows = read_rows(tmp_path / "oracle.csv")
        assert header == ORACLE_HEADER
        assert len(csv_rows) == len(rows) == 5
        for row in csv_rows:
            assert float(row[1]) <= float(row[2])


# ---------------------------------------------------------------------------
# formatting and determinism
# ---------------------------------------------------------------------------

class TestDeterminism:
    def test_full_precision_rendering(self):
        assert format_number(1.0 / 3.0) == "0.33333333333333331"
        assert float(format_number(math.pi)) == math.pi
        assert format_number(float("nan")) == "nan"

    def test_reruns_are_byte_identical(self, tmp_path):
        config = parse_config(MINI_SCENE)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        out_a.mkdir(), out_b.mkdir()
        run_sweep(config, out_a)
        run_sweep(config, out_b)
        assert ((out_a / "sweep.csv").read_bytes()
                == (out_b / "sweep.csv").read_bytes())

    def test_stability_reruns_are_byte_identical(self, tmp_path):
        config = parse_config(TANGENT_LADDER)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        out_a.mkdir(), out_b.mkdir()
        run_stability(config, out_a)
        run_stability(config, out_b)
        assert ((out_a / "stability.csv").read_bytes()
                == (out_b / "stability.csv").read_bytes())


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

class TestCli:
    def test_success_exit_zero(self, tmp_path):
        cfg = write_cfg(tmp_path, MINI_SCENE)
        out = tmp_path / "out"
        assert cli.main(["sweep", "--config", str(cfg),
                         "--out", str(out)]) == 0
        assert (out / "sweep.csv").exists()

    def test_out_dir_from_config_section(self, tmp_path):
        cfg = write_cfg(tmp_path, MINI_SCENE + f"""
[output]
dir = {tmp_path / "nested" / "results"}
""")
        assert cli.main(["spectrum", "--config", str(cfg)]) == 0
        assert (tmp_path / "nested" / "results" / "spectrum.csv").exists()

    def test_missing_out_dir_is_config_error(self, tmp_path):
        cfg = write_cfg(tmp_path, MINI_SCENE)
        assert cli.main(["sweep", "--config", str(cfg)]) == 2

    def test_unknown_key_exit_two(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "[scene]\nbogus = 1\n")
        assert cli.main(["sweep", "--config", str(cfg),
                         "--out", str(tmp_path)]) == 2
        assert "bogus" in capsys.readouterr().err

    def test_missing_config_exit_two(self, tmp_path):
        assert cli.main(["sweep", "--config", str(tmp_path / "no.cfg"),
                         "--out", str(tmp_path)]) == 2

    def test_assertion_failure_exit_two(self, tmp_path, monkeypatch):
        def raiser(config, out_dir):
            raise AssertionError("association violated")

        monkeypatch.setitem(cli._COMMANDS, "stability", (raiser, ""))
        cfg = write_cfg(tmp_path, TANGENT_LADDER)
        assert cli.main(["stability", "--config", str(cfg),
                         "--out", str(tmp_path)]) == 2

    def test_solver_failure_exit_three(self, tmp_path, monkeypatch, capsys):
        def raiser(config, out_dir):
            raise SolverError("no convergence")

        monkeypatch.setitem(cli._COMMANDS, "sweep", (raiser, ""))
        cfg = write_cfg(tmp_path, MINI_SCENE)
        assert cli.main(["sweep", "--config", str(cfg),
                         "--out", str(tmp_path)]) == 3
        assert "solver failure" in capsys.readouterr().err

    def test_every_subcommand_runs_clean(self, tmp_path):
        cfg = write_cfg(tmp_path, MINI_SCENE + TANGENT_LADDER.split("[scene]")[0]
                        + "\n[stability]\noffsets = 0.05\nradius = 0.4\n")
        out = tmp_path / "all"
        for name, artifact in [("spectrum", "spectrum.csv"),
                               ("sweep", "sweep.csv"),
                               ("stability", "stability.csv"),
                               ("expand", "expansion.csv"),
                               ("oracle-check", "oracle.csv")]:
            assert cli.main([name, "--config", str(cfg),
                             "--out", str(out)]) == 0, name
            assert (out / artifact).exists()
