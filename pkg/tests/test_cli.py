"""Config parsing, output formats, and command orchestration."""

import numpy as np
import pytest

from ridk.cli import (ConfigError, RunConfig, build_run_plan,
                      format_diagnostics, main, parse_config, read_snapshot,
                      render_meta, write_snapshot)
from ridk.fespace import PairSpace, StatePair, interpolate
from ridk.mesh import build_interval, build_torus2d
from ridk.solver import Base, ExtraDiffusion, RidkParams, TimeScaleSwitch, run


MINIMAL = """
[model]
sigma = 0.25

[discretization]
n = 32
dt = 0.01
t_end = 0.1
"""

REACTIVE = """
[model]
gamma = 0.25
sigma = 0.25
epsilon = 0.1
n_particles = 50

[discretization]
n = 32
dt = 0.01
t_end = 0.05

[reaction]
kappa = 5.0
radius = 0.5
counts = 40, 10
mu_a = 2.0
mu_b = 4.0
spread_a = 0.7
spread_b = 0.5
"""


def expect_error(text, fragment, **kwargs):
    with pytest.raises(ConfigError) as err:
        parse_config(text, **kwargs)
    assert fragment in str(err.value), str(err.value)
    return str(err.value)


class TestParseDefaults:
    def test_empty_text_gives_defaults(self):
        cfg = parse_config("")
        m = cfg.sections["model"]
        assert m["gamma"] == 0.25
        assert m["sigma"] == 0.25
        assert m["epsilon"] == 0.05
        assert m["n_particles"] == 1000
        assert m["delta"] == 1e-4
        assert m["potential"] == "none"
        d = cfg.sections["discretization"]
        assert d["dimension"] == 1 and d["q"] == 0
        assert d["n"] == 256
        assert d["dt"] == 1e-3 and d["t_end"] == 1.0
        assert cfg.sections["variant"] == {"kind": "base"}
        assert cfg.sections["noise"] == {"truncation": "auto", "seed": 0}
        o = cfg.sections["output"]
        assert o["directory"] == "out"
        assert o["snapshot_times"] == ()
        assert o["grid"] == 400
        assert not cfg.two_species

    def test_minimal_file_fills_defaults(self):
        cfg = parse_config(MINIMAL)
        assert cfg.sections["discretization"]["n"] == 32
        assert cfg.sections["model"]["gamma"] == 0.25
        assert cfg.sections["variant"]["kind"] == "base"

    def test_two_dimensional_defaults(self):
        cfg = parse_config("[discretization]\ndimension = 2\n")
        d = cfg.sections["discretization"]
        assert d["nx"] == 32 and d["ny"] == 32
        assert d["dt"] == 1e-2
        assert "n" not in d

    def test_comments_and_blank_lines_ignored(self):
        cfg = parse_config("# top comment\n\n[model]\n; note\ngamma = 0.5\n")
        assert cfg.sections["model"]["gamma"] == 0.5


class TestValidationErrors:
    def test_negative_gamma_names_section_key(self):
        msg = expect_error("[model]\ngamma = -1\n", "[model] gamma")
        assert "line 2" in msg

    def test_unknown_key_reports_line(self):
        msg = expect_error("[model]\nsigma = 0.25\ngmma = 1\n",
                           "[model] gmma: unknown key")
        assert "line 3" in msg

    def test_unknown_section(self):
        expect_error("[mdel]\ngamma = 1\n", "[mdel]: unknown section")

    def test_duplicate_key(self):
        expect_error("[model]\ngamma = 1\ngamma = 2\n", "duplicate")

    def test_key_before_any_section(self):
        msg = expect_error("gamma = 1\n[model]\n", "[section] header")
        assert "line 1" in msg

    def test_not_a_number(self):
        expect_error("[model]\ngamma = fast\n", "expected a number")

    def test_n_particles_not_integer(self):
        expect_error("[model]\nn_particles = 12.5\n", "expected an integer")

    def test_sigma_zero_needs_kbt(self):
        expect_error("[model]\nsigma = 0\n", "[model] kbt: required")
        cfg = parse_config("[model]\nsigma = 0\nkbt = 0.125\n")
        assert cfg.sections["model"]["kbt"] == 0.125

    def test_kbt_rejected_when_noisy(self):
        expect_error("[model]\nkbt = 0.125\n", "[model] kbt")

    def test_epsilon_positive(self):
        expect_error("[model]\nepsilon = 0\n", "[model] epsilon")

    def test_q_positive_rejected_in_2d(self):
        expect_error("[discretization]\ndimension = 2\nq = 1\n",
                     "q = 0 only")

    def test_resolution_keys_match_dimension(self):
        expect_error("[discretization]\nnx = 16\n", "[discretization] nx")
        expect_error("[discretization]\ndimension = 2\nn = 16\n",
                     "[discretization] n")

    def test_dt_must_divide_t_end(self):
        expect_error("[discretization]\ndt = 0.3\nt_end = 1.0\n",
                     "must divide t_end")

    def test_snapshot_times_validated(self):
        base = "[discretization]\ndt = 0.01\nt_end = 0.1\n[output]\n"
        expect_error(base + "snapshot_times = 0.005\n", "not a multiple")
        expect_error(base + "snapshot_times = 0.2\n", "outside")
        expect_error(base + "snapshot_times = 0.05, 0.02\n",
                     "strictly increasing")

    def test_variant_kind_and_parameters(self):
        expect_error("[variant]\nkind = magic\n", "[variant] kind")
        expect_error("[variant]\nd0 = 0.5\n", "not valid for kind = base")
        expect_error("[variant]\nkind = extra-diffusion\ntau = 0.2\n",
                     "[variant] tau")
        expect_error("[variant]\nkind = time-scale\nd0 = 0.5\n",
                     "[variant] d0")
        cfg = parse_config("[variant]\nkind = extra-diffusion\n")
        assert cfg.sections["variant"]["d0"] == 0.5
        cfg = parse_config("[variant]\nkind = time-scale\n")
        assert cfg.sections["variant"]["tau"] == 0.2

    def test_truncation_values(self):
        expect_error("[noise]\ntruncation = sometimes\n", "[noise] truncation")
        expect_error("[noise]\ntruncation = 0\n", "must be positive")
        cfg = parse_config("[noise]\ntruncation = 12\n")
        assert cfg.sections["noise"]["truncation"] == 12

    def test_seed_nonnegative(self):
        expect_error("[noise]\nseed = -3\n", "[noise] seed")

    def test_reaction_requirements(self):
        expect_error("[reaction]\nkappa = 1\n", "missing required key")
        expect_error(REACTIVE.replace("counts = 40, 10", "counts = 40, 11"),
                     "must sum to n_particles")
        expect_error(REACTIVE.replace("counts = 40, 10", "counts = 50"),
                     "expected two integers")
        expect_error(REACTIVE.replace("mu_a = 2.0", "mu_a = 2.0, 1.0"),
                     "[reaction] mu_a")
        expect_error(REACTIVE.replace("radius = 0.5", "radius = 4.0"),
                     "(0, pi)")

    def test_fixed_truncation_single_species_only(self):
        expect_error(REACTIVE + "\n[noise]\ntruncation = 8\n",
                     "single-species runs only")

    def test_output_constraints(self):
        expect_error("[output]\ndirectory =\n", "[output] directory")
        expect_error("[output]\ngrid = 1\n", "[output] grid")

    def test_potential_errors_name_the_key(self):
        expect_error("[model]\npotential = cos(z)\n", "[model] potential")

    def test_malformed_seed_line(self):
        expect_error("seed=ten\n[model]\n", "malformed seed line")


class TestPresets:
    def test_fig_intro_expansion(self):
        cfg = parse_config("[model]\npreset = fig_intro\n")
        m = cfg.sections["model"]
        assert m["preset"] == "fig_intro"
        assert m["gamma"] == 0.25 and m["sigma"] == 0.25
        assert m["epsilon"] == 0.05 and m["n_particles"] == 1000
        assert m["potential"] == "cos(x)^2/2"
        d = cfg.sections["discretization"]
        assert d["n"] == 256 and d["t_end"] == 10.0
        assert cfg.sections["output"]["snapshot_times"] == \
            (0.0, 2.5, 5.0, 7.5, 10.0)
        assert cfg.sections["noise"]["seed"] == 101

    def test_preset_flag_used_without_file(self):
        cfg = parse_config("", preset="fig_diffusion")
        assert cfg.sections["variant"] == {"kind": "extra-diffusion",
                                           "d0": 0.5}

    def test_preset_flag_wins_over_file_key(self):
        cfg = parse_config("[model]\npreset = fig_intro\n", preset="fig_tau")
        assert cfg.sections["model"]["preset"] == "fig_tau"
        assert cfg.sections["variant"]["kind"] == "time-scale"

    def test_file_keys_override_preset_values(self):
        cfg = parse_config("[model]\npreset = fig_intro\nsigma = 0.5\n")
        assert cfg.sections["model"]["sigma"] == 0.5

    def test_two_species_preset(self):
        cfg = parse_config("", preset="twod_react")
        assert cfg.two_species
        r = cfg.sections["reaction"]
        assert r["counts"] == (4500, 500)
        assert r["mu_a"] == (4.5, 1.5) and r["mu_b"] == (4.2, 5.0)
        assert r["rho_th"] == 0.012
        d = cfg.sections["discretization"]
        assert d["dimension"] == 2 and d["nx"] == 32 and d["ny"] == 32

    def test_unknown_preset(self):
        expect_error("[model]\npreset = fig_nope\n", "unknown preset")
        with pytest.raises(ConfigError):
            parse_config("", preset="fig_nope")


class TestOverridesAndRoundTrip:
    def test_override_applies(self):
        cfg = parse_config("", preset="fig_tau",
                           overrides=("variant.tau=0.3",))
        assert cfg.sections["variant"]["tau"] == 0.3

    def test_override_shape_errors(self):
        for item in ("variant.tau", "tau=0.3", ".tau=0.3", "variant.=0.3"):
            with pytest.raises(ConfigError):
                parse_config("", overrides=(item,))
        with pytest.raises(ConfigError):
            parse_config("", overrides=("variant.spin=1",))
        with pytest.raises(ConfigError):
            parse_config("", overrides=("model.preset=fig_intro",))

    def test_override_values_validated(self):
        expect_error("", "[model] gamma", overrides=("model.gamma=-2",))

    @pytest.mark.parametrize("preset", ["fig_intro", "fig_diffusion",
                                        "fig_tau", "twod_react",
                                        "twod_react_tau"])
    def test_echo_round_trip_presets(self, preset):
        cfg = parse_config("", preset=preset)
        again = parse_config(cfg.echo())
        assert cfg == again

    def test_echo_round_trip_custom(self):
        cfg = parse_config(REACTIVE, overrides=("noise.seed=9",))
        assert parse_config(cfg.echo()) == cfg

    def test_meta_round_trip(self):
        cfg = parse_config(MINIMAL)
        meta = render_meta(cfg, (7, 8))
        assert meta.splitlines()[0].startswith("# ridk ")
        assert meta.splitlines()[1] == "seed=7"
        assert meta.splitlines()[2] == "seed=8"
        assert parse_config(meta) == cfg

    def test_configs_compare_by_value(self):
        assert parse_config(MINIMAL) == parse_config(MINIMAL)
        assert parse_config(MINIMAL) != parse_config("")


class TestBuildRunPlan:
    def test_single_species_plan(self):
        plan = build_run_plan(parse_config(MINIMAL))
        assert not plan.two_species
        assert plan.dimension == 1 and plan.resolution == 32
        assert plan.grid == (0.01, 0.1)
        assert plan.params.sigma == 0.25
        assert isinstance(plan.variant, Base)
        x = np.linspace(0.0, 2 * np.pi, 7)
        assert np.all(plan.init[0](x) > 0)

    def test_variant_construction(self):
        plan = build_run_plan(parse_config("", preset="fig_diffusion"))
        assert isinstance(plan.variant, ExtraDiffusion) and plan.variant.d0 == 0.5
        plan = build_run_plan(parse_config("", preset="fig_tau"))
        assert isinstance(plan.variant, TimeScaleSwitch) and plan.variant.tau == 0.2

    def test_reactive_plan_scales_species_masses(self):
        plan = build_run_plan(parse_config(REACTIVE))
        assert plan.two_species
        assert plan.particle_counts == (40, 10)
        assert plan.coupling.scale == pytest.approx(
            5.0 * np.pi * 0.5 ** 2 * 50)
        from scipy.integrate import quad
        mass_a, _ = quad(plan.init_a[0], 0.0, 2 * np.pi, limit=200)
        mass_b, _ = quad(plan.init_b[0], 0.0, 2 * np.pi, limit=200)
        assert mass_a == pytest.approx(0.8, abs=1e-9)
        assert mass_b == pytest.approx(0.2, abs=1e-9)


class TestFormats:
    def run_small(self):
        space = PairSpace(build_interval(16), 0)
        params = RidkParams(0.25, 0.25, 0.1, 1000)
        init = (lambda x: np.full(np.shape(x), 1.0 / (2 * np.pi)),
                lambda x: 0.0 * x)
        return run(space, params, Base(), init, (0.01, 0.05), seed=3,
                   snapshot_times=(0.05,))

    def test_diagnostics_format(self):
        out = self.run_small()
        text = format_diagnostics(out)
        lines = text.splitlines()
        assert lines[0] == "t,mass,min_rho,l2_rho,l2_j,energy"
        assert len(lines) == 1 + len(out.times)
        cells = lines[-1].split(",")
        assert len(cells) == 6
        # 17 significant digits reproduce the doubles exactly
        assert float(cells[1]) == out.mass[-1]
        assert float(cells[5]) == out.energy[-1]

    def test_snapshot_round_trip_1d(self, tmp_path):
        out = self.run_small()
        t, pair = out.snapshots[0]
        path = tmp_path / "snapshot_0000.dat"
        write_snapshot(path, pair, t)
        snap = read_snapshot(path)
        assert snap["dimension"] == 1 and snap["q"] == 0
        assert snap["shape"] == (16,)
        assert snap["t"] == t
        np.testing.assert_array_equal(snap["rho"], pair.rho.coeffs)
        np.testing.assert_array_equal(snap["j"], pair.j.coeffs)

    def test_snapshot_round_trip_2d(self, tmp_path):
        space = PairSpace(build_torus2d(4, 4), 0)
        pair = StatePair(
            interpolate(space.rho, lambda x, y: np.cos(x) + 2.0),
            interpolate(space.j, lambda x, y: np.stack(
                [np.sin(x), np.cos(y)], axis=-1)))
        path = tmp_path / "s.dat"
        write_snapshot(path, pair, 1.5)
        snap = read_snapshot(path)
        assert snap["dimension"] == 2 and snap["shape"] == (4, 4)
        assert snap["t"] == 1.5
        np.testing.assert_array_equal(snap["rho"], pair.rho.coeffs)
        np.testing.assert_array_equal(snap["j"], pair.j.coeffs)

    def test_snapshot_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "bad.dat"
        path.write_bytes(b"NOTASNAP" + b"\x00" * 64)
        with pytest.raises(ValueError, match="bad.dat"):
            read_snapshot(path)

    def test_snapshot_rejects_truncation(self, tmp_path):
        out = self.run_small()
        t, pair = out.snapshots[0]
        path = tmp_path / "cut.dat"
        write_snapshot(path, pair, t)
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(ValueError, match="cut.dat"):
            read_snapshot(path)


class TestMainRun:
    def write_config(self, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text(MINIMAL + "\n[output]\nsnapshot_times = 0.0, 0.1\n")
        return cfg

    def test_run_writes_outputs(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path)
        out = tmp_path / "o"
        assert main(["run", str(cfg), "--seed", "7", "--out", str(out)]) == 0
        names = sorted(p.name for p in out.iterdir())
        assert names == ["diagnostics.csv", "meta", "snapshot_0000.dat",
                         "snapshot_0001.dat"]
        echoed = capsys.readouterr().out
        assert "[model]" in echoed and "gamma = 0.25" in echoed
        meta = (out / "meta").read_text()
        assert meta.splitlines()[0].startswith("# ridk ")
        assert "seed=7" in meta.splitlines()[1]
        # the echoed meta re-parses to the executed config
        again = parse_config(meta)
        assert again.sections["noise"]["seed"] == 7
        assert again.sections["output"]["directory"] == str(out)
        text = (out / "diagnostics.csv").read_text()
        assert text.startswith("t,mass,min_rho,l2_rho,l2_j,energy\n")
        assert len(text.splitlines()) == 1 + 11  # t=0 plus 10 steps

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = self.write_config(tmp_path)
        main(["run", str(cfg), "--seed", "7", "--out", str(tmp_path / "a")])
        main(["run", str(cfg), "--seed", "7", "--out", str(tmp_path / "b")])
        a = (tmp_path / "a" / "diagnostics.csv").read_bytes()
        b = (tmp_path / "b" / "diagnostics.csv").read_bytes()
        assert a == b
        sa = (tmp_path / "a" / "snapshot_0001.dat").read_bytes()
        sb = (tmp_path / "b" / "snapshot_0001.dat").read_bytes()
        assert sa == sb

    def test_seed_changes_output(self, tmp_path):
        cfg = self.write_config(tmp_path)
        main(["run", str(cfg), "--seed", "7", "--out", str(tmp_path / "a")])
        main(["run", str(cfg), "--seed", "8", "--out", str(tmp_path / "b")])
        a = (tmp_path / "a" / "diagnostics.csv").read_bytes()
        b = (tmp_path / "b" / "diagnostics.csv").read_bytes()
        assert a != b

    def test_fixed_truncation_changes_noise(self, tmp_path):
        cfg = self.write_config(tmp_path)
        main(["run", str(cfg), "--seed", "4", "--out", str(tmp_path / "a")])
        main(["run", str(cfg), "--seed", "4", "--out", str(tmp_path / "b"),
              "--override", "noise.truncation=6"])
        a = (tmp_path / "a" / "diagnostics.csv").read_text().splitlines()[-1]
        b = (tmp_path / "b" / "diagnostics.csv").read_text().splitlines()[-1]
        assert a != b

    def test_two_species_run_writes_per_species_files(self, tmp_path):
        cfg = tmp_path / "r.ini"
        cfg.write_text(REACTIVE + "\n[output]\nsnapshot_times = 0.05\n")
        out = tmp_path / "o"
        assert main(["run", str(cfg), "--out", str(out)]) == 0
        names = sorted(p.name for p in out.iterdir())
        assert names == ["diagnostics_A.csv", "diagnostics_B.csv", "meta",
                         "snapshot_A_0000.dat", "snapshot_B_0000.dat"]
        snap = read_snapshot(out / "snapshot_B_0000.dat")
        assert snap["t"] == pytest.approx(0.05)

    def test_invalid_config_exits_1(self, tmp_path, capsys):
        cfg = tmp_path / "bad.ini"
        cfg.write_text("[model]\ngamma = -1\n")
        assert main(["run", str(cfg)]) == 1
        assert "[model] gamma" in capsys.readouterr().err

    def test_missing_config_file_exits_1(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "nope.ini")]) == 1
        assert "cannot read config" in capsys.readouterr().err

    def test_numerical_failure_exits_2(self, tmp_path, capsys, monkeypatch):
        import ridk.cli as cli_module

        def boom(*args, **kwargs):
            raise RuntimeError("factorization failed")

        monkeypatch.setattr(cli_module, "run", boom)
        cfg = self.write_config(tmp_path)
        assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2
        assert "numerical failure" in capsys.readouterr().err


class TestMainOtherCommands:
    def test_invariants_prints_table(self, tmp_path, capsys):
        out = tmp_path / "inv"
        assert main(["invariants", "--seed", "11", "--out", str(out)]) == 0
        text = capsys.readouterr().out
        for name in ("flux-consistency", "dissipation-identity",
                     "spectral-tail-bound", "mass-conservation",
                     "energy-decay"):
            assert f"PASS  {name}" in text
        assert (out / "invariants.txt").read_text() in text + \
            (out / "invariants.txt").read_text()

    def test_invariants_failure_exits_2(self, tmp_path, monkeypatch):
        import ridk.cli as cli_module
        monkeypatch.setattr(cli_module, "invariant_suite", lambda seed: [
            {"name": "flux-consistency", "passed": False, "detail": "x"}])
        assert main(["invariants", "--out", str(tmp_path / "i")]) == 2

    def test_convergence_writes_report(self, tmp_path, capsys):
        out = tmp_path / "conv"
        rc = main(["convergence", "--levels", "8,16,32", "--out", str(out)])
        assert rc == 0
        text = capsys.readouterr().out
        assert "PASS ritz order target" in text
        lines = (out / "convergence.csv").read_text().splitlines()
        assert lines[0] == "n,error"
        assert len(lines) == 4
        errors = [float(line.split(",")[1]) for line in lines[1:]]
        assert errors[0] > errors[1] > errors[2]

    def test_convergence_rejects_bad_levels(self, capsys):
        assert main(["convergence", "--levels", "8,sixteen"]) == 1
        assert main(["convergence", "--levels", "8,16"]) == 1
        assert main(["convergence", "--levels", "8,12,18"]) == 1

    def test_convergence_needs_one_dimension(self, capsys):
        rc = main(["convergence", "--levels", "8,16,32",
                   "--override", "discretization.dimension=2"])
        assert rc == 1
        assert "one dimension" in capsys.readouterr().err

    def test_noise_check_passes(self, tmp_path, capsys):
        out = tmp_path / "nc"
        rc = main(["noise-check", "--epsilon", "0.1", "--samples", "300",
                   "--seed", "3", "--out", str(out)])
        assert rc == 0
        text = capsys.readouterr().out
        assert "PASS eigenvalue table" in text
        assert "PASS covariance Monte Carlo" in text
        lines = (out / "noise_check.csv").read_text().splitlines()
        assert lines[0] == "j,recurrence,quadrature,abs_diff"
        assert len(lines) == 52
        first = lines[1].split(",")
        assert float(first[1]) == 1.0
        assert (out / "covariance.csv").exists()

    def test_noise_check_rejects_bad_epsilon(self, capsys):
        assert main(["noise-check", "--epsilon", "-0.1"]) == 1
        assert "[model] epsilon" in capsys.readouterr().err

    def test_particles_counts_monotone(self, tmp_path, capsys):
        cfg = tmp_path / "p.ini"
        cfg.write_text(REACTIVE)
        out = tmp_path / "o"
        assert main(["particles", str(cfg), "--seed", "5",
                     "--out", str(out)]) == 0
        lines = (out / "particles.csv").read_text().splitlines()
        assert lines[0] == "t,n_a,n_b,b_mass"
        assert len(lines) == 1 + 6  # t=0 plus 5 steps
        b_mass = [float(line.split(",")[3]) for line in lines[1:]]
        assert b_mass[0] == pytest.approx(0.2)
        assert all(b2 >= b1 for b1, b2 in zip(b_mass, b_mass[1:]))
        totals = [sum(int(line.split(",")[k]) for k in (1, 2))
                  for line in lines[1:]]
        assert all(t == 50 for t in totals)

    def test_particles_needs_reaction_section(self, tmp_path, capsys):
        cfg = tmp_path / "p.ini"
        cfg.write_text(MINIMAL)
        assert main(["particles", str(cfg)]) == 1
        assert "[reaction]" in capsys.readouterr().err

    def test_compare_writes_profiles(self, tmp_path, capsys):
        cfg = tmp_path / "c.ini"
        cfg.write_text(REACTIVE)
        out = tmp_path / "o"
        assert main(["compare", str(cfg), "--seed", "5",
                     "--out", str(out)]) == 0
        lines = (out / "compare.csv").read_text().splitlines()
        assert lines[0] == "t,particle_b_mass,ridk_b_mass"
        assert len(lines) == 1 + 6
        first = lines[1].split(",")
        assert float(first[1]) == pytest.approx(0.2)
        assert float(first[2]) == pytest.approx(0.2, abs=1e-6)
        assert "sup distance" in capsys.readouterr().out
