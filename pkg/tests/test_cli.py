"""Tests for hermnet.cli: config validation, artifacts, determinism."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

import hermnet.cli as cli
from hermnet.cli import (
    ConfigError,
    build_model,
    config_hash,
    load_config,
    main,
    validate_config,
)
from hermnet.hermite import NodeFamily
from hermnet.indices import build_plan
from hermnet.network import assemble_surrogate, recount_size

CSV_COLUMNS = ("xi", "n_solvers", "n_unique_points", "W", "L",
               "l2_error", "l2_stderr", "sup_error",
               "term1", "term2", "term3", "term4", "wall_ms")


def base_config(out):
    return {
        "problem": {"mesh_n": 8,
                    "psi": {"family": "sine", "c": 0.4, "alpha": 2.0}},
        "weights": {"q": 2.0 / 3.0, "tail": [2.0, 2.0]},
        "xi_sweep": [2.0, 4.0, 6.0],
        "delta_mode": 1e-4,
        "omega_mode": 2.0,
        "mc": {"n_samples": 16, "seed": 7, "tail_dims": 2},
        "output": str(out),
    }


@pytest.fixture
def cfg_file(tmp_path):
    cfg = base_config(tmp_path / "out")
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def run(*argv):
    return main([str(a) for a in argv])


def read_csv(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    return header, [dict(zip(header, line.split(","))) for line in lines[1:]]


def mask_wall(text):
    rows = [line.rsplit(",", 1)[0] for line in text.splitlines()]
    return "\n".join(rows)


class TestConfigValidation:
    def test_valid_config_fills_defaults(self, tmp_path):
        cfg = validate_config(base_config(tmp_path))
        assert cfg["problem"]["truth_factor"] == 8
        assert cfg["mc"]["tail_dims"] == 2
        assert cfg["problem"]["psi"]["dims"] is None
        build_model(cfg)  # weights construct cleanly

    def test_bad_q_names_field(self, tmp_path, capsys):
        raw = base_config(tmp_path)
        raw["weights"]["q"] = 2.5
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(raw))
        assert run("plan", "--config", path) == 2
        assert "weights.q" in capsys.readouterr().err

    def test_sweep_must_increase(self, tmp_path):
        raw = base_config(tmp_path)
        raw["xi_sweep"] = [4.0, 2.0, 6.0]
        with pytest.raises(ConfigError, match="strictly increasing"):
            validate_config(raw)

    def test_sweep_entries_exceed_one(self, tmp_path):
        raw = base_config(tmp_path)
        raw["xi_sweep"] = [0.5, 2.0]
        with pytest.raises(ConfigError, match="xi_sweep"):
            validate_config(raw)

    def test_small_sample_count_rejected(self, tmp_path):
        raw = base_config(tmp_path)
        raw["mc"]["n_samples"] = 8
        with pytest.raises(ConfigError, match="mc.n_samples"):
            validate_config(raw)

    def test_missing_section(self, tmp_path):
        raw = base_config(tmp_path)
        del raw["weights"]
        with pytest.raises(ConfigError, match="weights"):
            validate_config(raw)

    def test_fixed_delta_range(self, tmp_path):
        raw = base_config(tmp_path)
        raw["delta_mode"] = 1.5
        with pytest.raises(ConfigError, match="delta_mode"):
            validate_config(raw)

    def test_alpha_must_exceed_one(self, tmp_path):
        raw = base_config(tmp_path)
        raw["problem"]["psi"]["alpha"] = 1.0
        with pytest.raises(ConfigError, match="problem.psi.alpha"):
            validate_config(raw)

    def test_hash_ignores_output_location(self, tmp_path):
        a = validate_config(base_config(tmp_path / "a"))
        b = validate_config(base_config(tmp_path / "b"))
        assert a["output"] != b["output"]
        assert config_hash(a) == config_hash(b)

    def test_invalid_json_exits_2(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert run("plan", "--config", path) == 2
        assert "JSON" in capsys.readouterr().err


class TestPlanCmd:
    def test_artifacts_and_recount(self, cfg_file, tmp_path):
        assert run("plan", "--config", cfg_file) == 0
        cfg = load_config(cfg_file)
        model = build_model(cfg)
        for i, xi in enumerate(cfg["xi_sweep"]):
            art = json.loads(
                (tmp_path / "out" / f"plan_{i:02d}.json").read_text())
            assert art["kind"] == "plan" and art["xi"] == xi
            plan = build_plan(xi, model)
            # independent recount of the unique grid points via triples
            seen = set()
            for t in plan.triples:
                s = plan.indices[t.s_ref]
                sme = s.subtract_mask(t.e_mask)
                point = []
                for (j, d), k in zip(sme.pairs, t.k):
                    fam = NodeFamily(d)
                    node = float(fam.nodes[fam.position(k)])
                    if node != 0.0:  # y_j = 0 is the same vector as absent j
                        point.append((j, node))
                seen.add(tuple(point))
            assert art["stats"]["n_points"] == len(seen)
            assert art["stats"]["n_triples"] == plan.n_triples

    def test_idempotent_bytes(self, cfg_file, tmp_path):
        assert run("plan", "--config", cfg_file) == 0
        first = (tmp_path / "out" / "plan_02.json").read_bytes()
        assert run("plan", "--config", cfg_file) == 0
        assert (tmp_path / "out" / "plan_02.json").read_bytes() == first


class TestSolveCmd:
    def test_samples_keyed_by_unique_points(self, cfg_file, tmp_path):
        assert run("plan", "--config", cfg_file) == 0
        assert run("solve", "--config", cfg_file) == 0
        cfg = load_config(cfg_file)
        model = build_model(cfg)
        for i, xi in enumerate(cfg["xi_sweep"]):
            art = json.loads(
                (tmp_path / "out" / f"samples_{i:02d}.json").read_text())
            values = np.asarray(art["values"])
            plan = build_plan(xi, model)
            assert values.shape == (plan.n_points, cfg["problem"]["mesh_n"] + 2)
            assert np.isfinite(values).all()
            assert (values[:, 0] == 0).all() and (values[:, -1] == 0).all()

    def test_solve_requires_plan(self, cfg_file, capsys):
        assert run("solve", "--config", cfg_file) == 2
        assert "artifact" in capsys.readouterr().err

    def test_rerun_and_parallel_are_bitwise(self, cfg_file, tmp_path):
        assert run("plan", "--config", cfg_file) == 0
        assert run("solve", "--config", cfg_file) == 0
        serial = (tmp_path / "out" / "samples_02.json").read_bytes()
        assert run("solve", "--config", cfg_file) == 0
        assert (tmp_path / "out" / "samples_02.json").read_bytes() == serial
        assert run("solve", "--config", cfg_file, "--parallel", 2) == 0
        assert (tmp_path / "out" / "samples_02.json").read_bytes() == serial

    def test_dump_solutions(self, cfg_file, tmp_path):
        assert run("plan", "--config", cfg_file) == 0
        assert run("solve", "--config", cfg_file, "--dump-solutions") == 0
        header, rows = read_csv(tmp_path / "out" / "solutions_00.csv")
        assert header[0] == "x" and header[1] == "point_0"
        xs = np.array([float(r["x"]) for r in rows])
        assert xs[0] == 0.0 and xs[-1] == 1.0 and len(xs) == 10

    def test_stale_plan_hash_aborts(self, cfg_file, tmp_path, capsys):
        assert run("plan", "--config", cfg_file) == 0
        raw = json.loads(cfg_file.read_text())
        raw["mc"]["seed"] = 99
        other = tmp_path / "cfg2.json"
        other.write_text(json.dumps(raw))
        assert run("solve", "--config", other) == 2
        assert "hash" in capsys.readouterr().err


class TestCompileCmd:
    def test_bundle_meta_matches_recount(self, cfg_file, tmp_path):
        for cmd in ("plan", "solve", "compile"):
            assert run(cmd, "--config", cfg_file) == 0
        art = json.loads(
            (tmp_path / "out" / "bundle_01.json").read_text())
        from hermnet.network import bundle_from_dict
        bundle = bundle_from_dict(art["bundle"])
        assert bundle.W == sum(recount_size(n) for n in bundle.networks)
        assert bundle.L == max(n.depth for n in bundle.networks)
        assert art["omega"] == 2.0 and art["delta"] == 1e-4
        assert len(art["signs"]) == len(art["point_ref"])

    def test_idempotent_bytes(self, cfg_file, tmp_path):
        for cmd in ("plan", "solve", "compile"):
            assert run(cmd, "--config", cfg_file) == 0
        first = (tmp_path / "out" / "bundle_00.json").read_bytes()
        assert run("compile", "--config", cfg_file) == 0
        assert (tmp_path / "out" / "bundle_00.json").read_bytes() == first


class TestNetEval:
    def test_matches_in_memory_evaluator_bitwise(self, cfg_file, tmp_path):
        for cmd in ("plan", "solve", "compile"):
            assert run(cmd, "--config", cfg_file) == 0
        pts = np.array([[0.3, -0.5], [1.2, 0.1], [-2.0, 2.5], [0.0, 0.0]])
        pts_file = tmp_path / "pts.csv"
        pts_file.write_text(
            "\n".join(",".join(repr(float(v)) for v in row)
                      for row in pts) + "\n")
        out_file = tmp_path / "vals.csv"
        assert run("net", "eval", "--bundle",
                   tmp_path / "out" / "bundle_02.json",
                   "--points", pts_file, "--out", out_file) == 0

        cfg = load_config(cfg_file)
        plan = build_plan(6.0, build_model(cfg))
        art = json.loads(
            (tmp_path / "out" / "samples_02.json").read_text())
        _, net = assemble_surrogate(plan, np.asarray(art["values"]),
                                    1e-4, 2.0)
        direct = net(pts[:, :max(plan.m_active, 1)])
        from_file = np.loadtxt(out_file, delimiter=",", ndmin=2)
        assert np.array_equal(np.atleast_2d(direct.T).T, from_file)

    def test_rejects_wrong_artifact_kind(self, cfg_file, tmp_path, capsys):
        assert run("plan", "--config", cfg_file) == 0
        pts_file = tmp_path / "pts.csv"
        pts_file.write_text("0.0,0.0\n")
        code = run("net", "eval", "--bundle",
                   tmp_path / "out" / "plan_00.json",
                   "--points", pts_file, "--out", tmp_path / "o.csv")
        assert code == 2
        assert "bundle" in capsys.readouterr().err

    def test_rejects_narrow_points(self, cfg_file, tmp_path, capsys):
        for cmd in ("plan", "solve", "compile"):
            assert run(cmd, "--config", cfg_file) == 0
        pts_file = tmp_path / "pts.csv"
        pts_file.write_text("0.5\n")
        code = run("net", "eval", "--bundle",
                   tmp_path / "out" / "bundle_02.json",
                   "--points", pts_file, "--out", tmp_path / "o.csv")
        assert code == 2
        assert "coordinates" in capsys.readouterr().err


class TestEvaluateCmd:
    def test_network_report_columns(self, cfg_file, tmp_path):
        for cmd in ("plan", "solve"):
            assert run(cmd, "--config", cfg_file) == 0
        assert run("evaluate", "--config", cfg_file, "--mode", "network",
                   "--index", 1) == 0
        header, rows = read_csv(
            tmp_path / "out" / "report_01_network.csv")
        assert tuple(header) == CSV_COLUMNS
        (row,) = rows
        assert float(row["xi"]) == 4.0
        assert int(row["W"]) > 0 and int(row["L"]) > 0
        assert float(row["l2_error"]) > 0
        assert float(row["term3"]) >= 0
        int(row["wall_ms"])

    def test_interpolant_mode_leaves_network_fields_empty(
            self, cfg_file, tmp_path):
        for cmd in ("plan", "solve"):
            assert run(cmd, "--config", cfg_file) == 0
        assert run("evaluate", "--config", cfg_file, "--mode",
                   "interpolant") == 0
        _, rows = read_csv(tmp_path / "out" / "report_00_interpolant.csv")
        (row,) = rows
        assert row["W"] == "" and row["L"] == ""
        assert row["term1"] == "" and row["term4"] == ""
        assert float(row["l2_error"]) > 0

    def test_deterministic_modulo_wall_ms(self, cfg_file, tmp_path):
        for cmd in ("plan", "solve"):
            assert run(cmd, "--config", cfg_file) == 0
        assert run("evaluate", "--config", cfg_file, "--mode", "network") == 0
        first = (tmp_path / "out" / "report_00_network.csv").read_text()
        assert run("evaluate", "--config", cfg_file, "--mode", "network") == 0
        second = (tmp_path / "out" / "report_00_network.csv").read_text()
        assert mask_wall(first) == mask_wall(second)

    def test_seed_override_changes_estimates(self, cfg_file, tmp_path):
        for cmd in ("plan", "solve"):
            assert run(cmd, "--config", cfg_file) == 0
        assert run("evaluate", "--config", cfg_file, "--mode", "network") == 0
        first = (tmp_path / "out" / "report_00_network.csv").read_text()
        assert run("evaluate", "--config", cfg_file, "--mode", "network",
                   "--seed", 1234) == 0
        second = (tmp_path / "out" / "report_00_network.csv").read_text()
        assert mask_wall(first) != mask_wall(second)

    def test_index_out_of_range(self, cfg_file, capsys):
        assert run("plan", "--config", cfg_file) == 0
        assert run("evaluate", "--config", cfg_file, "--mode", "network",
                   "--index", 9) == 2
        assert "index" in capsys.readouterr().err


class TestSweepCmd:
    def test_results_and_fits(self, cfg_file, tmp_path):
        assert run("sweep", "--config", cfg_file) == 0
        header, rows = read_csv(tmp_path / "out" / "results.csv")
        assert tuple(header) == CSV_COLUMNS
        assert len(rows) == 3
        errs = [float(r["l2_error"]) for r in rows]
        assert all(e > 0 for e in errs)
        fits = json.loads((tmp_path / "out" / "fits.json").read_text())
        for key in ("l2_vs_points", "l2_vs_size"):
            assert fits[key]["slope"] < 0
            assert len(fits[key]["points"]) == 3
        assert fits["config_hash"] == config_hash(load_config(cfg_file))

    def test_matches_single_evaluate_row(self, cfg_file, tmp_path):
        assert run("sweep", "--config", cfg_file) == 0
        _, sweep_rows = read_csv(tmp_path / "out" / "results.csv")
        for cmd in ("plan", "solve"):
            assert run(cmd, "--config", cfg_file) == 0
        assert run("evaluate", "--config", cfg_file, "--mode", "network",
                   "--index", 1) == 0
        _, (report_row,) = read_csv(
            tmp_path / "out" / "report_01_network.csv")
        for col in CSV_COLUMNS[:-1]:
            assert report_row[col] == sweep_rows[1][col], col

    def test_deterministic_and_parallel(self, cfg_file, tmp_path):
        assert run("sweep", "--config", cfg_file) == 0
        first = (tmp_path / "out" / "results.csv").read_text()
        fits_first = (tmp_path / "out" / "fits.json").read_bytes()
        assert run("sweep", "--config", cfg_file, "--parallel", 2) == 0
        second = (tmp_path / "out" / "results.csv").read_text()
        assert mask_wall(first) == mask_wall(second)
        assert (tmp_path / "out" / "fits.json").read_bytes() == fits_first

    def test_partial_failure_marks_row_and_exits_3(
            self, cfg_file, tmp_path, monkeypatch, capsys):
        real = cli.assemble_surrogate

        def flaky(plan, samples, delta, omega):
            if plan.xi == 4.0:
                raise ValueError("injected failure")
            return real(plan, samples, delta, omega)

        monkeypatch.setattr(cli, "assemble_surrogate", flaky)
        assert run("sweep", "--config", cfg_file) == 3
        assert "FAILED" in capsys.readouterr().err
        _, rows = read_csv(tmp_path / "out" / "results.csv")
        assert len(rows) == 3
        assert rows[1]["l2_error"] == "" and rows[1]["W"] == ""
        assert float(rows[0]["l2_error"]) > 0
        assert float(rows[2]["l2_error"]) > 0
        fits = json.loads((tmp_path / "out" / "fits.json").read_text())
        assert fits["failures"]
        # two surviving points cannot support a rate fit
        assert "error" in fits["l2_vs_points"]
