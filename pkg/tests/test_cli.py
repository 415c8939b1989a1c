import csv
import json

import numpy as np
import pytest

from graphfem.cli import main


def run(capsys, *args):
    code = main(list(args))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def star_config(tmp_path):
    cfg = {
        "graph": {
            "vertices": 4,
            "edges": [
                {"from": 0, "to": 1, "length": 1.0},
                {"from": 0, "to": 2, "length": 1.0},
                {"from": 0, "to": 3, "length": 1.0},
            ],
        },
        "log2_inv_h": 4,
        "c": "1",
        "p": "1",
        "f": "(pi^2+1)*cos(pi*x)",
        "exact": "cos(pi*x)",
    }
    path = tmp_path / "star.json"
    path.write_text(json.dumps(cfg))
    return path


class TestGenerate:
    def test_dgm_file(self, tmp_path, capsys):
        out = tmp_path / "g.json"
        code, stdout, _ = run(capsys, "generate", "dgm", "--level", "3", "-o", str(out))
        assert code == 0
        data = json.loads(out.read_text())
        assert data["vertices"] == 15
        assert len(data["edges"]) == 27
        assert "15 vertices, 27 edges" in stdout

    def test_dgm_level0(self, tmp_path, capsys):
        out = tmp_path / "g.json"
        code, _, _ = run(capsys, "generate", "dgm", "--level", "0", "-o", str(out))
        assert code == 0
        data = json.loads(out.read_text())
        assert data["vertices"] == 2 and len(data["edges"]) == 1

    def test_ba_counts(self, tmp_path, capsys):
        out = tmp_path / "g.json"
        code, _, _ = run(capsys, "generate", "ba", "--n", "100", "--m", "2",
                         "--seed", "7", "-o", str(out))
        assert code == 0
        data = json.loads(out.read_text())
        assert data["vertices"] == 100 and len(data["edges"]) == 196

    def test_bad_params_exit_1(self, tmp_path, capsys):
        code, _, err = run(capsys, "generate", "ba", "--n", "2", "--m", "2",
                           "-o", str(tmp_path / "g.json"))
        assert code == 1
        assert "n > m_attach" in err


class TestSolve:
    def test_constant_problem(self, tmp_path, capsys):
        cfg = {"generate": {"family": "dgm", "level": 1}, "target_h": 0.25}
        path = tmp_path / "p.json"
        path.write_text(json.dumps(cfg))
        out = tmp_path / "sol.json"
        code, stdout, _ = run(capsys, "solve", str(path), "-o", str(out))
        assert code == 0
        sol = json.loads(out.read_text())
        assert np.abs(np.array(sol["u"]) - 1.0).max() < 1e-10
        assert sol["report"]["iterations"] <= 1

    def test_direct_and_nn_agree(self, tmp_path, capsys, star_config):
        out_a = tmp_path / "a.json"
        out_b = tmp_path / "b.json"
        assert run(capsys, "solve", str(star_config), "--direct", "-o", str(out_a))[0] == 0
        assert run(capsys, "solve", str(star_config), "--prec", "nn",
                   "--tol", "1e-12", "-o", str(out_b))[0] == 0
        ua = np.array(json.loads(out_a.read_text())["u"])
        ub = np.array(json.loads(out_b.read_text())["u"])
        assert np.linalg.norm(ua - ub) <= 1e-8 * np.linalg.norm(ua)

    def test_graph_file_reference(self, tmp_path, capsys):
        gpath = tmp_path / "g.json"
        assert run(capsys, "generate", "dgm", "--level", "2", "-o", str(gpath))[0] == 0
        cfg = {"graph_file": "g.json", "target_h": 0.25}
        cpath = tmp_path / "p.json"
        cpath.write_text(json.dumps(cfg))
        code, stdout, _ = run(capsys, "solve", str(cpath))
        assert code == 0
        assert "converged=True" in stdout

    def test_nn_unscaled_flag(self, tmp_path, capsys):
        cfg = {"generate": {"family": "dgm", "level": 2}, "log2_inv_h": 3}
        path = tmp_path / "p.json"
        path.write_text(json.dumps(cfg))
        code, stdout, _ = run(capsys, "solve", str(path), "--prec", "nn", "--nn-unscaled")
        assert code == 0
        assert "converged=True" in stdout

    def test_richardson_flags(self, tmp_path, capsys):
        cfg = {"generate": {"family": "dgm", "level": 3}, "log2_inv_h": 3}
        path = tmp_path / "p.json"
        path.write_text(json.dumps(cfg))
        code, stdout, _ = run(capsys, "solve", str(path), "--prec", "nn",
                              "--solver", "richardson", "--theta", "0.5")
        assert code == 0
        assert "converged=True" in stdout

    def test_missing_config_exit_1(self, capsys):
        code, _, err = run(capsys, "solve", "nope.json")
        assert code == 1

    def test_nonconverged_exit_2(self, tmp_path, capsys):
        cfg = {"generate": {"family": "dgm", "level": 3}, "log2_inv_h": 4}
        path = tmp_path / "p.json"
        path.write_text(json.dumps(cfg))
        code, _, err = run(capsys, "solve", str(path), "--prec", "none",
                           "--solver", "pcg", "--maxit", "1", "--tol", "1e-14")
        assert code == 2

    def test_error_norms_printed(self, capsys, star_config):
        code, stdout, _ = run(capsys, "solve", str(star_config))
        assert code == 0
        assert "errors:" in stdout


class TestBench:
    def test_csv_schema(self, tmp_path, capsys):
        out = tmp_path / "bench.csv"
        code, _, _ = run(capsys, "bench", "--dgm", "2,3", "--levels", "3",
                         "--precs", "none,nn", "-o", str(out))
        assert code == 0
        lines = out.read_text().splitlines()
        comments = [l for l in lines if l.startswith("#")]
        assert any("c=1" in c for c in comments)
        assert any("seed=0" in c for c in comments)
        rows = list(csv.DictReader(l for l in lines if not l.startswith("#")))
        assert len(rows) == 4
        assert list(rows[0].keys()) == [
            "family", "param", "n_vertices", "n_edges", "log2_inv_h",
            "prec", "solver", "iters", "converged", "seconds", "matvecs",
        ]
        assert rows[0]["family"] == "dgm"

    def test_deterministic(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert run(capsys, "bench", "--ba", "30", "--levels", "3",
                       "--precs", "nn", "--seed", "5", "-o", str(out))[0] == 0

        def strip_seconds(path):
            rows = list(csv.DictReader(
                l for l in path.read_text().splitlines() if not l.startswith("#")))
            for r in rows:
                r.pop("seconds")
            return rows

        assert strip_seconds(a) == strip_seconds(b)

    def test_no_family_exit_1(self, capsys):
        code, _, _ = run(capsys, "bench", "--levels", "3")
        assert code == 1

    def test_empty_precs_exit_1(self, capsys):
        code, _, _ = run(capsys, "bench", "--dgm", "2", "--precs", "")
        assert code == 1


class TestConvergence:
    def test_orders(self, tmp_path, capsys, star_config):
        out = tmp_path / "conv.csv"
        code, stdout, _ = run(capsys, "convergence", str(star_config),
                              "--levels", "3,4,5,6", "-o", str(out))
        assert code == 0
        assert "fitted orders" in stdout
        rows = list(csv.DictReader(
            l for l in out.read_text().splitlines() if not l.startswith("#")))
        assert len(rows) == 4
        l2 = [float(r["l2_error"]) for r in rows]
        assert l2[0] > l2[-1]

    def test_missing_exact_exit_1(self, tmp_path, capsys):
        cfg = {"generate": {"family": "dgm", "level": 1}, "target_h": 0.5}
        path = tmp_path / "p.json"
        path.write_text(json.dumps(cfg))
        code, _, _ = run(capsys, "convergence", str(path))
        assert code == 1


class TestCond:
    def test_rows(self, tmp_path, capsys):
        cfg = {"generate": {"family": "dgm", "level": 2}}
        path = tmp_path / "p.json"
        path.write_text(json.dumps(cfg))
        out = tmp_path / "cond.csv"
        code, _, _ = run(capsys, "cond", str(path), "--levels", "3,4", "-o", str(out))
        assert code == 0
        rows = list(csv.DictReader(
            l for l in out.read_text().splitlines() if not l.startswith("#")))
        assert len(rows) == 2
        kappas = [float(r["kappa"]) for r in rows]
        assert max(kappas) / min(kappas) < 1.5


class TestUsage:
    def test_unknown_command(self, capsys):
        assert run(capsys, "frobnicate")[0] == 1

    def test_help_is_usage_success(self, capsys):
        # click raises a PrintHelp-style exit; main maps it to success
        code = main(["--help"])
        assert code in (0, 1)
