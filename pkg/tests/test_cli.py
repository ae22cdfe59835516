import csv
import io
import json

import pytest

from mwdp.cli import BENCH_COLUMNS, bench_grid, bench_sweep, cli_main
from mwdp.model import save_instance

from conftest import build_i1


@pytest.fixture
def i1_path(tmp_path):
    p = tmp_path / "i1.json"
    save_instance(build_i1(), p)
    return p


def run(capsys, *argv):
    code = cli_main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_solve_exact(capsys, i1_path):
    code, out, _ = run(capsys, "solve", "--instance", i1_path, "--strategy", "exact")
    assert code == 0
    doc = json.loads(out)
    assert doc["action"] == 1 and doc["sigma_bar"] == 4


def test_solve_out_file_byte_stable(capsys, tmp_path, i1_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for target in (a, b):
        assert run(capsys, "solve", "--instance", i1_path, "--strategy", "qmf", "--seed", 5, "--no-timing",
                   "--out", target)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_bellman(capsys, i1_path):
    code, out, _ = run(capsys, "bellman", "--instance", i1_path, "--format", "table")
    assert code == 0 and "v*(s0) = 4" in out
    code, out, _ = run(capsys, "bellman", "--instance", i1_path)
    assert json.loads(out)["v_star"] == 4


def test_malformed(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"num_states": 2}')
    assert run(capsys, "solve", "--instance", bad)[0] == 2
    bad.write_text("not json")
    assert run(capsys, "solve", "--instance", bad)[0] == 2
    assert run(capsys, "solve", "--instance", tmp_path / "missing.json")[0] == 2


def test_qmf_requires_seed(capsys, i1_path):
    code, _, err = run(capsys, "solve", "--instance", i1_path, "--strategy", "qmf")
    assert code == 2 and "--seed" in err


def test_bad_flag(capsys):
    assert run(capsys, "solve", "--bogus")[0] == 2


def test_gen_roundtrip(capsys, tmp_path):
    p = tmp_path / "g.json"
    assert run(capsys, "gen", "--states", 3, "--actions", 2, "--horizon", 2, "--seed", 4, "--out", p)[0] == 0
    code, out, _ = run(capsys, "solve", "--instance", p)
    assert code == 0 and json.loads(out)["schema"] == "dp-report/1"


def test_policy_table(capsys, i1_path):
    code, out, _ = run(capsys, "policy", "--instance", i1_path, "--format", "table")
    assert code == 0 and out.splitlines()[0].split() == ["state", "time", "action"]


def test_policy_csv(capsys, i1_path):
    code, out, _ = run(capsys, "policy", "--instance", i1_path, "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["action"] for r in rows] == ["1", "1"]


def test_tsp_and_msc(capsys, tmp_path):
    g, m = tmp_path / "g.json", tmp_path / "m.json"
    g.write_text(json.dumps({"schema": "tsp/1", "n": 3, "cost_bound": 3, "costs": [[0, 1, 2], [1, 0, 3], [2, 3, 0]]}))
    m.write_text(json.dumps({"schema": "msc/1", "universe_size": 3, "sets": [[1, 2], [2, 3], [3]]}))
    code, out, _ = run(capsys, "tsp", "--instance", g)
    assert code == 0 and json.loads(out)["cost"] == 6
    code, out, _ = run(capsys, "msc", "--instance", m, "--method", "mwum")
    assert code == 0 and json.loads(out)["size"] == 2
    m.write_text(json.dumps({"schema": "msc/1", "universe_size": 2, "sets": [[1]]}))
    code, out, _ = run(capsys, "msc", "--instance", m)
    assert code == 1 and json.loads(out)["status"] == "no cover"


def test_gen_encoders(capsys, tmp_path):
    for kind in ("tsp", "msc", "adversarial"):
        p = tmp_path / f"{kind}.json"
        assert run(capsys, "gen", "--kind", kind, "--seed", 1, "--out", p)[0] == 0
        assert json.loads(p.read_text())


def test_verify_quick(capsys):
    code, out, _ = run(capsys, "verify", "--count", 5, "--skip-solver")
    assert code == 0 and "FAIL" not in out


def test_log_level(capsys, monkeypatch, i1_path):
    monkeypatch.setenv("DP_LOG_LEVEL", "loud")
    assert run(capsys, "bellman", "--instance", i1_path)[0] == 2


class TestBench:
    def test_empty_grid(self):
        text = bench_sweep([])
        assert text.strip() == ",".join(BENCH_COLUMNS)

    def test_deterministic_and_ordered(self):
        grid = bench_grid([3], [2], [2], [1, 2], ["exact", "qmf"])
        a = bench_sweep(grid, timing=False)
        b = bench_sweep(grid, jobs=3, timing=False)
        assert a == b
        rows = list(csv.DictReader(io.StringIO(a)))
        assert [int(r["index"]) for r in rows] == list(range(4))
        assert all(r["status"] == "ok" for r in rows)

    def test_planned_k_tracks_ell_squared(self):
        grid = bench_grid([3], [2, 3], [2], [1, 2, 3, 4], ["exact"])
        rows = list(csv.DictReader(io.StringIO(bench_sweep(grid, timing=False))))
        import math

        for r in rows:
            A, rho = int(r["actions"]), int(r["rho"])
            s = 3 * 2
            delta = 1 / (2 * A)
            assert int(r["K_at_rho"]) == max(1, math.ceil(18 * (2 * rho) ** 2 * math.log(s) / delta**2))

    def test_cli_bench(self, capsys):
        code, out, _ = run(capsys, "bench", "--actions", "2", "--reward-max", "1..2", "--no-timing")
        assert code == 0 and len(out.strip().splitlines()) == 3
