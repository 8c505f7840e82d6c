import io
import json
import math

import pytest

from mlewass import bounds, cli


def run(*argv):
    buf = io.StringIO()
    code = cli.main(list(argv), buf)
    return code, buf.getvalue()


def _total(text):
    for line in text.splitlines():
        parts = line.split()
        if parts and parts[0] == "total":
            return float(parts[1])
    raise AssertionError(text)


def test_bound_exp_canonical():
    code, text = run("bound", "--family", "exp-canonical", "--n", "10", "--metric", "w1")
    assert code == 0
    assert abs(_total(text) - 2.303) <= 0.001


def test_bound_mvn_diag():
    code, text = run("bound", "--family", "mvn-diag", "--p", "3", "--n", "1000", "--metric", "w2")
    assert code == 0
    assert abs(_total(text) - 3.0672) <= 1e-4


def test_bound_json_full_precision():
    code, text = run("bound", "--family", "normal-canonical", "--n", "1000", "--format", "json")
    assert code == 0
    js = json.loads(text)
    assert js["total"] == bounds.bound_normal_canonical_w1(0.5, 1.0, 1000).total
    assert [t[0] for t in js["terms"]] == ["score_clt", "remainder"]


def test_bound_csv_and_json_agree():
    _, c = run("bound", "--family", "exp-noncanonical", "--n", "100", "--format", "csv")
    _, j = run("bound", "--family", "exp-noncanonical", "--n", "100", "--format", "json")
    rows = dict(line.split(",") for line in c.strip().splitlines()[1:])
    js = json.loads(j)
    for k, v in js["terms"]:
        assert float(rows[k]) == v
    assert float(rows["total"]) == js["total"]


def test_bound_small_n_is_domain_error(capsys):
    code, _ = run("bound", "--family", "exp-canonical", "--n", "2", "--metric", "w1")
    assert code == 1
    assert "requires n > 2" in capsys.readouterr().err


def test_bound_other_paths():
    code, text = run("bound", "--family", "exp-canonical", "--n", "100", "--metric", "kolmogorov")
    assert code == 0
    assert _total(text) == pytest.approx(bounds.kolmogorov_from_w1(bounds.bound_exp_canonical_w1(100).total))
    code, text = run("bound", "--family", "exp-noncanonical", "--n", "10", "--direct-stein")
    assert abs(_total(text) - 1.396) <= 0.001
    code, text = run("bound", "--family", "gamma", "--n", "100", "--metric", "bw",
                     "--alpha", "2", "--beta", "2", "--eps", "0.5", "--mse", "0")
    assert code == 0
    assert _total(text) == pytest.approx(bounds.gamma_implicit_inputs(2, 2, 0.5, 0).K1 / 10)
    code, _ = run("bound", "--family", "gamma", "--n", "100", "--metric", "bw", "--alpha", "2", "--beta", "2")
    assert code == 1
    code, _ = run("bound", "--family", "exp-noncanonical", "--n", "100", "--metric", "w2")
    assert code == 1


def test_bound_monte_carlo_deterministic():
    args = ("bound", "--family", "exp-canonical", "--n", "50", "--mc-budget", "2000", "--seed", "3", "--format", "json")
    a = run(*args)
    b = run(*args)
    assert a == b and a[0] == 0
    assert [t[0] for t in json.loads(a[1])["terms"]] == ["K1", "K2", "K3"]


def test_usage_errors():
    assert run("bound", "--family", "exp-canonical", "--n", "10", "--bogus")[0] == 2
    assert run()[0] == 2
    assert run("bound", "--family", "nope", "--n", "10")[0] == 2
    assert run("reproduce", "table9")[0] == 2


def test_estimate_identical_files(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("0.5,1\n2,3\n-1,0.25\n")
    code, text = run("estimate", "--x", str(f), "--y", str(f), "--format", "json")
    assert code == 0
    assert json.loads(text)["wp"] == 0.0


def test_estimate_shift(tmp_path):
    x, y = tmp_path / "x.csv", tmp_path / "y.csv"
    x.write_text("0\n2\n")
    y.write_text("1\n3\n")
    code, text = run("estimate", "--x", str(x), "--y", str(y), "--order", "1", "--format", "json")
    assert code == 0
    assert json.loads(text)["wp"] == 1.0
    for solver in ("exact", "brute"):
        _, text = run("estimate", "--x", str(x), "--y", str(y), "--solver", solver, "--format", "json")
        assert json.loads(text)["wp"] == 1.0


def test_estimate_parse_error_names_line(tmp_path, capsys):
    x, y = tmp_path / "x.csv", tmp_path / "y.csv"
    x.write_text("0,1\n2,abc\n")
    y.write_text("1,1\n3,3\n")
    code, _ = run("estimate", "--x", str(x), "--y", str(y))
    assert code == 1
    assert ":2:" in capsys.readouterr().err


def test_estimate_family_dominated_by_bound():
    args = ("estimate", "--family", "exp-canonical", "--theta", "1", "--n", "1000", "--N", "2000", "--seed", "1",
            "--format", "json")
    code, text = run(*args)
    assert code == 0
    wp = json.loads(text)["wp"]
    assert 0 < wp < bounds.bound_exp_canonical_w1(1000).total
    assert run(*args)[1] == text


def test_reproduce_table_files_byte_identical(tmp_path):
    outs = []
    for sub in ("a", "b"):
        d = tmp_path / sub
        code, text = run("reproduce", "table1", "--scale", "desk", "--seed", "1", "--out", str(d), "--threads", "2")
        assert code == 0
        outs.append(((d / "table1-desk.csv").read_bytes(), (d / "table1-desk.json").read_bytes()))
    assert outs[0] == outs[1]
    lines = outs[0][0].decode().strip().splitlines()
    assert lines[0] == "n,dhat_mean,dhat_stderr,bound,gap"
    got = [float(line.split(",")[3]) for line in lines[1:]]
    for g, want in zip(got, (2.303, 0.649, 0.203, 0.064)):
        assert abs(g - want) <= 0.001
    js = json.loads(outs[0][1])
    for line, row in zip(lines[1:], js["rows"]):
        assert float(line.split(",")[1]) == row["dhat_mean"]


def test_reproduce_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _ = run("reproduce", "table2", "--out", str(blocker / "sub"))
    assert code == 1


def test_selftest_passes():
    code, text = run("selftest")
    assert code == 0
    assert text.count("PASS") == 5


def test_selftest_mutation_detected(monkeypatch):
    real = bounds.bound_exp_canonical_w1

    def corrupted(n):
        b = real(n)
        b.terms[0] = ("leading", 5.51456 / math.sqrt(n))
        return b

    monkeypatch.setattr(bounds, "bound_exp_canonical_w1", corrupted)
    code, text = run("selftest")
    assert code == 1
    assert "FAIL  closed-form bound values" in text


def test_module_entry_point():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "mlewass", "bound", "--family", "exp-canonical", "--n", "100"],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert abs(_total(r.stdout) - 0.649) <= 0.001
