import json

import pytest

from riskmdp import bellman, cli, mdpmodel


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return tmp_path, write


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_validate_ok_and_bad(files, capsys):
    tmp, write = files
    good = write("m.json", mdpmodel.save_model(mdpmodel.appendix_a_model()))
    assert run("validate", "--model", good) == 0
    assert "OK" in capsys.readouterr().out
    doc = mdpmodel.model_to_json(mdpmodel.appendix_a_model())
    doc["layers"][0]["states"][0]["transitions"][0]["kernel"][0][1] = 0.88
    bad = write("bad.json", json.dumps(doc))
    assert run("validate", "--model", bad) == 2
    diags = json.loads(capsys.readouterr().out)
    assert "t=1" in diags[0]["message"] and "'decide'" in diags[0]["message"]
    assert run("validate", "--model", tmp / "missing.json") == 3


def test_solve_two_controls(files, capsys):
    tmp, write = files
    model = write("m.json", mdpmodel.save_model(mdpmodel.appendix_a_model()))
    out = tmp / "r.json"
    assert run("solve", "--model", model, "--out", out, "--table", tmp / "v.tsv") == 0
    res = json.loads(out.read_text())
    assert res["j0"] <= 1.2 + 1e-6
    assert (tmp / "v.tsv").read_text().startswith("t\tstate\tvalue\n")


def test_solve_is_deterministic(files, monkeypatch):
    tmp, write = files
    model = write("m.json", mdpmodel.save_model(mdpmodel.random_model(1, 3, 2, None, gamma=0.8)))
    monkeypatch.setenv("RISKMDP_THREADS", "3")
    assert run("solve", "--model", model, "--out", tmp / "a.json") == 0
    assert run("solve", "--model", model, "--out", tmp / "b.json", "--threads", "1") == 0
    assert (tmp / "a.json").read_bytes() == (tmp / "b.json").read_bytes()


def test_solve_reports_nonconvergence(files):
    tmp, write = files
    model = write("m.json", mdpmodel.save_model(mdpmodel.random_model(1, 3, 2, None, gamma=0.9)))
    assert run("solve", "--model", model, "--out", tmp / "a.json", "--max-iters", "2") == 4


def test_evaluate_uniform_and_incomplete(files, capsys):
    tmp, write = files
    m = mdpmodel.appendix_a_model()
    model = write("m.json", mdpmodel.save_model(m))
    pol = write("p.json", json.dumps(bellman.RandomizedPolicy.uniform(m).to_json(m)))
    assert run("evaluate", "--model", model, "--policy", pol, "--out", tmp / "e.json") == 0
    assert abs(json.loads((tmp / "e.json").read_text())["j0"] - 1.2) <= 1e-9
    partial = write("q.json", json.dumps({"1": {"decide": [["0", 1.0]]}}))
    assert run("evaluate", "--model", model, "--policy", partial, "--out", tmp / "e2.json") == 2


def test_evaluate_roundtrips_solve_output(files):
    tmp, write = files
    model = write("m.json", mdpmodel.save_model(mdpmodel.random_model(2, 3, 2, None, gamma=0.7)))
    assert run("solve", "--model", model, "--out", tmp / "s.json") == 0
    assert run("evaluate", "--model", model, "--policy", tmp / "s.json", "--out", tmp / "e.json") == 0
    s = json.loads((tmp / "s.json").read_text())["values"]["all"]
    e = json.loads((tmp / "e.json").read_text())["values"]["all"]
    assert all(abs(s[k] - e[k]) <= 2e-8 for k in s)


def test_oracle_check(files, capsys):
    tmp, write = files
    model = write("m.json", mdpmodel.save_model(mdpmodel.random_model(0, 2, 2, 3, risk_kind="mixed")))
    assert run("oracle-check", "--model", model, "--trials", 20) == 0
    assert run("oracle-check", "--model", model, "--trials", 0) == 0
    big = write("big.json", mdpmodel.save_model(mdpmodel.random_model(0, 6, 4, None, gamma=0.5)))
    assert run("oracle-check", "--model", big, "--horizon", 12, "--trials", 1) == 2


def test_examples(files, capsys):
    tmp, _ = files
    assert run("examples", "appendix-a") == 0
    out = capsys.readouterr().out
    assert "= 1.4\n" in out and "= 1.2\n" in out
    assert run("examples", "liquidation", "--u0", 0) == 0
    assert "j0 = 0.0" in capsys.readouterr().out
    mpath = tmp / "liq.json"
    assert run("examples", "liquidation", "--out", mpath, "--result", tmp / "liq_r.json") == 0
    assert run("validate", "--model", mpath) == 0
    assert run("oracle-check", "--model", mpath, "--trials", 3) == 0
    assert run("examples", "liquidation", "--u0", 5000) == 2
