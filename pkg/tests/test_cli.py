import json

import pytest

from olsweights.cli import main

TOY8 = "x,d,y\n0,1,3\n0,0,1\n0,0,1\n0,0,1\n1,1,5\n1,1,5\n1,0,1\n1,0,1\n"


@pytest.fixture
def toy_csv(tmp_path):
    p = tmp_path / "toy8.csv"
    p.write_text(TOY8)
    return p


def test_estimate_defaults(toy_csv, tmp_path):
    out = tmp_path / "o"
    assert main(["estimate", "--input", str(toy_csv), "--schema", "Y=y,D=d,X=x", "--out", str(out)]) == 0
    rows = json.loads((out / "estimates.json").read_text())["estimates"]
    got = {r["method"]: r["estimate"] for r in rows}
    assert got["reg"] == pytest.approx(22 / 7, abs=1e-10)
    for m in ("interact", "impute", "meanbal"):
        assert got[m] == pytest.approx(3.0, abs=1e-10)


def test_partial_exit(tmp_path):
    p = tmp_path / "deg.csv"
    p.write_text("x,d,y\n0,1,1\n0,0,2\n0,1,3\n1,1,4\n1,1,5\n2,0,1\n2,1,2\n2,0,7\n")
    out = tmp_path / "o"
    code = main(["estimate", "--input", str(p), "--schema", "Y=y,D=d,X=x",
                 "--methods", "reg,stratify", "--out", str(out)])
    assert code == 2
    err = json.loads((out / "error.json").read_text())
    assert err["errors"][0]["method"] == "stratify"


def test_invalid_input_exit(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x,d,y\n0,1,1\n0,3,2\n")
    out = tmp_path / "o"
    assert main(["estimate", "--input", str(p), "--schema", "Y=y,D=d,X=x", "--out", str(out)]) == 1
    err = json.loads((out / "error.json").read_text())
    assert err["error"] == "ValidationError" and "row 2" in err["message"]


def test_bad_flag_exit(capsys):
    assert main(["estimate", "--bogus"]) == 1


def test_block_methods(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text("y,d,b\n1,1,a\n0,0,a\n2,1,a\n0,0,a\n3,1,c\n1,0,c\n4,0,c\n5,1,c\n")
    out = tmp_path / "o"
    assert main(["estimate", "--input", str(p), "--schema", "Y=y,D=d,B=b",
                 "--methods", "block_fe,block_ame", "--out", str(out)]) == 0
    rows = json.loads((out / "estimates.json").read_text())["estimates"]
    assert [r["method"] for r in rows] == ["block_fe", "block_ame"]
    assert all(len(r["metadata"]["blocks"]) == 2 for r in rows)


def test_diagnose_toy(toy_csv, tmp_path):
    out = tmp_path / "o"
    assert main(["diagnose", "--input", str(toy_csv), "--schema", "Y=y,D=d,X=x", "--out", str(out)]) == 0
    b = json.loads((out / "diagnostics.json").read_text())
    assert b["strata"]["angrist_reconstruction"] == pytest.approx(22 / 7)
    assert b["strata"]["general_reconstruction"] == pytest.approx(22 / 7)
    assert b["negative_weights"]["count"] == 0


def test_diagnose_continuous_skips_strata(tmp_path):
    lines = ["x,d,y"] + [f"{i * 0.37:.3f},{int(i % 3 == 0)},{i}" for i in range(30)]
    p = tmp_path / "c.csv"
    p.write_text("\n".join(lines) + "\n")
    out = tmp_path / "o"
    assert main(["diagnose", "--input", str(p), "--schema", "Y=y,D=d,X=x", "--out", str(out)]) == 0
    b = json.loads((out / "diagnostics.json").read_text())
    assert b["strata"] is None
    assert any("skipped" in n for n in b["notices"])
    assert len(b["unit_weights"]["w"]) == 30


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"dgp": "dgp2", "n": 150, "iters": 3, "seed": 4, "methods": ["reg"]}))
    out = tmp_path / "o"
    assert main(["simulate", "--config", str(cfg), "--iters", "2", "--out", str(out), "--threads", "1"]) == 0
    resolved = json.loads((out / "config.resolved.json").read_text())
    assert resolved["iters"] == 2 and resolved["n"] == 150 and resolved["seed"] == 4


def test_simulate_block_constant(tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", "block_fig3", "--iters", "4", "--seed", "7", "--out", str(out), "--threads", "1"]) == 0
    est = (out / "plotdata" / "estimates.csv").read_text().splitlines()[1:]
    fe = [float(r.split(",")[3]) for r in est if r.split(",")[2] == "block_fe"]
    assert all(abs(v - 1.4) < 1e-10 for v in fe)
