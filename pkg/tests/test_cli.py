import json

import pytest

from cordicpe.cli import main


def run(argv):
    return main(argv)


def test_af_curve_csv(tmp_path):
    out = tmp_path / "af.csv"
    assert run(["af", "--fn", "sigmoid", "--precision", "16", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# manifest ")
    assert lines[1] == "input,output,output_raw"
    assert len(lines) == 2 + 256
    # sigmoid(0) row within tolerance
    mid = min(lines[2:], key=lambda l: abs(float(l.split(",")[0])))
    assert abs(float(mid.split(",")[1]) - 0.5) < 0.07


def test_af_curve_matches_library(tmp_path):
    from cordicpe.pe import af_curve

    out = tmp_path / "af.csv"
    run(["af", "--fn", "tanh", "--precision", "8", "--points", "32", "--out", str(out)])
    rows = [l.split(",") for l in out.read_text().splitlines()[2:]]
    lib = af_curve("tanh", 8, points=32)
    assert [int(r[2]) for r in rows] == [r[2] for r in lib]


def test_af_illegal_combo_exits_3(tmp_path, capsys):
    code = run(["af", "--fn", "softmax", "--precision", "4", "--out", str(tmp_path / "x.csv")])
    assert code == 3
    assert "softmax" in capsys.readouterr().err


def test_trace_exits_zero(capsys):
    assert run(["trace", "--table", "hyp"]) == 0
    out = capsys.readouterr().out
    assert "1.1297" in out and "0.5218" in out and "PASS" in out
    assert run(["trace", "--table", "div"]) == 0
    out = capsys.readouterr().out
    assert "0.208984" in out


def test_sweep_deterministic_bytes(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["sweep", "--fn", "tanh", "--precision", "8", "--stages", "1:8", "--seed", "7"]
    assert run(argv + ["--out", str(a)]) == 0
    assert run(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[1] == "function,precision,hyp_stages,lin_stages,samples,mae,mse,max_abs_err,seed"
    assert len(lines) == 2 + 8


def test_replay_reproduces_byte_identical(tmp_path):
    for argv, name in [
        (["af", "--fn", "exp", "--precision", "16"], "af.csv"),
        (["sweep", "--fn", "sigmoid", "--precision", "8", "--stages", "1:4", "--seed", "3"], "s.csv"),
        (["gemm", "--m", "4", "--k", "4", "--n", "4", "--precision", "16"], "g.json"),
        (["infer", "--model", "fixture:mlp", "--precision", "8"], "i.json"),
        (["dma", "--workload", "vgg16"], "d.json"),
        (["trace", "--table", "div"], "t.csv"),
    ]:
        first = tmp_path / name
        second = tmp_path / ("r_" + name)
        assert run(argv + ["--out", str(first)]) == 0
        assert run(["replay", str(first), "--out", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes(), argv


def test_gemm_report_fields(tmp_path):
    out = tmp_path / "g.json"
    assert run(["gemm", "--m", "8", "--k", "8", "--n", "8", "--precision", "8", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["manifest"]["subcommand"] == "gemm"
    assert doc["ops_per_cycle"] == 512.0
    assert set(doc["counters"]) == {"ifmap_reads", "weight_reads", "psum_writes", "psum_reads"}
    assert len(doc["result_sha256"]) == 64


def test_dma_report_contains_layers(tmp_path):
    out = tmp_path / "d.json"
    assert run(["dma", "--workload", "vgg16", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["layers"]) == 13
    assert doc["aggregate"]["ifmap_factor"] > 1
    for row in doc["layers"]:
        assert {"layer", "macs", "ifmap_reads", "weight_reads", "ifmap_factor", "weight_factor", "cycles"} <= set(row)


def test_infer_report(tmp_path):
    out = tmp_path / "i.json"
    assert run(["infer", "--model", "fixture:conv", "--precision", "16", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert abs(doc["delta_points"]) <= 2.0
    assert doc["samples"] == 360
    assert doc["calibration"] == "minmax"


def test_infer_fxp4_softmax_exits_3(tmp_path, capsys):
    assert run(["infer", "--model", "fixture:mlp", "--precision", "4", "--out", str(tmp_path / "x.json")]) == 3


def test_bad_workload_exits_3(tmp_path, capsys):
    wl = tmp_path / "bad.txt"
    wl.write_text("layer broken h=1\n")
    assert run(["dma", "--workload", str(wl), "--out", str(tmp_path / "o.json")]) == 3


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as exc:
        run(["af", "--fn", "sigmoid"])  # missing --precision
    assert exc.value.code == 2


def test_out_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv("CORDICPE_OUT", str(tmp_path))
    assert run(["af", "--fn", "relu", "--precision", "8"]) == 0
    assert (tmp_path / "af_relu_fxp8.csv").exists()


def test_tables_export(tmp_path):
    out = tmp_path / "tables.csv"
    assert run(["tables", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[1] == "kind,precision,stage,exponent,entry_real,entry_raw"
