import json

import pytest

from cardbench.cli import main
from cardbench.synth import write_dataset


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    write_dataset(data, seed=1, scale=120)
    wl = root / "workload.sql"
    rc = main([
        "gen",
        "--schema", str(data / "schema.txt"), "--data", str(data),
        "--out", str(wl), "--manifest", str(root / "manifest.csv"),
        "--templates", "6", "--per-template", "2", "--max-tables", "3",
        "--seed", "5",
    ])
    assert rc == 0
    return root, data, wl


def base_args(data, wl=None):
    args = ["--schema", str(data / "schema.txt"), "--data", str(data)]
    if wl is not None:
        args += ["--workload", str(wl)]
    return args


def test_truecards_resumable(workspace, capsys):
    root, data, wl = workspace
    cache = root / "truecards.csv"
    assert main(["truecards", *base_args(data, wl), "--out", str(cache)]) == 0
    first = cache.read_bytes()
    out1 = capsys.readouterr().out
    assert "computed this run" in out1
    assert main(["truecards", *base_args(data, wl), "--out", str(cache)]) == 0
    out2 = capsys.readouterr().out
    assert "(0 computed this run)" in out2
    assert cache.read_bytes() == first
    # cache layout: comment header, csv header, rows sorted by (query, key)
    lines = cache.read_text().splitlines()
    assert lines[0].startswith("# cardbench truecards v1 fingerprint=")
    assert lines[1] == "query_id,subplan_key,cardinality"
    keys = [tuple(line.split(",")[:2]) for line in lines[2:]]
    assert keys == sorted(keys)


def test_truecards_verify_catches_corruption(workspace, capsys):
    root, data, wl = workspace
    cache = root / "corrupt.csv"
    assert main(["truecards", *base_args(data, wl), "--out", str(cache)]) == 0
    lines = cache.read_text().splitlines()
    qid, key, card = lines[2].split(",")
    lines[2] = f"{qid},{key},{int(card) + 17}"
    cache.write_text("\n".join(lines) + "\n")
    rc = main(["truecards", *base_args(data, wl), "--out", str(cache), "--verify"])
    assert rc == 2  # invariant violation exit code


def test_bench_true_only(workspace, capsys):
    root, data, wl = workspace
    out = root / "r_true"
    rc = main(["bench", *base_args(data, wl), "--methods", "true",
               "--out", str(out), "--seed", "3"])
    assert rc == 0
    doc = json.loads((root / "r_true.json").read_text())
    for q in doc["queries"]:
        assert q["methods"]["true"]["p_error"] == 1.0
        assert all(v == 1.0 for v in q["methods"]["true"]["q_errors"].values())


def test_bench_two_methods_and_percentile_table(workspace, capsys):
    root, data, wl = workspace
    out = root / "r_two"
    rc = main(["bench", *base_args(data, wl),
               "--methods", "indep_hist,uni_sample", "--out", str(out), "--seed", "3"])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "indep_hist" in printed and "uni_sample" in printed
    assert "q50" in printed and "p99" in printed
    doc = json.loads((root / "r_two.json").read_text())
    assert doc["methods"] == ["indep_hist", "uni_sample"]
    csv_text = (root / "r_two.csv").read_text()
    assert csv_text.startswith("query_id,method,")


def test_bench_seed_byte_identical(workspace):
    root, data, wl = workspace
    a, b = root / "seed_a", root / "seed_b"
    for out in (a, b):
        rc = main(["bench", *base_args(data, wl), "--methods", "uni_sample,wj_sample",
                   "--out", str(out), "--seed", "7"])
        assert rc == 0
    assert (root / "seed_a.json").read_bytes() == (root / "seed_b.json").read_bytes()


def test_bench_worker_env_override(workspace, monkeypatch):
    root, data, wl = workspace
    serial, parallel = root / "w1", root / "w2"
    rc = main(["bench", *base_args(data, wl), "--methods", "true,indep_hist",
               "--out", str(serial), "--seed", "1", "--workers", "1"])
    assert rc == 0
    monkeypatch.setenv("CARDBENCH_WORKERS", "3")
    rc = main(["bench", *base_args(data, wl), "--methods", "true,indep_hist",
               "--out", str(parallel), "--seed", "1"])
    assert rc == 0
    assert (root / "w1.json").read_bytes() == (root / "w2.json").read_bytes()


def test_bench_rejects_unknown_method(workspace, capsys):
    root, data, wl = workspace
    rc = main(["bench", *base_args(data, wl), "--methods", "nope",
               "--out", str(root / "x"), "--seed", "1"])
    assert rc == 3


def test_explain_true_no_divergence(workspace, capsys):
    root, data, wl = workspace
    sql = wl.read_text().splitlines()[0].split("--")[0].strip()
    rc = main(["explain", *base_args(data), "--query", sql, "--method", "true"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "first divergence: none" in out
    assert "P-Error: 1.000000" in out


def test_explain_scale_card(workspace, capsys):
    root, data, wl = workspace
    sql = "SELECT COUNT(*) FROM badges, users WHERE badges.user_id = users.id"
    rc = main(["explain", *base_args(data), "--query", sql, "--method", "true",
               "--scale-card", "badges+users=0.001"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "P-Error:" in out


def test_explain_unknown_table_exit_code(workspace, capsys):
    root, data, wl = workspace
    rc = main(["explain", *base_args(data), "--query",
               "SELECT COUNT(*) FROM missing_table", "--method", "true"])
    assert rc == 3
    assert "missing_table" in capsys.readouterr().err


def test_inspect(workspace, capsys):
    root, data, wl = workspace
    rc = main(["inspect", *base_args(data)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "table users" in out
    assert "join graph:" in out
    rc = main(["inspect", *base_args(data), "--table", "posts"])
    assert rc == 0


def test_config_file_and_seed_env(workspace, monkeypatch, tmp_path):
    root, data, wl = workspace
    cfg = tmp_path / "bench.cfg"
    cfg.write_text("sample_size = 32\nwalk_count = 16\nseed = 11\n# comment\n")
    out1, out2 = root / "cfg_a", root / "cfg_b"
    rc = main(["bench", *base_args(data, wl), "--methods", "uni_sample",
               "--config", str(cfg), "--out", str(out1)])
    assert rc == 0
    monkeypatch.setenv("CARDBENCH_SEED", "11")
    rc = main(["bench", *base_args(data, wl), "--methods", "uni_sample",
               "--out", str(out2)])
    assert rc == 0
    doc1 = json.loads((root / "cfg_a.json").read_text())
    doc2 = json.loads((root / "cfg_b.json").read_text())
    assert doc1["seed"] == doc2["seed"] == 11


def test_bad_config_key(workspace, tmp_path, capsys):
    root, data, wl = workspace
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("no_such_knob = 3\n")
    rc = main(["bench", *base_args(data, wl), "--methods", "true",
               "--config", str(cfg), "--out", str(root / "bad")])
    assert rc == 3


def test_explain_scale_card_leaves_truth_alone(workspace, capsys):
    # scaling an injected estimate must not leak into the true-cardinality side
    root, data, wl = workspace
    sql = "SELECT COUNT(*) FROM badges, users WHERE badges.user_id = users.id"
    rc = main(["explain", *base_args(data), "--query", sql, "--method", "true",
               "--scale-card", "badges+users=0.01"])
    assert rc == 0
    out = capsys.readouterr().out
    est_block, true_block = out.split("=== plan under true cardinalities")
    est_root = est_block.splitlines()[1]
    true_root = true_block.strip().splitlines()[0]
    est_rows = float(est_root.split("rows=")[1].split()[0])
    true_rows = float(true_root.split("rows=")[1].split()[0])
    assert est_rows < true_rows  # scaled on one side only


def test_empty_workload_is_input_error(workspace, tmp_path, capsys):
    root, data, wl = workspace
    empty = tmp_path / "empty.sql"
    empty.write_text("# nothing here\n")
    rc = main(["bench", *base_args(data, empty), "--methods", "true",
               "--out", str(tmp_path / "r")])
    assert rc == 3


def test_explain_all_empty_query(workspace, capsys):
    root, data, wl = workspace
    rc = main(["explain", *base_args(data), "--method", "true",
               "--query", "SELECT COUNT(*) FROM users WHERE users.age >= 5000"])
    assert rc == 3
    assert "empty" in capsys.readouterr().err
