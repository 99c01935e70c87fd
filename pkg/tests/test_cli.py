import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from hgcondense import synthetic
from hgcondense.cli import main
from hgcondense.hetgraph import graphs_equal, load_graph, save_graph, validate
from hgcondense.pipeline import CondenseConfig, StageError, inspect, run, run_random_baseline


def tree_bytes(root):
    root = Path(root)
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_toy_half(toy_dir, tmp_path):
    out = tmp_path / "out"
    rep = run(CondenseConfig(str(toy_dir), str(out), ratio=0.5, hops=2, seed=7))
    g = load_graph(out)
    assert g.node_counts == {"P": 2, "A": 2, "S": 1}
    assert validate(g) == []
    assert {t: v["condensed"] for t, v in rep["types"].items()} == g.node_counts
    assert rep["format_version"] == 1
    assert rep["classes"]["after"] == {"0": 1, "1": 1}
    assert [m["name"] for m in rep["metapaths"]] == ["P<-A", "P<-S", "P<-A<-P", "P<-S<-P"]
    on_disk = json.loads((tmp_path / "out.report.json").read_text())
    assert on_disk["types"] == rep["types"]
    assert (tmp_path / "out.report.txt").read_text().startswith("condensation report")
    assert g.meta["provenance"]["types"]["P"] == {"kind": "kept", "ids": [0, 2]}


def test_ratio_one_identity(tmp_path):
    g = synthetic.planted(3, n_target=40, n_authors=30, n_subjects=5, n_terms=20)
    save_graph(g, tmp_path / "in")
    run(CondenseConfig(str(tmp_path / "in"), str(tmp_path / "out"), ratio=1.0, pool="all"))
    out = load_graph(tmp_path / "out")
    # all labeled non-test targets kept, every father kept, leaf groups below N_leaf
    assert out.node_counts["A"] == g.node_counts["A"]
    assert out.node_counts["S"] == g.node_counts["S"]
    assert out.node_counts["P"] == g.node_counts["P"] - g.splits["test"].size


def test_ratio_one_toy_is_input(toy_dir, tmp_path):
    run(CondenseConfig(str(toy_dir), str(tmp_path / "out"), ratio=1.0))
    out = load_graph(tmp_path / "out")
    out.meta = {}
    assert graphs_equal(out, load_graph(toy_dir))


def test_rerun_byte_identical(tmp_path):
    save_graph(synthetic.planted(5, n_target=60, n_authors=40, n_subjects=6, n_terms=30), tmp_path / "in")
    for name in ("a", "b"):
        run(CondenseConfig(str(tmp_path / "in"), str(tmp_path / name), ratio=0.25, seed=3))
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")


def test_baseline_reproducible_and_counts(toy_dir, tmp_path):
    cfg = lambda name, seed: CondenseConfig(str(toy_dir), str(tmp_path / name), ratio=0.5,
                                            seed=seed, baseline="random")
    run(cfg("r1", 1))
    run(cfg("r2", 1))
    assert tree_bytes(tmp_path / "r1") == tree_bytes(tmp_path / "r2")
    assert load_graph(tmp_path / "r1").node_counts == {"P": 2, "A": 2, "S": 1}
    run_random_baseline(CondenseConfig(str(toy_dir), str(tmp_path / "full"), ratio=1.0))
    full = load_graph(tmp_path / "full")
    full.meta = {}
    assert graphs_equal(full, load_graph(toy_dir))


def test_test_split_never_selected(tmp_path):
    g = synthetic.planted(2, n_target=80, n_authors=50, n_subjects=6, n_terms=30)
    save_graph(g, tmp_path / "in")
    rep = run(CondenseConfig(str(tmp_path / "in"), str(tmp_path / "o1"), ratio=0.3, pool="all"))
    ids = load_graph(tmp_path / "o1").meta["provenance"]["types"]["P"]["ids"]
    assert not set(ids) & set(g.splits["test"].tolist())
    # relabelling test nodes changes nothing
    g.labels[g.splits["test"]] = (g.labels[g.splits["test"]] + 1) % 4
    save_graph(g, tmp_path / "in2")
    rep2 = run(CondenseConfig(str(tmp_path / "in2"), str(tmp_path / "o2"), ratio=0.3, pool="all"))
    assert rep["selection"] == rep2["selection"]


def test_stage_error_no_output(tmp_path, toy):
    toy.node_counts["Z"] = 2
    save_graph(toy, tmp_path / "in")
    with pytest.raises(StageError) as err:
        run(CondenseConfig(str(tmp_path / "in"), str(tmp_path / "out"), ratio=0.5))
    assert err.value.stage == "hierarchy"
    assert not (tmp_path / "out").exists()
    assert not (tmp_path / "out.report.json").exists()


def test_cli_condense_and_errors(toy_dir, tmp_path, capsys):
    assert main(["condense", str(toy_dir), str(tmp_path / "o"), "--ratio", "0.5", "--seed", "7",
                 "--report", str(tmp_path / "rep.json")]) == 0
    assert "P:2, A:2, S:1" in capsys.readouterr().out
    assert json.loads((tmp_path / "rep.json").read_text())["method"] == "influence"
    assert (tmp_path / "rep.txt").exists()
    assert main(["condense", str(tmp_path / "missing"), str(tmp_path / "o2")]) == 1
    assert "error:" in capsys.readouterr().err
    assert not (tmp_path / "o2").exists()
    assert main(["condense", str(toy_dir), str(tmp_path / "o3"), "--ratio", "1.5"]) == 1


def test_cli_flags(toy_dir, tmp_path, capsys):
    roles = tmp_path / "roles"
    roles.write_text("S father\n")
    assert main(["condense", str(toy_dir), str(tmp_path / "o"), "--ratio", "0.5", "--hops", "1",
                 "--pool", "all", "--roles", str(roles), "--alpha", "0.2", "--epsilon", "1e-5",
                 "--threads", "2", "--ppr-mode", "exact", "--importance", "degree"]) == 0
    assert main(["condense", str(toy_dir), str(tmp_path / "b"), "--baseline", "random",
                 "--ratio", "0.5"]) == 0


def test_cli_inspect(toy_dir, capsys):
    assert main(["inspect", "metapaths", str(toy_dir), "--hops", "2"]) == 0
    out = capsys.readouterr().out
    assert sum(1 for line in out.splitlines() if line.startswith("P<-")) == 4
    assert main(["inspect", "hierarchy", str(toy_dir)]) == 0
    out = capsys.readouterr().out
    assert "P:root" in out and "A:father" in out and "S:father" in out
    assert main(["inspect", "scores", str(toy_dir), "--ratio", "0.5"]) == 0
    out = capsys.readouterr().out
    assert "path P<-A<-P" in out and "aggregated scores" in out


def test_cli_unknown_subcommand():
    with pytest.raises(SystemExit) as err:
        main(["inspect", "budgets", "x"])
    assert err.value.code == 2


def test_inspect_function_unknown(toy_dir):
    with pytest.raises(Exception):
        inspect("nope", CondenseConfig(str(toy_dir)))


def test_console_script(toy_dir, tmp_path):
    out = subprocess.run([sys.executable, "-m", "hgcondense.cli", "inspect", "hierarchy", str(toy_dir)],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "P:root" in out.stdout


def test_backends_agree_in_exact_mode(tmp_path):
    # exact PPR bypasses the push kernels; greedy and Jaccard kernels must agree bit for bit
    import os
    save_graph(synthetic.planted(9, n_target=80, n_authors=50, n_subjects=6, n_terms=30), tmp_path / "in")
    for name, flag in (("nb", "0"), ("np", "1")):
        env = dict(os.environ, HGCONDENSE_DISABLE_NUMBA=flag)
        subprocess.run([sys.executable, "-m", "hgcondense.cli", "condense", str(tmp_path / "in"),
                        str(tmp_path / name), "--ratio", "0.25", "--ppr-mode", "exact"],
                       env=env, check=True, capture_output=True)
    assert tree_bytes(tmp_path / "nb") == tree_bytes(tmp_path / "np")
    backends = {json.loads((tmp_path / f"{n}.report.json").read_text())["backend"] for n in ("nb", "np")}
    assert backends == {"numba", "numpy"}
