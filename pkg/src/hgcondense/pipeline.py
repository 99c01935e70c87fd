"""End-to-end condensation: load, select, condense, induce, save, report."""
from __future__ import annotations

import json
import logging
import os
import shutil
import tempfile
import time
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import _numba
from .auxiliary import classify_hierarchy, condense_other_types, read_role_overrides
from .errors import CondenseError, ContractError, GraphValidationError
from .hetgraph import induce_subgraph, load_graph, save_graph, validate
from .metapath import compose, describe, enumerate_metapaths
from .target import budget_for, class_budgets, unified_select

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass
class CondenseConfig:
    input: str
    output: str | None = None
    ratio: float = 0.1
    hops: int = 2
    alpha: float = 0.15
    epsilon: float = 1e-4
    pool: str = "train"
    seed: int = 0
    roles: str | None = None
    report: str | None = None
    baseline: str | None = None
    threads: int = 1
    ppr_mode: str = "push"
    importance: str = "ppr"

    def check(self):
        if not 0 < self.ratio <= 1:
            raise ContractError(f"ratio {self.ratio} outside (0, 1]")
        if self.hops < 1:
            raise ContractError("hops must be >= 1")
        if not 0 < self.alpha < 1:
            raise ContractError("alpha must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ContractError("epsilon must be positive")
        if self.pool not in ("train", "all"):
            raise ContractError(f"pool mode {self.pool!r} not in train|all")
        if self.baseline not in (None, "random"):
            raise ContractError(f"unknown baseline {self.baseline!r}")


class StageError(CondenseError):
    def __init__(self, stage, exc):
        self.stage = stage
        super().__init__(f"[{stage}] {exc}")


class _Stages:
    def __init__(self):
        self.timings = {}

    def __call__(self, name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            out = fn(*args, **kwargs)
        except StageError:
            raise
        except (CondenseError, ValueError, OSError, KeyError) as exc:
            raise StageError(name, exc) from exc
        self.timings[name] = round(time.perf_counter() - t0, 4)
        log.info("stage %s: %.3fs", name, self.timings[name])
        return out


def selection_pool(graph, mode):
    """Labeled target nodes eligible for selection; never the test split."""
    labeled = graph.labels >= 0
    if mode == "train":
        ids = graph.split("train")
        return ids[labeled[ids]]
    test = set(graph.split("test").tolist())
    return np.array([i for i in np.flatnonzero(labeled) if i not in test], dtype=np.int64)


def target_budget(graph, ratio, pool):
    total = min(budget_for(ratio, graph.node_counts[graph.target_type]), len(pool))
    return class_budgets(graph.labels, pool, ratio, total=total)


def load_hierarchy(graph, roles_path):
    overrides = read_role_overrides(roles_path) if roles_path else None
    return classify_hierarchy(graph, overrides)


def target_paths(graph, hops):
    paths = enumerate_metapaths(graph, graph.target_type, hops)
    return [compose(graph, p, "none") for p in paths]


def _class_hist(labels):
    c = Counter(int(x) for x in labels if x >= 0)
    return {str(k): c[k] for k in sorted(c)}


def _provenance(remap, hyper_by_type):
    out = {}
    for t, groups in remap.items():
        if t in hyper_by_type:
            hs = hyper_by_type[t]
            out[t] = {
                "kind": "hyper",
                "members": [list(map(int, h.members)) for h in hs],
                "anchor": [[h.anchor[0], int(h.anchor[1])] for h in hs],
                "reverse": [[[ft, int(i)] for ft, i in h.reverse] for h in hs],
            }
        else:
            out[t] = {"kind": "kept", "ids": [int(g[0]) for g in groups]}
    return out


def _write_atomic(graph, output):
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{output.name}.", dir=output.parent))
    try:
        save_graph(graph, tmp)
        if output.exists():
            shutil.rmtree(output)
        os.replace(tmp, output)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def report_paths(config):
    base = Path(config.report) if config.report else Path(str(config.output).rstrip("/") + ".report.json")
    return base, base.with_suffix(".txt")


def format_report(rep):
    lines = [f"condensation report (format {rep['format_version']}, method {rep['method']})",
             f"ratio {rep['config']['ratio']}  hops {rep['config']['hops']}  pool {rep['config']['pool']}",
             "", f"{'type':<12} {'role':<7} {'original':>9} {'budget':>7} {'condensed':>9}"]
    for t, info in rep["types"].items():
        lines.append(f"{t:<12} {info['role']:<7} {info['original']:>9} {info['budget']:>7} "
                     f"{info['condensed']:>9}{'  (capped)' if info.get('capped') else ''}")
    lines += ["", "target classes before -> after"]
    for c in rep["classes"]["before"]:
        lines.append(f"  class {c}: {rep['classes']['before'][c]} -> {rep['classes']['after'].get(c, 0)}")
    if rep.get("metapaths"):
        lines += ["", "meta-paths"]
        lines += [f"  {m['name']:<20} {m['steps']:<24} nnz={m['nnz']}" for m in rep["metapaths"]]
    for t, info in rep.get("influence", {}).items():
        top = ", ".join(f"{i}:{s:.4g}" for i, s in info["top"])
        lines.append(f"influence {t}: {top}")
    for t, info in rep.get("hyper", {}).items():
        lines.append(f"hyper {t}: {info['groups']} groups -> {info['final']} hyper-nodes, "
                     f"{len(info['merges'])} merges")
    for w in rep.get("warnings", []):
        lines.append(f"warning: {w}")
    lines += ["", "timings (s)"] + [f"  {k}: {v}" for k, v in rep["timings"].items()]
    return "\n".join(lines) + "\n"


def _finish(config, graph, condensed, stage, rep):
    issues = validate(condensed)
    if issues:
        raise StageError("validate", GraphValidationError(issues))
    stage("save", _write_atomic, condensed, config.output)
    rep["types"] = {
        t: {**rep["types"][t], "original": graph.node_counts[t],
            "condensed": condensed.node_counts[t]}
        for t in graph.node_counts
    }
    rep["classes"] = {"before": _class_hist(graph.labels),
                      "after": _class_hist(condensed.labels)}
    rep["timings"] = stage.timings
    jpath, tpath = report_paths(config)
    jpath.parent.mkdir(parents=True, exist_ok=True)
    jpath.write_text(json.dumps(rep, indent=1, sort_keys=False) + "\n")
    tpath.write_text(format_report(rep))
    return rep


def _base_report(config, method):
    cfg = asdict(config)
    cfg.pop("report", None)
    return {"format_version": FORMAT_VERSION, "method": method, "config": cfg,
            "backend": _numba.backend(), "types": {}, "warnings": []}


def run(config: CondenseConfig):
    """Condense ``config.input`` into ``config.output``; returns the report dict."""
    config.check()
    if config.baseline == "random":
        return run_random_baseline(config)
    stage = _Stages()
    rep = _base_report(config, "influence")
    graph = stage("load", load_graph, config.input)
    hier = stage("hierarchy", load_hierarchy, graph, config.roles)
    paths = stage("metapaths", target_paths, graph, config.hops)
    rep["metapaths"] = [{"name": c.path.name, "steps": c.path.key, "hops": c.path.hops,
                         "nnz": int(c.nnz), "density": c.density()} for c in paths]
    pool = selection_pool(graph, config.pool)
    budget = stage("budget", target_budget, graph, config.ratio, pool)
    sel = stage("target", unified_select, graph, paths, budget, pool, threads=config.threads)
    rep["selection"] = {"budgets": {str(c): b for c, b in budget.per_class.items()},
                        "pool": int(len(pool)), **sel.table.to_dict()}
    plan = stage("others", condense_other_types, graph, hier, sel.selected, config.ratio,
                 config.hops, config.alpha, config.epsilon, config.ppr_mode,
                 config.importance, config.threads)
    rep["warnings"] += plan.warnings
    kept = dict(plan.kept)
    kept[graph.target_type] = sel.selected
    condensed, remap = stage("induce", induce_subgraph, graph, kept, plan.hyper)
    hyper_by_type = {t: s.hyper for t, s in plan.leaves.items() if s.hyper}
    condensed.meta = {"provenance": {"method": "influence", "ratio": config.ratio,
                                     "types": _provenance(remap, hyper_by_type)}}

    for t in graph.node_counts:
        role = hier.roles[t]
        b = (budget.total if t == graph.target_type
             else budget_for(config.ratio, graph.node_counts[t]))
        rep["types"][t] = {"role": role, "budget": b}
    rep["types"][graph.target_type]["capped"] = (
        budget.total < budget_for(config.ratio, graph.node_counts[graph.target_type]))
    for t, syn in plan.leaves.items():
        rep["types"][t]["capped"] = len(syn.hyper) < syn.budget
    rep["influence"] = {
        t: {"paths": f.paths,
            "top": [[int(i), float(f.scores[i])] for i in f.selected[:10]] if f.scores.size else []}
        for t, f in plan.fathers.items()
    }
    rep["hyper"] = {t: {"groups": s.groups, "final": len(s.hyper), "budget": s.budget,
                        "merges": s.merges} for t, s in plan.leaves.items()}
    return _finish(config, graph, condensed, stage, rep)


def run_random_baseline(config: CondenseConfig):
    """Uniform random selection under the same per-class and per-type budgets."""
    config.check()
    stage = _Stages()
    rep = _base_report(config, "random")
    rng = np.random.default_rng(config.seed)
    graph = stage("load", load_graph, config.input)
    hier = stage("hierarchy", load_hierarchy, graph, config.roles)
    pool = selection_pool(graph, config.pool)
    budget = stage("budget", target_budget, graph, config.ratio, pool)
    chosen = []
    for c, b in budget.per_class.items():
        members = pool[graph.labels[pool] == c]
        chosen.extend(rng.choice(members, size=b, replace=False).tolist())
    kept = {graph.target_type: np.sort(np.asarray(chosen, dtype=np.int64))}
    for t, n in graph.node_counts.items():
        if t == graph.target_type:
            continue
        kept[t] = np.sort(rng.choice(n, size=budget_for(config.ratio, n), replace=False))
    condensed, remap = stage("induce", induce_subgraph, graph, kept, [])
    condensed.meta = {"provenance": {"method": "random", "ratio": config.ratio,
                                     "seed": config.seed, "types": _provenance(remap, {})}}
    rep["selection"] = {"budgets": {str(c): b for c, b in budget.per_class.items()},
                        "pool": int(len(pool))}
    for t in graph.node_counts:
        b = budget.total if t == graph.target_type else budget_for(config.ratio, graph.node_counts[t])
        rep["types"][t] = {"role": hier.roles[t], "budget": b}
    rep["types"][graph.target_type]["capped"] = (
        budget.total < budget_for(config.ratio, graph.node_counts[graph.target_type]))
    return _finish(config, graph, condensed, stage, rep)


def inspect(kind, config: CondenseConfig):
    """Text dump of one intermediate artefact without running the pipeline."""
    graph = load_graph(config.input)
    if kind == "metapaths":
        return describe(target_paths(graph, config.hops))
    if kind == "hierarchy":
        return load_hierarchy(graph, config.roles).format()
    if kind == "scores":
        paths = target_paths(graph, config.hops)
        pool = selection_pool(graph, config.pool)
        budget = target_budget(graph, config.ratio, pool)
        sel = unified_select(graph, paths, budget, pool)
        head = f"budgets {budget.per_class}  selected {sel.selected.tolist()}"
        return head + "\n" + sel.table.format()
    raise ContractError(f"unknown inspect target {kind!r}")
