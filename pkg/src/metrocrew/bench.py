"""Paired-seed benchmark batches and their CSV reports."""

from __future__ import annotations

import csv
import io
import json
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .heuristics import lgh, lgh_r, sph
from .model import Instance, desk_config, instance_from_dict, load_instance, shanghai_like_config
from .planner import plan
from .replanner import DisruptionScenario, replan, surge_scenario, validate_replan
from .roster import roster_from_json, roster_to_json
from .validate import validate_roster

log = logging.getLogger(__name__)

PLAN_ALGOS = ("tscg", "sph", "lgh")
REPLAN_ALGOS = ("fpah", "fpah_n", "lgh_r")
METRICS = ("obj", "labor", "cancel", "pref", "cvg", "cvg_u")
HEADER = ("kind", "algorithm", "instance", "seed", "n", "valid", "error") + METRICS + tuple(
    m + "_std" for m in METRICS)


def _norm(name: str) -> str:
    return name.lower().replace("-", "_")


def make_instance(spec: dict, seed: int) -> Instance:
    """Instance for one repetition: presets are re-seeded, files are used as they are."""
    if "file" in spec:
        return load_instance(spec["file"])
    preset = spec.get("preset")
    if preset == "desk":
        return instance_from_dict(desk_config(seed, n_r=spec.get("n_r", 40), n_days=spec.get("n_days", 2)))
    if preset == "shanghai":
        return instance_from_dict(shanghai_like_config(spec.get("n_lines", 3), spec.get("n_days", 3),
                                                       spec.get("n_r", 680), seed))
    if preset is not None:
        raise ValueError(f"unknown preset {preset!r}")
    doc = dict(spec["doc"])
    doc.setdefault("crew", {"n_r": 40})
    if isinstance(doc["crew"], dict):
        doc["crew"] = {**doc["crew"], "seed": seed}
    doc.setdefault("perturb", {"seed": seed})
    return instance_from_dict(doc)


def run_plan(instance: Instance, algo: str, node_limit: int = 1000, **tscg):
    algo = _norm(algo)
    if algo == "tscg":
        return plan(instance, node_limit=node_limit, **tscg)
    if algo == "sph":
        return sph(instance)
    if algo == "lgh":
        return lgh(instance)
    raise ValueError(f"unknown planning algorithm {algo!r}")


def run_replan(instance: Instance, roster, scenario: DisruptionScenario, algo: str):
    algo = _norm(algo)
    if algo == "fpah":
        return replan(instance, roster, scenario)
    if algo == "fpah_n":
        return replan(instance, roster, scenario, deadheads=False)
    if algo == "lgh_r":
        return lgh_r(instance, roster, scenario)
    raise ValueError(f"unknown replanning algorithm {algo!r}")


@dataclass
class BenchmarkReport:
    name: str
    rows: list[dict] = field(default_factory=list)
    timings: list[dict] = field(default_factory=list)
    results: dict = field(default_factory=dict)   # (algorithm, seed) -> result, not serialised

    def aggregates(self) -> list[dict]:
        out = []
        for algo in dict.fromkeys(r["algorithm"] for r in self.rows):
            ok = [r for r in self.rows if r["algorithm"] == algo and not r["error"]]
            agg = {"kind": "aggregate", "algorithm": algo, "instance": ok[0]["instance"] if ok else "",
                   "seed": "", "n": len(ok), "valid": all(r["valid"] for r in ok), "error": ""}
            for m in METRICS:
                vals = [r[m] for r in ok if r[m] is not None]
                agg[m] = statistics.fmean(vals) if vals else None
                agg[m + "_std"] = statistics.stdev(vals) if len(vals) > 1 else (0.0 if vals else None)
            out.append(agg)
        return out

    def mean(self, algo: str, metric: str) -> float:
        return next(a[metric] for a in self.aggregates() if a["algorithm"] == _norm(algo))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HEADER)
        for r in self.rows + self.aggregates():
            w.writerow([_fmt(r.get(h)) for h in HEADER])
        return buf.getvalue()

    def timing_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("algorithm", "seed", "wall_time_s"))
        for t in self.timings:
            w.writerow((t["algorithm"], t["seed"], f"{t['wall_time_s']:.3f}"))
        return buf.getvalue()

    def write(self, path) -> None:
        path = Path(path)
        path.write_text(self.to_csv())
        path.with_name(path.stem + "_timing.csv").write_text(self.timing_csv())


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def _row(algo, inst_name, seed, res=None, valid=False, error="", replan_mode=False) -> dict:
    row = {"kind": "row", "algorithm": algo, "instance": inst_name, "seed": seed, "n": 1, "valid": valid,
           "error": error}
    for m in METRICS:
        row[m] = None
    if res is not None:
        for m in METRICS:
            if m == "cvg_u" and not replan_mode:
                continue
            row[m] = float(getattr(res, m))
    return row


def _run_seed(cfg: dict, seed: int):
    """All algorithms of one repetition; returns (rows, timings, results)."""
    mode = cfg.get("mode", "plan")
    name = cfg.get("instance_name", cfg.get("name", "instance"))
    inst = make_instance(cfg["instance"], seed)
    node_limit = int(cfg.get("node_limit", 1000))
    rows, timings, results = [], [], {}
    if mode == "plan":
        for algo in cfg["algorithms"]:
            algo = _norm(algo)
            t0 = time.perf_counter()
            try:
                res = run_plan(inst, algo, node_limit)
                # re-validate from the serialised form
                back = roster_from_json(json.loads(json.dumps(roster_to_json(res.roster, inst))))
                ok = validate_roster(inst, back).ok
                rows.append(_row(algo, name, seed, res, ok))
                results[(algo, seed)] = res
            except Exception as e:  # a failed row is recorded, the batch goes on
                log.error("%s seed %d failed: %s", algo, seed, e)
                rows.append(_row(algo, name, seed, error=f"{type(e).__name__}: {e}"))
            timings.append({"algorithm": algo, "seed": seed, "wall_time_s": time.perf_counter() - t0})
        return rows, timings, results
    if mode != "replan":
        raise ValueError(f"unknown mode {mode!r}")
    surge = cfg.get("surge", {})
    base = run_plan(inst, cfg.get("base", "tscg"), node_limit)
    results[("base", seed)] = base
    if "scenario" in cfg:
        sc = DisruptionScenario.from_dict(cfg["scenario"])
    else:
        sc = surge_scenario(inst, seed, int(surge.get("t_bar", 690)), int(surge.get("day", 0)),
                            int(surge.get("theta", 1)), tuple(surge.get("offset", (0, 30))),
                            int(surge.get("headway", 2)))
    results[("scenario", seed)] = sc
    for algo in cfg["algorithms"]:
        algo = _norm(algo)
        t0 = time.perf_counter()
        try:
            res = run_replan(inst, base.roster, sc, algo)
            ok = validate_replan(inst, base.roster, sc, res).ok
            rows.append(_row(algo, name, seed, res, ok, replan_mode=True))
            results[(algo, seed)] = res
        except Exception as e:
            log.error("%s seed %d failed: %s", algo, seed, e)
            rows.append(_row(algo, name, seed, error=f"{type(e).__name__}: {e}", replan_mode=True))
        timings.append({"algorithm": algo, "seed": seed, "wall_time_s": time.perf_counter() - t0})
    return rows, timings, results


def run_benchmark(cfg: dict, threads: int = 1, keep_results: bool = False) -> BenchmarkReport:
    """Paired runs: every algorithm sees the same instance and scenario for a given seed."""
    algos = [_norm(a) for a in cfg["algorithms"]]
    allowed = PLAN_ALGOS if cfg.get("mode", "plan") == "plan" else REPLAN_ALGOS
    bad = [a for a in algos if a not in allowed]
    if bad:
        raise ValueError(f"algorithms {bad} not valid for mode {cfg.get('mode', 'plan')!r}")
    seed0 = int(cfg.get("seed", 0))
    seeds = [seed0 + i for i in range(int(cfg.get("repetitions", 20)))]
    rep = BenchmarkReport(cfg.get("name", "bench"))
    if threads > 1:
        with ProcessPoolExecutor(threads) as ex:
            outs = list(ex.map(_run_seed, [cfg] * len(seeds), seeds))
    else:
        outs = [_run_seed(cfg, s) for s in seeds]
    for rows, timings, results in outs:
        rep.rows += rows
        rep.timings += timings
        if keep_results:
            rep.results.update(results)
    order = {a: i for i, a in enumerate(algos)}
    rep.rows.sort(key=lambda r: (order[r["algorithm"]], r["seed"]))
    rep.timings.sort(key=lambda r: (order[r["algorithm"]], r["seed"]))
    return rep


def load_config(path) -> dict:
    return json.loads(Path(path).read_text())
