"""Run records on disk, region-restricted metrics and experiment aggregation.

A run is stored as two UTF-8 files sharing a stem: ``<stem>.csv`` holds one row
per evaluation and ``<stem>.json`` holds the configuration, the final front and
the metrics. CSV columns, in order::

    t, phase, x0..x{d-1}, f0..f{m-1}, target0..target{m-1},
    line_uncertainty, acquisition_value, wall_time

Floats are written with ``repr`` so that files round-trip exactly; missing
values are empty cells (targets) or ``nan``.
"""

from __future__ import annotations

import csv
import io
import json
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import pareto
from .driver import IterationRecord, RunConfig, RunState, run
from .problems import Problem, get_problem

REGION_WIDTHS = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _parse(s: str):
    return None if s == "" else float(s)


@dataclass
class RunRecord:
    config: dict
    rows: list
    summary: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return int(self.config["d"])

    @property
    def m(self) -> int:
        return int(self.config["m"])

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objectives for r in self.rows]).reshape(-1, self.m)

    @property
    def designs(self) -> np.ndarray:
        return np.array([r.design for r in self.rows]).reshape(-1, self.d)

    def header(self) -> list[str]:
        return (["t", "phase"] + [f"x{i}" for i in range(self.d)] + [f"f{j}" for j in range(self.m)]
                + [f"target{j}" for j in range(self.m)]
                + ["line_uncertainty", "acquisition_value", "wall_time"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for r in self.rows:
            target = [None] * self.m if r.target is None else list(r.target)
            w.writerow([str(r.t), r.phase] + [_fmt(v) for v in r.design] + [_fmt(v) for v in r.objectives]
                       + [_fmt(v) for v in target]
                       + [_fmt(r.line_uncertainty), _fmt(r.acquisition_value), _fmt(r.wall_time)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"config": self.config, "summary": self.summary}, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_text(cls, csv_text: str, json_text: str) -> "RunRecord":
        meta = json.loads(json_text)
        config = meta["config"]
        d, m = int(config["d"]), int(config["m"])
        reader = csv.reader(io.StringIO(csv_text))
        header = next(reader)
        rows = []
        for cells in reader:
            if len(cells) != len(header):
                raise ValueError(f"malformed record row: {cells!r}")
            vals = cells[2:]
            x = np.array([float(v) for v in vals[:d]])
            y = np.array([float(v) for v in vals[d:d + m]])
            target = [_parse(v) for v in vals[d + m:d + 2 * m]]
            rest = [float(v) for v in vals[d + 2 * m:]]
            rows.append(IterationRecord(int(cells[0]), x, y, cells[1],
                                        None if target[0] is None else np.array(target), *rest))
        return cls(config, rows, meta.get("summary", {}))

    def write(self, out_dir, stem: str) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
        csv_path.write_text(self.to_csv(), encoding="utf-8")
        json_path.write_text(self.to_json(), encoding="utf-8")
        return csv_path, json_path

    @classmethod
    def read(cls, csv_path) -> "RunRecord":
        csv_path = Path(csv_path)
        json_path = csv_path.with_suffix(".json")
        return cls.from_text(csv_path.read_text(encoding="utf-8"), json_path.read_text(encoding="utf-8"))


# --------------------------------------------------------------------------- metrics


def region_metrics(observations, reference_front, center, ideal=None, nadir=None,
                   widths=REGION_WIDTHS) -> dict:
    """Metrics of the observed front restricted to the regions ``I_w``.

    ``I_w`` gathers the points dominating ``(1 - w) C + w N``. Hypervolume is
    normalized by the reference front's hypervolume in the same region; IGD and
    the epsilon indicator are computed on objectives scaled to [I, N].
    Attainment is the first (1-based) evaluation index dominating the corner.
    """
    Y = np.atleast_2d(np.asarray(observations, float))
    ref_front = pareto.pareto_front(reference_front)
    ideal = ref_front.min(axis=0) if ideal is None else np.asarray(ideal, float)
    nadir = ref_front.max(axis=0) if nadir is None else np.asarray(nadir, float)
    front = pareto.pareto_front(Y) if len(Y) else Y
    out = {}
    for w in widths:
        corner = pareto.restricted_region(center, nadir, w)
        approx = pareto.restrict(front, corner)
        truth = pareto.restrict(ref_front, corner)
        hv_true = pareto.hypervolume(truth, corner) if len(truth) else 0.0
        hv = pareto.hypervolume(approx, corner) if len(approx) else 0.0
        hits = np.flatnonzero(np.all(Y <= corner, axis=1)) if len(Y) else np.array([], int)
        entry = {
            "hypervolume": hv / hv_true if hv_true > 0 else None,
            "igd": None,
            "epsilon": None,
            "attainment": int(hits[0]) + 1 if hits.size else None,
        }
        if len(approx) and len(truth):
            a = pareto.normalize(approx, ideal, nadir)
            r = pareto.normalize(truth, ideal, nadir)
            entry["igd"] = pareto.igd(a, r)
            entry["epsilon"] = pareto.epsilon_indicator(a, r)
        out[f"{w:g}"] = entry
    return out


def reference_center(problem: Problem | None, reference_front) -> np.ndarray:
    if problem is not None and problem.true_center is not None:
        return np.asarray(problem.true_center, float)
    return pareto.summarize(reference_front).center


def record_from_state(state: RunState, problem: Problem | None = None) -> RunRecord:
    cfg = state.config
    summary = {
        "evaluations": state.t,
        "aborted": state.aborted,
        "final_front": state.front.tolist() if len(state.Y) else [],
        "transition_t": next((r.t - 1 for r in state.log if r.phase == "two"), None),
        "ref_star": None if state.ref_star is None else [float(v) for v in state.ref_star],
    }
    for name, est in (("center_estimate", state.current_center), ("final_center_estimate", state.final_center)):
        summary[name] = None if est is None else {
            "ideal": [float(v) for v in est.ideal_hat],
            "nadir": [float(v) for v in est.nadir_hat],
            "center": [float(v) for v in est.center_hat],
        }
    if problem is not None and problem.true_front is not None:
        center = reference_center(problem, problem.true_front)
        summary["true_center"] = [float(v) for v in center]
        summary["metrics"] = region_metrics(state.Y, problem.true_front, center, problem.ideal, problem.nadir)
    return RunRecord(cfg.as_dict(), list(state.log), summary)


# --------------------------------------------------------------------------- experiments


def _mean_sd(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    sd = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
    return float(np.mean(vals)), sd


def aggregate(per_run: list[dict], widths=REGION_WIDTHS) -> dict:
    """Mean and sample sd of each metric per region, with the expected runtime of attainment.

    When only some runs attain a region the expected runtime is the mean
    attainment time of the successful runs divided by their proportion.
    """
    out = {}
    n = len(per_run)
    for w in widths:
        key = f"{w:g}"
        row = {}
        for metric in ("hypervolume", "igd", "epsilon"):
            vals = [r[key][metric] for r in per_run]
            if metric == "hypervolume":
                vals = [0.0 if v is None else v for v in vals]
            mean, sd = _mean_sd(vals)
            row[f"{metric}_mean"], row[f"{metric}_sd"] = mean, sd
        times = [r[key]["attainment"] for r in per_run if r[key]["attainment"] is not None]
        row["attained"] = len(times)
        row["runs"] = n
        if times:
            mean_t, sd_t = _mean_sd(times)
            row["attainment_mean"], row["attainment_sd"] = mean_t, sd_t
            row["expected_runtime"] = mean_t / (len(times) / n)
        else:
            row["attainment_mean"] = row["attainment_sd"] = row["expected_runtime"] = None
        out[key] = row
    return out


REPORT_COLUMNS = ("w", "hypervolume_mean", "hypervolume_sd", "igd_mean", "igd_sd", "epsilon_mean", "epsilon_sd",
                  "attainment_mean", "attainment_sd", "expected_runtime", "attained", "runs")


def report_csv(table: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for key, row in table.items():
        w.writerow([key] + ["" if row[c] is None else _fmt(row[c]) for c in REPORT_COLUMNS[1:]])
    return buf.getvalue()


def report_text(table: dict) -> str:
    def cell(mean, sd):
        return "-" if mean is None else f"{mean:.3f} ({sd:.3f})"

    lines = [f"{'w':>5}  {'hypervolume':>16}  {'IGD':>16}  {'eps':>16}  {'attainment':>16}  {'ERT':>7}  hits"]
    for key, r in table.items():
        ert = "-" if r["expected_runtime"] is None else f"{r['expected_runtime']:.1f}"
        lines.append(f"{key:>5}  {cell(r['hypervolume_mean'], r['hypervolume_sd']):>16}  "
                     f"{cell(r['igd_mean'], r['igd_sd']):>16}  {cell(r['epsilon_mean'], r['epsilon_sd']):>16}  "
                     f"{cell(r['attainment_mean'], r['attainment_sd']):>16}  {ert:>7}  {r['attained']}/{r['runs']}")
    return "\n".join(lines) + "\n"


def read_front_csv(path) -> np.ndarray:
    rows = list(csv.reader(Path(path).read_text(encoding="utf-8").splitlines()))
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    return np.array([[float(v) for v in r] for r in rows if r])


def write_front_csv(path, front, prefix: str = "f") -> None:
    front = np.atleast_2d(front)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"{prefix}{j}" for j in range(front.shape[1])])
    for row in front:
        w.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def report(records_dir, reference_front=None, out_dir=None, center=None) -> dict:
    """Recompute per-run metrics from raw records and aggregate them.

    ``reference_front`` is a CSV path or an array. Without it only run counts are
    reported and a warning is emitted.
    """
    paths = sorted(p for p in Path(records_dir).glob("*.csv") if p.with_suffix(".json").exists())
    if not paths:
        raise FileNotFoundError(f"no run records in {records_dir}")
    records = [RunRecord.read(p) for p in paths]
    if reference_front is None:
        warnings.warn("no reference front given; metrics needing it are omitted")
        return {"runs": len(records), "table": None}
    ref = read_front_csv(reference_front) if isinstance(reference_front, (str, os.PathLike)) else np.asarray(
        reference_front, float)
    if center is None:
        stored = records[0].summary.get("true_center")
        center = np.asarray(stored, float) if stored is not None else pareto.summarize(ref).center
    per_run = [region_metrics(r.objectives, ref, center) for r in records]
    table = aggregate(per_run)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(report_csv(table), encoding="utf-8")
        (out / "report.txt").write_text(report_text(table), encoding="utf-8")
    return {"runs": len(records), "table": table, "per_run": per_run}


@dataclass(frozen=True)
class ExperimentConfig:
    run: RunConfig
    repeats: int = 10
    out: str = "results"
    baseline: bool = False


def load_toml(path) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def experiment_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    run_section = dict(data.pop("run", {}))
    exp = dict(data.pop("experiment", {}))
    if data:
        raise ValueError(f"unknown configuration sections: {sorted(data)}")
    problem = get_problem(run_section.get("problem", "zdt1"), run_section.get("d"))
    run_section.setdefault("d", problem.d)
    run_section.setdefault("m", problem.m)
    cfg = RunConfig.from_dict(run_section)
    unknown = set(exp) - {"repeats", "out", "baseline"}
    if unknown:
        raise ValueError(f"unknown experiment keys: {sorted(unknown)}")
    return ExperimentConfig(cfg, int(exp.get("repeats", 10)), str(exp.get("out", "results")),
                            bool(exp.get("baseline", False)))


def derived_seed(base: int, i: int) -> int:
    return int(np.random.SeedSequence([base, i]).generate_state(1)[0])


def _one_run(args):
    cfg, stem, out = args
    problem = get_problem(cfg.problem, cfg.d)
    state = run(cfg, problem)
    rec = record_from_state(state, problem)
    rec.write(out, stem)
    return stem


def run_experiment(config, out_dir=None, *, seed=None, repeats=None, problem=None, budget=None) -> dict:
    """Execute an experiment described by a TOML file (or an ``ExperimentConfig``)."""
    exp = config if isinstance(config, ExperimentConfig) else experiment_from_dict(load_toml(config))
    cfg = exp.run
    if problem is not None:
        p = get_problem(problem)
        cfg = replace(cfg, problem=problem, d=p.d, m=p.m)
    if budget is not None:
        cfg = replace(cfg, budget=int(budget))
    if seed is not None:
        cfg = replace(cfg, seed=int(seed))
    n = exp.repeats if repeats is None else int(repeats)
    out = Path(out_dir or exp.out)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    jobs = []
    variants = [("cehi", cfg)] + ([("ehi", replace(cfg, variant="ehi"))] if exp.baseline else [])
    for name, vcfg in variants:
        for i in range(n):
            jobs.append((replace(vcfg, seed=derived_seed(cfg.seed, i)), f"run_{i:03d}", out / name))
    workers = max(1, min(int(os.environ.get("CEHI_THREADS", "1")), len(jobs)))
    if workers == 1:
        for job in jobs:
            _one_run(job)
    else:
        with ProcessPoolExecutor(workers) as pool:
            list(pool.map(_one_run, jobs))
    prob = get_problem(cfg.problem, cfg.d)
    results = {}
    if prob.true_front is not None:
        write_front_csv(out / "reference_front.csv", prob.true_front)
    for name, _ in variants:
        ref = prob.true_front
        results[name] = report(out / name, ref, out / name, center=reference_center(prob, ref) if ref is not None
                               else None)
    return results
