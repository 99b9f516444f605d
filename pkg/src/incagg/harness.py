"""Level/power/runtime experiments and their CSV, JSON and SVG outputs.

Every repetition derives its seeds from ``(master_seed, repetition index)``
only, so results do not depend on execution order or on ``jobs``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import platform
import time
from dataclasses import asdict, dataclass, field, replace
from xml.sax.saxutils import escape

import numpy as np

from .estimator import HSICAggInc, KSDAggInc, MMDAggInc
from .exceptions import ConfigError, InputError
from .models import (
    GBRBMSpec,
    PerturbedUniformSpec,
    gbrbm_sample,
    sample_independence_pair,
    sample_perturbed_uniform,
)
from .testing import TestConfig

logger = logging.getLogger(__name__)

PROBLEM_ALIASES = {
    "mmd": "two_sample",
    "two_sample": "two_sample",
    "hsic": "independence",
    "independence": "independence",
    "ksd": "goodness_of_fit",
    "goodness_of_fit": "goodness_of_fit",
    "gof": "goodness_of_fit",
}
SWEEPS = ("sample_size", "dimension", "difficulty", "R")


def canonical_problem(name: str) -> str:
    try:
        return PROBLEM_ALIASES[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown problem {name!r}") from None


def parse_design(label: str) -> dict:
    """``"R=100"``, ``"L=5000"`` or ``"full"`` to estimator keyword arguments."""
    label = label.strip()
    if label == "full":
        return {"design": "full"}
    key, _, value = label.partition("=")
    try:
        n = int(value)
    except ValueError:
        raise ConfigError(f"bad design label {label!r}; use R=<int>, L=<int> or full") from None
    if key == "R":
        if n < 1:
            raise ConfigError(f"R must be >= 1, got {n}")
        return {"design": "subdiagonal", "R": n}
    if key == "L":
        if n < 1:
            raise ConfigError(f"L must be >= 1, got {n}")
        return {"design": "random", "L": n}
    raise ConfigError(f"bad design label {label!r}; use R=<int>, L=<int> or full")


@dataclass
class ExperimentPlan:
    """One sweep of one problem over one or more design configurations.

    ``sweep`` names the varied quantity: ``sample_size`` (N), ``dimension``
    (d for two-sample, d_y for independence, d_h for goodness-of-fit),
    ``difficulty`` (S, or sigma for goodness-of-fit) or ``R`` (in which case
    ``designs`` is ignored).  ``S = inf`` or ``sigma = 0`` gives the null.
    """

    problem: str = "two_sample"
    sweep: str = "sample_size"
    values: list = field(default_factory=lambda: [200, 400, 600, 800, 1000])
    designs: list = field(default_factory=lambda: ["R=1", "R=100", "R=200", "full"])
    repetitions: int = 100
    master_seed: int = 0
    config: TestConfig = field(default_factory=TestConfig)
    collection: str = "median"
    N: int = 500
    d: int = 1
    d_x: int = 1
    d_y: int = 1
    P: int = 2
    S: float = 2.0
    d_h: int = 40
    sigma: float = 0.02
    burn_in: int = 200
    thinning: int = 10

    def __post_init__(self):
        self.problem = canonical_problem(self.problem)
        if self.sweep not in SWEEPS:
            raise ConfigError(f"sweep must be one of {SWEEPS}")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not self.values:
            raise ConfigError("sweep values must be non-empty")
        if self.sweep != "R":
            if not self.designs:
                raise ConfigError("at least one design is required")
            for label in self.designs:
                parse_design(label)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["S"] = repr(self.S) if math.isinf(self.S) else self.S
        return out


def repetition_seed(master_seed: int, rep: int) -> int:
    """Seed of repetition ``rep``; depends on nothing else."""
    return int(np.random.SeedSequence([int(master_seed), int(rep)]).generate_state(1)[0])


def _apply_sweep(plan: ExperimentPlan, value) -> ExperimentPlan:
    if plan.sweep == "sample_size":
        return replace(plan, N=int(value))
    if plan.sweep == "dimension":
        if plan.problem == "two_sample":
            return replace(plan, d=int(value))
        if plan.problem == "independence":
            return replace(plan, d_y=int(value))
        return replace(plan, d_h=int(value))
    if plan.sweep == "difficulty":
        if plan.problem == "goodness_of_fit":
            return replace(plan, sigma=float(value))
        return replace(plan, S=float(value))
    return plan


def generate_data(plan: ExperimentPlan, seed: int):
    """Dataset for one repetition: ``(X, Y)`` or ``(X, model)`` for goodness-of-fit."""
    rng = np.random.default_rng([seed, 0])
    if plan.problem == "two_sample":
        spec = PerturbedUniformSpec.random_signs(plan.d, plan.P, plan.S, rng) if not math.isinf(plan.S) else PerturbedUniformSpec.uniform(plan.d)
        X = rng.random((plan.N, plan.d))
        Y = sample_perturbed_uniform(spec, plan.N, rng)
        return X, Y
    if plan.problem == "independence":
        dim = plan.d_x + plan.d_y
        spec = PerturbedUniformSpec.random_signs(dim, plan.P, plan.S, rng) if not math.isinf(plan.S) else PerturbedUniformSpec.uniform(dim)
        Z = sample_independence_pair(spec, plan.d_x, plan.d_y, plan.N, rng)
        return Z[:, : plan.d_x], Z[:, plan.d_x :]
    p = GBRBMSpec.random(plan.d_x, plan.d_h, rng)
    q = p.perturbed(plan.sigma, rng)
    X = gbrbm_sample(q, plan.N, rng, plan.burn_in, plan.thinning)
    return X, p.score_model()


def build_test(plan: ExperimentPlan, design_kwargs: dict, seed: int):
    common = dict(alpha=plan.config.alpha, B1=plan.config.B1, B2=plan.config.B2, B3=plan.config.B3,
                  collection=plan.collection, seed=seed, **design_kwargs)
    if plan.problem == "two_sample":
        return MMDAggInc(**common)
    if plan.problem == "independence":
        return HSICAggInc(**common)
    return KSDAggInc(**common)


def run_repetition(plan: ExperimentPlan, design_kwargs: dict, rep: int):
    """One dataset, one test.  Returns ``(reject, runtime_seconds, l_used)``.

    The runtime covers the whole test call (bandwidth selection, h-value
    cache, both bootstrap families, correction) but not data generation.
    """
    seed = repetition_seed(plan.master_seed, rep)
    a, b = generate_data(plan, seed)
    test = build_test(plan, design_kwargs, seed)
    if plan.problem == "goodness_of_fit":
        test.set_params(score_model=b)
        t0 = time.perf_counter()
        test.fit(a)
    else:
        t0 = time.perf_counter()
        test.fit(a, b)
    elapsed = time.perf_counter() - t0
    return bool(test.reject_), elapsed, int(test.result_.l_used)


@dataclass
class ResultRow:
    label: str
    sweep_value: float
    rejection_rate: float
    mean_runtime: float
    l_used: int
    repetitions: int
    decisions: str  # one 0/1 character per repetition, in repetition order


@dataclass
class ResultTable:
    sweep_variable: str
    master_seed: int
    rows: list[ResultRow]
    plan: dict = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, ResultTable):
            return NotImplemented
        return (self.sweep_variable, self.master_seed, self.rows) == (other.sweep_variable, other.master_seed, other.rows)

    def labels(self) -> list[str]:
        return list(dict.fromkeys(r.label for r in self.rows))

    def series(self, label: str):
        rows = [r for r in self.rows if r.label == label]
        return [r.sweep_value for r in rows], [r.rejection_rate for r in rows]

    def rate(self, label: str, value) -> float:
        for r in self.rows:
            if r.label == label and r.sweep_value == value:
                return r.rejection_rate
        raise KeyError((label, value))

    def runtime(self, label: str, value) -> float:
        for r in self.rows:
            if r.label == label and r.sweep_value == value:
                return r.mean_runtime
        raise KeyError((label, value))


def _tasks(plan: ExperimentPlan):
    for value in plan.values:
        sub = _apply_sweep(plan, value)
        if plan.sweep == "R":
            configs = [(f"R={int(value)}", {"design": "subdiagonal", "R": int(value)})]
        else:
            configs = [(label, parse_design(label)) for label in plan.designs]
        for label, kwargs in configs:
            yield label, value, sub, kwargs


def run_experiment(plan: ExperimentPlan, jobs: int = 1, progress=None) -> ResultTable:
    """Run every (configuration, sweep value, repetition) and tabulate rejection rates."""
    from joblib import Parallel, delayed

    if not plan.config.theory_bounds_met([0.25]):
        logger.info("B1/B2/B3 are below the sizes assumed by the power guarantee; level is unaffected")
    tasks = list(_tasks(plan))
    rows = []
    for label, value, sub, kwargs in tasks:
        try:
            results = Parallel(n_jobs=jobs)(
                delayed(run_repetition)(sub, kwargs, rep) for rep in range(plan.repetitions)
            )
        except (InputError, ConfigError) as exc:
            raise type(exc)(f"{label}, {plan.sweep}={value}: {exc}") from exc
        decisions = "".join("1" if r[0] else "0" for r in results)
        rows.append(
            ResultRow(
                label=label,
                sweep_value=float(value),
                rejection_rate=decisions.count("1") / len(decisions),
                mean_runtime=float(np.mean([r[1] for r in results])),
                l_used=results[0][2],
                repetitions=plan.repetitions,
                decisions=decisions,
            )
        )
        if progress:
            progress(rows[-1])
    return ResultTable(plan.sweep, plan.master_seed, rows, plan.to_dict())


# --------------------------------------------------------------------------
# outputs

CSV_COLUMNS = ("label", "sweep_variable", "sweep_value", "rejection_rate", "mean_runtime", "l_used",
               "repetitions", "master_seed", "decisions")


def table_to_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in table.rows:
        w.writerow([r.label, table.sweep_variable, repr(r.sweep_value), repr(r.rejection_rate),
                    repr(r.mean_runtime), r.l_used, r.repetitions, table.master_seed, r.decisions])
    return buf.getvalue()


def table_from_csv(text: str) -> ResultTable:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise InputError(f"unexpected CSV columns {reader.fieldnames}")
    rows, sweep, seed = [], "", 0
    for rec in reader:
        sweep, seed = rec["sweep_variable"], int(rec["master_seed"])
        rows.append(ResultRow(rec["label"], float(rec["sweep_value"]), float(rec["rejection_rate"]),
                              float(rec["mean_runtime"]), int(rec["l_used"]), int(rec["repetitions"]),
                              rec["decisions"]))
    return ResultTable(sweep, seed, rows)


def table_to_json(table: ResultTable) -> str:
    import scipy
    import sklearn

    from . import __version__

    payload = {
        "sweep_variable": table.sweep_variable,
        "master_seed": table.master_seed,
        "plan": table.plan,
        "rows": [asdict(r) for r in table.rows],
        "versions": {
            "incagg": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "scikit-learn": sklearn.__version__,
        },
    }
    return json.dumps(payload, indent=2)


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def table_to_svg(table: ResultTable, width: int = 480, height: int = 320) -> str:
    """Line chart of rejection rate against the sweep value, one polyline per label."""
    left, right, top, bottom = 56, 120, 20, 44
    pw, ph = width - left - right, height - top - bottom
    xs = sorted({r.sweep_value for r in table.rows})
    x0, x1 = xs[0], xs[-1]
    span = (x1 - x0) or 1.0

    def px(v):
        return left + (v - x0) / span * pw if len(xs) > 1 else left + pw / 2

    def py(rate):
        return top + (1.0 - rate) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = py(tick)
        parts.append(f'<line x1="{left - 4}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="#444"/>')
        parts.append(f'<text x="{left - 8}" y="{y + 4:.1f}" font-size="11" text-anchor="end">{tick:g}</text>')
    for v in xs:
        x = px(v)
        parts.append(f'<text x="{x:.1f}" y="{top + ph + 16}" font-size="11" text-anchor="middle">{v:g}</text>')
    parts.append(f'<text x="{left + pw / 2:.1f}" y="{height - 8}" font-size="12" text-anchor="middle">{escape(table.sweep_variable)}</text>')
    parts.append(f'<text x="14" y="{top + ph / 2:.1f}" font-size="12" text-anchor="middle" '
                 f'transform="rotate(-90 14 {top + ph / 2:.1f})">rejection rate</text>')
    for k, label in enumerate(table.labels()):
        colour = _PALETTE[k % len(_PALETTE)]
        vals, rates = table.series(label)
        pts = " ".join(f"{px(v):.1f},{py(r):.1f}" for v, r in zip(vals, rates))
        parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="2" points="{pts}"/>')
        ly = top + 14 + 18 * k
        parts.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 30}" y2="{ly - 4}" stroke="{colour}" stroke-width="2"/>')
        parts.append(f'<text x="{left + pw + 34}" y="{ly}" font-size="11">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_outputs(table: ResultTable, csv_path=None, json_path=None, svg_path=None) -> None:
    for path, render in ((csv_path, table_to_csv), (json_path, table_to_json), (svg_path, table_to_svg)):
        if path:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(render(table))
