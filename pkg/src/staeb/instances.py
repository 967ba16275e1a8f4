"""Synthetic instance generation, trip-log ingestion and JSON persistence."""

from __future__ import annotations

import csv
import json
import logging
import math
import random
import warnings
from dataclasses import dataclass, replace
from decimal import Decimal
from importlib import resources
from pathlib import Path

from staeb.model import Instance, Params, Point, SkillCatalog, StaebError, Task, Worker, as_decimal

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DAY_SECONDS = 86400.0


class SchemaError(StaebError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class IngestError(StaebError):
    pass


@dataclass(frozen=True)
class GenConfig:
    num_tasks: int = 1000
    num_workers: int = 3000
    num_skills: int = 12
    fixed_radius: float = 1000.0
    extra_budget_range: tuple[float, float] = (800.0, 1000.0)
    bounding_box: tuple[float, float, float, float] = (0.0, 0.0, 10_000.0, 10_000.0)
    fee_range: tuple[int, int] = (10, 50)
    skills_per_task_range: tuple[int, int] = (1, 4)
    skills_per_worker_range: tuple[int, int] = (1, 3)
    alpha: Decimal = Decimal("0.5")
    beta: Decimal = Decimal("0.01")
    money_scale: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.num_tasks < 0 or self.num_workers < 0:
            raise ValueError("num_tasks and num_workers must be non-negative")
        if self.num_skills < 1:
            raise ValueError("num_skills must be positive")
        if self.fixed_radius < 0:
            raise ValueError("fixed_radius must be non-negative")
        _ordered("extra_budget_range", self.extra_budget_range, low=0)
        _ordered("fee_range", self.fee_range, low=1e-12)
        _ordered("skills_per_task_range", self.skills_per_task_range, low=1)
        _ordered("skills_per_worker_range", self.skills_per_worker_range, low=1)
        x0, y0, x1, y1 = self.bounding_box
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"degenerate bounding box {self.bounding_box}")
        self.params()

    def params(self) -> Params:
        return Params(self.alpha, self.beta, self.money_scale)

    def with_(self, **changes) -> "GenConfig":
        return replace(self, **changes)


def _ordered(name, pair, low):
    lo, hi = pair
    if lo > hi or lo < low:
        raise ValueError(f"{name} must be an ordered pair with lower bound >= {low}, got {pair}")


def _skill_ids(n: int) -> list[str]:
    width = len(str(n))
    return [f"s{i:0{width}d}" for i in range(1, n + 1)]


def _ids(prefix: str, n: int) -> list[str]:
    width = max(4, len(str(n)))
    return [f"{prefix}{i:0{width}d}" for i in range(1, n + 1)]


def _draw_catalog(rng: random.Random, num_skills: int, fee_range) -> SkillCatalog:
    lo, hi = fee_range
    return SkillCatalog({s: rng.randint(int(lo), int(hi)) for s in _skill_ids(num_skills)})


def _draw_skills(rng: random.Random, skills: list[str], size_range) -> frozenset:
    lo, hi = size_range
    hi = min(hi, len(skills))
    lo = min(lo, hi)
    return frozenset(rng.sample(skills, rng.randint(lo, hi)))


def generate_instance(cfg: GenConfig) -> Instance:
    """Uniform random instance; identical configs give identical instances."""
    rng = random.Random(cfg.seed)
    catalog = _draw_catalog(rng, cfg.num_skills, cfg.fee_range)
    skills = catalog.skills
    x0, y0, x1, y1 = cfg.bounding_box
    b_lo, b_hi = cfg.extra_budget_range

    def where():
        return Point(round(rng.uniform(x0, x1), 2), round(rng.uniform(y0, y1), 2))

    tasks = []
    for tid in _ids("t", cfg.num_tasks):
        loc = where()
        arrival = round(rng.uniform(0, DAY_SECONDS), 3) % DAY_SECONDS
        budget = round(rng.uniform(b_lo, b_hi), 2)
        tasks.append(Task(tid, loc, arrival, float(cfg.fixed_radius), budget, _draw_skills(rng, skills, cfg.skills_per_task_range)))
    workers = []
    for wid in _ids("w", cfg.num_workers):
        loc = where()
        arrival = round(rng.uniform(0, DAY_SECONDS), 3) % DAY_SECONDS
        workers.append(Worker(wid, loc, arrival, _draw_skills(rng, skills, cfg.skills_per_worker_range)))
    return Instance(catalog, tuple(tasks), tuple(workers), cfg.params(), (Point(x0, y0), Point(x1, y1)))


# -- trip logs -------------------------------------------------------------

TRIP_COLUMNS = ("pickup_x", "pickup_y", "pickup_time", "dropoff_x", "dropoff_y", "dropoff_time")


@dataclass(frozen=True)
class IngestConfig:
    num_skills: int = 12
    fee_range: tuple[int, int] = (10, 50)
    skills_per_task_range: tuple[int, int] = (1, 4)
    skills_per_worker_range: tuple[int, int] = (1, 3)
    fixed_radius: float = 1000.0
    extra_budget_range: tuple[float, float] = (800.0, 1000.0)
    alpha: Decimal = Decimal("0.5")
    beta: Decimal = Decimal("0.01")
    money_scale: int = 1000
    seed: int = 0


@dataclass(frozen=True)
class IngestResult:
    instance: Instance
    skipped: int


def ingest_trips(records, cfg: IngestConfig = IngestConfig()) -> IngestResult:
    """Build an instance from trip records in projected meter coordinates.

    ``records`` is a path, an open text stream, or an iterable of CSV lines.
    Each trip yields a task at its pickup and a worker at its drop-off; skills,
    fees and budgets are drawn with ``cfg.seed`` because trip logs carry none.
    """
    if isinstance(records, (str, Path)):
        with open(records, newline="") as fh:
            return ingest_trips(fh, cfg)
    reader = csv.DictReader(records)
    header = reader.fieldnames
    if not header:
        raise IngestError("trip stream is empty")
    missing = [c for c in TRIP_COLUMNS if c not in header]
    if missing:
        raise IngestError(f"trip header lacks columns {missing}")
    rows, skipped = [], 0
    for lineno, row in enumerate(reader, start=2):
        try:
            vals = [float(row[c]) for c in TRIP_COLUMNS]
            if not all(math.isfinite(v) for v in vals):
                raise ValueError("non-finite value")
        except (TypeError, ValueError) as exc:
            skipped += 1
            log.warning("skipping malformed trip row %d: %s", lineno, exc)
            continue
        rows.append(vals)
    if not rows:
        raise IngestError(f"no well-formed trip rows ({skipped} malformed)")

    rng = random.Random(cfg.seed)
    catalog = _draw_catalog(rng, cfg.num_skills, cfg.fee_range)
    skills = catalog.skills
    b_lo, b_hi = cfg.extra_budget_range
    tasks, workers = [], []
    for (px, py, pt, dx, dy, dt), tid, wid in zip(rows, _ids("t", len(rows)), _ids("w", len(rows))):
        budget = round(rng.uniform(b_lo, b_hi), 2)
        tasks.append(Task(tid, Point(px, py), pt, float(cfg.fixed_radius), budget, _draw_skills(rng, skills, cfg.skills_per_task_range)))
        workers.append(Worker(wid, Point(dx, dy), dt, _draw_skills(rng, skills, cfg.skills_per_worker_range)))
    params = Params(cfg.alpha, cfg.beta, cfg.money_scale)
    return IngestResult(Instance(catalog, tuple(tasks), tuple(workers), params), skipped)


# -- persistence -------------------------------------------------------------


def _num(value):
    if isinstance(value, Decimal):
        return int(value) if value == value.to_integral_value() else float(value)
    return value


def instance_to_dict(instance: Instance) -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "catalog": {s: _num(f) for s, f in instance.catalog.fees.items()},
        "params": {
            "alpha": _num(instance.params.alpha),
            "beta": _num(instance.params.beta),
            "money_scale": instance.params.money_scale,
        },
        "tasks": [
            {
                "id": t.id,
                "x": t.location.x,
                "y": t.location.y,
                "arrival": t.arrival_time,
                "r": t.fixed_radius,
                "b": t.extra_budget,
                "skills": sorted(t.required_skills),
            }
            for t in instance.tasks
        ],
        "workers": [
            {
                "id": w.id,
                "x": w.location.x,
                "y": w.location.y,
                "arrival": w.arrival_time,
                "skills": sorted(w.skills),
            }
            for w in instance.workers
        ],
    }
    if instance.bounding_box is not None:
        lo, hi = instance.bounding_box
        out["bounding_box"] = [lo.x, lo.y, hi.x, hi.y]
    return out


def dumps_instance(instance: Instance) -> str:
    return json.dumps(instance_to_dict(instance), sort_keys=True, indent=1) + "\n"


def save_instance(instance: Instance, path) -> None:
    Path(path).write_text(dumps_instance(instance))


class _Reader:
    """Pulls typed fields out of parsed JSON, naming the path on failure."""

    def __init__(self):
        self.unknown: list[str] = []

    def obj(self, data, path, required, optional=()):
        if not isinstance(data, dict):
            raise SchemaError(path, "expected an object")
        for key in required:
            if key not in data:
                raise SchemaError(f"{path}.{key}", "required field is missing")
        for key in data:
            if key not in required and key not in optional:
                self.unknown.append(f"{path}.{key}")
        return data

    def number(self, data, key, path):
        value = data[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"{path}.{key}", f"expected a number, got {value!r}")
        if not math.isfinite(value):
            raise SchemaError(f"{path}.{key}", "expected a finite number")
        return value

    def string(self, data, key, path):
        value = data[key]
        if not isinstance(value, str):
            raise SchemaError(f"{path}.{key}", f"expected a string, got {value!r}")
        return value

    def skills(self, data, key, path):
        value = data[key]
        if not isinstance(value, list) or not all(isinstance(s, str) for s in value):
            raise SchemaError(f"{path}.{key}", "expected a list of skill ids")
        return frozenset(value)


def instance_from_dict(data) -> Instance:
    rd = _Reader()
    rd.obj(data, "$", ("schema_version", "catalog", "params", "tasks", "workers"), ("bounding_box",))
    if data["schema_version"] != SCHEMA_VERSION:
        raise SchemaError("$.schema_version", f"unsupported version {data['schema_version']!r}")
    catalog_data = data["catalog"]
    if not isinstance(catalog_data, dict):
        raise SchemaError("$.catalog", "expected an object of skill -> fee")
    fees = {}
    for skill in catalog_data:
        fees[skill] = as_decimal(rd.number(catalog_data, skill, "$.catalog"))
    pd = rd.obj(data["params"], "$.params", ("alpha", "beta", "money_scale"))
    try:
        params = Params(rd.number(pd, "alpha", "$.params"), rd.number(pd, "beta", "$.params"), rd.number(pd, "money_scale", "$.params"))
        catalog = SkillCatalog(fees)
    except ValueError as exc:
        raise SchemaError("$.params" if "fee" not in str(exc) else "$.catalog", str(exc)) from None

    if not isinstance(data["tasks"], list):
        raise SchemaError("$.tasks", "expected a list")
    if not isinstance(data["workers"], list):
        raise SchemaError("$.workers", "expected a list")
    tasks = []
    for i, td in enumerate(data["tasks"]):
        path = f"$.tasks[{i}]"
        rd.obj(td, path, ("id", "x", "y", "arrival", "r", "b", "skills"))
        try:
            tasks.append(
                Task(
                    rd.string(td, "id", path),
                    Point(rd.number(td, "x", path), rd.number(td, "y", path)),
                    rd.number(td, "arrival", path),
                    rd.number(td, "r", path),
                    rd.number(td, "b", path),
                    rd.skills(td, "skills", path),
                )
            )
        except ValueError as exc:
            raise SchemaError(path, str(exc)) from None
    workers = []
    for i, wd in enumerate(data["workers"]):
        path = f"$.workers[{i}]"
        rd.obj(wd, path, ("id", "x", "y", "arrival", "skills"))
        try:
            workers.append(
                Worker(
                    rd.string(wd, "id", path),
                    Point(rd.number(wd, "x", path), rd.number(wd, "y", path)),
                    rd.number(wd, "arrival", path),
                    rd.skills(wd, "skills", path),
                )
            )
        except ValueError as exc:
            raise SchemaError(path, str(exc)) from None
    box = None
    if "bounding_box" in data:
        bb = data["bounding_box"]
        if not (isinstance(bb, list) and len(bb) == 4 and all(isinstance(v, (int, float)) for v in bb)):
            raise SchemaError("$.bounding_box", "expected [x0, y0, x1, y1]")
        box = (Point(bb[0], bb[1]), Point(bb[2], bb[3]))
    if rd.unknown:
        warnings.warn(f"ignoring unknown instance fields: {', '.join(rd.unknown)}", stacklevel=3)
    try:
        return Instance(catalog, tuple(tasks), tuple(workers), params, box)
    except ValueError as exc:
        raise SchemaError("$", str(exc)) from None


def loads_instance(text: str) -> Instance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"not valid JSON: {exc}") from None
    return instance_from_dict(data)


def load_instance(path) -> Instance:
    return loads_instance(Path(path).read_text())


def canonical_instance() -> Instance:
    """The small hand-checked instance shipped with the package."""
    text = resources.files("staeb").joinpath("data/i0.json").read_text()
    return loads_instance(text)
