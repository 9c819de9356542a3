"""Configuration-driven sweeps over blocklength, key schedule and partition seed."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adversary import CSV_COLUMNS, DEFAULT_MESSAGE_CAP, OBSERVE_MODES, expected_adversary_distortion
from .codebook import DEFAULT_TYPE_CAP_N, build_partition
from .core import DistortionMeasure, SourceDistribution, dmax
from .typemethod import DEFAULT_CLASS_CAP, CapExceeded

log = logging.getLogger(__name__)

WORKERS_ENV = "CIPHERLAB_WORKERS"
SWEEP_COLUMNS = CSV_COLUMNS + ("schedule",)
DEFAULT_K_GRID = (1, 2, 4, 8, 16, 32, 64, 128, 256)

SCHEDULE_KINDS = ("constant", "log2", "linear", "exponential")
# whether the key space grows without bound, and how fast
SCHEDULE_STATUS = {
    "constant": "bounded key space",
    "log2": "unbounded, sub-exponential key space",
    "linear": "unbounded, sub-exponential key space",
    "exponential": "exponential key space (positive key rate)",
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class KeySchedule:
    kind: str
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ConfigError(f"unknown key schedule {self.kind!r}; choose from {SCHEDULE_KINDS}")
        if self.value <= 0:
            raise ConfigError(f"schedule parameter must be positive, got {self.value}")
        if self.kind == "constant" and self.value != int(self.value):
            raise ConfigError("a constant schedule needs an integer key count")

    @classmethod
    def parse(cls, spec) -> "KeySchedule":
        """Accept ``"linear:1"``, ``"log2"``, ``{"kind": "constant", "value": 16}``."""
        if isinstance(spec, KeySchedule):
            return spec
        if isinstance(spec, dict):
            try:
                return cls(spec["kind"], float(spec.get("value", 1.0)))
            except KeyError:
                raise ConfigError(f"schedule needs a 'kind': {spec!r}") from None
        if isinstance(spec, str):
            kind, _, value = spec.partition(":")
            try:
                return cls(kind.strip(), float(value) if value else 1.0)
            except ValueError as e:
                raise ConfigError(str(e)) from None
        raise ConfigError(f"cannot parse key schedule {spec!r}")

    def keys(self, n: int) -> int:
        if self.kind == "constant":
            return int(self.value)
        if self.kind == "log2":
            return max(1, math.ceil(self.value * math.log2(n)))
        if self.kind == "linear":
            return max(1, round(self.value * n))
        return max(1, math.ceil(2 ** (n * self.value)))

    @property
    def label(self) -> str:
        if self.kind == "log2" and self.value == 1.0:
            return "log2"
        return f"{self.kind}:{self.value:g}"

    @property
    def status(self) -> str:
        return SCHEDULE_STATUS[self.kind]


@dataclass
class ExperimentConfig:
    source: list[float]
    distortion: object = "hamming"
    n: list[int] = field(default_factory=lambda: [4, 8])
    schedules: list[KeySchedule] = field(default_factory=lambda: [KeySchedule("linear")])
    epsilon: float = 0.2
    seeds: list[int] = field(default_factory=lambda: [0])
    engine: str = "auto"
    observe: str = "full_message"
    mc_trials: int = 20000
    master_seed: int = 0
    type_cap_n: int = DEFAULT_TYPE_CAP_N
    class_cap: int = DEFAULT_CLASS_CAP
    message_cap: int = DEFAULT_MESSAGE_CAP
    k_grid: list[int] = field(default_factory=lambda: list(DEFAULT_K_GRID))
    workers: int | None = None

    def __post_init__(self):
        try:
            self.P = SourceDistribution(self.source)
            if isinstance(self.distortion, str):
                if self.distortion != "hamming":
                    raise ConfigError(f"unknown named distortion {self.distortion!r}")
                self.d = DistortionMeasure.hamming(self.P.size)
            else:
                self.d = DistortionMeasure(self.distortion)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if self.d.source_size != self.P.size:
            raise ConfigError("distortion matrix rows must match the source alphabet")
        self.schedules = [KeySchedule.parse(s) for s in self.schedules]
        if not self.n or any(int(v) < 1 for v in self.n):
            raise ConfigError("n must be a nonempty list of positive blocklengths")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if self.engine not in ("auto", "exact", "monte_carlo"):
            raise ConfigError(f"unknown engine {self.engine!r}")
        if self.observe not in OBSERVE_MODES:
            raise ConfigError(f"unknown observe mode {self.observe!r}")
        if self.mc_trials < 1:
            raise ConfigError("mc_trials must be positive")
        if not (self.epsilon > 0):
            raise ConfigError("epsilon must be positive")
        if list(self.k_grid) != sorted(self.k_grid) or any(k < 1 for k in self.k_grid):
            raise ConfigError("k_grid must be ascending positive integers")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        if "schedule" in raw:
            sched = raw.pop("schedule")
            raw["schedules"] = sched if isinstance(sched, list) else [sched]
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "source" not in raw:
            raise ConfigError("config needs a 'source' probability list")
        if isinstance(raw.get("n"), int):
            raw["n"] = [raw["n"]]
        if isinstance(raw.get("seeds"), int):
            raw["seeds"] = list(range(raw["seeds"]))
        try:
            return cls(**raw)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    def to_dict(self) -> dict:
        return {
            "source": self.P.probs.tolist(),
            "distortion": self.distortion if isinstance(self.distortion, str) else self.d.matrix.tolist(),
            "n": list(self.n),
            "schedules": [s.label for s in self.schedules],
            "epsilon": self.epsilon,
            "seeds": list(self.seeds),
            "engine": self.engine,
            "observe": self.observe,
            "mc_trials": self.mc_trials,
            "master_seed": self.master_seed,
            "type_cap_n": self.type_cap_n,
            "class_cap": self.class_cap,
            "message_cap": self.message_cap,
            "k_grid": list(self.k_grid),
        }


def parse_config_text(text: str) -> dict:
    """JSON document, or flat ``key = value`` lines whose values are JSON or bare strings."""
    text = text.strip()
    if text.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"bad JSON config: {e}") from None
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            key, sep, value = line.partition(":")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        value = value.strip()
        try:
            out[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            out[key.strip()] = value
    return out


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return ExperimentConfig.from_dict(parse_config_text(text))


def cell_specs(cfg: ExperimentConfig, schedules=None, ns=None) -> list[dict]:
    """Self-contained, JSON-serializable description of every sweep cell."""
    base = cfg.to_dict()
    shared = {key: base[key] for key in (
        "source", "distortion", "epsilon", "engine", "observe", "mc_trials",
        "master_seed", "type_cap_n", "class_cap", "message_cap")}
    cells = []
    for sched in schedules or cfg.schedules:
        for n in ns or cfg.n:
            for seed in cfg.seeds:
                cells.append(dict(shared, n=int(n), k=sched.keys(int(n)), seed=int(seed),
                                  schedule=sched.label, schedule_status=sched.status))
    return cells


def run_cell(cell: dict, with_header: bool = False):
    """Run one cell; the returned row depends only on ``cell``.

    With ``with_header`` the codebook header is returned alongside the row.
    """
    P = SourceDistribution(cell["source"])
    d = DistortionMeasure.hamming(P.size) if cell["distortion"] == "hamming" else DistortionMeasure(cell["distortion"])
    cb = build_partition(P, cell["n"], cell["epsilon"], cell["k"], cell["seed"],
                         class_cap=cell["class_cap"], type_cap_n=cell["type_cap_n"])
    engine = cell["engine"]
    if engine == "auto":
        engine = "exact" if cb.message_count <= cell["message_cap"] else "monte_carlo"
    if engine == "exact":
        report = expected_adversary_distortion(cb, P, d, "exact", cell["observe"],
                                               message_cap=cell["message_cap"])
    else:
        rng = np.random.default_rng([cell["master_seed"], cell["seed"], cell["n"], cell["k"]])
        report = expected_adversary_distortion(cb, P, d, "monte_carlo", cell["observe"],
                                               trials=cell["mc_trials"], rng=rng)
    row = report.csv_row()
    row["schedule"] = cell["schedule"]
    return (row, cb.header()) if with_header else row


def _safe_run(cell: dict):
    try:
        return run_cell(cell, with_header=True), None
    except (CapExceeded, MemoryError, ValueError) as e:
        return None, f"{type(e).__name__}: {e}"


def resolve_workers(cfg: ExperimentConfig | None = None) -> int:
    if cfg is not None and cfg.workers:
        return int(cfg.workers)
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


@dataclass
class SweepResult:
    rows: list[dict]
    cells: list[dict]
    errors: list[tuple[dict, str]] = field(default_factory=list)
    headers: list[dict] = field(default_factory=list)

    def aggregate(self) -> list[dict]:
        """Seed mean and seed minimum of the distortion for each (schedule, n, k)."""
        groups: dict = {}
        for r in self.rows:
            groups.setdefault((r["schedule"], r["n"], r["k"]), []).append(r["distortion"])
        return [
            {"schedule": s, "n": n, "k": k, "mean": float(np.mean(v)), "min": float(np.min(v)), "seeds": len(v)}
            for (s, n, k), v in groups.items()
        ]

    def write_csv(self, path) -> None:
        write_rows(self.rows, path)

    def write_manifest(self, path) -> None:
        """One JSON line per successful row: the cell spec that reproduces it and its codebook header."""
        with open(path, "w") as fh:
            for cell, row, header in zip(self.cells, self.rows, self.headers):
                fh.write(json.dumps({"cell": cell, "codebook": header, "row": row}) + "\n")


def run_cells(cells: list[dict], workers: int = 1) -> list[tuple[dict | None, str | None]]:
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_safe_run, cells))
    return [_safe_run(c) for c in cells]


def run_sweep(cfg: ExperimentConfig, workers: int | None = None) -> SweepResult:
    cells = cell_specs(cfg)
    workers = workers or resolve_workers(cfg)
    rows, ok_cells, errors, headers = [], [], [], []
    for cell, (out, err) in zip(cells, run_cells(cells, workers)):
        if err is not None:
            log.warning("cell n=%s k=%s seed=%s failed: %s", cell["n"], cell["k"], cell["seed"], err)
            errors.append((cell, err))
        else:
            rows.append(out[0])
            headers.append(out[1])
            ok_cells.append(cell)
    return SweepResult(rows, ok_cells, errors, headers)


def write_rows(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: r.get(c, "") for c in SWEEP_COLUMNS})


def read_rows(path) -> list[dict]:
    ints = {"n", "k"}
    floats = {"distortion", "stderr", "dmax", "gap", "p_err", "rate", "epsilon"}
    rows = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            for c in ints & r.keys():
                r[c] = int(r[c])
            for c in floats & r.keys():
                r[c] = float(r[c]) if r[c] not in ("", "None") else None
            rows.append(r)
    return rows


def find_min_key(cfg: ExperimentConfig, n: int, target: float, k_grid=None, workers: int | None = None):
    """Smallest key count on the grid whose seed-averaged distortion reaches ``target``.

    Returns ``None`` when the grid is exhausted. Targets at or above the
    distortion of a source-only guesser are unreachable and rejected.
    """
    _, dm = dmax(cfg.P, cfg.d)
    if target >= dm:
        raise ConfigError(
            f"target {target} is not below D_max={dm:g}; no key size can push the optimal "
            "eavesdropper past the distortion of guessing from the source alone")
    grid = list(k_grid or cfg.k_grid)
    if grid != sorted(grid):
        raise ConfigError("k_grid must be ascending")
    workers = workers or resolve_workers(cfg)
    for k in grid:
        sched = KeySchedule("constant", k)
        results = run_cells(cell_specs(cfg, [sched], [n]), workers)
        errs = [e for _, e in results if e is not None]
        if errs:
            raise CapExceeded(errs[0])
        mean = float(np.mean([out[0]["distortion"] for out, _ in results]))
        log.info("n=%d k=%d mean distortion %.6f", n, k, mean)
        if mean >= target:
            return k
    return None


def emit_plots(rows: list[dict], out_path) -> list[Path]:
    """Static SVG charts: distortion against n per schedule, and against k at a fixed n.

    The second chart is written next to ``out_path`` with a ``_vs_k`` suffix
    only when some blocklength was run with several key counts.
    """
    if not rows:
        raise ValueError("no result rows to plot")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_path = Path(out_path)
    dm = max(float(r["dmax"]) for r in rows)
    top = dm * 1.05 if dm > 0 else 1.0
    written = []

    groups: dict = {}
    for r in rows:
        groups.setdefault(r.get("schedule") or f"k={r['k']}", {}).setdefault(r["n"], []).append(float(r["distortion"]))
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, by_n in groups.items():
        ns = sorted(by_n)
        ax.plot(ns, [np.mean(by_n[n]) for n in ns], marker="o", label=label)
    ax.axhline(dm, color="k", linestyle="--", linewidth=1, label="D_max")
    ax.set_ylim(0, top)
    ax.set_xlabel("blocklength n")
    ax.set_ylabel("optimal eavesdropper distortion")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, format="svg")
    plt.close(fig)
    written.append(out_path)

    by_n_k: dict = {}
    for r in rows:
        by_n_k.setdefault(r["n"], {}).setdefault(r["k"], []).append(float(r["distortion"]))
    multi = [n for n, ks in by_n_k.items() if len(ks) > 1]
    if multi:
        n = max(multi)
        ks = sorted(by_n_k[n])
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(ks, [np.mean(by_n_k[n][k]) for k in ks], marker="o", label=f"n={n}")
        ax.axhline(dm, color="k", linestyle="--", linewidth=1, label="D_max")
        ax.set_xscale("log", base=2)
        ax.set_ylim(0, top)
        ax.set_xlabel("number of keys k")
        ax.set_ylabel("optimal eavesdropper distortion")
        ax.legend()
        fig.tight_layout()
        k_path = out_path.with_name(out_path.stem + "_vs_k" + out_path.suffix)
        fig.savefig(k_path, format="svg")
        plt.close(fig)
        written.append(k_path)
    return written
