"""Run configuration and on-disk formats.

Output layout for a run directory ``out/``::

    {model}_{diagnostic}.csv   N,strength,mean,stderr,count,exclusions
    {model}_summary.csv        per-point realization and tally counts
    {model}_sff_N{N}_s{strength}.csv        t,mean,stderr
    {model}_ratio_hist_N{N}_s{strength}.csv bin_lo,bin_hi,count
    {model}_run.json           provenance: config, version, seed
    checkpoints/               one JSON file per completed grid point

CSV files use commas, ``.`` decimals, a header row and LF line endings.
Floats are written with 17 significant digits so they read back exactly.
Entropies are natural-log values (nats).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .diagnostics import WindowPolicy
from .ensemble import DIAGNOSTICS, MODELS, SCALARS, AggregateRecord, Stat, SweepPlan


class ConfigError(ValueError):
    """Invalid run configuration; ``line`` points into the config file when known."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


@dataclass
class RunConfig:
    model: str = "xxz_loss"
    n_sites: list[int] = field(default_factory=lambda: [8])
    strengths: list[float] = field(default_factory=lambda: [1.0])
    realizations: int = 100
    master_seed: int = 0
    J: float = 1.0
    Delta: float = 1.0
    g: float = 0.1
    value_window_fraction: float = 0.1
    vector_window_fraction: float = 0.1
    window_min_size: int = 20
    t_min: float = 0.1
    t_max_factor: float = 100.0
    n_times: int = 400
    sff: bool = True
    ratios: bool = True
    ipr: bool = True
    entropy: bool = True
    complex_ratios: bool = False
    eigenvectors: bool = False
    output: str = "results"
    threads: int = 1

    def validate(self, lines: dict[str, int] | None = None, path: str | None = None) -> "RunConfig":
        lines = lines or {}

        def fail(key, msg):
            raise ConfigError(msg, lines.get(key), path)

        if self.model not in MODELS:
            fail("model", f"model must be one of {', '.join(MODELS)}, got {self.model!r}")
        if not self.n_sites:
            fail("n_sites", "n_sites must not be empty")
        for n in self.n_sites:
            if n < 2 or n % 2 or n > 20:
                fail("n_sites", f"n_sites must be even and in [2, 20], got {n}")
        if not self.strengths:
            fail("strengths", "strengths must not be empty")
        if any(s < 0 or not math.isfinite(s) for s in self.strengths):
            fail("strengths", "strengths must be finite and non-negative")
        if self.realizations < 1:
            fail("realizations", "realizations must be >= 1")
        if self.master_seed < 0 or self.master_seed >= 2 ** 64:
            fail("master_seed", "master_seed must be an unsigned 64-bit integer")
        if self.J <= 0:
            fail("J", "J must be positive")
        for key in ("value_window_fraction", "vector_window_fraction"):
            if not 0 < getattr(self, key) <= 1:
                fail(key, f"{key} must be in (0, 1]")
        if self.window_min_size < 1:
            fail("window_min_size", "window_min_size must be >= 1")
        if self.t_min <= 0 or self.t_max_factor <= 0 or self.n_times < 2:
            fail("t_min", "time grid needs t_min > 0, t_max_factor > 0, n_times >= 2")
        if self.threads < 1:
            fail("threads", "threads must be >= 1")
        if not self.diagnostics():
            fail("sff", "at least one diagnostic must be enabled")
        return self

    def diagnostics(self) -> tuple[str, ...]:
        return tuple(d for d in DIAGNOSTICS if getattr(self, d))

    def to_plan(self) -> SweepPlan:
        return SweepPlan(
            model=self.model,
            n_sites=tuple(self.n_sites),
            strengths=tuple(self.strengths),
            realizations=self.realizations,
            master_seed=self.master_seed,
            J=self.J,
            Delta=self.Delta,
            g=self.g,
            value_window=WindowPolicy("smallest", self.value_window_fraction, self.window_min_size),
            vector_window=WindowPolicy("middle", self.vector_window_fraction, self.window_min_size),
            t_min=self.t_min,
            t_max_factor=self.t_max_factor,
            n_times=self.n_times,
            diagnostics=self.diagnostics(),
        )


_CONFIG_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value, line: int, path):
    kind = _CONFIG_TYPES[key]
    try:
        if kind == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError
            return value
        if kind == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError
            return float(value)
        if kind == "str":
            if not isinstance(value, str):
                raise TypeError
            return value
        if kind.startswith("list"):
            items = value if isinstance(value, list) else [value]
            inner = "int" if "int" in kind else "float"
            return [_coerce_scalar(inner, v) for v in items]
    except TypeError:
        pass
    raise ConfigError(f"{key}: expected {kind}, got {value!r}", line, path)


def _coerce_scalar(kind: str, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError
    if kind == "int":
        if isinstance(v, float) and not v.is_integer():
            raise TypeError
        return int(v)
    return float(v)


def parse_config(text: str, path: str | None = None) -> RunConfig:
    """Parse a flat YAML mapping whose keys mirror :class:`RunConfig` fields."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed config: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None, path) from None
    if root is None:
        return RunConfig().validate(path=path)
    if not isinstance(root, yaml.MappingNode):
        raise ConfigError("config must be a key: value mapping", root.start_mark.line + 1, path)

    loader = yaml.SafeLoader("")
    values, lines = {}, {}
    for key_node, value_node in root.value:
        line = key_node.start_mark.line + 1
        key = key_node.value
        if key not in _CONFIG_TYPES:
            raise ConfigError(f"unknown key {key!r}", line, path)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", line, path)
        if isinstance(value_node, yaml.MappingNode):
            raise ConfigError(f"{key}: nested mappings are not allowed", line, path)
        raw = loader.construct_object(value_node, deep=True)
        values[key] = _coerce(key, raw, line, path)
        lines[key] = line
    return RunConfig(**values).validate(lines, path)


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    return parse_config(p.read_text(), str(p))


# -- aggregates -------------------------------------------------------------

AGG_HEADER = ["N", "strength", "mean", "stderr", "count", "exclusions"]
SUMMARY_HEADER = ["N", "strength", "realizations", "count", "exclusions",
                  "degenerate_ratios", "skipped_complex"]
CURVE_HEADER = ["t", "mean", "stderr"]
HIST_HEADER = ["bin_lo", "bin_hi", "count"]


def _tag(strength: float) -> str:
    return format(float(strength), ".17g").replace("-", "m")


def write_csv(path: Path, header, rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def scalar_names(diagnostics) -> list[str]:
    return [s for d in diagnostics for s in SCALARS.get(d, ())]


def write_aggregates(records, out_dir, model: str, diagnostics=("sff", "ratios", "ipr", "entropy"),
                     config: RunConfig | None = None) -> list[Path]:
    """Write CSV tables, curve files and the provenance sidecar; return the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    good = [r for r in records if r.error is None]
    written = []
    for name in scalar_names(diagnostics):
        rows = []
        for r in good:
            st = r.stats.get(name)
            if st is not None:
                rows.append([fmt(r.n_sites), fmt(r.strength), fmt(st.mean), fmt(st.stderr),
                             fmt(st.count), fmt(r.exclusions)])
        path = out / f"{model}_{name}.csv"
        write_csv(path, AGG_HEADER, rows)
        written.append(path)

    path = out / f"{model}_summary.csv"
    write_csv(path, SUMMARY_HEADER, [
        [fmt(r.n_sites), fmt(r.strength), fmt(r.realizations), fmt(r.count),
         fmt(r.exclusions), fmt(r.degenerate_ratios), fmt(r.skipped_complex)]
        for r in good])
    written.append(path)

    for r in good:
        stem = f"N{r.n_sites}_s{_tag(r.strength)}"
        if r.sff_mean is not None:
            path = out / f"{model}_sff_{stem}.csv"
            write_csv(path, CURVE_HEADER, (
                [fmt(t), fmt(m), fmt(e)] for t, m, e in zip(r.sff_times, r.sff_mean, r.sff_stderr)))
            written.append(path)
        if r.ratio_hist is not None:
            edges = np.linspace(0.0, 1.0, len(r.ratio_hist) + 1)
            path = out / f"{model}_ratio_hist_{stem}.csv"
            write_csv(path, HIST_HEADER, (
                [fmt(lo), fmt(hi), fmt(int(c))] for lo, hi, c in zip(edges[:-1], edges[1:], r.ratio_hist)))
            written.append(path)

    sidecar = {
        "version": __version__,
        "model": model,
        "diagnostics": list(diagnostics),
        "master_seed": config.master_seed if config else None,
        "config": asdict(config) if config else None,
        "failed_points": [{"N": r.n_sites, "strength": r.strength, "error": r.error}
                          for r in records if r.error is not None],
        "entropy_units": "nats",
    }
    path = out / f"{model}_run.json"
    try:
        path.write_text(json.dumps(sidecar, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    written.append(path)
    return written


def read_aggregates(out_dir, model: str) -> list[AggregateRecord]:
    """Inverse of :func:`write_aggregates` for the successful records."""
    out = Path(out_dir)
    meta = json.loads((out / f"{model}_run.json").read_text())
    records: dict[tuple[int, float], AggregateRecord] = {}
    for row in _read_csv(out / f"{model}_summary.csv"):
        key = (int(row["N"]), float(row["strength"]))
        records[key] = AggregateRecord(
            model=model, n_sites=key[0], strength=key[1],
            realizations=int(row["realizations"]), count=int(row["count"]),
            exclusions=int(row["exclusions"]),
            degenerate_ratios=int(row["degenerate_ratios"]),
            skipped_complex=int(row["skipped_complex"]),
        )
    for name in scalar_names(meta["diagnostics"]):
        for row in _read_csv(out / f"{model}_{name}.csv"):
            rec = records[(int(row["N"]), float(row["strength"]))]
            rec.stats[name] = Stat(float(row["mean"]), float(row["stderr"]), int(row["count"]))
    for rec in records.values():
        stem = f"N{rec.n_sites}_s{_tag(rec.strength)}"
        sff = out / f"{model}_sff_{stem}.csv"
        if sff.exists():
            rows = _read_csv(sff)
            rec.sff_times = np.array([float(r["t"]) for r in rows])
            rec.sff_mean = np.array([float(r["mean"]) for r in rows])
            rec.sff_stderr = np.array([float(r["stderr"]) for r in rows])
        hist = out / f"{model}_ratio_hist_{stem}.csv"
        if hist.exists():
            rec.ratio_hist = np.array([int(r["count"]) for r in _read_csv(hist)], dtype=np.int64)
    return list(records.values())


# -- checkpoints ------------------------------------------------------------

def checkpoint_path(directory, model: str, n_sites: int, strength: float) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    return d / f"{model}_N{n_sites}_s{_tag(strength)}.json"


def _arr(x):
    return None if x is None else [fmt(v) for v in np.asarray(x).tolist()]


def record_to_json(record: AggregateRecord) -> str:
    doc = {
        "model": record.model,
        "n_sites": record.n_sites,
        "strength": fmt(record.strength),
        "realizations": record.realizations,
        "count": record.count,
        "exclusions": record.exclusions,
        "degenerate_ratios": record.degenerate_ratios,
        "skipped_complex": record.skipped_complex,
        "error": record.error,
        "stats": {k: [fmt(s.mean), fmt(s.stderr), s.count] for k, s in record.stats.items()},
        "sff_times": _arr(record.sff_times),
        "sff_mean": _arr(record.sff_mean),
        "sff_stderr": _arr(record.sff_stderr),
        "ratio_hist": None if record.ratio_hist is None else [int(c) for c in record.ratio_hist],
    }
    return json.dumps(doc, indent=1) + "\n"


def record_from_json(text: str) -> AggregateRecord:
    doc = json.loads(text)

    def arr(key):
        v = doc[key]
        return None if v is None else np.array([float(x) for x in v])

    return AggregateRecord(
        model=doc["model"],
        n_sites=int(doc["n_sites"]),
        strength=float(doc["strength"]),
        realizations=doc["realizations"],
        count=doc["count"],
        exclusions=doc["exclusions"],
        stats={k: Stat(float(m), float(e), int(c)) for k, (m, e, c) in doc["stats"].items()},
        sff_times=arr("sff_times"),
        sff_mean=arr("sff_mean"),
        sff_stderr=arr("sff_stderr"),
        ratio_hist=None if doc["ratio_hist"] is None else np.array(doc["ratio_hist"], dtype=np.int64),
        degenerate_ratios=doc["degenerate_ratios"],
        skipped_complex=doc["skipped_complex"],
        error=doc["error"],
    )


def write_record_json(record: AggregateRecord, path) -> None:
    path = Path(path)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(record_to_json(record))
    tmp.replace(path)


def read_record_json(path) -> AggregateRecord:
    return record_from_json(Path(path).read_text())


def output_exists(out_dir) -> bool:
    """True when ``out_dir`` already holds run output."""
    out = Path(out_dir)
    if not out.exists():
        return False
    return any(out.glob("*_run.json")) or any(out.glob("*.csv")) or \
        any(out.glob("checkpoints/*.json"))
