"""Disorder ensembles: per-realization diagnostics, aggregation and sweeps.

Every realization draws its disorder from a stream keyed by
``(master_seed, realization_index)``. Results are folded in index order, so
aggregates are bit-identical for any number of worker processes.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .basis import bipartition_shape, build_sector_basis
from .models import build_matrix, make_spec, sample_disorder
from .spectral import ExceptionalPointWarning, eig_biorthogonal, svd

logger = logging.getLogger(__name__)

MODELS = ("xxz_loss", "hatano_nelson")
DIAGNOSTICS = ("sff", "ratios", "ipr", "entropy", "complex_ratios", "eigenvectors")

# Names of the per-realization scalars produced by each diagnostic toggle.
SCALARS = {
    "ratios": ("ratio",),
    "ipr": ("ipr",),
    "entropy": ("entropy",),
    "complex_ratios": ("complex_r", "complex_cos"),
    "eigenvectors": ("eig_ipr", "eig_entropy"),
}


@dataclass(frozen=True)
class SweepPlan:
    model: str
    n_sites: tuple[int, ...]
    strengths: tuple[float, ...]
    realizations: int
    master_seed: int = 0
    J: float = 1.0
    Delta: float = 1.0
    g: float = 0.1
    value_window: dg.WindowPolicy = dg.WindowPolicy("smallest", 0.1)
    vector_window: dg.WindowPolicy = dg.WindowPolicy("middle", 0.1)
    t_min: float = 0.1
    t_max_factor: float = 100.0
    n_times: int = 400
    ratio_bins: int = 50
    diagnostics: tuple[str, ...] = ("sff", "ratios", "ipr", "entropy")

    def __post_init__(self):
        object.__setattr__(self, "n_sites", tuple(int(n) for n in self.n_sites))
        object.__setattr__(self, "strengths", tuple(float(s) for s in self.strengths))
        object.__setattr__(self, "diagnostics", tuple(self.diagnostics))
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if not self.n_sites or not self.strengths:
            raise ValueError("parameter grids must be non-empty")
        if any(s < 0 for s in self.strengths):
            raise ValueError("disorder strengths must be non-negative")
        unknown = set(self.diagnostics) - set(DIAGNOSTICS)
        if unknown:
            raise ValueError(f"unknown diagnostics {sorted(unknown)}")

    def wants(self, name: str) -> bool:
        return name in self.diagnostics

    def times(self, dim: int) -> np.ndarray:
        return dg.log_time_grid(dim, self.t_min, self.t_max_factor, self.n_times)


@dataclass(frozen=True)
class Stat:
    mean: float
    stderr: float
    count: int


@dataclass
class AggregateRecord:
    model: str
    n_sites: int
    strength: float
    realizations: int
    count: int
    exclusions: int
    stats: dict[str, Stat] = field(default_factory=dict)
    sff_times: np.ndarray | None = None
    sff_mean: np.ndarray | None = None
    sff_stderr: np.ndarray | None = None
    ratio_hist: np.ndarray | None = None
    degenerate_ratios: int = 0
    skipped_complex: int = 0
    error: str | None = None

    @property
    def key(self) -> tuple[int, float]:
        return (self.n_sites, self.strength)


class RunningStats:
    """Welford mean/variance for scalars or equally shaped arrays."""

    def __init__(self):
        self.count = 0
        self._mean = None
        self._m2 = None

    def add(self, x) -> None:
        x = np.asarray(x, dtype=float)
        self.count += 1
        if self._mean is None:
            self._mean = x.copy()
            self._m2 = np.zeros_like(x)
            return
        delta = x - self._mean
        self._mean = self._mean + delta / self.count
        self._m2 = self._m2 + delta * (x - self._mean)

    @property
    def mean(self):
        return self._mean

    @property
    def variance(self):
        if self.count < 2:
            return np.zeros_like(self._mean)
        return self._m2 / (self.count - 1)

    @property
    def stderr(self):
        if self.count < 2:
            return np.zeros_like(self._mean)
        return np.sqrt(self.variance / self.count)


@dataclass
class RealizationResult:
    index: int
    excluded: bool = False
    scalars: dict[str, float] = field(default_factory=dict)
    sff: np.ndarray | None = None
    ratios: np.ndarray | None = None
    degenerate: int = 0
    skipped_complex: int = 0


@lru_cache(maxsize=8)
def _basis_and_cut(n_sites: int):
    basis = build_sector_basis(n_sites)
    return basis, bipartition_shape(basis)


def evaluate_realization(plan: SweepPlan, n_sites: int, strength: float, index: int) -> RealizationResult:
    """Sample, build, decompose and evaluate every configured diagnostic."""
    basis, cut = _basis_and_cut(n_sites)
    spec = make_spec(plan.model, n_sites, strength, J=plan.J, Delta=plan.Delta, g=plan.g)
    H = build_matrix(spec, sample_disorder(spec, plan.master_seed, index), basis)
    out = RealizationResult(index=index)

    if plan.wants("complex_ratios") or plan.wants("eigenvectors"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ExceptionalPointWarning)
            eig = eig_biorthogonal(H)
        if eig.defective:
            logger.warning("realization %d (N=%d, strength=%g) near an exceptional point; excluded",
                           index, n_sites, strength)
            out.excluded = True
            return out
        # eigenvalues come sorted by real part; window the middle of that order
        win = dg.select_window(eig.eigenvalues.size, plan.vector_window)
        if plan.wants("complex_ratios"):
            cr = dg.complex_gap_ratios(eig.eigenvalues, window=win)
            out.scalars["complex_r"] = cr.mean_r
            out.scalars["complex_cos"] = cr.mean_cos_theta
            out.skipped_complex = cr.n_skipped
        if plan.wants("eigenvectors"):
            loc = dg.localization_indicators(eig.right[:, win.start:win.stop], cut)
            out.scalars["eig_ipr"] = loc.ipr
            out.scalars["eig_entropy"] = loc.entanglement_entropy

    need_vectors = plan.wants("ipr") or plan.wants("entropy")
    res = svd(H, compute_vectors=need_vectors)
    sigma = res.sigma
    if plan.wants("sff"):
        out.sff = dg.singular_form_factor(sigma, plan.times(basis.dim)).values
    if plan.wants("ratios"):
        sample = dg.ratio_statistics(sigma, plan.value_window)
        out.scalars["ratio"] = sample.mean_r
        out.ratios = sample.ratios
        out.degenerate = sample.n_degenerate
    if need_vectors:
        D = basis.dim
        win = dg.select_window(D, plan.vector_window)
        # sigma is descending; ascending position p is column D - 1 - p
        cols = D - 1 - np.arange(win.start, win.stop)
        vecs = res.right[:, cols]
        if plan.wants("ipr"):
            out.scalars["ipr"] = float(np.mean(dg.ipr(vecs)))
        if plan.wants("entropy"):
            out.scalars["entropy"] = float(np.mean(dg.entanglement_entropy(vecs, cut)))
    return out


def _evaluate_chunk(args):
    plan, n_sites, strength, indices = args
    return [evaluate_realization(plan, n_sites, strength, i) for i in indices]


def aggregate(plan: SweepPlan, n_sites: int, strength: float, results) -> AggregateRecord:
    """Fold realization results (in index order) into an :class:`AggregateRecord`."""
    results = sorted(results, key=lambda r: r.index)
    names = [s for d in plan.diagnostics for s in SCALARS.get(d, ())]
    acc = {name: RunningStats() for name in names}
    sff = RunningStats()
    hist = dg.RatioHistogram(plan.ratio_bins) if plan.wants("ratios") else None
    excluded = degenerate = skipped = 0
    for r in results:
        if r.excluded:
            excluded += 1
            continue
        for name in names:
            value = r.scalars.get(name, math.nan)
            if math.isfinite(value):
                acc[name].add(value)
        if r.sff is not None:
            sff.add(r.sff)
        if hist is not None and r.ratios is not None:
            hist.add(r.ratios)
        degenerate += r.degenerate
        skipped += r.skipped_complex

    record = AggregateRecord(
        model=plan.model,
        n_sites=n_sites,
        strength=strength,
        realizations=len(results),
        count=len(results) - excluded,
        exclusions=excluded,
        degenerate_ratios=degenerate,
        skipped_complex=skipped,
    )
    for name, st in acc.items():
        if st.count:
            record.stats[name] = Stat(float(st.mean), float(st.stderr), st.count)
        else:
            record.stats[name] = Stat(math.nan, math.nan, 0)
    if sff.count:
        record.sff_times = plan.times(_basis_and_cut(n_sites)[0].dim)
        record.sff_mean = sff.mean
        record.sff_stderr = sff.stderr
    if hist is not None:
        record.ratio_hist = hist.counts
    return record


def run_point(plan: SweepPlan, n_sites: int, strength: float, workers: int = 1,
              chunk_size: int | None = None) -> AggregateRecord:
    """All realizations of one ``(N, strength)`` grid point."""
    indices = list(range(plan.realizations))
    logger.info("point %s N=%d strength=%g: %d realizations on %d worker(s)",
                plan.model, n_sites, strength, len(indices), workers)
    if workers <= 1:
        results = []
        step = max(1, len(indices) // 10)
        for i in indices:
            results.append(evaluate_realization(plan, n_sites, strength, i))
            if (i + 1) % step == 0:
                logger.info("  N=%d strength=%g: %d/%d", n_sites, strength, i + 1, len(indices))
    else:
        chunk_size = chunk_size or max(1, math.ceil(len(indices) / (4 * workers)))
        chunks = [indices[k:k + chunk_size] for k in range(0, len(indices), chunk_size)]
        results = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_evaluate_chunk, [(plan, n_sites, strength, c) for c in chunks]):
                results.extend(part)
                logger.info("  N=%d strength=%g: %d/%d", n_sites, strength,
                            len(results), len(indices))
    return aggregate(plan, n_sites, strength, results)


def run_sweep(plan: SweepPlan, workers: int = 1, checkpoint_dir: str | Path | None = None,
              resume: bool = False) -> list[AggregateRecord]:
    """Every ``(N, strength)`` point of the plan.

    With ``checkpoint_dir`` each completed point is written to its own file;
    ``resume=True`` reuses files already present instead of recomputing. A
    point that fails is logged and returned with ``error`` set; the sweep
    carries on.
    """
    from .io import checkpoint_path, read_record_json, write_record_json

    records = []
    for n in plan.n_sites:
        for s in plan.strengths:
            path = None
            if checkpoint_dir is not None:
                path = checkpoint_path(checkpoint_dir, plan.model, n, s)
                if resume and path.exists():
                    logger.info("reusing checkpoint %s", path)
                    records.append(read_record_json(path))
                    continue
            try:
                record = run_point(plan, n, s, workers=workers)
            except Exception as exc:  # noqa: BLE001 - one bad point must not kill the sweep
                logger.error("point N=%d strength=%g failed: %s", n, s, exc)
                records.append(AggregateRecord(plan.model, n, s, plan.realizations, 0, 0,
                                               error=f"{type(exc).__name__}: {exc}"))
                continue
            if path is not None:
                write_record_json(record, path)
            records.append(record)
    return records
