"""Command line entry point.

Subcommands::

    nhmbl run --config plan.yaml [--out DIR] [--seed S] [--threads T] [--resume]
    nhmbl single --model xxz_loss --n-sites 8 --strength 0 --out dump.json
    nhmbl reference --out DIR
    nhmbl figures --out DIR
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import diagnostics as dg
from .basis import bipartition_shape, build_sector_basis
from .ensemble import run_sweep
from .io import (ConfigError, fmt, load_config, output_exists, read_aggregates,
                 write_aggregates, write_csv)
from .models import build_matrix, make_spec, sample_disorder
from .spectral import eig_biorthogonal, svd

logger = logging.getLogger("nhmbl")

THREADS_ENV = "NHMBL_THREADS"


def _env_threads() -> int | None:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.out is not None:
        overrides["output"] = args.out
    threads = args.threads if args.threads is not None else _env_threads()
    if threads is not None:
        overrides["threads"] = threads
    cfg = replace(cfg, **overrides).validate(path=args.config)

    out = Path(cfg.output)
    if output_exists(out) and not args.resume:
        logger.error("output directory %s already holds results; pass --resume to continue it", out)
        return 3
    plan = cfg.to_plan()
    records = run_sweep(plan, workers=cfg.threads, checkpoint_dir=out / "checkpoints",
                        resume=args.resume)
    write_aggregates(records, out, cfg.model, plan.diagnostics, cfg)
    failed = [r for r in records if r.error]
    for r in failed:
        logger.error("point N=%d strength=%g failed: %s", r.n_sites, r.strength, r.error)
    return 1 if failed else 0


def single_dump(model: str, n_sites: int, strength: float, seed: int = 0, index: int = 0, *,
                J: float = 1.0, Delta: float = 1.0, g: float = 0.1,
                value_fraction: float = 0.1, vector_fraction: float = 0.1) -> dict:
    """Full decomposition and diagnostics of one disorder realization."""
    basis = build_sector_basis(n_sites)
    cut = bipartition_shape(basis)
    spec = make_spec(model, n_sites, strength, J=J, Delta=Delta, g=g)
    dis = sample_disorder(spec, seed, index)
    H = build_matrix(spec, dis, basis)
    res = svd(H)
    eig = eig_biorthogonal(H)
    D = basis.dim

    vwin = dg.select_window(D, dg.middle_fraction(vector_fraction))
    cols = D - 1 - np.arange(vwin.start, vwin.stop)
    sv_loc = dg.localization_indicators(res.right[:, cols], cut)
    eig_loc = dg.localization_indicators(eig.right[:, vwin.start:vwin.stop], cut)
    ratios = dg.ratio_statistics(res.sigma, dg.smallest_fraction(value_fraction))
    cplx = dg.complex_gap_ratios(eig.eigenvalues, window=vwin)
    return {
        "version": __version__,
        "model": model,
        "n_sites": n_sites,
        "strength": strength,
        "J": J, "Delta": Delta, "g": g,
        "master_seed": seed,
        "realization_index": index,
        "dim": D,
        "disorder": dis.values.tolist(),
        "sigma": res.sigma.tolist(),
        "eigenvalues_re": eig.eigenvalues.real.tolist(),
        "eigenvalues_im": eig.eigenvalues.imag.tolist(),
        "abs_eigenvalues_desc": np.sort(np.abs(eig.eigenvalues))[::-1].tolist(),
        "defective": eig.defective,
        "diagnostics": {
            "ratio_mean": ratios.mean_r,
            "ratio_degenerate": ratios.n_degenerate,
            "complex_mean_r": cplx.mean_r,
            "complex_mean_cos": cplx.mean_cos_theta,
            "singular_ipr": sv_loc.ipr,
            "singular_entropy": sv_loc.entanglement_entropy,
            "eig_ipr": eig_loc.ipr,
            "eig_entropy": eig_loc.entanglement_entropy,
        },
    }


def cmd_single(args) -> int:
    dump = single_dump(args.model, args.n_sites, args.strength, args.seed, args.index,
                       J=args.J, Delta=args.Delta, g=args.g)
    text = json.dumps(dump, indent=1) + "\n"
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    return 0


def reference_values() -> dict:
    return {
        "real_ratio_mean": {
            "poisson": dg.POISSON_MEAN_R,
            "goe": dg.GOE_MEAN_R,
            "goe_surmise": dg.GOE_SURMISE_MEAN_R,
        },
        "complex_ratio": dg.COMPLEX_RATIO_REFERENCE,
    }


def cmd_reference(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "reference.json").write_text(json.dumps(reference_values(), indent=2) + "\n")
    r = np.linspace(0.0, 1.0, args.points)
    write_csv(out / "reference_ratio_pdf.csv", ["r", "poisson", "goe"],
              ([fmt(x), fmt(p), fmt(q)] for x, p, q in
               zip(r, dg.reference_ratio_pdf("poisson", r), dg.reference_ratio_pdf("goe", r))))
    return 0


def _stat_rows(records, name):
    for rec in sorted(records, key=lambda r: (r.n_sites, r.strength)):
        st = rec.stats.get(name)
        if st is not None:
            yield rec, st


def write_figures(out_dir) -> list[Path]:
    """Reshape stored aggregates into plot-ready tables under ``out_dir/figures``."""
    out = Path(out_dir)
    fig = out / "figures"
    fig.mkdir(exist_ok=True)
    written = []
    models = sorted(p.name[:-len("_run.json")] for p in out.glob("*_run.json"))
    if not models:
        raise FileNotFoundError(f"no run output found in {out}")

    def emit(name, header, rows):
        path = fig / name
        write_csv(path, header, rows)
        written.append(path)

    for model in models:
        records = read_aggregates(out, model)
        names = {n for rec in records for n in rec.stats}

        for rec in records:
            stem = f"{model}_N{rec.n_sites}_s{fmt(rec.strength)}"
            if rec.sff_mean is not None:
                emit(f"sff_{stem}.csv", ["t", "mean", "stderr"],
                     ([fmt(t), fmt(m), fmt(e)] for t, m, e in
                      zip(rec.sff_times, rec.sff_mean, rec.sff_stderr)))
            if rec.ratio_hist is not None:
                h = dg.RatioHistogram(len(rec.ratio_hist), rec.ratio_hist)
                centres = 0.5 * (h.edges[:-1] + h.edges[1:])
                emit(f"ratio_pdf_{stem}.csv", ["r", "density", "goe", "poisson"],
                     ([fmt(c), fmt(d), fmt(dg.reference_ratio_pdf("goe", c)),
                       fmt(dg.reference_ratio_pdf("poisson", c))]
                      for c, d in zip(centres, h.density())))

        if any(rec.sff_mean is not None for rec in records):
            rows = []
            for rec in sorted(records, key=lambda r: (r.n_sites, r.strength)):
                if rec.sff_mean is None:
                    continue
                D = math.comb(rec.n_sites, rec.n_sites // 2)
                curve = dg.FormFactorCurve(rec.sff_times, rec.sff_mean)
                depth, plateau = dg.dip_metrics(curve, dg.default_plateau_window(D))
                rows.append([fmt(rec.n_sites), fmt(rec.strength), fmt(depth), fmt(plateau), fmt(1 / D)])
            emit(f"sff_dip_{model}.csv", ["N", "strength", "dip_depth", "plateau", "inverse_dim"], rows)

        if "ratio" in names:
            emit(f"ratio_vs_strength_{model}.csv",
                 ["N", "strength", "mean", "stderr", "goe", "poisson"],
                 ([fmt(rec.n_sites), fmt(rec.strength), fmt(st.mean), fmt(st.stderr),
                   fmt(dg.GOE_MEAN_R), fmt(dg.POISSON_MEAN_R)] for rec, st in _stat_rows(records, "ratio")))

        for name, label in (("ipr", "ipr"), ("eig_ipr", "eig_ipr")):
            if name in names:
                rows = []
                for rec, st in _stat_rows(records, name):
                    D = math.comb(rec.n_sites, rec.n_sites // 2)
                    scaled = math.log(st.mean) / math.log(D) if st.mean > 0 else math.nan
                    rows.append([fmt(rec.n_sites), fmt(rec.strength), fmt(D), fmt(st.mean),
                                 fmt(st.stderr), fmt(st.mean * D), fmt(scaled)])
                emit(f"{label}_vs_strength_{model}.csv",
                     ["N", "strength", "D", "mean", "stderr", "mean_times_D", "log_ipr_over_log_D"], rows)

        for name in ("entropy", "eig_entropy"):
            if name in names:
                rows = [[fmt(rec.n_sites), fmt(rec.strength), fmt(st.mean), fmt(st.stderr),
                         fmt(st.mean / rec.n_sites), fmt(rec.n_sites * math.log(2) / 2)]
                        for rec, st in _stat_rows(records, name)]
                emit(f"{name}_vs_strength_{model}.csv",
                     ["N", "strength", "mean_nats", "stderr", "mean_over_N", "volume_law"], rows)
                rows.sort(key=lambda row: (float(row[1]), int(row[0])))
                emit(f"{name}_vs_size_{model}.csv",
                     ["N", "strength", "mean_nats", "stderr", "mean_over_N", "volume_law"], rows)

        if "complex_r" in names:
            cos = {rec.key: st for rec, st in _stat_rows(records, "complex_cos")}
            emit(f"complex_ratio_vs_strength_{model}.csv",
                 ["N", "strength", "mean_r", "stderr_r", "minus_mean_cos", "stderr_cos"],
                 ([fmt(rec.n_sites), fmt(rec.strength), fmt(st.mean), fmt(st.stderr),
                   fmt(-cos[rec.key].mean), fmt(cos[rec.key].stderr)]
                  for rec, st in _stat_rows(records, "complex_r")))
    return written


def cmd_figures(args) -> int:
    write_figures(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nhmbl", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a disorder sweep from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--resume", action="store_true")
    run.add_argument("--threads", type=int, help=f"worker processes (default: ${THREADS_ENV} or config)")
    run.set_defaults(func=cmd_run)

    single = sub.add_parser("single", help="dump one realization's decomposition and diagnostics")
    single.add_argument("--model", default="xxz_loss", choices=["xxz_loss", "hatano_nelson"])
    single.add_argument("--n-sites", type=int, default=8)
    single.add_argument("--strength", type=float, default=1.0)
    single.add_argument("--seed", type=int, default=0)
    single.add_argument("--index", type=int, default=0)
    single.add_argument("--J", type=float, default=1.0)
    single.add_argument("--Delta", type=float, default=1.0)
    single.add_argument("--g", type=float, default=0.1)
    single.add_argument("--out", help="output JSON file (default: stdout)")
    single.set_defaults(func=cmd_single)

    ref = sub.add_parser("reference", help="write reference ensemble values and ratio densities")
    ref.add_argument("--out", required=True)
    ref.add_argument("--points", type=int, default=201)
    ref.set_defaults(func=cmd_reference)

    figs = sub.add_parser("figures", help="turn run aggregates into per-figure tables")
    figs.add_argument("--out", required=True, help="run output directory")
    figs.set_defaults(func=cmd_figures)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("invalid config: %s", exc)
        return 2
    except (OSError, ValueError) as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
