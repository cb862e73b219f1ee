"""Batch command-line surface: dataset stylization, stain baselines,
frequency sweeps, evaluation reports, and a micro-benchmark.

Every command writes its effective config (JSON, atomic) next to its outputs
before processing begins, and reruns with the same config+seed produce
byte-identical manifests and reports.
"""

from __future__ import annotations

import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import adain, evalstats, freq, imagecore, stain
from .errors import (
    BadRangeSyntax,
    EmptyStyleSource,
    InsufficientTissue,
    StrapkitError,
)
from .imagecore import Manifest, Rng, load_manifest, load_tile, save_manifest, save_tile


def _worker_count(workers: int | None) -> int:
    if workers is not None and workers > 0:
        return workers
    env = os.environ.get("STRAPKIT_THREADS")
    if env:
        return max(1, int(env))
    return 1


def _write_config(out_dir: Path, config: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    tmp = out_dir / "config.json.tmp"
    with open(tmp, "w") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, out_dir / "config.json")


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_pool(fn, items, workers: int):
    """Apply fn over items, preserving determinism regardless of scheduling."""
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def parse_radii(text: str) -> list[float]:
    """`84`, `14,28,84`, or `lo:hi:step` range syntax (endpoints inclusive)."""
    def _num(tok):
        try:
            value = float(tok)
        except ValueError:
            raise BadRangeSyntax(f"not a number: {tok!r}")
        if value <= 0:
            raise BadRangeSyntax(f"radius must be positive: {tok}")
        return value

    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise BadRangeSyntax(f"range syntax is lo:hi:step, got {text!r}")
        lo, hi, step = (_num(p) for p in parts)
        if hi < lo:
            raise BadRangeSyntax(f"hi < lo in {text!r}")
        radii = []
        r = lo
        while r <= hi + 1e-9:
            radii.append(round(r, 9))
            r += step
        return radii
    return [_num(tok) for tok in text.split(",") if tok]


@click.group()
def main():
    """strapkit: style-transfer augmentation, stain baselines, frequency
    filtering, and evaluation statistics for histopathology tiles."""


@main.command("stylize")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--style-manifest", required=True, type=click.Path(exists=True))
@click.option("--weights", "weights_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--alpha", default=1.0, show_default=True)
@click.option("--content-size", default=1024, show_default=True)
@click.option("--style-size", default=256, show_default=True)
@click.option("--vgg-normalize", is_flag=True, default=False)
@click.option("--seed", default=0, show_default=True)
@click.option("--workers", default=None, type=int)
def cmd_stylize(manifest_path, style_manifest, weights_path, out_dir, alpha,
                content_size, style_size, vgg_normalize, seed, workers):
    """Precompute a stylized copy of a dataset; each tile gets a style image
    chosen reproducibly from the style-source manifest."""
    t0 = time.monotonic()
    out_dir = Path(out_dir)
    manifest = load_manifest(manifest_path)
    styles = load_manifest(style_manifest)
    if len(styles) == 0:
        raise EmptyStyleSource(f"style manifest {style_manifest} has no entries")
    net = adain.load_weights(weights_path)
    cfg = adain.StylizeConfig(alpha=alpha, content_size=content_size,
                              style_size=style_size, vgg_normalize=vgg_normalize)
    _write_config(out_dir, {
        "command": "stylize", "alpha": alpha, "content_size": content_size,
        "style_size": style_size, "vgg_normalize": vgg_normalize, "seed": seed,
        "manifest": str(manifest_path), "style_manifest": str(style_manifest),
        "weights": str(weights_path),
    })
    root = Rng(seed)
    style_entries = list(styles)

    def process(entry):
        tile_path, meta = entry
        rng = root.child(meta.tile_id)
        style_path, style_meta = style_entries[rng.integers(0, len(style_entries))]
        tile = load_tile(tile_path, meta)
        style_tile = load_tile(style_path, style_meta)
        out = adain.stylize(net, tile, style_tile, cfg)
        out_path = out_dir / "tiles" / f"{meta.tile_id}.png"
        save_tile(out, out_path)
        return out_path, meta

    results = _run_pool(process, list(manifest), _worker_count(workers))
    results.sort(key=lambda e: e[1].tile_id)
    save_manifest(Manifest(tuple(results)), out_dir / "manifest.csv",
                  relative_to=out_dir)
    elapsed = time.monotonic() - t0
    click.echo(f"stylized {len(results)} tiles in {elapsed:.1f}s -> {out_dir}")


@main.group("stain")
def stain_group():
    """Stain normalization and augmentation baselines."""


@stain_group.command("normalize")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--reference", "reference_path", default=None, type=click.Path(exists=True),
              help="StainProfile JSON; defaults to the packaged reference.")
@click.option("--od-threshold", default=0.15, show_default=True)
@click.option("--min-tissue-fraction", default=0.05, show_default=True)
@click.option("--workers", default=None, type=int)
def cmd_stain_normalize(manifest_path, out_dir, reference_path, od_threshold,
                        min_tissue_fraction, workers):
    """Macenko-normalize every tile onto a reference stain profile. Tiles with
    too little tissue are listed in skipped.csv and do not fail the run."""
    out_dir = Path(out_dir)
    manifest = load_manifest(manifest_path)
    reference = (stain.load_profile(reference_path) if reference_path
                 else stain.default_reference_profile())
    params = stain.MacenkoParams(od_threshold=od_threshold,
                                 min_tissue_fraction=min_tissue_fraction)
    _write_config(out_dir, {
        "command": "stain normalize", "reference": str(reference_path or "packaged"),
        "od_threshold": od_threshold, "min_tissue_fraction": min_tissue_fraction,
        "manifest": str(manifest_path),
    })

    def process(entry):
        tile_path, meta = entry
        tile = load_tile(tile_path, meta)
        try:
            out = stain.macenko_normalize(tile, reference, params)
        except StrapkitError as exc:
            return ("skip", meta.tile_id, type(exc).__name__)
        out_path = out_dir / "tiles" / f"{meta.tile_id}.png"
        save_tile(out, out_path)
        return ("ok", out_path, meta)

    results = _run_pool(process, list(manifest), _worker_count(workers))
    kept = [(r[1], r[2]) for r in results if r[0] == "ok"]
    kept.sort(key=lambda e: e[1].tile_id)
    skipped = sorted((r[1], r[2]) for r in results if r[0] == "skip")
    save_manifest(Manifest(tuple(kept)), out_dir / "manifest.csv", relative_to=out_dir)
    with open(out_dir / "skipped.csv", "w", encoding="utf-8") as fh:
        fh.write("tile_id,reason\n")
        for tile_id, reason in skipped:
            fh.write(f"{tile_id},{reason}\n")
    click.echo(f"normalized {len(kept)} tiles, skipped {len(skipped)} -> {out_dir}")


@stain_group.command("augment")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--sigma-scale", default=0.05, show_default=True)
@click.option("--sigma-shift", default=0.05, show_default=True)
@click.option("--copies", default=1, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--workers", default=None, type=int)
def cmd_stain_augment(manifest_path, out_dir, sigma_scale, sigma_shift, copies,
                      seed, workers):
    """Write --copies jittered variants of every tile (HED concentration
    scale/shift jitter)."""
    out_dir = Path(out_dir)
    manifest = load_manifest(manifest_path)
    params = stain.HedAugmentParams(sigma_scale=sigma_scale, sigma_shift=sigma_shift)
    _write_config(out_dir, {
        "command": "stain augment", "sigma_scale": sigma_scale,
        "sigma_shift": sigma_shift, "copies": copies, "seed": seed,
        "manifest": str(manifest_path),
    })
    root = Rng(seed)

    def process(entry):
        tile_path, meta = entry
        tile = load_tile(tile_path, meta)
        out = []
        for k in range(copies):
            rng = root.child(f"{meta.tile_id}#{k}")
            aug = stain.stain_augment(tile, params, rng)
            new_id = meta.tile_id if copies == 1 else f"{meta.tile_id}_aug{k}"
            new_meta = imagecore.TileMeta(
                tile_id=new_id, patient_id=meta.patient_id, slide_id=meta.slide_id,
                domain_id=meta.domain_id, label=meta.label, split=meta.split,
                extra=dict(meta.extra))
            out_path = out_dir / "tiles" / f"{new_id}.png"
            save_tile(aug, out_path)
            out.append((out_path, new_meta))
        return out

    nested = _run_pool(process, list(manifest), _worker_count(workers))
    results = sorted((e for group in nested for e in group), key=lambda e: e[1].tile_id)
    save_manifest(Manifest(tuple(results)), out_dir / "manifest.csv", relative_to=out_dir)
    click.echo(f"augmented {len(manifest)} tiles x{copies} -> {out_dir}")


@main.command("lowpass")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--radii", default="14:154:14", show_default=True)
def cmd_lowpass(manifest_path, out_dir, radii):
    """Build low-frequency datasets for each radius in the sweep."""
    out_dir = Path(out_dir)
    manifest = load_manifest(manifest_path)
    radius_list = parse_radii(radii)
    sweep = freq.SweepSpec(tuple(radius_list))
    _write_config(out_dir, {
        "command": "lowpass", "radii": radius_list, "manifest": str(manifest_path),
    })
    results = freq.sweep_lowpass(manifest, sweep, out_dir)
    click.echo(f"wrote {len(results)} filtered datasets -> {out_dir}")


@main.command("eval")
@click.argument("scores_csv", type=click.Path(exists=True))
@click.argument("scores_csv_b", nargs=-1, type=click.Path(exists=True))
@click.option("--aggregate", type=click.Choice(["none", "patient"]), default="none",
              show_default=True)
@click.option("--bootstrap", "n_bootstrap", default=evalstats.DEFAULT_BOOTSTRAP_RESAMPLES,
              show_default=True)
@click.option("--level", default=0.95, show_default=True)
@click.option("--test", "test_method",
              type=click.Choice(["delong", "permutation", "paired-t"]),
              default="delong", show_default=True)
@click.option("--permutation-n", default=evalstats.DEFAULT_PERMUTATION_RESAMPLES,
              show_default=True)
@click.option("--bh-q", default=evalstats.DEFAULT_BH_Q, show_default=True,
              type=float,
              help="Benjamini-Hochberg level applied across comparisons.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", default=None, type=click.Path(),
              help="Directory for report.json, report.csv and figures "
                   "(default: print JSON to stdout).")
@click.option("--figures/--no-figures", default=True, show_default=True)
def cmd_eval(scores_csv, scores_csv_b, aggregate, n_bootstrap, level, test_method,
             permutation_n, bh_q, seed, out_dir, figures):
    """Evaluate a score table: AUROC with bootstrap CI, plus pairwise tests
    against any further score tables, with BH adjustment across comparisons.
    The permutation test thresholds scores at 0.5 to obtain hard
    predictions; delong and paired-t operate on the raw scores."""
    tables = {}
    table_a = evalstats.load_score_table(scores_csv)
    if aggregate == "patient":
        table_a = evalstats.aggregate_patient(table_a)
    tables[Path(scores_csv).stem] = table_a

    point = evalstats.auroc(table_a)
    lo, hi = evalstats.bootstrap_ci(table_a, n_bootstrap, level, Rng(seed))
    report = {
        "scores": str(scores_csv),
        "aggregate": aggregate,
        "n": len(table_a),
        "auroc": point,
        "ci": {"lo": lo, "hi": hi, "level": level, "resamples": n_bootstrap,
               "method": "percentile-bootstrap"},
        "seed": seed,
        "tests": [],
    }

    raw_pvals = []
    for path_b in scores_csv_b:
        table_b = evalstats.load_score_table(path_b)
        if aggregate == "patient":
            table_b = evalstats.aggregate_patient(table_b)
        tables[Path(path_b).stem] = table_b
        if test_method == "delong":
            result = evalstats.delong_test(table_a, table_b)
        elif test_method == "permutation":
            labels = table_a.labels()
            preds_a = (table_a.scores() >= 0.5).astype(int)
            preds_b = (table_b.scores() >= 0.5).astype(int)
            result = evalstats.permutation_test(preds_a, preds_b, labels,
                                                permutation_n, Rng(seed))
        else:
            result = evalstats.paired_t_test(table_a.scores(), table_b.scores())
        raw_pvals.append(result.p_value)
        report["tests"].append({
            "versus": str(path_b),
            "method": result.method,
            "statistic": result.statistic,
            "p_value": result.p_value,
            "auroc_b": evalstats.auroc(table_b),
        })

    if bh_q is not None and raw_pvals:
        adjusted, reject = evalstats.bh_adjust(raw_pvals, bh_q)
        report["bh"] = {"q": bh_q, "adjusted": adjusted, "reject": reject}
        for entry, adj, rej in zip(report["tests"], adjusted, reject):
            entry["p_adjusted"] = adj
            entry["reject"] = rej

    if out_dir is None:
        click.echo(json.dumps(report, indent=2, sort_keys=True))
        return
    out_dir = Path(out_dir)
    _write_config(out_dir, {
        "command": "eval", "scores": str(scores_csv),
        "scores_b": [str(p) for p in scores_csv_b], "aggregate": aggregate,
        "bootstrap": n_bootstrap, "level": level, "test": test_method,
        "permutation_n": permutation_n, "bh_q": bh_q, "seed": seed,
    })
    _write_json(out_dir / "report.json", report)
    with open(out_dir / "report.csv", "w", encoding="utf-8") as fh:
        fh.write("name,auroc,ci_lo,ci_hi,p_value,p_adjusted\n")
        fh.write(f"{Path(scores_csv).stem},{point!r},{lo!r},{hi!r},,\n")
        for entry in report["tests"]:
            fh.write(f"{Path(entry['versus']).stem},{entry['auroc_b']!r},,,"
                     f"{entry['p_value']!r},{entry.get('p_adjusted', '')!r}\n")
    if figures:
        from .plotting import save_roc_figure
        aucs = {Path(scores_csv).stem: point}
        for entry in report["tests"]:
            aucs[Path(entry["versus"]).stem] = entry["auroc_b"]
        save_roc_figure(tables, aucs, out_dir / "roc.png")
    click.echo(f"report -> {out_dir / 'report.json'}")


@main.command("estimate-reference")
@click.option("--tile", "tile_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--od-threshold", default=0.15, show_default=True)
def cmd_estimate_reference(tile_path, out_path, od_threshold):
    """Estimate a stain reference profile from one tile and save it as JSON."""
    tile = load_tile(tile_path)
    profile = stain.estimate_stain_profile(
        tile, stain.MacenkoParams(od_threshold=od_threshold))
    stain.save_profile(profile, out_path)
    click.echo(f"profile -> {out_path}")


@main.command("bench")
@click.option("--tile-size", default=512, show_default=True)
@click.option("--repeats", default=3, show_default=True)
@click.option("--weights", "weights_path", default=None, type=click.Path(exists=True),
              help="Stylization weights; a tiny random net is used when omitted.")
@click.option("--out", "out_dir", default=None, type=click.Path())
def cmd_bench(tile_size, repeats, weights_path, out_dir):
    """Report informational per-tile wall times for stylize / SA / SN."""
    rng = Rng(1234)
    pixels = np.asarray(rng.uniform(0.3, 0.9, size=(tile_size, tile_size, 3)))
    tile = imagecore.tile_from_array(pixels)
    reference = stain.default_reference_profile()
    net = (adain.load_weights(weights_path) if weights_path
           else adain.random_network(seed=7))
    cfg = adain.StylizeConfig(content_size=tile_size, style_size=256)
    # warm-up plus timed repeats; report the best run, like a micro-benchmark
    timings = {}

    def time_op(name, fn):
        fn()
        best = min(_timed(fn) for _ in range(repeats))
        timings[name] = best * 1000.0

    def _timed(fn):
        t0 = time.perf_counter()
        fn()
        return time.perf_counter() - t0

    time_op("stain_augment", lambda: stain.stain_augment(tile, rng=Rng(0)))
    time_op("stain_normalize", lambda: stain.macenko_normalize(tile, reference))
    time_op("stylize", lambda: adain.stylize(net, tile, tile, cfg))
    for name, ms in timings.items():
        click.echo(f"{name}: {ms:.2f} ms/tile")
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(out_dir / "bench.json",
                    {"tile_size": tile_size, "repeats": repeats,
                     "timings_ms": timings})
        from .plotting import save_bench_figure
        save_bench_figure(timings, out_dir / "bench.png")


if __name__ == "__main__":
    main()
