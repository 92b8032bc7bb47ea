"""Command-line entry point: ``multigrasp <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 failed check.
Messages go to standard error.
"""
import argparse
import json
import logging
import sys
from pathlib import Path


from . import evaluation as ev
from .config import defaults_reference, load_config
from .errors import CheckFailure, ConfigError, DataError, GraspError, NonRectangular
from .geometry import polygon_to_rect
from .ingest import (ANNOTATION_RTOL, DatasetSample, read_file, compose_rgd, load_dataset, load_depth,
                     load_object_map, load_sample, parse_netpbm, parse_rect_file, write_sample)

log = logging.getLogger("multigrasp")

EXIT_CONFIG, EXIT_DATA, EXIT_CHECK = 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _write(path, text):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _data_dir(args, cfg):
    root = Path(args.data or cfg.paths.data)
    if not root.is_dir():
        raise DataError("dataset directory not found", str(root))
    return root


# --- subcommands -------------------------------------------------------------

def cmd_validate(args, cfg):
    """Parse every sample and report counts; inputs are only read."""
    if args.image:
        if not args.depth or not args.pos:
            raise ConfigError("--image needs --depth and --pos")
        samples = [load_sample(args.image, args.depth, args.pos, args.neg)]
    else:
        samples = load_dataset(_data_dir(args, cfg))
    per = []
    for s in samples:
        per.append({"id": s.source_id, "width": s.width, "height": s.height,
                    "positives": len(s.positives), "negatives": len(s.negatives), "skipped": s.report})
    totals = {"images": len(per), "positives": sum(p["positives"] for p in per),
              "negatives": sum(p["negatives"] for p in per)}
    for side in ("positives", "negatives"):
        for k in ("nan_skipped", "nonrect_skipped", "out_of_bounds"):
            totals[f"{side}_{k}"] = sum(p["skipped"].get(side, {}).get(k, 0) for p in per)
    _write(args.out, _dump({"samples": per, "totals": totals}))
    return 0


def cmd_augment(args, cfg):
    from .augment import augment_dataset
    samples = load_dataset(_data_dir(args, cfg))
    out = Path(args.out or Path(cfg.paths.out) / "augmented")
    aug = augment_dataset(samples, cfg.augment)
    objects = load_object_map(_data_dir(args, cfg))
    obj_out = {}
    for s in aug:
        write_sample(s, out)
        src = s.source_id.rsplit("_", 1)[0]
        obj_out[s.source_id] = objects.get(src, src)
    (out / "objects.json").write_text(_dump(obj_out))
    log.info("wrote %d samples to %s", len(aug), out)
    return 0


def _split(samples, root, cfg):
    ids = [s.source_id for s in samples]
    manifest = ev.split_ids(ids, load_object_map(root), cfg.split.mode, cfg.split.test_fraction, cfg.seed)
    by_id = {s.source_id: s for s in samples}
    return manifest, [by_id[i] for i in manifest["train"]], [by_id[i] for i in manifest["test"]]


def cmd_train(args, cfg):
    from .detector import train, write_metrics_csv
    root = _data_dir(args, cfg)
    samples = load_dataset(root)
    manifest, tr, te = _split(samples, root, cfg)
    if not tr:
        raise DataError("training split is empty", str(root))
    out = Path(args.out or cfg.paths.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "split.json").write_text(_dump(manifest))

    def progress(s):
        print(f"epoch {s['epoch']} loss {s['mean_loss']:.4f} top1 {s['top1']:.3f}", file=sys.stderr)

    res = train(tr, cfg.network, cfg.train, eval_samples=te or None, progress=progress)
    res.model.save(out / "model.mgck")
    write_metrics_csv(out / "metrics.csv", res.rows)
    (out / "epochs.json").write_text(_dump(res.epochs))
    (out / "config.json").write_text(cfg.to_json())
    return 0


def _model(args, cfg):
    from .detector import GraspDetector
    path = Path(args.checkpoint or cfg.paths.checkpoint)
    return GraspDetector.load(path, cfg.network if args.config_network else None)


def cmd_detect(args, cfg):
    from .detector import detections_json
    from .svg import export_overlay
    model = _model(args, cfg)
    mode = model.cfg.input_mode
    if args.image:
        if not args.depth:
            raise ConfigError("--image needs --depth")
        s = _single(args)
        dets = model.detect(s.input_image(mode))
        _write(args.out, detections_json(dets))
        if args.svg:
            _write(args.svg, export_overlay(s.rgd.data, dets, s.positives if args.pos else (),
                                            href=Path(args.image).name))
        return 0
    samples = load_dataset(_data_dir(args, cfg))
    out = Path(args.out or Path(cfg.paths.out) / "detections")
    out.mkdir(parents=True, exist_ok=True)
    for s in samples:
        (out / f"{s.source_id}.json").write_text(detections_json(model.detect(s.input_image(mode))))
    return 0


def _single(args):
    if args.pos:
        return load_sample(args.image, args.depth, args.pos)
    rgb = parse_netpbm(read_file(args.image), source=str(args.image))
    depth = load_depth(args.depth, rgb.width, rgb.height)
    return DatasetSample(compose_rgd(rgb, depth), [], [], Path(args.image).stem, blue=rgb.data[..., 2].copy())


def _load_gts(path):
    polys, _ = parse_rect_file(read_file(path), source=str(path))
    out = []
    for p in polys:
        try:
            out.append(polygon_to_rect(p, rtol=ANNOTATION_RTOL))
        except NonRectangular:
            continue
    return out


def _results(pred_dir, gt_dir):
    """Pair ``<id>.json`` detections with ``<id>cpos.txt`` ground truth."""
    from .detector import parse_detections
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    for d in (pred_dir, gt_dir):
        if not d.is_dir():
            raise DataError("directory not found", str(d))
    gts = {p.name[:-len("cpos.txt")]: p for p in sorted(gt_dir.glob("*cpos.txt"))}
    preds = {p.stem: p for p in sorted(pred_dir.glob("*.json"))}
    orphan = sorted(set(preds) - set(gts))
    if orphan:
        raise DataError(f"predictions without ground truth: {orphan[:5]}", str(pred_dir))
    results = []
    for sid in sorted(gts):
        dets = parse_detections(preds[sid].read_text(), str(preds[sid])) if sid in preds else []
        results.append((dets, _load_gts(gts[sid])))
    if not results:
        raise DataError("no ground-truth files (<id>cpos.txt)", str(gt_dir))
    return results


def cmd_eval(args, cfg):
    results = _results(args.pred, args.gt)
    reports = ev.accuracy_reports(results, split=args.split or cfg.split.mode)
    _write(args.out, ev.reports_json(reports))
    return 0


def cmd_curve(args, cfg):
    results = _results(args.pred, args.gt)
    _write(args.out, ev.curve_csv(ev.fppi_curve(results)))
    return 0


def cmd_gradcheck(args, cfg):
    from . import gradsuite
    results = gradsuite.run_all(args.seed)
    sys.stdout.write(gradsuite.format_table(results))
    bad = [r.name for r in results if not r.ok]
    if bad:
        raise CheckFailure(f"gradient check failed for: {', '.join(bad)}")
    return 0


def cmd_synth(args, cfg):
    from .synthetic import bar_corpus
    out = Path(args.out)
    for s in bar_corpus(args.n, seed=args.seed, size=args.size, prefix=args.prefix):
        write_sample(s, out)
    return 0


def cmd_defaults(args, cfg):
    _write(args.out, defaults_reference() if args.reference else cfg.to_json())
    return 0


# --- parser ------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="multigrasp", description="Multi-object, multi-grasp detection toolkit.")
    p.add_argument("--config", help="run config JSON (else $MULTIGRASP_CONFIG, else defaults)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(fn=fn)
        sp.add_argument("--config", default=argparse.SUPPRESS, help="run config JSON")
        return sp

    sp = add("validate", cmd_validate, "parse a dataset and report counts")
    sp.add_argument("--data")
    sp.add_argument("--image")
    sp.add_argument("--depth")
    sp.add_argument("--pos")
    sp.add_argument("--neg")
    sp.add_argument("--out")

    sp = add("augment", cmd_augment, "materialize augmented samples")
    sp.add_argument("--data")
    sp.add_argument("--out")

    sp = add("train", cmd_train, "train a detector; writes checkpoint and metrics CSV")
    sp.add_argument("--data")
    sp.add_argument("--out")

    sp = add("detect", cmd_detect, "run a checkpoint on one image or a dataset")
    sp.add_argument("--checkpoint")
    sp.add_argument("--config-network", action="store_true",
                    help="use the config's network section instead of the checkpoint's")
    sp.add_argument("--image")
    sp.add_argument("--depth")
    sp.add_argument("--pos", help="ground truth drawn in the SVG overlay")
    sp.add_argument("--data")
    sp.add_argument("--out")
    sp.add_argument("--svg")

    for name, fn, help_ in (("eval", cmd_eval, "top-1 accuracy over the Jaccard sweep"),
                            ("curve", cmd_curve, "miss rate against false positives per image")):
        sp = add(name, fn, help_)
        sp.add_argument("--pred", required=True, help="directory of <id>.json detections")
        sp.add_argument("--gt", required=True, help="directory of <id>cpos.txt files")
        sp.add_argument("--out")
        if name == "eval":
            sp.add_argument("--split", help="label written into the report")

    sp = add("gradcheck", cmd_gradcheck, "finite-difference check of every kernel")
    sp.add_argument("--seed", type=int, default=0)

    sp = add("synth", cmd_synth, "write a synthetic bar corpus")
    sp.add_argument("--out", required=True)
    sp.add_argument("--n", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--size", type=int, default=227)
    sp.add_argument("--prefix", default="bar")

    sp = add("defaults", cmd_defaults, "print the default config or the key reference")
    sp.add_argument("--reference", action="store_true", help="markdown table of keys")
    sp.add_argument("--out")
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = load_config(args.config)
        return args.fn(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (DataError, GraspError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
