"""``leafdx`` command-line interface.

Exit status: 0 on success, 1 for bad input or configuration, 2 when an
internal consistency check fails.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import classifier, pipeline, synthgen
from .errors import InvariantViolation, LeafDxError
from .imaging import RGB, RasterImage, load_gray, load_image, save_image
from .pipeline import PipelineConfig, stage
from .segmentation import border_shares

OVERLAY_COLOR = np.array([255.0, 0.0, 0.0])


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=False)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if getattr(args, "k", None) is not None:
        updates["ga"] = dataclasses.replace(cfg.ga, k=args.k)
    if getattr(args, "kernel", None) is not None:
        updates["kernel"] = dataclasses.replace(cfg.kernel, kind=args.kernel)
    if getattr(args, "resize", None) is not None:
        updates["resize"] = tuple(args.resize)
    if getattr(args, "no_resize", False):
        updates["resize"] = None
    if getattr(args, "gamma", None) is not None:
        updates["gamma"] = args.gamma
    if getattr(args, "cluster", None) is not None:
        updates["cluster_override"] = args.cluster
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _header(cfg: PipelineConfig) -> dict:
    return {"version": pipeline.VERSION_TAG, "config": cfg.to_dict()}


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_segment(args) -> int:
    cfg = _config(args)
    with stage("load"):
        img = load_image(args.image)
    seg = pipeline.segment(img, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    assignment = seg.ga.assignment
    shares = border_shares(assignment, seg.rgb.width, seg.rgb.height)
    clusters = []
    for i in range(assignment.k):
        mask_path = out / f"cluster_{i}.mask.png"
        save_image(seg.mask(i), mask_path)
        clusters.append(
            {
                "index": i,
                "count": int(assignment.counts[i]),
                "centroid_y_cr_cb": assignment.centroids[i].tolist(),
                "border_share": float(shares[i]),
                "mask": mask_path.name,
            }
        )
    lesion = seg.mask().data[:, :, 0] > 0
    overlay = seg.rgb.data.copy()
    overlay[lesion] = 0.5 * overlay[lesion] + 0.5 * OVERLAY_COLOR
    save_image(RasterImage(overlay, RGB), out / "overlay.png")
    report = {
        **_header(cfg),
        "image": str(args.image),
        "k": assignment.k,
        "fitness": seg.ga.fitness,
        "generations_run": seg.ga.generations_run,
        "ga_seed": cfg.ga_effective.seed,
        "selected_cluster": seg.diseased,
        "clusters": clusters,
    }
    _write(out / "report.json", _dump(report) + "\n")
    if args.json:
        print(_dump(report))
    else:
        print(f"selected cluster {seg.diseased} of {assignment.k}; fitness {seg.ga.fitness:.4f}; "
              f"{seg.ga.generations_run} generations; outputs in {out}")
    return 0


def cmd_features(args) -> int:
    cfg = _config(args)
    with stage("load"):
        img = load_image(args.image)
    if args.mask:
        with stage("load mask"):
            mask = load_gray(args.mask)
        if mask.shape != img.shape:
            raise LeafDxError(f"[features] image {img.shape} and mask {mask.shape} differ in size")
        report = pipeline.features_for(img, mask, cfg)
    else:
        seg = pipeline.segment(img, cfg)
        report = pipeline.features_for(seg.rgb, seg.mask(), cfg)
    record = {**_header(cfg), "image": str(args.image), "mask": args.mask, **report}
    if args.csv:
        path = Path(args.csv)
        new = not path.exists() or path.stat().st_size == 0
        with open(path, "a", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            if new:
                writer.writerow(pipeline.csv_header())
            writer.writerow([args.label, *[repr(v) for v in report["vector"]]])
    if args.out:
        _write(Path(args.out) / "features.json", _dump(record) + "\n")
    if args.json or not args.csv:
        print(_dump(record))
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    data = pipeline.load_dataset(args.dataset, cfg)
    model = pipeline.train(data, cfg)
    with stage("save model"):
        classifier.save_model(model, args.model)
    summary = {
        **_header(cfg),
        "dataset": str(args.dataset),
        "samples": len(data),
        "labels": model.labels,
        "kernel": model.kernel.to_dict(),
        "binaries": [
            {"pair": list(b.class_pair), "support_vectors": len(b.alphas)} for b in model.binaries
        ],
        "model": str(args.model),
    }
    if args.out:
        _write(Path(args.out) / "train_summary.json", _dump(summary) + "\n")
    if args.json:
        print(_dump(summary))
    else:
        print(f"trained {len(model.binaries)} binary SVMs ({model.kernel.kind}) on {len(data)} samples")
        for b in summary["binaries"]:
            print(f"  {b['pair'][0]} vs {b['pair'][1]}: {b['support_vectors']} support vectors")
        print(f"model written to {args.model}")
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    with stage("load model"):
        model = classifier.load_model(args.model)
    data = pipeline.load_dataset(args.dataset, cfg)
    with stage("eval"):
        report = classifier.evaluate_accuracy(model, data)
    doc = {**_header(cfg), "dataset": str(args.dataset), "model": str(args.model), **report.to_dict()}
    if args.out:
        _write(Path(args.out) / "eval_report.json", _dump(doc) + "\n")
    if args.json:
        print(_dump(doc))
    else:
        print(report.table())
        print()
        print("confusion (rows: true, columns: predicted)")
        width = max(len(lab) for lab in report.labels) + 2
        print(" " * width + "".join(f"{lab:>{width}}" for lab in report.labels))
        for lab, row in zip(report.labels, report.confusion):
            print(f"{lab:<{width}}" + "".join(f"{v:>{width}}" for v in row))
    return 0


def cmd_predict(args) -> int:
    cfg = _config(args)
    with stage("load model"):
        model = classifier.load_model(args.model)
    with stage("load"):
        img = load_image(args.image)
    vector = pipeline.image_features(img, cfg)
    with stage("predict"):
        pred = classifier.predict(model, vector)
    doc = {
        **_header(cfg),
        "image": str(args.image),
        "label": pred.label,
        "votes": pred.votes,
        "features": vector.tolist(),
    }
    if args.out:
        _write(Path(args.out) / "prediction.json", _dump(doc) + "\n")
    if args.json:
        print(_dump(doc))
    else:
        print(pred.label)
        print("votes: " + ", ".join(f"{k}={v}" for k, v in pred.votes.items()))
        print("features: " + ", ".join(f"{v:.6g}" for v in vector))
    return 0


def cmd_synth(args) -> int:
    seed = args.seed if args.seed is not None else 0
    cfg = synthgen.SynthConfig(
        classes=tuple(args.classes), per_class=args.per_class, size=args.size, seed=seed, noise_sigma=args.noise
    )
    with stage("synth"):
        samples = synthgen.generate(cfg)
    out = Path(args.out)
    if args.eval_per_class:
        train_mask, eval_mask = pipeline.stratified_split(
            [s.label for s in samples], args.eval_per_class, pipeline.derive_seed(seed, "split")
        )
        for name, keep in (("train", train_mask), ("eval", eval_mask)):
            subset = [s for s, k in zip(samples, keep) if k]
            synthgen.export_dataset(subset, out / name, seed)
    else:
        synthgen.export_dataset(samples, out, seed)
    doc = {"version": pipeline.VERSION_TAG, "synth": dataclasses.asdict(cfg), "samples": len(samples), "out": str(out)}
    print(_dump(doc) if args.json else f"wrote {len(samples)} samples to {out}")
    return 0


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, out_default=None) -> None:
    p.add_argument("--config", help="JSON pipeline configuration file")
    p.add_argument("--seed", type=int, help="master seed (overrides the config file)")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--out", default=out_default, help="output directory")


def _pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, help="number of color clusters")
    p.add_argument("--resize", type=int, nargs=2, metavar=("W", "H"))
    p.add_argument("--no-resize", action="store_true", help="keep the native image size")
    p.add_argument("--gamma", type=float, help="undo a known gamma degradation")
    p.add_argument("--cluster", type=int, help="force the diseased cluster index")
    p.add_argument("--kernel", choices=classifier.KERNELS)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage mistakes are bad input: exit 1, keeping 2 for internal failures
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="leafdx", description="Leaf disease detection pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="cluster an image and pick the lesion cluster")
    p.add_argument("image")
    _common(p, out_default="leafdx-segment")
    _pipeline_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("features", help="GLCM texture features of a masked region")
    p.add_argument("image")
    p.add_argument("--mask", help="binary mask image; segments the image when omitted")
    p.add_argument("--csv", help="append a 'label,f1..f5' row to this file")
    p.add_argument("--label", default="unknown", help="label written in CSV mode")
    _common(p)
    _pipeline_flags(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train a one-vs-one SVM model")
    p.add_argument("dataset", help="image tree / synth export directory, or feature CSV")
    p.add_argument("--model", required=True, help="model file to write")
    _common(p)
    _pipeline_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="accuracy of a model on a labeled dataset")
    p.add_argument("dataset")
    p.add_argument("--model", required=True)
    _common(p)
    _pipeline_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="classify one image")
    p.add_argument("image")
    p.add_argument("--model", required=True)
    _common(p)
    _pipeline_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("synth", help="write a synthetic labeled dataset")
    _common(p, out_default="leafdx-synth")
    p.add_argument("--per-class", type=int, default=10)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--noise", type=float, default=3.0)
    p.add_argument("--classes", nargs="+", default=list(synthgen.CLASSES), choices=synthgen.CLASSES)
    p.add_argument("--eval-per-class", type=int, default=0,
                   help="hold out this many samples per class into <out>/eval")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except LeafDxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InvariantViolation, Exception) as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
