"""Command-line entry point: synth, segment, eval, train-fusion, serve, convert.

Every subcommand is deterministic for a fixed --seed; --threads changes
runtime only. Anticipated errors (bad inputs, bad files) exit 2 with a
message on stderr; unexpected I/O failures exit 1.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import socket
import sys
from pathlib import Path

import numpy as np

from .errors import HsisegError, ValidationError
from .fileio import (
    load_cube,
    load_labels,
    load_probability_map,
    save_cube,
    save_labels,
    save_probability_map,
)
from .fusion import FusionModel, TrainConfig, TrainingBatch, train_logistic_fusion
from .metrics import place_first_click
from .protocol import (
    FUSED_SCF_METHOD,
    METHOD_NAMES,
    EvalConfig,
    EvalItem,
    compute_method_map,
    evaluate,
)
from .rasters import Click, ClickSet, adaptive_selection, pseudo_rgb
from .rgb_branch import ChromaStandIn, rgb_probability_map
from .scf import scf_map
from .synth import SceneSpec, generate_scene

log = logging.getLogger(__name__)

DEFAULT_PORT = 8077
PORT_ENV = "HSISEG_PORT"

# named sub-streams of the global --seed, one per randomness consumer
_SEED_STREAMS = {"synth": 1, "clicks": 2, "train-init": 3}


def stream_seed(seed: int, purpose: str) -> int:
    state = np.random.SeedSequence([seed, _SEED_STREAMS[purpose]]).generate_state(1)[0]
    return int(state)


def _load_clicks(path: Path) -> ClickSet:
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"bad clicks JSON in {path}: {exc}") from exc
    if not isinstance(doc, list) or not doc:
        raise ValidationError(f"{path}: clicks must be a non-empty JSON list")
    clicks = []
    for entry in doc:
        try:
            clicks.append(Click(int(entry["row"]), int(entry["col"]),
                                entry.get("polarity", "positive") == "positive"))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"{path}: bad click entry {entry!r}") from exc
    return ClickSet(tuple(clicks))


def _load_manifest(path: Path, require_labels: bool = True) -> list[dict]:
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"bad manifest JSON in {path}: {exc}") from exc
    if not isinstance(doc, list):
        raise ValidationError(f"{path}: manifest must be a JSON list")
    if not doc:
        raise ValidationError(f"{path}: manifest is empty")
    base = path.parent
    items = []
    for i, entry in enumerate(doc):
        if "cube" not in entry:
            raise ValidationError(f"{path}: manifest entry {i} is missing 'cube'")
        if require_labels and "labels" not in entry:
            raise ValidationError(f"{path}: manifest entry {i} is missing 'labels'")
        item = {"cube": base / entry["cube"], "name": entry.get("name", f"item-{i}")}
        if "labels" in entry:
            item["labels"] = base / entry["labels"]
        if "rgb_map" in entry:
            item["rgb_map"] = base / entry["rgb_map"]
        items.append(item)
    return items


def _load_items(entries: list[dict]) -> tuple[list[EvalItem], list[dict]]:
    items, skips = [], []
    for entry in entries:
        try:
            cube = load_cube(entry["cube"])
            labels = load_labels(entry["labels"])
            rgb_map = load_probability_map(entry["rgb_map"]) if "rgb_map" in entry else None
            items.append(EvalItem(cube=cube, labels=labels, rgb_map=rgb_map,
                                  name=entry["name"]))
        except (HsisegError, OSError) as exc:
            log.warning("skipping %s: %s", entry["name"], exc)
            skips.append({"image": entry["name"], "class": None, "method": None,
                          "reason": str(exc)})
    return items, skips


def cmd_synth(args) -> int:
    spec = SceneSpec.load(args.spec)
    if args.seed is not None:
        spec = SceneSpec.from_json(json.dumps({**json.loads(spec.to_json()),
                                               "seed": stream_seed(args.seed, "synth")}))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cube, labels = generate_scene(spec)
    save_cube(cube, out / "cube.hdr")
    save_labels(labels, out / "labels.png")
    (out / "scene.json").write_text(spec.to_json() + "\n")
    print(f"wrote {out / 'cube.hdr'} ({cube.height}x{cube.width}x{cube.bands}) "
          f"and {out / 'labels.png'} ({labels.classes} classes)")
    return 0


def cmd_segment(args) -> int:
    if args.method not in METHOD_NAMES:
        raise ValidationError(f"unknown method {args.method!r} "
                              f"(choose from {', '.join(METHOD_NAMES)})")
    cube = load_cube(args.cube)
    clicks = _load_clicks(Path(args.clicks))
    model = FusionModel.load(args.model) if args.model else None
    if args.method == "learned" and model is None:
        raise ValidationError("method 'learned' requires --model")
    external = load_probability_map(args.rgb_map) if args.rgb_map else None
    rgb_image = pseudo_rgb(cube, adaptive_selection(cube))
    result = compute_method_map(args.method, cube, rgb_image, clicks,
                                external_map=external, model=model,
                                standin_sigma=args.sigma, threads=args.threads)
    save_probability_map(result, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_eval(args) -> int:
    entries = _load_manifest(Path(args.manifest))
    items, load_skips = _load_items(entries)
    model = FusionModel.load(args.model) if args.model else None
    cfg = EvalConfig(
        methods=tuple(args.methods.split(",")),
        click_budget=args.clicks,
        seed=args.seed if args.seed is not None else 0,
        standin_sigma=args.sigma,
        threads=args.threads,
        model=model,
    )
    if not items:
        raise ValidationError(f"no loadable items in {args.manifest} "
                              f"({len(load_skips)} skipped)")
    report = evaluate(items, cfg)
    report.skips[:0] = load_skips
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.save(out / "report.json", out / "report.csv")
    skipped = f", {len(report.skips)} skipped" if report.skips else ""
    print(f"wrote {out / 'report.json'} and {out / 'report.csv'} "
          f"({len(report.rows)} rows{skipped})")
    return 0


def cmd_train_fusion(args) -> int:
    entries = _load_manifest(Path(args.manifest))
    items, skips = _load_items(entries)
    if not items:
        raise ValidationError(f"no loadable items in {args.manifest}")
    batches = []
    for item in items:
        rgb_image = pseudo_rgb(item.cube, adaptive_selection(item.cube))
        valid = item.labels.labeled_mask()
        for cls in range(item.labels.classes):
            if not item.labels.class_mask(cls).any():
                continue
            clicks = ClickSet((Click(*place_first_click(item.labels, cls), True),))
            scf = scf_map(item.cube, clicks, FUSED_SCF_METHOD, threads=args.threads)
            if item.rgb_map is not None:
                rgb = item.rgb_map
            else:
                rgb = rgb_probability_map(ChromaStandIn(sigma=args.sigma), rgb_image, clicks)
            batches.append(TrainingBatch.from_maps(rgb, scf, item.labels.class_mask(cls), valid))
    seed = stream_seed(args.seed if args.seed is not None else 0, "train-init")
    model = train_logistic_fusion(
        batches, TrainConfig(epochs=args.epochs, learning_rate=args.learning_rate, seed=seed)
    )
    model.save(args.out)
    print(f"wrote {args.out} (final loss {model.final_loss:.6f}"
          f"{', degenerate' if model.degenerate else ''})")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    port = args.port
    if port is None:
        port = int(os.environ.get(PORT_ENV, DEFAULT_PORT))
    try:
        probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        probe.bind((args.host, port))
        probe.close()
    except OSError as exc:
        print(f"cannot bind {args.host}:{port}: {exc}", file=sys.stderr)
        return 1
    model = FusionModel.load(args.model) if args.model else None
    app = create_app(model=model, standin_sigma=args.sigma, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


_KIND_LOADERS = {
    "cube": load_cube,
    "probability": load_probability_map,
    "labels": load_labels,
}


def _sniff_kind(path: Path) -> str:
    if path.suffix == ".hdr":
        return "cube"
    head = path.read_bytes()[:24]
    if head.startswith(b"SMAP"):
        return "probability"
    if head.startswith(b"LMAP"):
        return "labels"
    if head.startswith(b"\x89PNG"):
        from PIL import Image

        mode = Image.open(path).mode
        return "labels" if mode == "L" else "probability"
    raise ValidationError(f"cannot determine the format of {path}")


def cmd_convert(args) -> int:
    src, dst = Path(args.src), Path(args.dst)
    kind = _sniff_kind(src)
    value = _KIND_LOADERS[kind](src)
    if kind == "cube":
        if dst.suffix != ".hdr":
            raise ValidationError("cubes can only be converted to .hdr/.raw")
        save_cube(value, dst)
    elif kind == "probability":
        save_probability_map(value, dst)
    else:
        save_labels(value, dst)
    print(f"wrote {dst} ({kind})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hsiseg",
        description="Click-driven hyperspectral segmentation: synthesize scenes, "
                    "compute similarity maps, evaluate, train fusion, serve the UI.",
    )
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed for all randomness (echoed into outputs)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads; never changes output bytes")
    parser.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene")
    p.add_argument("spec", help="SceneSpec JSON file")
    p.add_argument("out_dir", help="output directory for cube.hdr and labels.png")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("segment", help="compute one similarity map for a click set")
    p.add_argument("--cube", required=True)
    p.add_argument("--clicks", required=True, help="JSON list of {row, col, polarity}")
    p.add_argument("--method", required=True)
    p.add_argument("--out", required=True, help="output map (.smap or .png)")
    p.add_argument("--rgb-map", default=None, help="external RGB-branch map")
    p.add_argument("--model", default=None, help="fusion model JSON for method=learned")
    p.add_argument("--sigma", type=float, default=25.0)
    p.set_defaults(fn=cmd_segment)

    p = sub.add_parser("eval", help="run the click-placement evaluation protocol")
    p.add_argument("--manifest", required=True,
                   help="JSON list of {cube, labels[, rgb_map]} (paths relative to it)")
    p.add_argument("--methods", default="sa,sa_eq")
    p.add_argument("--clicks", type=int, default=1, help="click budget per class")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--sigma", type=float, default=25.0)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("train-fusion", help="train the logistic fusion model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output model JSON")
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--sigma", type=float, default=25.0)
    p.set_defaults(fn=cmd_train_fusion)

    p = sub.add_parser("serve", help="run the interactive session service")
    p.add_argument("--port", type=int, default=None,
                   help=f"port (default {DEFAULT_PORT}, or ${PORT_ENV})")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--model", default=None)
    p.add_argument("--sigma", type=float, default=25.0)
    p.add_argument("--ui", default=None, help="static UI bundle directory to serve at /")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("convert", help="round-trip between on-disk formats")
    p.add_argument("src")
    p.add_argument("dst")
    p.set_defaults(fn=cmd_convert)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=args.log_level.upper())
    try:
        return args.fn(args)
    except HsisegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
