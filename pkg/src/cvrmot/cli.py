"""Command-line entry point.

Subcommands: ``evaluate`` (score predictions against ground truth and write a
report), ``filter`` (run the score-driven track filter), ``synth`` (generate
a synthetic scene, scored tracks, and optionally perturbed predictions with
their ledger), ``validate`` (check files), and ``fuse-check`` (numeric
self-tests of the fusion and loss formulas).

Effective configuration is resolved as: built-in defaults, overridden by
flags, overridden by a ``--config`` JSON file. The effective values are
echoed into every report.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from .datamodel import (
    AttributeSet,
    DEFAULT_VOCABULARY,
    LanguageDescription,
    Scene,
    validate_attributes,
    validate_scene,
)
from .fusion_losses import (
    FusionWeights,
    LossInputs,
    fuse_features,
    fuse_scores,
    grad_loss_cmot,
    loss_cmot,
    loss_referring,
)
from .ingest import (
    ParseError,
    PredictionSet,
    build_report,
    parse_descriptions,
    parse_predictions,
    parse_scene,
    parse_scores,
    render_description,
    write_descriptions,
    write_predictions,
    write_report,
    write_scene,
)
from .metrics import (
    DescriptionResult,
    EvalConfig,
    aggregate,
    evaluate_description,
)
from .predictor import MissingScoreError, PredictorConfig, filter_tracks
from .synth import (
    ErrorSpec,
    InfeasibleSpecError,
    generate_scene,
    ledger_to_dict,
    perturb,
    predictions_from_gt,
    score_tracks,
)

_DEFAULTS: dict[str, object] = {
    "iou_threshold": 0.5,
    "alpha": 0.01,
    "beta": 0.1,
    "t_as": 0.5,
    "t_ss": 0.75,
    "t_hs": 30.0,
    "s1": 3.0,
    "s2": 3.0,
    "s3": 1.0,
    "whole_track": False,
    "seed": 0,
}


def _effective_config(args: argparse.Namespace) -> dict[str, object]:
    config = dict(_DEFAULTS)
    for key in config:
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
    config_path = getattr(args, "config", None)
    if config_path:
        with open(config_path, encoding="utf-8") as handle:
            loaded = json.load(handle)
        unknown = set(loaded) - set(config)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        config.update(loaded)
    return config


def _predictor_config(config: dict[str, object]) -> PredictorConfig:
    return PredictorConfig(
        t_as=float(config["t_as"]),
        t_ss=float(config["t_ss"]),
        t_hs=float(config["t_hs"]),
        s1=float(config["s1"]),
        s2=float(config["s2"]),
        s3=float(config["s3"]),
        whole_track=bool(config["whole_track"]),
    )


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; overrides flags")
    parser.add_argument("--iou-threshold", dest="iou_threshold", type=float)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--t-as", dest="t_as", type=float)
    parser.add_argument("--t-ss", dest="t_ss", type=float)
    parser.add_argument("--t-hs", dest="t_hs", type=float)
    parser.add_argument("--s1", type=float)
    parser.add_argument("--s2", type=float)
    parser.add_argument("--s3", type=float)
    parser.add_argument("--whole-track", dest="whole_track", action="store_const", const=True)
    parser.add_argument("--seed", type=int)


def _eval_one(payload: tuple[Scene, LanguageDescription, tuple, EvalConfig]) -> DescriptionResult:
    scene, desc, tracks, config = payload
    return evaluate_description(scene, desc, tracks, config)


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _effective_config(args)
    scene = parse_scene(args.manifest, args.gt_dir)
    descriptions = parse_descriptions(args.descriptions, scene)
    eval_config = EvalConfig(iou_threshold=float(config["iou_threshold"]))
    root = Path(args.predictions_root)
    payloads = []
    for desc in descriptions:
        pred_dir = root / desc.id
        if not pred_dir.is_dir():
            print(
                f"warning: no predictions for description {desc.id!r}; scoring as empty",
                file=sys.stderr,
            )
            predictions = PredictionSet(desc.id, (), {})
        else:
            predictions = parse_predictions(pred_dir, desc.id, scene.num_views)
        payloads.append((scene, desc, predictions.tracks, eval_config))
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_eval_one, payloads))
    else:
        results = [_eval_one(p) for p in payloads]
    aggregate_result = aggregate(results) if results else None
    report = build_report(results, aggregate_result, config)
    if args.out:
        write_report(report, args.out)
    name_width = max([len(r.description_id) for r in results], default=11)
    name_width = max(name_width, len("description"))
    print(f"{'description':<{name_width}}  {'CVIDF1':>8}  {'CVMA':>8}")
    for result in results:
        print(
            f"{result.description_id:<{name_width}}  "
            f"{100.0 * result.cvidf1:>8.2f}  "
            f"{100.0 * max(result.cvma_raw, 0.0):>8.2f}"
        )
    if aggregate_result is not None:
        print(
            f"{'aggregate':<{name_width}}  "
            f"{100.0 * aggregate_result.cvridf1:>8.2f}  "
            f"{100.0 * aggregate_result.cvrma:>8.2f}  (n_l={aggregate_result.n_l})"
        )
    else:
        print("aggregate undefined (n_l=0)")
    return 0


def cmd_filter(args: argparse.Namespace) -> int:
    config = _effective_config(args)
    tracks_dir = Path(args.tracks)
    view_files = sorted(tracks_dir.glob("view_*.csv"))
    if not view_files:
        raise ParseError(tracks_dir, "no view_*.csv files found")
    num_views = len(view_files)
    predictions = parse_predictions(tracks_dir, "input", num_views)
    scores = dict(predictions.scores)
    if args.scores:
        scores = parse_scores(args.scores, num_views)
    weights = FusionWeights(alpha=float(config["alpha"]), beta=float(config["beta"]))
    kept = filter_tracks(predictions.tracks, scores, _predictor_config(config), weights)
    kept_scores = {
        (d.view_id, d.frame, d.identity): scores[(d.view_id, d.frame, d.identity)]
        for t in kept
        for d in t.detections
        if (d.view_id, d.frame, d.identity) in scores
    }
    out = PredictionSet(predictions.description_id, kept, kept_scores)
    write_predictions(out, args.out, num_views)
    total = sum(len(t.detections) for t in kept)
    print(f"kept {len(kept)} tracks / {total} detections -> {args.out}")
    return 0


def _sample_description(
    rng: random.Random, scene: Scene, index: int, referred: frozenset[int]
) -> LanguageDescription:
    values = {}
    for category, words in DEFAULT_VOCABULARY.words.items():
        real_words = [w for w in words if w != "null"]
        if rng.random() < 0.5:
            values[category] = rng.choice(real_words)
    attrs = AttributeSet(**values)
    return LanguageDescription(
        id=f"d{index:02d}",
        text=render_description(attrs),
        attributes=attrs,
        referred_identities=referred,
    )


def cmd_synth(args: argparse.Namespace) -> int:
    if args.descriptions < 1:
        raise ValueError("--descriptions must be at least 1")
    config = _effective_config(args)
    seed = int(config["seed"])
    scene = generate_scene(
        args.views,
        args.ids,
        args.frames,
        image_size=(args.image_width, args.image_height),
        seed=seed,
    )
    out = Path(args.out)
    write_scene(scene, out / "manifest.json", out / "gt")
    identities = sorted(scene.identities())
    rng = random.Random(seed + 1)
    descriptions = [_sample_description(rng, scene, 0, frozenset(identities))]
    for index in range(1, args.descriptions):
        size = rng.randint(1, max(1, len(identities) - 1))
        referred = frozenset(rng.sample(identities, size))
        descriptions.append(_sample_description(rng, scene, index, referred))
    write_descriptions(descriptions, out / "descriptions.json")
    base = predictions_from_gt(scene)
    for desc in descriptions:
        scores = score_tracks(
            scene,
            base,
            desc.referred_identities,
            hi=args.hi,
            lo=args.lo,
            seed=seed + 2,
            jitter=args.jitter,
        )
        scored = PredictionSet(desc.id, base.tracks, scores)
        write_predictions(scored, out / "tracks" / desc.id, scene.num_views)
    if args.errors:
        with open(args.errors, encoding="utf-8") as handle:
            raw = json.load(handle)
        spec = ErrorSpec(**raw)
        perturbed, ledger = perturb(scene, spec, seed=seed + 3, description_id=descriptions[0].id)
        write_predictions(perturbed, out / "predictions" / descriptions[0].id, scene.num_views)
        ledger_path = out / "ledger.json"
        ledger_path.write_text(
            json.dumps(ledger_to_dict(ledger), indent=2, sort_keys=True) + "\n", "utf-8"
        )
    print(f"wrote synthetic scene {scene.name!r} to {out}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    scene = parse_scene(args.manifest, args.gt_dir)
    report = validate_scene(scene)
    status = 0
    for violation in report:
        print(str(violation), file=sys.stderr)
        status = 1
    if args.descriptions:
        descriptions = parse_descriptions(args.descriptions, scene)
        for desc in descriptions:
            attr_report = validate_attributes(desc.attributes)
            for violation in attr_report:
                print(f"description {desc.id!r}: {violation}", file=sys.stderr)
                status = 1
    if status == 0:
        print("OK")
    return status


def cmd_fuse_check(args: argparse.Namespace) -> int:
    trials = args.trials
    rng = random.Random(args.seed if args.seed is not None else 0)
    failures = 0

    def check(name: str, ok: bool, detail: str = "") -> None:
        nonlocal failures
        if ok:
            print(f"PASS {name}")
        else:
            failures += 1
            print(f"FAIL {name}: {detail}")

    check(
        "fuse_scores worked example",
        abs(fuse_scores(0.42, 0.9, 0.1) - (0.42 + 0.1 * math.exp(0.9))) < 1e-12,
    )
    check("fuse_scores beta=0 identity", fuse_scores(0.37, 0.8, 0.0) == 0.37)
    check(
        "fuse_features worked example",
        fuse_features([1.0, 2.0], [100.0, -100.0], 0.01) == [2.0, 1.0],
    )
    inputs = LossInputs(l_d=1.0, l_s=0.5, l_c=0.5, w1=0.0, w2=0.0)
    check("loss_cmot worked example", abs(loss_cmot(inputs) - 1.0) < 1e-12)
    check(
        "loss_referring worked example",
        abs(loss_referring(((0.5, 0.5),), ((1, 0),)) - 0.6931471805599453) < 1e-9,
    )
    worst = 0.0
    for _ in range(trials):
        candidate = LossInputs(
            l_d=rng.uniform(0.0, 5.0),
            l_s=rng.uniform(0.0, 5.0),
            l_c=rng.uniform(0.0, 5.0),
            w1=rng.uniform(-3.0, 3.0),
            w2=rng.uniform(-3.0, 3.0),
        )
        h = 1e-5
        analytic = grad_loss_cmot(candidate)
        for axis in (0, 1):
            def shifted(delta: float) -> float:
                kwargs = {
                    "l_d": candidate.l_d,
                    "l_s": candidate.l_s,
                    "l_c": candidate.l_c,
                    "w1": candidate.w1 + (delta if axis == 0 else 0.0),
                    "w2": candidate.w2 + (delta if axis == 1 else 0.0),
                }
                return loss_cmot(LossInputs(**kwargs))

            fd = (shifted(h) - shifted(-h)) / (2 * h)
            rel = abs(analytic[axis] - fd) / max(1.0, abs(analytic[axis]))
            worst = max(worst, rel)
    check(f"gradient vs finite differences over {trials} samples", worst < 1e-6, f"worst {worst:.3e}")
    argmax_ok = True
    for _ in range(trials):
        n = rng.randint(2, 12)
        s_t = [round(rng.random(), 6) for _ in range(n)]
        s_a = [round(rng.random(), 6) for _ in range(n)]
        shift = round(rng.uniform(-5.0, 5.0), 3)
        fused = [fuse_scores(t, a, 0.1) for t, a in zip(s_t, s_a)]
        fused_shifted = [fuse_scores(t + shift, a, 0.1) for t, a in zip(s_t, s_a)]
        if max(range(n), key=fused.__getitem__) != max(range(n), key=fused_shifted.__getitem__):
            argmax_ok = False
            break
    check(f"argmax invariance under common shifts over {trials} samples", argmax_ok)
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvrmot",
        description="Cross-view referring multi-object tracking evaluation toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("evaluate", help="evaluate predictions against ground truth")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--gt-dir", dest="gt_dir", required=True)
    p_eval.add_argument("--descriptions", required=True)
    p_eval.add_argument("--predictions-root", dest="predictions_root", required=True)
    p_eval.add_argument("--out", help="report JSON path")
    p_eval.add_argument("--jobs", type=int, help="parallel workers (default: CPU count)")
    _add_config_flags(p_eval)
    p_eval.set_defaults(func=cmd_evaluate)

    p_filter = sub.add_parser("filter", help="filter tracks by fused scores")
    p_filter.add_argument("--tracks", required=True, help="directory of per-view track CSVs")
    p_filter.add_argument("--scores", help="directory of per-view score CSVs (frame,id,s_t,s_a)")
    p_filter.add_argument("--out", required=True)
    _add_config_flags(p_filter)
    p_filter.set_defaults(func=cmd_filter)

    p_synth = sub.add_parser("synth", help="generate a synthetic scene and fixtures")
    p_synth.add_argument("--views", type=int, default=3)
    p_synth.add_argument("--ids", type=int, default=5)
    p_synth.add_argument("--frames", type=int, default=30)
    p_synth.add_argument("--image-width", dest="image_width", type=int, default=1920)
    p_synth.add_argument("--image-height", dest="image_height", type=int, default=1080)
    p_synth.add_argument("--descriptions", type=int, default=1)
    p_synth.add_argument("--errors", help="JSON file with the error spec")
    p_synth.add_argument("--hi", type=float, default=0.95)
    p_synth.add_argument("--lo", type=float, default=0.05)
    p_synth.add_argument("--jitter", type=float, default=0.0)
    p_synth.add_argument("--out", required=True)
    _add_config_flags(p_synth)
    p_synth.set_defaults(func=cmd_synth)

    p_validate = sub.add_parser("validate", help="validate ground truth and descriptions")
    p_validate.add_argument("--manifest", required=True)
    p_validate.add_argument("--gt-dir", dest="gt_dir", required=True)
    p_validate.add_argument("--descriptions")
    p_validate.set_defaults(func=cmd_validate)

    p_check = sub.add_parser("fuse-check", help="numeric self-tests of fusion and losses")
    p_check.add_argument("--trials", type=int, default=1000)
    p_check.add_argument("--seed", type=int)
    p_check.set_defaults(func=cmd_fuse_check)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InfeasibleSpecError, MissingScoreError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
