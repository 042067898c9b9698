"""Command-line interface.

Exit status: 0 on success, 1 on usage errors, 2 on data errors (unreadable or
inconsistent inputs, undefined metrics, invalid configuration values).
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ksora.errors import KsoraError
from ksora.harness.bundle import frame_name, read_bundle, write_bundle
from ksora.harness.codecs import read_ksal, read_pgm, read_snapshot, write_jsonl, write_ksal, write_pgm, write_snapshot
from ksora.harness.config import PipelineConfig, config_help, read_config, write_config
from ksora.harness.pipeline import Model, run_pipeline
from ksora.harness.synth import SceneSpec, synth_scene
from ksora.kos import global_ranking, select_and_augment
from ksora.metrics import evaluate_frame, write_metrics_csv, write_pr_csv

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_config(args):
    cfg = read_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "mode", None) is not None:
        overrides["emd_mode"] = args.mode
    if getattr(args, "train", None) is not None:
        overrides["train"] = args.train
    return cfg.with_overrides(**overrides)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args):
    spec = SceneSpec(
        height=args.height, width=args.width, frames=args.frames, n_static=args.static,
        mover=not args.no_mover, mover_entry=args.mover_entry, late_frame=args.late_frame,
        object_size=args.object_size, fixations_per_frame=args.fixations,
    )
    bundle = synth_scene(spec, seed=args.seed if args.seed is not None else 0)
    write_bundle(bundle, _out_dir(args))
    print(f"wrote {len(bundle)} frames to {args.out}")


def cmd_rank(args):
    cfg = _load_config(args)
    bundle = read_bundle(args.bundle)
    upto = len(bundle) if args.upto is None else min(args.upto, len(bundle))
    history = list(zip(bundle.saliency[:upto], bundle.proposals[:upto]))
    ranking = global_ranking(history, cfg.tau, cfg.normalize_conf)
    text = json.dumps(ranking.to_json())
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def cmd_select(args):
    cfg = _load_config(args)
    kos = cfg.kos_params()
    bundle = read_bundle(args.bundle)
    out = _out_dir(args)
    (out / "frames_aug").mkdir(exist_ok=True)
    reports = []
    history = []
    for t in range(len(bundle)):
        ranking = global_ranking(history, kos.tau, kos.normalize)
        f_aug, rep = select_and_augment(bundle.frames[t], bundle.saliency[t], bundle.proposals[t], ranking, kos, frame=t)
        write_pgm(out / "frames_aug" / frame_name(t, "pgm"), f_aug)
        reports.append(rep.to_json())
        history.append((bundle.saliency[t], bundle.proposals[t]))
    write_jsonl(out / "roi_reports.jsonl", reports)


def _prediction_files(pred_dir):
    d = Path(pred_dir)
    if (d / "predictions").is_dir():
        d = d / "predictions"
    if not d.is_dir():
        raise KsoraError(f"prediction directory {pred_dir} does not exist")
    return sorted(d.glob("*.ksal"))


def cmd_eval(args):
    cfg = _load_config(args)
    files = _prediction_files(args.pred)
    gt = Path(args.gt)
    records = []
    for fp in files:
        fx_path = gt / "fixations" / f"{fp.stem}.pgm"
        if not fx_path.exists():
            raise KsoraError(f"no ground-truth fixation map {fx_path} for {fp}")
        pred = read_ksal(fp).astype(np.float64)
        fix = read_pgm(fx_path) > 0
        dens_path = gt / "density" / f"{fp.stem}.ksal"
        density = read_ksal(dens_path).astype(np.float64) if dens_path.exists() else None
        for other, arr in ((fx_path, fix), (dens_path, density)):
            if arr is not None and arr.shape != pred.shape:
                raise KsoraError(
                    f"dimension mismatch: {fp} is {pred.shape[1]}x{pred.shape[0]}, "
                    f"{other} is {arr.shape[1]}x{arr.shape[0]}"
                )
        records.append(evaluate_frame(
            fp.stem, pred, density, fix, emd_mode=cfg.emd_mode,
            n_thresholds=cfg.pr_thresholds, auc_negatives=cfg.auc_negatives,
        ))
    out = _out_dir(args)
    write_metrics_csv(records, out / "metrics.csv")
    write_pr_csv(records, out / "pr.csv")


def cmd_run(args):
    cfg = _load_config(args)
    bundle = read_bundle(args.bundle)
    model = None
    if args.lstm_params and len(bundle):
        h, w = bundle.shape
        model = Model.build(cfg, h, w).with_lstm_tensors(read_snapshot(args.lstm_params))
    result = run_pipeline(bundle, cfg, model)
    out = _out_dir(args)
    (out / "predictions").mkdir(exist_ok=True)
    for t, pred in enumerate(result.predictions):
        write_ksal(out / "predictions" / frame_name(t, "ksal"), pred)
    write_jsonl(out / "roi_reports.jsonl", [r.to_json() for r in result.reports])
    write_config(out / "config.txt", cfg)
    if len(bundle):
        used = model or Model.build(cfg, *bundle.shape)
        write_snapshot(out / "lstm_params.snap", used.lstm_tensors())
    if result.records is not None:
        write_metrics_csv(result.records, out / "metrics.csv")
        write_pr_csv(result.records, out / "pr.csv")


def _add_common(p, *, out_required=True, mode=False, train=False):
    p.add_argument("--config", metavar="PATH", help="key=value config file (see 'ksora --help')")
    p.add_argument("--seed", type=int, metavar="N", help="override the config seed")
    p.add_argument("--out", metavar="DIR", required=out_required, help="output directory")
    if mode:
        p.add_argument("--mode", choices=("exact", "downsampled"), help="EMD granularity")
    if train:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--train", dest="train", action="store_true", default=None, help="apply dropout")
        g.add_argument("--eval", dest="train", action="store_false", help="no dropout (default)")


def build_parser():
    parser = _Parser(
        prog="ksora",
        description="Video saliency pipeline: object ranking with roi enhancement, weighted feature fusion and a convLSTM head, plus fixation metrics.",
        epilog="configuration keys (key=value lines, '#' comments):\n" + config_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="render a synthetic moving-object bundle")
    _add_common(p)
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--static", type=int, default=2, help="number of static distractors")
    p.add_argument("--no-mover", action="store_true")
    p.add_argument("--mover-entry", type=int, default=0)
    p.add_argument("--late-frame", type=int, help="frame at which a new object appears")
    p.add_argument("--object-size", type=int, default=6)
    p.add_argument("--fixations", type=int, default=8, help="fixations per frame")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("rank", help="dump the class ranking of a bundle as JSON")
    p.add_argument("bundle")
    _add_common(p, out_required=False)
    p.add_argument("--upto", type=int, help="rank frames 0..UPTO-1 only")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("select", help="write augmented frames and roi reports")
    p.add_argument("bundle")
    _add_common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("eval", help="score prediction maps against ground truth")
    p.add_argument("pred", help="directory of KSAL predictions (or a run output dir)")
    p.add_argument("gt", help="directory holding fixations/ and optionally density/")
    _add_common(p, mode=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", help="run the full pipeline on a bundle")
    p.add_argument("bundle")
    _add_common(p, mode=True, train=True)
    p.add_argument("--lstm-params", metavar="PATH", help="convLSTM parameter snapshot to load")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (KsoraError, OSError, ValueError) as exc:
        print(f"ksora: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
