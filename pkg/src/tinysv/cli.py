"""Command-line interface.

Results go to stdout (or ``--out``); errors go to stderr as one JSON line
``{"error": <category>, "message": ...}`` and the process exits with the
category's code (see ``tinysv.errors``).
"""

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bench, features, scoring, store
from .budget import REFERENCE, budget_report
from .config import ModelConfig
from .errors import IoError, MissingAudio, SVError
from .pipeline import Model
from .sequence import layer_schedule


def _read_text(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise IoError(f"no such file: {path}") from None


def _load_config(path):
    return ModelConfig.from_json(_read_text(path)) if path else None


def _load_model(args):
    return Model.load(args.model, _load_config(getattr(args, "config", None)))


def _write(out, data):
    if out in (None, "-"):
        if isinstance(data, bytes):
            sys.stdout.buffer.write(data)
            sys.stdout.buffer.flush()
        else:
            sys.stdout.write(data)
    else:
        Path(out).write_bytes(data) if isinstance(data, bytes) else Path(out).write_text(data)


def _embed_file(model, path, mode):
    return model.embed(features.read_wav(path, model.cfg.features), mode)


def cmd_init_random(args):
    cfg = _load_config(args.config) or ModelConfig().validate()
    weights = store.random_init(cfg, args.seed)
    _write(args.out, store.save_weights(cfg, weights))
    return 0


def cmd_embed(args):
    model = _load_model(args)
    emb = _embed_file(model, args.wav, args.mode)
    if args.format == "raw":
        _write(args.out, emb.astype("<f4").tobytes())
    else:
        _write(args.out, json.dumps({"embedding": [float(x) for x in emb],
                                     "dim": len(emb), "mode": args.mode}) + "\n")
    return 0


def cmd_enroll(args):
    model = _load_model(args)
    profile = scoring.enroll([_embed_file(model, p, args.mode) for p in args.wavs])
    _write(args.out, json.dumps(profile.to_dict()) + "\n")
    return 0


def cmd_verify(args):
    model = _load_model(args)
    profile = scoring.SpeakerProfile.from_dict(json.loads(_read_text(args.profile)))
    if args.threshold is not None:
        threshold = args.threshold
    elif args.threshold_from:
        threshold = json.loads(_read_text(args.threshold_from))["threshold"]
    else:
        raise SVError("verify needs --threshold or --threshold-from")
    score = scoring.cosine_score(profile.embedding, _embed_file(model, args.wav, args.mode))
    _write(args.out, json.dumps({"score": score, "threshold": threshold,
                                 "accept": bool(score >= threshold)}) + "\n")
    return 0


def evaluate_trials(model, trials, wav_root, mode="batch", jobs=1):
    """Cosine scores for every trial, in trial order."""
    root = Path(wav_root)
    paths = sorted({p for t in trials for p in (t.path_a, t.path_b)})
    for p in paths:
        if not (root / p).is_file():
            raise MissingAudio(p)

    def embed(p):
        return _embed_file(model, root / p, mode)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            embs = dict(zip(paths, pool.map(embed, paths)))
    else:
        embs = {p: embed(p) for p in paths}
    return np.array([scoring.cosine_score(embs[t.path_a], embs[t.path_b]) for t in trials])


def cmd_eval_eer(args):
    model = _load_model(args)
    trials = scoring.parse_trials(_read_text(args.trials))
    scores = evaluate_trials(model, trials, args.wav_root, args.mode, args.jobs)
    labels = np.array([t.is_target for t in trials])
    eer, threshold = scoring.compute_eer(scores, labels)
    if args.scores_out:
        Path(args.scores_out).write_text(scoring.format_scores_csv(trials, scores))
    _write(args.out, json.dumps({"eer": eer, "eer_percent": round(100 * eer, 4),
                                 "threshold": threshold, "trials": len(trials)}) + "\n")
    return 0


def cmd_bench(args):
    model = _load_model(args)
    modes = ("batch", "stream") if args.mode == "both" else (args.mode,)
    durations = [float(x) for x in args.durations.split(",")]
    records = bench.run_bench(model, durations, modes, args.runs, pacing=not args.no_pacing,
                              label=args.device_label)
    _write(args.out, bench.records_to_csv(records))
    return 0


def inspect_report(cfg):
    """JSON-ready budget plus layer schedule."""
    report = budget_report(cfg, 1.0).to_dict()
    report["schedule"] = [{"name": s.name, "in": s.in_channels, "out": s.out_channels,
                           "kernel": s.kernel, "pooled": s.pooled}
                          for s in layer_schedule(cfg.sequence)]
    report["clusters"] = cfg.vlad.clusters
    report["ghosts"] = cfg.vlad.ghosts
    report["embed_dim"] = cfg.vlad.embed_dim
    report["mfm_variant"] = cfg.sequence.mfm_variant
    return report


def format_inspect(report):
    lines = [f"TCSConv1d layers: {report['n_tcs']}  (mfm_variant={report['mfm_variant']})"]
    for s in report["schedule"]:
        rate = "pooled" if s["pooled"] else "full-rate"
        lines.append(f"  {s['name']:<20} {s['in']:>4} -> {s['out']:<4} k={s['kernel']} {rate}")
    lines.append(f"clusters K={report['clusters']}  ghosts G={report['ghosts']}  "
                 f"embedding dim={report['embed_dim']}")
    lines.append(f"receptive field: {report['receptive_field_frames']} frames; "
                 f"lookahead: {report['lookahead_input_frames']} input frames; "
                 f"end-pointing delay: {report['endpoint_delay_frames']} output frames")
    lines.append("")
    lines.append(f"{'stage':<10} {'params':>9} {'learnable':>9} {'ref':>9} {'dev%':>7} "
                 f"{'FMA/s':>12} {'ref':>12} {'dev%':>7} {'div/s':>7} {'FLOPS':>10}")
    for stage, t in report["totals"].items():
        ref = REFERENCE[stage]
        dev = t["deviation"]
        lines.append(
            f"{stage:<10} {t['params']:>9} {t['learnable']:>9} {ref['params']:>9} "
            f"{100 * dev['learnable_rel']:>+7.1f} {t['fma']:>12.1f} {ref['fma']:>12.1f} "
            f"{100 * dev['fma_per_s_rel']:>+7.1f} {t['div']:>7.0f} {t['flops']:>10.0f}")
    return "\n".join(lines) + "\n"


def cmd_inspect(args):
    cfg, _ = store.load_model(args.model, _load_config(args.config))
    report = inspect_report(cfg)
    if args.json:
        _write(args.out, json.dumps(report, indent=2) + "\n")
    else:
        _write(args.out, format_inspect(report))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="tinysv", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def model_args(sp):
        sp.add_argument("--model", required=True, help="SVW1 model file")
        sp.add_argument("--config", help="ModelConfig JSON that must match the model")
        sp.add_argument("--out", help="output file (default stdout)")

    sp = sub.add_parser("init-random", help="write a randomly initialized model")
    sp.add_argument("--config", help="ModelConfig JSON (default: built-in config)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_init_random)

    sp = sub.add_parser("embed", help="embed one WAV file")
    model_args(sp)
    sp.add_argument("--mode", choices=("batch", "stream"), default="batch")
    sp.add_argument("--format", choices=("json", "raw"), default="json")
    sp.add_argument("wav")
    sp.set_defaults(func=cmd_embed)

    sp = sub.add_parser("enroll", help="build a speaker profile from WAV files")
    model_args(sp)
    sp.add_argument("--mode", choices=("batch", "stream"), default="batch")
    sp.add_argument("wavs", nargs="+")
    sp.set_defaults(func=cmd_enroll)

    sp = sub.add_parser("verify", help="score a WAV file against a profile")
    model_args(sp)
    sp.add_argument("--mode", choices=("batch", "stream"), default="batch")
    sp.add_argument("--profile", required=True)
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--threshold-from", help="JSON written by eval-eer")
    sp.add_argument("wav")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("eval-eer", help="score a trial list and compute the EER")
    model_args(sp)
    sp.add_argument("--mode", choices=("batch", "stream"), default="batch")
    sp.add_argument("--trials", required=True)
    sp.add_argument("--wav-root", required=True)
    sp.add_argument("--scores-out", help="CSV label,path_a,path_b,score")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_eval_eer)

    sp = sub.add_parser("bench", help="batch vs stream latency")
    model_args(sp)
    sp.add_argument("--mode", choices=("batch", "stream", "both"), default="both")
    sp.add_argument("--durations", default="1,5,10", help="comma-separated seconds")
    sp.add_argument("--runs", type=int, default=5)
    sp.add_argument("--no-pacing", action="store_true", help="feed audio as fast as possible")
    sp.add_argument("--device-label")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("inspect", help="layer schedule and compute budget")
    model_args(sp)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_inspect)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SVError as exc:
        print(json.dumps({"error": exc.category, "message": str(exc)}), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
