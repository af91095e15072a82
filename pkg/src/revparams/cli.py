"""Command-line interface: one binary for the whole pipeline.

Subcommands: filters, features, ground-truth, synth, train, estimate,
evaluate, bench. Exit codes: 0 success, 1 usage error, 2 data error.
Diagnostics go to stderr; results go to stdout or the paths given by
--out style flags.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys

import numpy as np

from .acoustics import Rir, compute_drr, estimate_t60_from_edc, schroeder_edc
from .audio_io import read_wav
from .corpus import build_corpus, read_manifest_items
from .estimator import estimate_utterance, frame_posteriors, pipeline_for
from .evaluate import evaluate, measure_rtf
from .frontend import FrameParams, log_mel_spectrogram
from .gabor import build_diagonal_filterbank, export_filterbank, extract_features
from .grid import ClassGrid, build_vocabulary, cell_of
from .mlp import TrainConfig, load_model, save_model, train


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1 (not 2)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _wav_files(directory: str) -> list:
    files = sorted(glob.glob(os.path.join(directory, "*.wav")))
    if not files:
        raise ValueError(f"no .wav files in {directory}")
    return files


def _csv_floats(text: str) -> list:
    return [float(part) for part in text.split(",") if part]


def cmd_filters(args) -> int:
    bank = build_diagonal_filterbank(n_mels=args.n_mels)
    export_filterbank(bank, args.out)
    _log(f"wrote {len(bank.filters)} filters (feature_dim={bank.feature_dim}) to {args.out}")
    return 0


def cmd_features(args) -> int:
    audio = read_wav(args.input, channel=args.channel)
    params = FrameParams()
    bank = build_diagonal_filterbank(params.n_mels, params.frame_rate())
    feats = extract_features(log_mel_spectrogram(audio, params), bank)
    if args.out:
        np.savetxt(args.out, feats.values, delimiter=",")
        _log(f"wrote {feats.values.shape[0]} x {feats.values.shape[1]} features to {args.out}")
    else:
        np.savetxt(sys.stdout, feats.values, delimiter=",")
    return 0


def cmd_ground_truth(args) -> int:
    rir = Rir(read_wav(args.rir, channel=args.channel))
    drr = compute_drr(rir)
    try:
        t60 = estimate_t60_from_edc(schroeder_edc(rir))
    except ValueError as exc:
        _log(f"warning: T60 not measurable ({exc})")
        t60 = float("nan")
    print(f"t60_s={t60:.3f} drr_db={drr:.2f} peak_sample={rir.peak_index}")
    return 0


def cmd_synth(args) -> int:
    speech = [read_wav(p) for p in _wav_files(args.speech_dir)]
    rirs = [Rir(read_wav(p)) for p in _wav_files(args.rir_dir)]
    kinds = [k for k in args.noise.split(",") if k]
    manifest = build_corpus(
        speech,
        rirs,
        kinds,
        _csv_floats(args.snr),
        ClassGrid(),
        seed=args.seed,
        out_dir=args.out,
        jobs=args.jobs,
    )
    _log(f"wrote {len(manifest.items)} items and manifest.csv to {args.out}")
    return 0


def cmd_train(args) -> int:
    items = read_manifest_items(args.manifest)
    grid = ClassGrid()
    vocabulary = build_vocabulary(grid, [(it.t60, it.drr) for it in items])
    for it in items:
        expected = vocabulary.class_id_of(cell_of(grid, it.t60, it.drr))
        if it.class_id != expected:
            raise ValueError(
                f"manifest class id {it.class_id} disagrees with grid cell (expected {expected})"
            )
    params = FrameParams()
    bank = build_diagonal_filterbank(params.n_mels, params.frame_rate())
    _log(f"extracting features for {len(items)} items")
    dataset = []
    for it in items:
        audio = read_wav(it.path)
        feats = extract_features(log_mel_spectrogram(audio, params), bank)
        dataset.append((feats, it.class_id))
    config = TrainConfig(
        learning_rate=args.lr,
        momentum=args.momentum,
        batch_size=args.batch_size,
        epochs=args.epochs,
        hidden_units=args.hidden,
        seed=args.seed,
        validation_fraction=args.val_fraction,
    )
    _log(f"training {bank.feature_dim} -> {config.hidden_units} -> {len(vocabulary)}")
    model, history = train(dataset, config, grid, vocabulary, params)
    print("epoch\ttrain_ce\ttrain_acc\tval_ce\tval_acc")
    for row in history:
        print(
            f"{row['epoch']}\t{row['train_ce']:.6f}\t{row['train_acc']:.4f}"
            f"\t{row['val_ce']:.6f}\t{row['val_acc']:.4f}"
        )
    save_model(model, args.out)
    _log(f"saved model to {args.out}")
    return 0


def cmd_estimate(args) -> int:
    model = load_model(args.model)
    bank, params = pipeline_for(model)
    if args.per_frame:
        os.makedirs(args.per_frame, exist_ok=True)

    def run_one(path):
        audio = read_wav(path, channel=args.channel)
        if args.per_frame:
            post = frame_posteriors(audio, model, bank, params)
            stem = os.path.splitext(os.path.basename(path))[0]
            np.savetxt(os.path.join(args.per_frame, f"{stem}.posteriors.csv"), post, delimiter=",")
        return estimate_utterance(audio, model, bank, params)

    if args.jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            estimates = list(pool.map(run_one, args.inputs))
    else:
        estimates = [run_one(path) for path in args.inputs]
    for path, est in zip(args.inputs, estimates):
        print(f"{path}\t{est.t60_hat:.3f}\t{est.drr_hat:.1f}\t{est.class_id}\t{est.n_frames}")
    return 0


def cmd_evaluate(args) -> int:
    items = read_manifest_items(args.manifest)
    model = load_model(args.model)
    bank, params = pipeline_for(model)
    result = evaluate(items, model, bank, params, jobs=args.jobs)
    for item_id, reason in result.excluded:
        _log(f"excluded item {item_id}: {reason}")

    with open(args.out, "w") as fh:
        fh.write("item,t60,drr,t60_hat,drr_hat,e_t60,e_drr,noise,snr,audio_s,proc_s\n")
        for r in result.records:
            snr = "" if r.snr_db is None else f"{r.snr_db:g}"
            fh.write(
                f"{r.item_id},{r.t60:.6f},{r.drr:.6f},{r.t60_hat:.6f},{r.drr_hat:.6f},"
                f"{r.e_t60:.6f},{r.e_drr:.6f},{r.noise_kind},{snr},{r.audio_s:.6f},{r.proc_s:.6f}\n"
            )
    _log(f"wrote {len(result.records)} rows to {args.out} ({len(result.excluded)} excluded)")

    if args.stats:
        groups = []
        for (kind, snr), axes in result.stats.items():
            groups.append(
                {
                    "noise_kind": kind,
                    "snr_db": snr,
                    "t60": axes["t60"].to_dict(),
                    "drr": axes["drr"].to_dict(),
                }
            )
        payload = {
            "groups": groups,
            "rtf": result.rtf.to_dict(),
            "excluded": len(result.excluded),
        }
        with open(args.stats, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if args.rtf:
        print(json.dumps(result.rtf.to_dict(), sort_keys=True))
    return 0


def cmd_bench(args) -> int:
    model = load_model(args.model)
    bank, params = pipeline_for(model)
    runs, features_s, mlp_s = [], [], []
    for path in _wav_files(args.audio_dir):
        audio = read_wav(path)
        timings = {}
        estimate_utterance(audio, model, bank, params, timings=timings)
        runs.append((timings["features_s"] + timings["mlp_s"], audio.duration))
        features_s.append(timings["features_s"])
        mlp_s.append(timings["mlp_s"])
    report = measure_rtf(runs, stage_runs={"features": features_s, "mlp_forward": mlp_s})
    print(json.dumps(report.to_dict(), sort_keys=True))
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="revparams", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=42, help="seed for all stochastic steps")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filters", help="export the Gabor filterbank for inspection")
    p.add_argument("--out", required=True)
    p.add_argument("--n-mels", type=int, default=26)
    p.set_defaults(func=cmd_filters)

    p = sub.add_parser("features", help="extract Gabor features from one WAV")
    p.add_argument("input")
    p.add_argument("--out", default=None)
    p.add_argument("--channel", type=int, default=0)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("ground-truth", help="non-blind (T60, DRR) from an RIR WAV")
    p.add_argument("rir")
    p.add_argument("--channel", type=int, default=0)
    p.set_defaults(func=cmd_ground_truth)

    p = sub.add_parser("synth", help="synthesize a labeled noisy reverberant corpus")
    p.add_argument("--speech-dir", required=True)
    p.add_argument("--rir-dir", required=True)
    p.add_argument("--noise", default="ambient,babble,fan")
    p.add_argument("--snr", default="0,10,20")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the MLP from a corpus manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--hidden", type=int, default=256)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("estimate", help="blind (T60, DRR) estimation for WAV files")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--model", required=True)
    p.add_argument("--channel", type=int, default=0)
    p.add_argument("--per-frame", default=None, help="directory for per-frame posterior CSVs")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("evaluate", help="run the estimator over a manifest and summarize errors")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stats", default=None)
    p.add_argument("--rtf", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="measure single-threaded real-time factor")
    p.add_argument("--model", required=True)
    p.add_argument("--audio-dir", required=True)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 0
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
