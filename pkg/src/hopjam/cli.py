"""Command-line entry point.

Subcommands: synth, tfa, dataset, train, eval, report. Every subcommand
accepts the global flags --seed, --config, --out, --threads, --preset; the
HOPJAM_THREADS environment variable overrides --threads. Exit codes:

    0  success
    2  usage or configuration error (also malformed input files)
    3  missing input artifact
    4  numerical failure (training divergence, non-finite values)

All outputs are written atomically (temp file + rename): a failing command
never leaves partial files behind.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import dataset, imgprep, pipeline, presets, sigsynth, siamese, tfa
from .errors import (
    DivergenceError,
    HopjamError,
    MissingInputError,
    NumericalError,
    ConfigurationError,
)
from .fileio import atomic_write_text

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING_INPUT = 3
EXIT_NUMERICAL = 4


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0,
                        help="master seed; every randomized stage derives "
                             "its stream from it (default: 0)")
    common.add_argument("--config", metavar="FILE",
                        help="JSON file overlaying the preset run config")
    common.add_argument("--out", default=".", metavar="DIR",
                        help="output directory (default: current directory)")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads for sample-parallel stages; "
                             "the HOPJAM_THREADS env var overrides this")
    common.add_argument("--preset", choices=sorted(presets.PRESETS),
                        default="desk",
                        help="base run configuration (default: desk)")

    parser = argparse.ArgumentParser(
        prog="hopjam",
        description="Frequency-hopping interference synthesis, composite "
                    "time-frequency imaging, and Siamese classification.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common],
                       help="synthesize one scenario to a signal file")
    p.add_argument("--spec", required=True, metavar="FILE",
                   help="ScenarioSpec JSON (optionally with a 'grid' section)")

    p = sub.add_parser("tfa", parents=[common],
                       help="render spectrograms and images for a signal file")
    p.add_argument("--signal", required=True, metavar="FILE",
                   help="signal file written by 'synth'")
    p.add_argument("--transform", default="all",
                   choices=["wavelet", "mhd", "bjd", "all"],
                   help="which transform to render (default: all)")

    sub.add_parser("dataset", parents=[common],
                   help="generate the labeled corpus and manifest")

    p = sub.add_parser("train", parents=[common],
                       help="train the network on a corpus")
    p.add_argument("--corpus", required=True, metavar="DIR",
                   help="corpus directory holding manifest.jsonl")
    p.add_argument("--iterations", type=int,
                   help="override the preset iteration count")
    p.add_argument("--pairs", type=int,
                   help="override the preset pairs per iteration")

    p = sub.add_parser("eval", parents=[common],
                       help="support-set evaluation of a checkpoint")
    p.add_argument("--corpus", required=True, metavar="DIR")
    p.add_argument("--checkpoint", required=True, metavar="FILE")

    p = sub.add_parser("report", parents=[common],
                       help="emit figure data (CSV) and example images")
    p.add_argument("--corpus", required=True, metavar="DIR")
    p.add_argument("--eval-json", metavar="FILE",
                   help="eval report to tabulate")
    p.add_argument("--trace-csv", metavar="FILE",
                   help="loss trace to copy into the report")
    return parser


def resolve_threads(args) -> int:
    env = os.environ.get("HOPJAM_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigurationError(
                f"HOPJAM_THREADS must be an integer, got {env!r}") from exc
    return max(1, args.threads)


def resolve_run_config(args) -> presets.RunConfig:
    cfg = presets.get_preset(args.preset)
    if args.config:
        if not os.path.exists(args.config):
            raise MissingInputError(f"config file {args.config} not found")
        with open(args.config, "r", encoding="utf-8") as f:
            overlay = json.load(f)
        cfg = presets.run_config_from_dict(overlay, base=cfg)
    return cfg


def _write_csv(path: str, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args, run_cfg) -> int:
    if not os.path.exists(args.spec):
        raise MissingInputError(f"scenario file {args.spec} not found")
    with open(args.spec, "r", encoding="utf-8") as f:
        raw = json.load(f)
    grid_spec = raw.pop("grid", None)
    scenario = sigsynth.scenario_from_dict(raw)
    if args.seed:
        scenario = sigsynth.ScenarioSpec(
            fh=scenario.fh, interferences=scenario.interferences,
            jsr_db=scenario.jsr_db, noise_snr_db=scenario.noise_snr_db,
            rng_seed=args.seed)
    if grid_spec is not None:
        grid = sigsynth.SamplingGrid.from_duration(
            float(grid_spec["sample_rate_hz"]), float(grid_spec["duration_s"]))
    else:
        grid = run_cfg.corpus.grid()

    desired, jam = sigsynth.scenario_parts(scenario, grid)
    received = sigsynth.mix(desired, [jam], scenario.noise_snr_db,
                            noise_seed=scenario.rng_seed)
    os.makedirs(args.out, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.spec))[0]
    out_path = os.path.join(args.out, stem + ".sig")
    sigsynth.write_signal(out_path, received, scenario=scenario,
                          seed=scenario.rng_seed)
    measured = sigsynth.measure_jsr(jam, desired)
    print(f"wrote {out_path} ({grid.n_samples} samples at "
          f"{grid.sample_rate_hz:g} Hz); measured JSR {measured:.2f} dB")
    return EXIT_OK


def cmd_tfa(args, run_cfg) -> int:
    if not os.path.exists(args.signal):
        raise MissingInputError(f"signal file {args.signal} not found")
    signal, sidecar = sigsynth.read_signal(args.signal)
    kinds = list(tfa.TRANSFORM_KINDS) if args.transform == "all" \
        else [args.transform]
    grid = run_cfg.corpus.tf
    os.makedirs(args.out, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.signal))[0]

    spectrograms = {}
    for kind in kinds:
        sp = tfa.transform(signal, grid, kind)
        spectrograms[kind] = sp
        base = os.path.join(args.out, f"{stem}_{kind}")
        tfa.write_spectrogram(base + ".spec", sp)
        imgprep.write_pgm(base + ".pgm", tfa.to_gray(sp))
        print(f"wrote {base}.spec and {base}.pgm")

    if args.transform == "all":
        if sidecar.get("scenario_spec") is not None:
            scenario = sigsynth.scenario_from_dict(sidecar["scenario_spec"])
            band = sigsynth.scenario_band_hz(scenario, signal.grid)
        else:
            band = grid.freq_range_hz
        comp = pipeline.compose_channels(spectrograms, band,
                                         run_cfg.corpus.prep)
        ppm_path = os.path.join(args.out, f"{stem}_composite.ppm")
        imgprep.write_ppm(ppm_path, comp)
        atomic_write_text(ppm_path + ".json", json.dumps({
            "format_version": dataset.COMPOSITE_FORMAT_VERSION,
            "source": {"signal": os.path.basename(args.signal),
                       "spectrograms": [f"{stem}_{k}.spec" for k in kinds]},
            "pipeline_params": {
                "band_hz": list(band),
                "prep": {"a_min": run_cfg.corpus.prep.a_min,
                         "a_max": run_cfg.corpus.prep.a_max,
                         "margin_frac": run_cfg.corpus.prep.margin_frac,
                         "side": run_cfg.corpus.prep.side},
            },
        }, sort_keys=True, indent=2))
        print(f"wrote {ppm_path}")
    return EXIT_OK


def cmd_dataset(args, run_cfg) -> int:
    out_dir = os.path.join(args.out, "corpus")
    manifest = dataset.generate_corpus(run_cfg.corpus, args.seed, out_dir,
                                       threads=resolve_threads(args))
    records = dataset.load_manifest(manifest)
    n_train = sum(r.split == "train" for r in records)
    print(f"wrote {manifest}: {len(records)} samples "
          f"({n_train} train / {len(records) - n_train} test)")
    return EXIT_OK


def _load_corpus(corpus_dir: str):
    manifest = os.path.join(corpus_dir, dataset.MANIFEST_NAME)
    if not os.path.exists(manifest):
        raise MissingInputError(f"no manifest at {manifest}")
    return dataset.load_manifest(manifest)


def cmd_train(args, run_cfg) -> int:
    records = _load_corpus(args.corpus)
    train_cfg = run_cfg.train
    overrides = {"seed": args.seed}
    if args.iterations is not None:
        overrides["iterations"] = args.iterations
    if args.pairs is not None:
        overrides["pairs_per_iteration"] = args.pairs
    import dataclasses
    train_cfg = dataclasses.replace(train_cfg, **overrides)

    params, trace = siamese.train(run_cfg.net, train_cfg, records,
                                  args.corpus)
    os.makedirs(args.out, exist_ok=True)
    ckpt = os.path.join(args.out, "model.ckpt")
    siamese.save_checkpoint(ckpt, params, run_cfg.net,
                            step=train_cfg.iterations)
    _write_csv(os.path.join(args.out, "loss_trace.csv"),
               ["iteration", "loss"],
               [(i, f"{v:.8f}") for i, v in enumerate(trace)])
    atomic_write_text(os.path.join(args.out, "train_summary.json"),
                      json.dumps({
                          "iterations": train_cfg.iterations,
                          "pairs_per_iteration": train_cfg.pairs_per_iteration,
                          "total_pairs": train_cfg.iterations
                          * train_cfg.pairs_per_iteration,
                          "final_loss": float(trace[-1]),
                          "initial_loss": float(trace[0]),
                          "seed": train_cfg.seed,
                      }, sort_keys=True, indent=2))
    print(f"wrote {ckpt} and loss_trace.csv "
          f"(final loss {trace[-1]:.4f}, initial {trace[0]:.4f})")
    return EXIT_OK


def cmd_eval(args, run_cfg) -> int:
    records = _load_corpus(args.corpus)
    if not any(r.split == "test" for r in records):
        raise MissingInputError("manifest has an empty test split")
    if not os.path.exists(args.checkpoint):
        raise MissingInputError(f"checkpoint {args.checkpoint} not found")
    params, net_cfg, _, _ = siamese.load_checkpoint(args.checkpoint)
    report = siamese.evaluate(params, net_cfg, records, args.corpus,
                              k_support=run_cfg.eval.k_support,
                              n_draws=run_cfg.eval.n_draws, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    atomic_write_text(os.path.join(args.out, "eval.json"),
                      json.dumps(report, sort_keys=True, indent=2))
    _write_csv(os.path.join(args.out, "accuracy_vs_jsr.csv"),
               ["jsr_db", "accuracy"],
               [(jsr, f"{acc:.6f}")
                for jsr, acc in sorted(report["per_jsr_accuracy"].items())])
    _write_csv(os.path.join(args.out, "confusion.csv"),
               ["true_class"] + [str(c) for c in report["class_ids"]],
               [[cid] + row for cid, row in zip(report["class_ids"],
                                                report["confusion"])])
    print(f"overall accuracy {report['overall_accuracy']:.4f}; "
          f"per-JSR mean {report['mean_per_jsr_accuracy']:.4f}; "
          f"wrote eval.json, accuracy_vs_jsr.csv, confusion.csv")
    return EXIT_OK


def cmd_report(args, run_cfg) -> int:
    records = _load_corpus(args.corpus)
    out_dir = os.path.join(args.out, "report")
    os.makedirs(out_dir, exist_ok=True)
    written = []

    if args.eval_json:
        if not os.path.exists(args.eval_json):
            raise MissingInputError(f"{args.eval_json} not found")
        with open(args.eval_json, "r", encoding="utf-8") as f:
            report = json.load(f)
        _write_csv(os.path.join(out_dir, "accuracy_vs_jsr.csv"),
                   ["jsr_db", "accuracy"],
                   sorted((float(k), v)
                          for k, v in report["per_jsr_accuracy"].items()))
        written.append("accuracy_vs_jsr.csv")
    if args.trace_csv:
        if not os.path.exists(args.trace_csv):
            raise MissingInputError(f"{args.trace_csv} not found")
        with open(args.trace_csv, "r", encoding="utf-8") as f:
            atomic_write_text(os.path.join(out_dir, "loss_trace.csv"),
                              f.read())
        written.append("loss_trace.csv")

    # one example composite per class from the test split
    seen = set()
    for record in records:
        if record.split != "test" or record.class_id in seen:
            continue
        seen.add(record.class_id)
        comp = imgprep.read_ppm(os.path.join(args.corpus, record.image_path))
        name = f"class{record.class_id:02d}_{record.sample_id}.ppm"
        imgprep.write_ppm(os.path.join(out_dir, name), comp)
        written.append(name)
    print(f"wrote {len(written)} report files under {out_dir}")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "tfa": cmd_tfa,
    "dataset": cmd_dataset,
    "train": cmd_train,
    "eval": cmd_eval,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        run_cfg = resolve_run_config(args)
        return COMMANDS[args.command](args, run_cfg)
    except (DivergenceError, NumericalError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except MissingInputError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except FileNotFoundError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except (HopjamError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
