"""``vccgm`` command line: synth-data, inspect-vicinity, train, eval, report.

Exit codes: 0 success, 2 usage or config error, 3 data error, 4 numerical abort.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import os
import platform
import sys

import numpy as np

from . import __version__
from .errors import ConfigError, DataError, NumericalError, VccgmError
from .imbalance_synth import (
    FAMILIES,
    ImbalanceSpec,
    default_modes,
    make_imbalanced,
    make_toy_dataset,
    read_dataset,
    write_csv,
    write_dataset,
    write_histogram,
)
from .label_index import build_index
from .vicinity import build_adaptive_batch, hard_weights, hybrid_weights, soft_weights, VicinityParams

EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 2, 3, 4


class UsageError(VccgmError):
    pass


# ---------------------------------------------------------------------- manifest


def _digest(obj):
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


def write_manifest(out_dir, command, config, seed, inputs, outputs, started):
    import scipy

    manifest = {
        "command": command,
        "config_digest": _digest(config),
        "config": config,
        "seed": seed,
        "inputs": [os.path.abspath(p) for p in inputs],
        "outputs": [os.path.abspath(p) for p in outputs],
        "started": started,
        "finished": _now(),
        "versions": {
            "vccgm": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _parent(path):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    return d


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


# ---------------------------------------------------------------------- synth-data


def cmd_synth_data(args):
    started = _now()
    family_cls = FAMILIES[args.family]
    family = family_cls(span=args.span) if args.family in ("ring", "helix") else family_cls()
    full = make_toy_dataset(
        args.n_labels, args.per_label, family, rng_seed=args.seed, raw_range=(args.raw_min, args.raw_max), interior=True
    )
    modes = tuple(_floats(args.modes)) if args.modes else default_modes(full.distinct_raw(), args.pattern)
    spec = ImbalanceSpec(
        modes=modes, decay_rate=args.decay, peak_count=args.peak, noise_std=args.noise_std, pattern=args.pattern
    )
    ds, _ = make_imbalanced(full, spec, args.seed)
    out_dir = _parent(args.out)
    writer = write_csv if args.out.endswith(".csv") else write_dataset
    writer(args.out, ds)
    hist = os.path.join(out_dir, "label_histogram.csv")
    write_histogram(hist, ds)
    outputs = [args.out, hist]
    if args.full_out:
        (write_csv if args.full_out.endswith(".csv") else write_dataset)(args.full_out, full)
        outputs.append(args.full_out)
    config = {k: v for k, v in vars(args).items() if k != "func"}
    config["modes"] = list(modes)
    write_manifest(out_dir, "synth-data", config, args.seed, [], outputs, started)
    print(f"wrote {ds.n} samples over {ds.distinct_raw().size} labels to {args.out}")


# ---------------------------------------------------------------------- inspect-vicinity


def cmd_inspect_vicinity(args):
    started = _now()
    data = read_dataset(args.data)
    index = build_index(data.y_raw, data.raw_min, data.raw_max)
    centers = np.linspace(0.0, 1.0, args.centers) if not args.y_c else np.asarray(_floats(args.y_c))
    out_dir = _parent(args.out)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y_c", "n_av", "kappa_l", "kappa_r", "kappa", "nu", "n_c"])
        rows = {}
        for n_av in _ints(args.n_av):
            av = build_adaptive_batch(index, centers, n_av, args.decay_exponent)
            for i, c in enumerate(centers):
                vals = [av[k][i] for k in ("kappa_left", "kappa_right", "kappa", "nu")]
                rows[(n_av, i)] = VicinityParams(float(c), *map(float, vals), int(av["n_c"][i]), n_av)
                w.writerow([repr(float(c)), n_av] + [repr(float(v)) for v in vals] + [int(av["n_c"][i])])
    outputs = [args.out]
    if args.weights_out:
        y = data.y
        with open(args.weights_out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["y_c", "n_av", "sample_index", "label", "weight"])
            for (n_av, i), p in rows.items():
                if args.mode == "hybrid":
                    wv = hybrid_weights(y, p.y_c, p, args.threshold)
                elif args.mode == "soft":
                    wv = soft_weights(y, p.y_c, p.nu, args.threshold)
                else:
                    wv = hard_weights(y, p.y_c, p.kappa)
                for j, wt in zip(wv.indices, wv.weights):
                    w.writerow([repr(p.y_c), n_av, int(j), repr(float(y[j])), repr(float(wt))])
        outputs.append(args.weights_out)
    config = {k: v for k, v in vars(args).items() if k != "func"}
    write_manifest(out_dir, "inspect-vicinity", config, None, [args.data], outputs, started)


# ---------------------------------------------------------------------- train


_OVERRIDES = ("steps", "seed", "vicinity_mode", "n_av", "batch_size", "learning_rate", "checkpoint_every")


def _train_config(args):
    from .trainer import TrainConfig, load_config

    if args.config is None:
        cfg = TrainConfig()
    elif not os.path.exists(args.config):
        raise UsageError(f"config file {args.config} does not exist")
    else:
        cfg = load_config(args.config)
    changes = {k: getattr(args, k) for k in _OVERRIDES if getattr(args, k, None) is not None}
    if "n_av" in changes and changes["n_av"] != "heuristic":
        changes["n_av"] = int(changes["n_av"])
    return cfg.replace(**changes) if changes else cfg


def _run_one(cfg, data, data_path, out_dir, command):
    from .trainer import dump_config, train

    started = _now()
    os.makedirs(out_dir, exist_ok=True)
    dump_config(cfg, os.path.join(out_dir, "config.json"))
    state = train(cfg, data, out_dir)
    outputs = sorted(os.path.join(out_dir, f) for f in os.listdir(out_dir) if f != "manifest.json")
    write_manifest(out_dir, command, cfg.to_dict(), cfg.seed, [data_path], outputs, started)
    return state


def cmd_train(args):
    from .trainer import expand_ablation

    cfg = _train_config(args)
    data = read_dataset(args.data)
    if args.ablation:
        started = _now()
        variants = expand_ablation(cfg, args.ablation)
        os.makedirs(args.out, exist_ok=True)
        runs = []
        for name, vcfg in variants:
            run_dir = os.path.join(args.out, name)
            _run_one(vcfg, data, args.data, run_dir, f"train --ablation {args.ablation}")
            runs.append(run_dir)
            print(f"finished {name}")
        write_manifest(args.out, f"train --ablation {args.ablation}", cfg.to_dict(), cfg.seed, [args.data], runs, started)
    else:
        _run_one(cfg, data, args.data, args.out, "train")
        print(f"finished {cfg.steps} steps in {args.out}")


# ---------------------------------------------------------------------- eval


def cmd_eval(args):
    from .evalsuite import RingLabelOracle, evaluate
    from .models import generator_from_checkpoint, train_surrogate_regressor

    started = _now()
    data = read_dataset(args.data)
    gen, meta = generator_from_checkpoint(args.ckpt, args.which)
    if args.regressor == "oracle":
        if data.family is None or data.family.name != "ring":
            raise UsageError("--regressor oracle needs a ring-family dataset")
        regressor = RingLabelOracle(data.family)
    else:
        reg_data = read_dataset(args.regressor_data) if args.regressor_data else data
        regressor = train_surrogate_regressor(reg_data.x, reg_data.y, seed=args.seed)
    centers = np.linspace(0.0, 1.0, args.centers)
    report = evaluate(
        gen,
        data,
        regressor,
        centers=centers,
        n_fake_per_center=args.n_fake,
        window_radius=args.window_radius,
        seed=args.seed,
        meta={"checkpoint": os.path.basename(args.ckpt), "step": meta.get("step")},
    )
    out_dir = _parent(args.out)
    report.write_csv(args.out)
    summary_path = os.path.splitext(args.out)[0] + "_summary.json"
    summary = {**report.aggregates(), **report.meta, "skipped_centers": report.skipped}
    if getattr(regressor, "warning", None):
        summary["regressor_warning"] = regressor.warning
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    config = {k: v for k, v in vars(args).items() if k != "func"}
    inputs = [args.ckpt, args.data] + ([args.regressor_data] if args.regressor_data else [])
    write_manifest(out_dir, "eval", config, args.seed, inputs, [args.out, summary_path], started)
    agg = report.aggregates()
    print(f"mean fd {agg['mean_fd']:.5g}  label score {agg['mean_label_score']:.5g}  diversity {agg['mean_diversity']:.5g}")


# ---------------------------------------------------------------------- report


def _find_runs(paths, report_name):
    runs = []
    for p in paths:
        if os.path.exists(os.path.join(p, report_name)):
            runs.append(p)
            continue
        subs = sorted(
            os.path.join(p, s)
            for s in (os.listdir(p) if os.path.isdir(p) else [])
            if os.path.exists(os.path.join(p, s, report_name))
        )
        runs.extend(subs or [p])
    return runs


def cmd_report(args):
    from .evalsuite import read_report

    started = _now()
    runs = _find_runs(args.runs, args.report_name)
    rows, absent, curves = [], [], []
    for run in runs:
        path = os.path.join(run, args.report_name)
        if not os.path.exists(path):
            absent.append(run)
            continue
        rep = read_report(path)
        name = os.path.basename(os.path.normpath(run))
        fd = rep["fd"]
        rows.append(
            {
                "run": name,
                "mean_fd": float(np.nanmean(fd)) if np.isfinite(fd).any() else float("nan"),
                "mean_label_score": float(np.mean(rep["label_score"])),
                "mean_diversity": float(np.mean(rep["diversity"])),
                "n_centers": int(fd.size),
            }
        )
        for i in range(fd.size):
            curves.append([name] + [rep[c][i] for c in ("center", "fd", "label_score", "diversity")])
    rows.sort(key=lambda r: (np.inf if np.isnan(r["mean_fd"]) else r["mean_fd"], r["run"]))
    os.makedirs(args.out, exist_ok=True)
    cols = ["run", "mean_fd", "mean_label_score", "mean_diversity", "n_centers"]
    with open(os.path.join(args.out, "summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([r["run"]] + [repr(r[c]) if isinstance(r[c], float) else r[c] for c in cols[1:]])
    with open(os.path.join(args.out, "curves.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "center", "fd", "label_score", "diversity"])
        for row in curves:
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
    lines = ["# Run summary", "", "| run | mean fd | mean label score | mean diversity | centers |", "|---|---|---|---|---|"]
    for r in rows:
        lines.append(
            f"| {r['run']} | {r['mean_fd']:.5g} | {r['mean_label_score']:.5g} | {r['mean_diversity']:.5g} | {r['n_centers']} |"
        )
    if absent:
        lines += ["", "Runs without a report:", ""] + [f"- {a}" for a in absent]
    with open(os.path.join(args.out, "summary.md"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    outputs = [os.path.join(args.out, f) for f in ("summary.csv", "curves.csv", "summary.md")]
    config = {k: v for k, v in vars(args).items() if k != "func"}
    write_manifest(args.out, "report", config, None, runs, outputs, started)
    print(f"{len(rows)} runs summarized, {len(absent)} without a report")


# ---------------------------------------------------------------------- parser


def build_parser():
    p = argparse.ArgumentParser(prog="vccgm", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth-data", help="generate an imbalanced toy dataset")
    s.add_argument("--pattern", choices=["unimodal", "bimodal", "trimodal"], default="unimodal")
    s.add_argument("--decay", type=float, default=0.1)
    s.add_argument("--peak", type=int, default=49)
    s.add_argument("--noise-std", type=float, default=5.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--n-labels", type=int, default=99)
    s.add_argument("--per-label", type=int, default=49)
    s.add_argument("--raw-min", type=float, default=0.0)
    s.add_argument("--raw-max", type=float, default=100.0)
    s.add_argument("--family", choices=sorted(FAMILIES), default="ring")
    s.add_argument("--span", type=float, default=0.75, help="fraction of the circle the ring covers")
    s.add_argument("--modes", help="comma-separated raw mode positions (default: evenly placed)")
    s.add_argument("--full-out", help="also write the balanced dataset the subset is drawn from")
    s.set_defaults(func=cmd_synth_data)

    s = sub.add_parser("inspect-vicinity", help="adaptive vicinity parameters over a center grid")
    s.add_argument("--data", required=True)
    s.add_argument("--n-av", required=True, help="comma-separated list")
    s.add_argument("--centers", type=int, default=101)
    s.add_argument("--y-c", help="comma-separated normalized centers (overrides --centers)")
    s.add_argument("--decay-exponent", type=int, choices=[1, 2], default=2)
    s.add_argument("--out", required=True)
    s.add_argument("--weights-out")
    s.add_argument("--mode", choices=["hard", "soft", "hybrid"], default="hybrid")
    s.add_argument("--threshold", type=float, default=1e-3)
    s.set_defaults(func=cmd_inspect_vicinity)

    s = sub.add_parser("train", help="train a generator")
    s.add_argument("--config")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--ablation", choices=["table3", "grid"])
    s.add_argument("--steps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--vicinity-mode", choices=["hard", "soft", "soft_av", "hybrid_av"])
    s.add_argument("--n-av")
    s.add_argument("--batch-size", type=int)
    s.add_argument("--learning-rate", type=float)
    s.add_argument("--checkpoint-every", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="evaluate a checkpoint")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--which", choices=["ema", "live"], default="ema")
    s.add_argument("--regressor", choices=["surrogate", "oracle"], default="surrogate")
    s.add_argument("--regressor-data")
    s.add_argument("--centers", type=int, default=101)
    s.add_argument("--n-fake", type=int, default=200)
    s.add_argument("--window-radius", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("report", help="compare evaluated runs")
    s.add_argument("--runs", nargs="+", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--report-name", default="report.csv")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return exc.code
    try:
        args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"vccgm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"vccgm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"vccgm: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FileNotFoundError as exc:
        print(f"vccgm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
