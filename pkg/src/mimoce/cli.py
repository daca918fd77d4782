"""Command-line entry point: ``mimoce <subcommand> [--config C] [--seed S] [--out DIR] [--scale desk|paper]``.

Exit status is 0 on success, 1 for a configuration problem and 2 for any
failure while running.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .analysis.attention import DEFAULT_SINE_BUCKETS, attention_analysis
from .analysis.complexity import ALGORITHMS, FULL_SCALE_CONSTANTS, complexity_report
from .analysis.experiment import ConfigError, _system, estimator_kind, load_config, make_estimator, run_experiment
from .analysis.outputs import emit_outputs
from .estimators import NeuralEstimator
from .estimators.networks import NEURAL_TAGS
from .harness import Dataset, build_dataset, evaluate_mse

log = logging.getLogger("mimoce")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, default=_jsonable), encoding="utf-8")
    return path


def _jsonable(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if hasattr(o, "to_dict"):
        return o.to_dict()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _config(args) -> dict:
    overrides = {}
    if args.seed is not None:
        overrides = {"system": {"seed": str(args.seed)}, "training": {"seed": str(args.seed)}}
    return load_config(args.config, args.scale, overrides)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _base_system(conf: dict, snr=None):
    s = conf["system"]
    return _system(conf, s["n_antennas"], s["n_rf"], s["angular_spread_deg"],
                   snr if snr is not None else conf["grid"]["snr_db"])


def _dataset(args, conf):
    if getattr(args, "data", None):
        return Dataset.load(args.data)
    return build_dataset(_base_system(conf), conf["dataset"]["count"], conf["grid"]["snr_db"])


def cmd_generate(args) -> int:
    conf = _config(args)
    out = _out(args)
    ds = build_dataset(_base_system(conf), conf["dataset"]["count"], conf["grid"]["snr_db"], out_dir=out)
    _write_json(out / "config.json", conf)
    print(f"wrote {sum(len(s) for s in ds.splits.values())} samples to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    conf = _config(args)
    kind = estimator_kind(args.estimator, conf["network"])
    if not kind.neural:
        raise ConfigError("--estimator", f"{args.estimator!r} is not trainable")
    out = _out(args)
    ds = _dataset(args, conf)
    snr = tuple(conf["grid"]["snr_db"]) if conf["training"]["mixed_snr"] else conf["grid"]["snr_db"][0]
    est, report = make_estimator(kind, ds.cfg, ds, conf, snr)
    est.save(out / f"{args.estimator}.ckpt")
    (out / "train_report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "loss_curve.csv").write_text(report.to_csv(), encoding="utf-8")
    print(f"best epoch {report.best_epoch}, validation loss {report.best_val_loss:.6g}")
    return EXIT_OK


def cmd_eval(args) -> int:
    conf = _config(args)
    out = _out(args)
    ds = _dataset(args, conf)
    rows = []
    for tag in args.estimators or conf["estimators"]["names"]:
        kind = estimator_kind(tag, conf["network"])
        if kind.neural:
            continue
        est, _ = make_estimator(kind, ds.cfg, ds, conf)
        for r in evaluate_mse(est, ds.test):
            r["estimator"] = tag
            rows.append(r)
    for ckpt in args.checkpoint or []:
        est = NeuralEstimator.load(ckpt)
        rows += evaluate_mse(est, ds.test)
    cfg = ds.cfg
    for r in rows:
        r.update(angular_spread_deg=conf["system"]["angular_spread_deg"], n_antennas=cfg.n_antennas,
                 n_rf=cfg.n_rf, rf_ratio=cfg.n_rf / cfg.n_antennas, seed=cfg.master_seed, config_hash="")
    emit_outputs({"config": conf, "rows": rows}, out)
    for r in rows:
        print(f"{r['estimator']:>16s} {r['snr_db']:6.1f} dB  MSE {r['mse_db']:8.3f} dB")
    return EXIT_OK


def cmd_sweep(args) -> int:
    conf = _config(args)
    out = _out(args)
    bundle = run_experiment(conf, out, log=lambda r: print(
        f"{r['estimator']:>16s} N={r['n_antennas']} M={r['n_rf']} spread={r['angular_spread_deg']:g} "
        f"{r['snr_db']:5.1f} dB  MSE {r['mse_db']:8.3f} dB", flush=True))
    emit_outputs(bundle, out)
    print(f"{bundle['computed']} rows computed, {bundle['cached']} from cache")
    return EXIT_OK


def _buckets(text: str | None):
    if not text:
        return DEFAULT_SINE_BUCKETS
    try:
        pairs = [tuple(float(v) for v in part.split(":")) for part in text.split(",")]
    except ValueError:
        raise ConfigError("--buckets", f"expected lo:hi,lo:hi,..., got {text!r}") from None
    if any(len(p) != 2 or p[0] >= p[1] for p in pairs):
        raise ConfigError("--buckets", "each bucket needs lo < hi")
    return pairs


def cmd_attention(args) -> int:
    conf = _config(args)
    buckets = _buckets(args.buckets)
    out = _out(args)
    est = NeuralEstimator.load(args.checkpoint)
    ds = _dataset(args, conf)
    split = getattr(ds, args.split)
    j = split.snr_index(args.snr) if args.snr is not None else 0
    res = attention_analysis(est.model, est.features(split, j), split.channels.mean_aoa, buckets,
                             model_id=Path(args.checkpoint).stem)
    _write_json(out / "attention.json", res.to_dict())
    with open(out / "attention_bucket_means.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["layer", "bucket_lo", "bucket_hi", "count", "channel", "mean"])
        for layer in res.layers:
            for k, (lo, hi) in enumerate(res.buckets):
                for c, v in enumerate(res.bucket_means[layer][k]):
                    w.writerow([layer, lo, hi, res.bucket_counts[k], c, repr(float(v))])
    for layer in res.layers:
        flag = " (saturated)" if res.saturated[layer] else ""
        print(f"attention layer {layer}{flag}: bucket distances\n{res.distances[layer]}")
    return EXIT_OK


def cmd_complexity(args) -> int:
    constants = dict(FULL_SCALE_CONSTANTS)
    if args.config:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        try:
            with open(args.config, encoding="utf-8") as f:
                cp.read_file(f)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(args.config, str(exc)) from None
        if cp.has_section("complexity"):
            for k, v in cp["complexity"].items():
                if k not in FULL_SCALE_CONSTANTS:
                    raise ConfigError(f"complexity.{k}", "unknown constant")
                default = FULL_SCALE_CONSTANTS[k]
                try:
                    constants[k] = (v.strip().lower() in ("1", "true", "yes", "on")) if isinstance(default, bool) \
                        else type(default)(v)
                except ValueError:
                    raise ConfigError(f"complexity.{k}", f"bad value {v!r}") from None
    if args.no_acquisition:
        constants["include_acquisition"] = False
    if args.keep_final_attention:
        constants["drop_final_attention"] = False
    algorithms = args.algorithms or list(ALGORITHMS)
    reports = [complexity_report(a, constants) for a in algorithms]
    out = _out(args)
    _write_json(out / "complexity.json", [r.to_dict() for r in reports])
    with open(out / "complexity.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["algorithm", "flops", "params", "reference_flops", "reference_params", "flops_rel", "params_rel"])
        for r in reports:
            ref = r.reference or (None, None)
            d = r.discrepancy() or {}
            w.writerow([r.algorithm, r.total_flops, r.total_params, ref[0], ref[1], d.get("flops_rel"),
                        d.get("params_rel")])
    for r in reports:
        print(f"{r.algorithm:>14s}  FLOPs {r.total_flops:.4e}  params {r.total_params:.4e}")
    return EXIT_OK


def cmd_report(args) -> int:
    out = Path(args.out)
    src = Path(args.bundle) if args.bundle else out / "results.json"
    try:
        bundle = json.loads(src.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(str(src), f"cannot read result bundle: {exc}") from None
    paths = emit_outputs(bundle, _out(args))
    for p in paths:
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--scale", choices=("paper", "desk"), default="desk")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="mimoce", description="Massive-MIMO channel estimation laboratory.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("generate", parents=[common], help="generate and save a dataset").set_defaults(func=cmd_generate)

    t = sub.add_parser("train", parents=[common], help="train one network")
    t.add_argument("--estimator", required=True, choices=NEURAL_TAGS)
    t.add_argument("--data", help="dataset directory from 'generate' (default: generate in memory)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", parents=[common], help="evaluate classical estimators and checkpoints")
    e.add_argument("--data")
    e.add_argument("--estimators", nargs="*")
    e.add_argument("--checkpoint", nargs="*")
    e.set_defaults(func=cmd_eval)

    sub.add_parser("sweep", parents=[common], help="run a cached grid experiment").set_defaults(func=cmd_sweep)

    a = sub.add_parser("attention", parents=[common], help="attention maps bucketed by mean-AoA sine")
    a.add_argument("--checkpoint", required=True)
    a.add_argument("--data")
    a.add_argument("--split", choices=("train", "val", "test"), default="val")
    a.add_argument("--snr", type=float)
    a.add_argument("--buckets", help="sine ranges as lo:hi,lo:hi,...")
    a.set_defaults(func=cmd_attention)

    c = sub.add_parser("complexity", parents=[common], help="closed-form FLOPs and parameter counts")
    c.add_argument("--algorithms", nargs="*", choices=list(ALGORITHMS))
    c.add_argument("--no-acquisition", action="store_true")
    c.add_argument("--keep-final-attention", action="store_true")
    c.set_defaults(func=cmd_complexity)

    r = sub.add_parser("report", parents=[common], help="re-emit CSV/JSON outputs from a result bundle")
    r.add_argument("--bundle", help="results.json (default: <out>/results.json)")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"mimoce: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"mimoce: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - every failure maps to one exit status
        log.debug("failure", exc_info=True)
        print(f"mimoce: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
