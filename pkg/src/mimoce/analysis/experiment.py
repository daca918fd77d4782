"""Grid experiments: generate -> fit/train -> evaluate, with a per-point result cache.

Config files are INI-style (sections of ``key = value``); list values are
comma separated. See ``docs/config.md`` for the schema. A result row is cached
under ``<out>/cache/<hash>.json`` where the hash covers everything that
determines that row, so an interrupted or repeated sweep only computes what
is missing.
"""

from __future__ import annotations

import configparser
import hashlib
import itertools
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .. import __version__
from ..channel import SystemConfig
from ..estimators import (EstimatorKind, LSEstimator, MMSERegionalEstimator, MMSESingleEstimator,
                          SeparateLSEstimator, build_cnn, build_fnn, build_had_cnn)
from ..harness import TrainConfig, build_dataset, evaluate_mse, train, train_mixed_snr

__all__ = ["ConfigError", "SCALES", "load_config", "validate_config", "run_experiment", "build_network",
           "make_estimator", "point_hash"]


class ConfigError(ValueError):
    """Schema violation; ``path`` names the offending ``section.key``."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _ints(v):
    return [int(x) for x in v]


# section -> key -> (kind, default)
SCHEMA = {
    "system": {
        "n_antennas": ("int", 64), "n_rf": ("int", 16), "n_users": ("int", 10), "pilot_length": ("int", 10),
        "n_paths": ("int", 20), "angular_spread_deg": ("float", 5.0), "seed": ("int", 0),
    },
    "dataset": {"count": ("int", 20000), "ccm_count": ("int", 0)},
    "grid": {
        "snr_db": ("floats", [20.0]), "angular_spread_deg": ("floats", None), "n_antennas": ("ints", None),
        "rf_ratio": ("floats", None),
    },
    "estimators": {"names": ("strs", ["ls", "mmse-single"])},
    "network": {
        "n_blocks": ("int", 2), "filters": ("int", 32), "l_in": ("int", 7), "l_hidden": ("int", 5),
        "l_out": ("int", 1), "reduction": ("int", 2), "fnn_hidden": ("pair", (8, 128)),
        "plain_widths": ("ints", [256, 512]), "region_width_deg": ("float", 3.0), "sine_sharing": ("bool", True),
    },
    "training": {
        "batch_size": ("int", 50), "learning_rate": ("float", 1e-3), "max_epochs": ("int", 500),
        "decay_patience": ("int", 10), "stop_patience": ("int", 25), "decay_factor": ("float", 0.1),
        "mixed_snr": ("bool", False), "seed": ("int", 0),
    },
    "run": {"workers": ("int", 1)},
}

SCALES = {
    "desk": {},
    "paper": {
        "system": {"n_antennas": 128, "n_rf": 32},
        "dataset": {"count": 200000},
        "network": {"n_blocks": 4, "filters": 96, "fnn_hidden": (16, 192)},
        "training": {"batch_size": 500},
    },
}


def _parse(kind: str, raw, path: str):
    if not isinstance(raw, str):
        return raw
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        items = [s.strip() for s in raw.split(",") if s.strip()]
        if kind == "floats":
            return [float(s) for s in items]
        if kind == "ints":
            return [int(s) for s in items]
        if kind == "strs":
            return items
        if kind == "pair":
            parts = raw.lower().replace("x", ",").split(",")
            f, c = (int(p) for p in parts)
            return (f, c)
    except ValueError:
        raise ConfigError(path, f"expected {kind}, got {raw!r}") from None
    raise ConfigError(path, f"unknown kind {kind}")


def validate_config(raw: dict, scale: str = "desk") -> dict:
    """Fill defaults (scale preset first) and type-check every key."""
    if scale not in SCALES:
        raise ConfigError("scale", f"unknown scale {scale!r}")
    out = {}
    for section, keys in SCHEMA.items():
        given = dict(raw.get(section, {}))
        preset = SCALES[scale].get(section, {})
        sec = {}
        for key, (kind, default) in keys.items():
            path = f"{section}.{key}"
            value = given.pop(key, preset.get(key, default))
            sec[key] = None if value is None else _parse(kind, value, path)
        if given:
            bad = sorted(given)[0]
            raise ConfigError(f"{section}.{bad}", "unknown key")
        out[section] = sec
    unknown = set(raw) - set(SCHEMA) - {"DEFAULT"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown section")
    for name in out["estimators"]["names"]:
        try:
            EstimatorKind(name)
        except ValueError as exc:
            raise ConfigError("estimators.names", str(exc)) from None
    s = out["system"]
    try:
        _system(out, s["n_antennas"], s["n_rf"], s["angular_spread_deg"])
    except ValueError as exc:
        raise ConfigError("system", str(exc)) from None
    c, f = out["network"]["fnn_hidden"][1], out["network"]["filters"]
    if c % out["network"]["reduction"] or f % out["network"]["reduction"]:
        raise ConfigError("network.reduction", "must divide the attention channel counts")
    if out["dataset"]["count"] % 5:
        raise ConfigError("dataset.count", "must be divisible by 5 for the 3:1:1 split")
    return out


def load_config(path=None, scale: str = "desk", overrides: dict | None = None) -> dict:
    raw: dict = {}
    if path is not None:
        cp = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as f:
                cp.read_file(f)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(str(path), f"cannot read config: {exc}") from None
        raw = {s: dict(cp[s]) for s in cp.sections()}
    for section, vals in (overrides or {}).items():
        raw.setdefault(section, {}).update(vals)
    return validate_config(raw, scale)


def _system(conf: dict, n: int, m: int, spread_deg: float, snr=None) -> SystemConfig:
    s = conf["system"]
    return SystemConfig(n_antennas=n, n_rf=m, n_users=s["n_users"], pilot_length=s["pilot_length"],
                        n_paths=s["n_paths"], angular_spread=math.radians(spread_deg),
                        snr_db=tuple(snr) if snr is not None else conf["grid"]["snr_db"][0], master_seed=s["seed"])


def _system_points(conf: dict):
    s, g = conf["system"], conf["grid"]
    spreads = g["angular_spread_deg"] or [s["angular_spread_deg"]]
    ns = g["n_antennas"] or [s["n_antennas"]]
    ratios = g["rf_ratio"] or [s["n_rf"] / s["n_antennas"]]
    for spread, n, ratio in itertools.product(spreads, ns, ratios):
        m = max(1, int(round(n * ratio)))
        yield {"angular_spread_deg": float(spread), "n_antennas": int(n), "n_rf": m}


def estimator_kind(tag: str, net: dict) -> EstimatorKind:
    return EstimatorKind(tag, n_blocks=net["n_blocks"], filters=net["filters"], l_in=net["l_in"],
                         l_hidden=net["l_hidden"], l_out=net["l_out"], reduction=net["reduction"],
                         hidden=tuple(net["fnn_hidden"]), plain_widths=tuple(net["plain_widths"]),
                         region_width_deg=net["region_width_deg"], sine_sharing=net["sine_sharing"])


def build_network(kind: EstimatorKind, cfg: SystemConfig, seed: int = 0):
    if kind.tag in ("cnn", "cnn-att"):
        return build_cnn(kind, cfg.n_antennas, seed)
    if kind.tag in ("fnn", "fnn-att"):
        return build_fnn(kind, 2 * cfg.n_rf, cfg.n_antennas, seed)
    if kind.tag in ("had-cnn", "had-cnn-att"):
        return build_had_cnn(kind, cfg.n_rf, cfg.n_antennas, seed)
    raise ValueError(f"{kind.tag!r} is not a network")


def train_config(conf: dict, snr) -> TrainConfig:
    t = conf["training"]
    mixed = np.ndim(snr) > 0
    return TrainConfig(batch_size=t["batch_size"], learning_rate=t["learning_rate"], max_epochs=t["max_epochs"],
                       decay_patience=t["decay_patience"], stop_patience=t["stop_patience"],
                       decay_factor=t["decay_factor"], snr_db=tuple(snr) if mixed else float(snr),
                       loss="weighted-mse" if mixed else "mse", seed=t["seed"])


def make_estimator(kind: EstimatorKind, cfg: SystemConfig, dataset, conf: dict, snr=None, ccm_split=None):
    """Fit or train one estimator; returns (estimator, train report or None)."""
    if kind.tag == "ls":
        return LSEstimator(), None
    if kind.tag == "mmse-single":
        return MMSESingleEstimator().fit(ccm_split or dataset.train), None
    if kind.tag == "mmse-regional":
        return MMSERegionalEstimator(kind.region_width_deg, kind.sine_sharing).fit(ccm_split or dataset.train), None
    if kind.tag == "separate-ls":
        return SeparateLSEstimator(cfg.n_rf), None
    model = build_network(kind, cfg, conf["training"]["seed"])
    tcfg = train_config(conf, snr)
    if np.ndim(snr) > 0:
        return train_mixed_snr(model, dataset, tcfg)
    return train(model, dataset, tcfg)


def point_hash(conf: dict, point: dict, tag: str, snr: float) -> str:
    kind = EstimatorKind(tag)
    key = {"version": 1, "system": conf["system"], "dataset": conf["dataset"], "point": point,
           "estimator": tag, "snr_db": snr, "grid_snr": conf["grid"]["snr_db"]}
    if kind.neural:
        key["network"] = conf["network"]
        key["training"] = conf["training"]
    elif tag == "mmse-regional":
        key["region"] = [conf["network"]["region_width_deg"], conf["network"]["sine_sharing"]]
    raw = json.dumps(key, sort_keys=True, default=list).encode("utf-8")
    return hashlib.sha256(raw).hexdigest()[:16]


def _run_point(conf: dict, point: dict, todo: list[tuple[str, float, str]]) -> list[dict]:
    """Compute the listed (estimator, snr, hash) rows for one system point."""
    snrs = conf["grid"]["snr_db"]
    cfg = _system(conf, point["n_antennas"], point["n_rf"], point["angular_spread_deg"], snrs)
    t0 = time.perf_counter()
    ds = build_dataset(cfg, conf["dataset"]["count"], snrs)
    ccm_split = None
    if conf["dataset"]["ccm_count"]:
        ccm_cfg = SystemConfig(**{**asdict(cfg), "master_seed": cfg.master_seed + 1})
        ccm_split = build_dataset(ccm_cfg, conf["dataset"]["ccm_count"], snrs[:1], modes=("full",)).train
    gen_time = time.perf_counter() - t0
    rows = []
    by_tag: dict[str, list] = {}
    for tag, snr, h in todo:
        by_tag.setdefault(tag, []).append((snr, h))
    for tag, items in by_tag.items():
        kind = estimator_kind(tag, conf["network"])
        if kind.neural and not conf["training"]["mixed_snr"]:
            fits = [([snr], snr) for snr, _ in items]
        elif kind.neural:
            fits = [([s for s, _ in items], tuple(snrs))]
        else:
            fits = [([s for s, _ in items], None)]
        hashes = dict(items)
        for eval_snrs, train_snr in fits:
            t1 = time.perf_counter()
            est, report = make_estimator(kind, cfg, ds, conf, train_snr, ccm_split)
            fit_time = time.perf_counter() - t1
            for r in evaluate_mse(est, ds.test, eval_snrs):
                r.update(point)
                r["estimator"] = tag
                r["rf_ratio"] = point["n_rf"] / point["n_antennas"]
                r["seed"] = conf["system"]["seed"]
                r["config_hash"] = hashes[r["snr_db"]]
                r["fit_time"] = fit_time
                r["generate_time"] = gen_time
                if report is not None:
                    r["best_epoch"] = report.best_epoch
                    r["stop_epoch"] = report.stop_epoch
                rows.append(r)
    return rows


def run_experiment(config, out_dir=None, scale: str = "desk", overrides: dict | None = None, log=None) -> dict:
    """Run every (estimator, grid point) pair not already in the cache; return the result bundle."""
    conf = config if isinstance(config, dict) and "system" in config and "grid" in config else \
        load_config(config, scale, overrides)
    cache = None
    if out_dir is not None:
        cache = Path(out_dir) / "cache"
        cache.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    rows, jobs, cached = [], [], 0
    for point in _system_points(conf):
        todo = []
        for tag in conf["estimators"]["names"]:
            for snr in conf["grid"]["snr_db"]:
                h = point_hash(conf, point, tag, snr)
                hit = cache / f"{h}.json" if cache is not None else None
                if hit is not None and hit.exists():
                    rows.append(json.loads(hit.read_text(encoding="utf-8")))
                    cached += 1
                else:
                    todo.append((tag, snr, h))
        if todo:
            jobs.append((point, todo))
    workers = conf["run"]["workers"]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_point, [conf] * len(jobs), *zip(*jobs)))
    else:
        results = [_run_point(conf, p, todo) for p, todo in jobs]
    computed = 0
    for point_rows in results:
        for r in point_rows:
            if cache is not None:
                (cache / f"{r['config_hash']}.json").write_text(json.dumps(r, sort_keys=True), encoding="utf-8")
            rows.append(r)
            computed += 1
            if log:
                log(r)
    order = {t: i for i, t in enumerate(conf["estimators"]["names"])}
    rows.sort(key=lambda r: (r["angular_spread_deg"], r["n_antennas"], r["n_rf"], order.get(r["estimator"], 99),
                             r["snr_db"]))
    return {
        "config": conf,
        "rows": rows,
        "computed": computed,
        "cached": cached,
        "provenance": {
            "package_version": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
            "seeds": {"system": conf["system"]["seed"], "training": conf["training"]["seed"]},
            "wall_time": time.perf_counter() - t0,
        },
    }
