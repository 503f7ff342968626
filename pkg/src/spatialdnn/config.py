"""YAML run configuration with strict key checking.

Every key has a default (see ``DEFAULTS``); unknown keys are rejected with
the line number where they appear. ``dump`` writes the fully resolved
configuration back out, and parsing that dump yields an identical config.
"""

from __future__ import annotations

import copy
import hashlib

import yaml

DEFAULTS = {
    "seed": 0,
    "replications": 5,
    "out": "results",
    "jobs": 1,
    "full_precision": False,
    "dimension": 2,
    "scenarios": [
        {"name": "scenario1", "sigma2": 1.0, "phi": 0.1, "kappa": 0.5},
        {"name": "scenario2", "sigma2": 1.0, "phi": 0.1, "kappa": 1.0},
        {"name": "scenario3", "sigma2": 1.0, "phi": 0.1, "kappa": 1.5},
        {"name": "scenario4", "sigma2": 1.0, "phi": 0.1, "kappa": 2.0},
    ],
    "designs": [
        {"lambda_n": 4.0, "n": 20, "eta_n": 0.16},
        {"lambda_n": 5.0, "n": 35, "eta_n": 0.14},
        {"lambda_n": 6.0, "n": 50, "eta_n": 0.12},
    ],
    "deltas": [0.3, 0.6, 0.8],
    "target_sites": 5,
    "response_noise_sd": 0.0,
    "guard": "warn",
    "split": {"train": 0.7, "val": 0.2, "test": 0.1},
    "train": {
        "epochs": 500,
        "batch_size": 16,
        "alpha": 0.001,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1.0e-8,
        "v1": 2.0,
        "v2": 2.0,
        "width": None,
    },
    "simulate": {"scenario": "scenario1", "lambda_n": 4.0, "n": 20, "eta_n": 0.16},
    "fit": {"scenario": "scenario1", "lambda_n": 4.0, "n": 20, "eta_n": 0.16, "site": None, "delta": 0.6},
    "ci": {
        "scenario": "scenario1",
        "alpha": 0.05,
        "ladder": [0.3, 0.6, 0.8],
        "n_ladder": [20, 35, 50],
        "sites": 1,
        "reference": "first_test",
    },
    "kl": {"bins": None, "epsilon": 1.0e-6, "replicates": "all", "sites": 1, "n": 20},
    "grid": {
        "paths": [],
        "lon": "lon",
        "lat": "lat",
        "time": "time",
        "response": "skt",
        "covariates": ["t2m", "d2m"],
        "targets": [],
        "deltas": [0.25, 0.5, 0.75],
        "guard": "raise",
    },
}

# list-of-mapping keys whose items are validated against this template
_ITEM_TEMPLATES = {
    "scenarios": DEFAULTS["scenarios"][0],
    "designs": DEFAULTS["designs"][0],
}


class ConfigError(ValueError):
    pass


def _line_index(node, prefix=()):
    """Map key paths to 1-based source lines."""
    out = {}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = prefix + (k.value,)
            out[path] = k.start_mark.line + 1
            out.update(_line_index(v, path))
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            out.update(_line_index(v, prefix + (i,)))
    return out


def _merge(template, value, path, lines):
    if isinstance(template, dict):
        if not isinstance(value, dict):
            raise ConfigError(_where(path, lines) + f"'{'.'.join(map(str, path))}' must be a mapping")
        merged = copy.deepcopy(template)
        for k, v in value.items():
            if k not in template:
                raise ConfigError(_where(path + (k,), lines) + f"unknown key '{'.'.join(map(str, path + (k,)))}'")
            merged[k] = _merge(template[k], v, path + (k,), lines)
        return merged
    if path and path[-1] in _ITEM_TEMPLATES and isinstance(value, list):
        item = _ITEM_TEMPLATES[path[-1]]
        return [_merge(item, v, path + (i,), lines) for i, v in enumerate(value)]
    return value


def _where(path, lines):
    for i in range(len(path), 0, -1):
        if path[:i] in lines:
            return f"line {lines[path[:i]]}: "
    return ""


def parse(text: str) -> dict:
    """Parse YAML text into a fully-defaulted config dict."""
    try:
        node = yaml.compose(text)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    if raw is None:
        raw = {}
    lines = _line_index(node) if node is not None else {}
    cfg = _merge(DEFAULTS, raw, (), lines)
    _validate(cfg, lines)
    return cfg


def load(path) -> dict:
    with open(path) as fh:
        return parse(fh.read())


def _validate(cfg, lines):
    def fail(path, msg):
        raise ConfigError(_where(path, lines) + msg)

    if cfg["guard"] not in ("raise", "warn", "ignore"):
        fail(("guard",), "guard must be raise, warn or ignore")
    if cfg["replications"] < 1:
        fail(("replications",), "replications must be >= 1")
    d = cfg["deltas"]
    if not d or any(b <= a for a, b in zip(d, d[1:])):
        fail(("deltas",), "deltas must be a nonempty strictly increasing list")
    if len(cfg["ci"]["ladder"]) < 2:
        fail(("ci", "ladder"), "ci.ladder needs B >= 2 radii")
    from .bessel import SUPPORTED_ORDERS

    for i, sc in enumerate(cfg["scenarios"]):
        if float(sc["kappa"]) not in SUPPORTED_ORDERS:
            fail(("scenarios", i, "kappa"), f"unsupported smoothness kappa={sc['kappa']}; supported {SUPPORTED_ORDERS}")
    names = [sc["name"] for sc in cfg["scenarios"]]
    for section in ("simulate", "fit", "ci"):
        if cfg[section]["scenario"] not in names:
            fail((section, "scenario"), f"{section}.scenario '{cfg[section]['scenario']}' is not defined in scenarios")


def dump(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=True, default_flow_style=False)


# keys that change where or how fast a run happens but never its results
RUNTIME_KEYS = ("out", "jobs")


def config_hash(cfg: dict) -> str:
    """SHA-256 of the dumped config, ignoring ``RUNTIME_KEYS``."""
    return hashlib.sha256(dump({k: v for k, v in cfg.items() if k not in RUNTIME_KEYS}).encode()).hexdigest()
