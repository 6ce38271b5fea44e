"""Run configuration: a JSON tree validated up front with field-path error messages."""
from __future__ import annotations

import copy
import json
from pathlib import Path

from .exceptions import ConfigError
from .trees.search import FEATUREFUSE_SPACE, GBT_SPACE, RF_SPACE, space_from_config, space_to_config

DEFAULTS = {
    "paths": {
        "cohort_csv": "cohort/clinical.csv",
        "image_dir": "cohort/images",
        "mask_dir": "cohort/masks",
        "output_dir": "run",
    },
    "seed": 0,
    "synth": {"n_cases": 105, "grid": [48, 48, 48], "effect": 0.8, "class_balance": 0.4},
    "radiomics": {"bin_width": 25.0, "gldm_alpha": 0.0},
    "folds": {"k": 5, "val_fraction": 0.1},
    "search": {
        "n_candidates": 1000,
        "tabular_model": "gbt",
        "featurefuse": False,
        "gbt": space_to_config(GBT_SPACE),
        "rf": space_to_config(RF_SPACE),
    },
    "gbt": {"n_rounds": 100, "base_score": 0.5},
    "train": {"learning_rate": 1e-4, "epochs": 500, "batch_size": 8, "l2": 1e-4, "noise_sigma": 0.1,
              "eval_every": 10},
    "branch": "baseline",
    "external_probs": None,
    "topk": 10,
    "threshold": 0.5,
}

# widest documented bounds per boosted-tree parameter
_GBT_ENVELOPE = {
    k: (min(GBT_SPACE[k].low, FEATUREFUSE_SPACE[k].low), max(GBT_SPACE[k].high, FEATUREFUSE_SPACE[k].high))
    for k in GBT_SPACE
}
_RF_ENVELOPE = {k: (r.low, r.high) for k, r in RF_SPACE.items()}


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"{where}: unknown field")
        replace_whole = path == "search" and key in ("gbt", "rf")  # search spaces are not merged
        if isinstance(base[key], dict) and not replace_whole:
            if not isinstance(value, dict):
                raise ConfigError(f"{where}: expected an object")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def _number(tree, path, low=None, high=None, integer=False):
    node = tree
    for part in path.split("."):
        node = node[part]
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {node!r}")
    if integer and not float(node).is_integer():
        raise ConfigError(f"{path}: expected an integer, got {node!r}")
    if low is not None and node < low or high is not None and node > high:
        raise ConfigError(f"{path}: {node} outside [{low}, {high}]")
    return node


def _check_space(space, envelope, path):
    for name, spec in space.items():
        where = f"{path}.{name}"
        if name not in envelope:
            raise ConfigError(f"{where}: unknown parameter")
        if not isinstance(spec, list) or len(spec) not in (2, 3):
            raise ConfigError(f"{where}: expected [low, high] or [low, high, decimals]")
        low, high = spec[0], spec[1]
        lo, hi = envelope[name]
        if not (lo <= low <= high <= hi):
            raise ConfigError(f"{where}: range [{low}, {high}] outside documented bounds [{lo}, {hi}]")


class RunConfig:
    """Validated configuration tree; ``cfg["search"]["n_candidates"]`` style access."""

    def __init__(self, tree: dict | None = None, base_dir="."):
        self.base_dir = Path(base_dir)
        self.tree = _merge(DEFAULTS, tree or {})
        self.validate()

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            tree = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(tree, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls(tree, path.parent)

    def __getitem__(self, key):
        return self.tree[key]

    def validate(self):
        t = self.tree
        _number(t, "seed", 0, integer=True)
        _number(t, "synth.n_cases", 4, integer=True)
        _number(t, "synth.effect", 0.0, 1.0)
        _number(t, "synth.class_balance", 0.0, 1.0)
        grid = t["synth"]["grid"]
        if not (isinstance(grid, list) and len(grid) == 3 and all(isinstance(g, int) and g >= 16 for g in grid)):
            raise ConfigError("synth.grid: expected three integers >= 16")
        _number(t, "radiomics.bin_width", 1e-9)
        _number(t, "radiomics.gldm_alpha", 0.0)
        _number(t, "folds.k", 2, integer=True)
        _number(t, "folds.val_fraction", 0.0, 0.5)
        _number(t, "search.n_candidates", 1, integer=True)
        if t["search"]["tabular_model"] not in ("gbt", "rf"):
            raise ConfigError("search.tabular_model: expected 'gbt' or 'rf'")
        if not isinstance(t["search"]["featurefuse"], bool):
            raise ConfigError("search.featurefuse: expected true or false")
        _check_space(t["search"]["gbt"], _GBT_ENVELOPE, "search.gbt")
        _check_space(t["search"]["rf"], _RF_ENVELOPE, "search.rf")
        _number(t, "gbt.n_rounds", 0, integer=True)
        _number(t, "gbt.base_score", 1e-9, 1 - 1e-9)
        _number(t, "train.learning_rate", 1e-12)
        _number(t, "train.epochs", 1, integer=True)
        _number(t, "train.batch_size", 1, integer=True)
        _number(t, "train.l2", 0.0)
        _number(t, "train.noise_sigma", 0.0)
        _number(t, "train.eval_every", 1, integer=True)
        _number(t, "topk", 1, integer=True)
        _number(t, "threshold", 0.0, 1.0)
        if t["branch"] not in ("baseline", "external"):
            raise ConfigError("branch: expected 'baseline' or 'external'")
        if t["branch"] == "external" and not t["external_probs"]:
            raise ConfigError("external_probs: required when branch is 'external'")
        for key in ("cohort_csv", "image_dir", "mask_dir", "output_dir"):
            if not isinstance(t["paths"][key], str) or not t["paths"][key]:
                raise ConfigError(f"paths.{key}: expected a non-empty string")

    def path(self, key) -> Path:
        p = Path(self.tree["paths"][key])
        return p if p.is_absolute() else self.base_dir / p

    @property
    def external_probs_path(self):
        p = self.tree["external_probs"]
        if p is None:
            return None
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def require(self, *keys):
        """Fail fast if any of the named input paths is missing."""
        for key in keys:
            if key == "external_probs":
                p = self.external_probs_path
                where = "external_probs"
            else:
                p = self.path(key)
                where = f"paths.{key}"
            if p is None or not p.exists():
                raise ConfigError(f"{where}: {p} does not exist")

    def override(self, **values):
        tree = copy.deepcopy(self.tree)
        for dotted, value in values.items():
            node = tree
            *parents, leaf = dotted.split(".")
            for part in parents:
                node = node[part]
            node[leaf] = value
        return RunConfig(tree, self.base_dir)

    def search_space(self):
        s = self.tree["search"]
        if s["tabular_model"] == "rf":
            return space_from_config(s["rf"])
        if s["featurefuse"] and s["gbt"] == DEFAULTS["search"]["gbt"]:
            return FEATUREFUSE_SPACE
        return space_from_config(s["gbt"])

    def to_json(self):
        return json.dumps(self.tree, indent=1, sort_keys=True)
