"""Run configuration: INI files with fixed sections, on top of a named preset.

Every value is typed by its preset default; unknown sections or keys are an
error.  ``LSRE_SEED`` in the environment replaces every seed.
"""
from __future__ import annotations

import configparser
import copy
import os

from . import __version__
from .asrd import ASRDConfig
from .autoencoder import TrainConfig
from .bbob import DistributionSpec
from .ela import ELAConfig
from .errors import ConfigurationError, LSREError
from .gp import GPConfig
from .optimizers import DEFAULT_POOL, REGISTRY
from .pipeline import GridSpec

SECTIONS = ("distribution", "ela", "autoencoder", "gp", "grid", "asrd", "io")
SEED_KEYS = (("distribution", "master_seed"), ("ela", "seed"), ("autoencoder", "seed"), ("gp", "seed"))

FULL_SCALE = {
    "distribution": {"dims": (2, 5, 10, 30, 50), "instances_per_function": 270, "master_seed": 0},
    "ela": {"n_samples": None, "n_pairs": 1000, "seed": 0, "max_samples": 2500,
            "samples_per_dim": 250, "min_samples": 100},
    "autoencoder": {"epochs": 300, "batch_size": 32, "learning_rate": 1e-3,
                    "lr_decay_gamma": 0.9862327, "train_fraction": 0.8, "seed": 0},
    "gp": {"pop_size": 1000, "generations": 50, "tournament_size": 50, "stopping_criteria": 1e-2,
           "p_crossover": 0.6, "p_subtree_mutation": 0.25, "p_point_mutation": 0.1,
           "p_hoist_mutation": 0.04, "p_reproduce": 0.01, "init_depth": (5, 8),
           "mutate_depth": (5, 15), "max_depth": 15, "eval_workers": 10,
           "local_search_dims": (2, 5, 10), "local_search_enabled": True, "seed": 0,
           "generational": False},
    "grid": {"B": 1.0, "K": 16},
    "asrd": {"runs_per_pair": 51, "budget_multiplier": 1e5, "success_tolerance": 1e-8,
             "histogram_bins": 10, "stagnation": False, "pool": DEFAULT_POOL},
    "io": {"workers": 1, "parallel_searches": 1},
}

# small enough to run end to end on a laptop core
DESK_OVERRIDES = {
    "distribution": {"dims": (2, 5), "instances_per_function": 5},
    "ela": {"n_pairs": 100, "max_samples": 500, "samples_per_dim": 50},
    "autoencoder": {"batch_size": 16},
    "gp": {"pop_size": 200, "generations": 20, "eval_workers": 1},
    "grid": {"K": 2},
    "asrd": {"runs_per_pair": 5, "budget_multiplier": 1e3, "stagnation": True},
}


def preset(name: str) -> dict:
    cfg = copy.deepcopy(FULL_SCALE)
    if name == "desk":
        for sec, vals in DESK_OVERRIDES.items():
            cfg[sec].update(vals)
    elif name != "paper":
        raise ConfigurationError(f"unknown preset {name!r} (paper, desk)")
    return cfg


def _parse_value(text: str, default, where):
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(text)
            return low in ("true", "yes", "1")
        if isinstance(default, tuple):
            parts = [p for p in text.replace(" ", ",").split(",") if p]
            if default and isinstance(default[0], str):
                return tuple(parts)
            return tuple(int(p) for p in parts)
        if text.lower() == "none":
            return None
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float) or default is None:
            return float(text) if ("." in text or "e" in text.lower() or default is not None) else int(text)
    except ValueError:
        raise ConfigurationError(f"{where}: cannot parse {text!r}") from None
    return text


class RunConfig:
    def __init__(self, sections: dict, source=None):
        self.sections = sections
        self.source = source
        self.validate()

    @classmethod
    def load(cls, path=None, preset_name="paper", env=None):
        cfg = preset(preset_name)
        base_dir = None
        if path is not None:
            parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
            parser.optionxform = str  # keep key case (B, K)
            try:
                with open(path) as fh:
                    parser.read_file(fh)
            except (OSError, configparser.Error) as exc:
                raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
            for sec in parser.sections():
                if sec not in cfg:
                    raise ConfigurationError(f"unknown section [{sec}]")
                for key, text in parser.items(sec):
                    if key not in cfg[sec]:
                        raise ConfigurationError(f"unknown key {key!r} in [{sec}]")
                    cfg[sec][key] = _parse_value(text, cfg[sec][key], f"[{sec}] {key}")
            base_dir = os.path.dirname(os.path.abspath(path))
        env = os.environ if env is None else env
        if env.get("LSRE_SEED"):
            try:
                seed = int(env["LSRE_SEED"])
            except ValueError:
                raise ConfigurationError(f"LSRE_SEED must be an integer, got {env['LSRE_SEED']!r}") from None
            for sec, key in SEED_KEYS:
                cfg[sec][key] = seed
        out = cls(cfg, path)
        out.base_dir = base_dir
        return out

    def validate(self):
        if set(self.sections) != set(SECTIONS):
            raise ConfigurationError(f"config must have exactly the sections {SECTIONS}")
        unknown = set(self.sections["asrd"]["pool"]) - set(REGISTRY)
        if unknown:
            raise ConfigurationError(f"unknown optimizers in pool: {sorted(unknown)}")
        try:
            self.distribution_spec(), self.ela_config(), self.train_config()
            self.gp_config(), self.grid_spec(), self.asrd_config()
        except (LSREError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"invalid configuration: {exc}") from exc

    def __getitem__(self, section):
        return self.sections[section]

    def resolve_path(self, p):
        """Relative paths in a config file are relative to that file."""
        base = getattr(self, "base_dir", None)
        return p if base is None or os.path.isabs(p) else os.path.join(base, p)

    def distribution_spec(self):
        return DistributionSpec(**self["distribution"])

    def ela_config(self):
        return ELAConfig(**self["ela"])

    def train_config(self):
        return TrainConfig(**self["autoencoder"])

    def gp_config(self):
        return GPConfig(**self["gp"], ela=self.ela_config())

    def grid_spec(self):
        return GridSpec(**self["grid"])

    def asrd_config(self):
        vals = {k: v for k, v in self["asrd"].items() if k != "pool"}
        return ASRDConfig(**vals, workers=self["io"]["workers"])

    @property
    def pool(self):
        return tuple(self["asrd"]["pool"])

    def with_overrides(self, section, **values):
        sections = copy.deepcopy(self.sections)
        sections[section].update(values)
        out = RunConfig(sections, self.source)
        out.base_dir = getattr(self, "base_dir", None)
        return out

    def to_ini(self) -> str:
        lines = [f"# resolved configuration, lsre {__version__}"]
        for sec in SECTIONS:
            lines.append(f"\n[{sec}]")
            for key, val in self.sections[sec].items():
                if isinstance(val, tuple):
                    val = ", ".join(str(v) for v in val)
                lines.append(f"{key} = {val}")
        return "\n".join(lines) + "\n"

    def echo(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "resolved_config.ini"), "w") as fh:
            fh.write(self.to_ini())
