"""Run configuration: defaults, INI config files, dotted flag overrides.

The config file is a flat key-value format with one section per module
(`[corpus]`, `[model]`, `[train]`, `[eval]`, `[run]`); command-line overrides
use `--section.key=value`.  Every artifact a run produces embeds the merged
configuration for reproducibility.
"""

from __future__ import annotations

import configparser
import json
from dataclasses import asdict
from pathlib import Path

from .corpus import CorpusConfig
from .training import TrainConfig


def default_config() -> dict:
    corpus = asdict(CorpusConfig())
    corpus["error_mix"] = list(CorpusConfig().error_mix)
    train = asdict(TrainConfig())
    # owned elsewhere: the master seed lives in [run], the re-weight switch in [eval]
    for key in ("verbose", "seed", "val_reweight"):
        train.pop(key)
    model = {
        "image_size": 64, "enc_channels": [32, 64, 128], "proto_dim": 256,
        "count_kernel": 8, "state_dim": 256, "embed_dim": 256, "attn_dim": 256,
        "coverage_channels": 128, "coverage_kernel": 11, "g_dim": 256,
        "fetch_key_dim": 128, "fetch_char_dim": 256, "drop_prob": 0.3,
        "end_count": 10.0, "max_decode_len": 64, "use_count_vector": True,
        "two_step_counting": True, "dtype": "float32",
    }
    eval_section = {
        "split": "test", "topk": 5, "reweight": True, "count_vector": True,
        "baseline": "fetcher", "batch": 64, "reweight_delta": 0.7,
    }
    return {"run": {"seed": 7, "threads": 1}, "corpus": corpus, "model": model,
            "train": train, "eval": eval_section}


def _coerce(raw: str, like):
    if isinstance(like, bool):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    if isinstance(like, (list, tuple)):
        parts = [p for p in raw.replace(",", " ").split() if p]
        elem = like[0] if len(like) else 0
        return [_coerce(p, elem) for p in parts]
    return raw


class RunConfig:
    """Merged defaults + config file + dotted overrides."""

    def __init__(self, values: dict | None = None):
        self.values = values or default_config()

    @classmethod
    def load(cls, config_path: str | Path | None = None, overrides=()) -> "RunConfig":
        cfg = cls()
        if config_path is not None:
            cfg.apply_file(config_path)
        for item in overrides:
            cfg.apply_override(item)
        return cfg

    def apply_file(self, path: str | Path) -> None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise FileNotFoundError(f"config file {path} not found")
        for section in parser.sections():
            if section not in self.values:
                raise ValueError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                self._set(section, key, raw)

    def apply_override(self, item: str) -> None:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ValueError(f"override {item!r} must look like section.key=value")
        dotted, raw = item.split("=", 1)
        section, key = dotted.split(".", 1)
        self._set(section, key, raw)

    def _set(self, section: str, key: str, raw: str) -> None:
        if section not in self.values:
            raise ValueError(f"unknown config section [{section}]")
        if key not in self.values[section]:
            raise ValueError(f"unknown key {key!r} in section [{section}]")
        self.values[section][key] = _coerce(raw, self.values[section][key])

    # -- typed views ---------------------------------------------------------
    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]

    @property
    def threads(self) -> int:
        return self.values["run"]["threads"]

    def corpus_config(self) -> CorpusConfig:
        kw = dict(self.values["corpus"])
        kw["error_mix"] = tuple(kw["error_mix"])
        return CorpusConfig(**kw)

    def model_kwargs(self) -> dict:
        kw = dict(self.values["model"])
        kw["enc_channels"] = tuple(kw["enc_channels"])
        return kw

    def train_config(self) -> TrainConfig:
        return TrainConfig(**self.values["train"])

    def eval_options(self) -> dict:
        return dict(self.values["eval"])

    def to_json(self) -> str:
        return json.dumps(self.values, indent=2, sort_keys=True)
