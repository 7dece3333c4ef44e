"""Model configuration and the named-parameter store."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .. import checkpoint
from ..tensor import Parameter, xavier


@dataclass
class ModelConfig:
    """Dimensions and switches; defaults are the desk-scale settings.

    ``num_symbols`` is the grammar vocabulary size N (radicals including
    registered variants, plus the ten operators).  The decoder's output space
    adds one end-of-sequence token on top.
    """

    num_symbols: int
    num_classes: int
    image_size: int = 64
    enc_channels: tuple = (32, 64, 128)
    proto_dim: int = 256
    count_kernel: int = 8
    state_dim: int = 256
    embed_dim: int = 256
    attn_dim: int = 256
    coverage_channels: int = 128
    coverage_kernel: int = 11
    g_dim: int = 256
    fetch_key_dim: int = 128
    fetch_char_dim: int = 256
    drop_prob: float = 0.3
    end_count: float = 10.0
    max_decode_len: int = 64
    use_count_vector: bool = True
    two_step_counting: bool = True
    dtype: str = "float32"

    def __post_init__(self):
        if self.image_size % 8:
            raise ValueError("image_size must be divisible by 8")
        if len(self.enc_channels) != 3:
            raise ValueError("encoder uses exactly three blocks")

    @property
    def feat_hw(self) -> int:
        return self.image_size // 8

    @property
    def feat_len(self) -> int:
        return self.feat_hw * self.feat_hw

    @property
    def feat_channels(self) -> int:
        return self.enc_channels[-1]

    @property
    def num_outputs(self) -> int:
        return self.num_symbols + 1

    @property
    def end_token(self) -> int:
        return self.num_symbols

    def to_dict(self) -> dict:
        d = asdict(self)
        d["enc_channels"] = list(self.enc_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["enc_channels"] = tuple(d["enc_channels"])
        return cls(**d)


class ModelParams:
    """Config plus the ordered, named parameter dictionary."""

    def __init__(self, config: ModelConfig, params: dict[str, Parameter]):
        self.config = config
        self.params = params

    def __getitem__(self, name: str) -> Parameter:
        return self.params[name]

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def named(self) -> dict[str, Parameter]:
        return self.params

    def fetcher_parameters(self) -> list[Parameter]:
        return [p for n, p in self.params.items() if n.startswith("fet.")]

    def non_fetcher_parameters(self) -> list[Parameter]:
        return [p for n, p in self.params.items() if not n.startswith("fet.")]

    def counter_parameters(self) -> list[Parameter]:
        return [p for n, p in self.params.items() if n.startswith("counter.")]

    def copy_values(self) -> dict[str, np.ndarray]:
        return {n: p.data.copy() for n, p in self.params.items()}

    def load_values(self, arrays: dict[str, np.ndarray]) -> None:
        for name, arr in arrays.items():
            if name not in self.params:
                raise KeyError(f"unknown parameter {name!r} in checkpoint")
            if self.params[name].data.shape != arr.shape:
                raise ValueError(f"parameter {name!r} shape {arr.shape} does not match "
                                 f"model shape {self.params[name].data.shape}")
            self.params[name].data = arr.astype(self.params[name].data.dtype)
        missing = set(self.params) - set(arrays)
        if missing:
            raise ValueError(f"checkpoint is missing parameters: {sorted(missing)[:4]}...")


def build_params(config: ModelConfig, seed: int = 0) -> ModelParams:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 17]))
    dt = np.dtype(config.dtype)
    params: dict[str, Parameter] = {}

    def par(name: str, shape, zero: bool = False) -> None:
        data = np.zeros(shape, dtype=dt) if zero else xavier(rng, shape, dt)
        params[name] = Parameter(data, name=name)

    cin = 1
    for bi, cout in enumerate(config.enc_channels):
        par(f"enc.b{bi}.conv0.w", (cout, cin, 3, 3))
        par(f"enc.b{bi}.conv0.b", (cout,), zero=True)
        par(f"enc.b{bi}.conv1.w", (cout, cout, 3, 3))
        par(f"enc.b{bi}.conv1.b", (cout,), zero=True)
        cin = cout

    c = config.feat_channels
    n, n_out, m = config.num_symbols, config.num_outputs, config.num_classes
    par("counter.proto", (n, config.proto_dim))
    par("counter.w_r", (c, config.proto_dim))
    par("counter.q", (n, 1, config.count_kernel, config.count_kernel))

    ds, de, da = config.state_dim, config.embed_dim, config.attn_dim
    dg, dh = config.g_dim, config.coverage_channels
    par("dec.embed", (n_out, de))
    par("dec.start_embed", (de,))
    par("dec.w_init", (c, ds))
    par("dec.gru1.wx", (de, 3 * ds))
    par("dec.gru1.wh", (ds, 3 * ds))
    par("dec.gru1.b", (3 * ds,), zero=True)
    par("dec.gru2.wx", (c, 3 * ds))
    par("dec.gru2.wh", (ds, 3 * ds))
    par("dec.gru2.b", (3 * ds,), zero=True)
    par("dec.w_att", (ds, da))
    par("dec.u_att", (c, da))
    par("dec.w_h", (dh, da))
    par("dec.w", (da,))
    par("dec.cov.w", (dh, 1, config.coverage_kernel, config.coverage_kernel))
    par("dec.cov.b", (dh,), zero=True)
    par("dec.w_v", (de, dg))
    par("dec.w_s", (ds, dg))
    par("dec.w_a", (c, dg))
    par("dec.w_c", (n_out, dg))
    par("dec.w_widen", (dg, 2 * dg))
    par("dec.w_p", (dg, n_out))

    par("fet.u_q", (c, config.fetch_key_dim))
    par("fet.u_k", (dg, config.fetch_key_dim))
    par("fet.u_v", (dg, config.fetch_char_dim))
    par("fet.u_f", (config.fetch_char_dim, m))
    return ModelParams(config, params)


def save_model(path: str | Path, mp: ModelParams) -> None:
    checkpoint.save_params(path, {n: p.data for n, p in mp.params.items()},
                           meta=mp.config.to_dict())


def load_model(path: str | Path) -> ModelParams:
    meta = checkpoint.load_meta(path)
    if meta is None:
        raise FileNotFoundError(f"missing config sidecar for checkpoint {path}")
    config = ModelConfig.from_dict(meta)
    mp = build_params(config, seed=0)
    mp.load_values(checkpoint.load_params(path))
    return mp
