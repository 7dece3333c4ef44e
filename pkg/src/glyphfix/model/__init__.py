"""The glyph model: encoder, radical counter, sequence decoder, class fetcher."""

from .config import ModelConfig, ModelParams, build_params, load_model, save_model
from .counter import count_forward, counter_loss, counts_from_energy, energy_maps
from .decoder import (
    DecoderState,
    DecodeTrace,
    build_initial_counts,
    decode_sequence,
    decode_step,
    decoder_loss,
    reweight,
)
from .encoder import encode
from .fetcher import InvalidTraceError, fetch_forward, fetcher_loss

__all__ = [
    "DecodeTrace",
    "DecoderState",
    "InvalidTraceError",
    "ModelConfig",
    "ModelParams",
    "build_initial_counts",
    "build_params",
    "count_forward",
    "counter_loss",
    "counts_from_energy",
    "decode_sequence",
    "decode_step",
    "decoder_loss",
    "encode",
    "energy_maps",
    "fetch_forward",
    "fetcher_loss",
    "load_model",
    "reweight",
    "save_model",
]
