# Copyright 2026 The TimbreLab Authors
# License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
"""Timbre autoencoder toolkit: corpus building, training, latent analysis, synthesis."""

from ._core import (
    BINS,
    FFT_SIZE,
    HOP,
    SAMPLE_RATE,
    Autoencoder,
    Corpus,
    TimbreLabError,
    classify,
    embed,
    evaluate_mse,
    mesh_report,
    model_config,
    read_wav,
    render,
    stft_magnitudes,
    train,
    write_demo_clips,
    write_wav,
)

NOTE_NAMES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")

__version__ = "0.1.0"

__all__ = [
    "BINS", "FFT_SIZE", "HOP", "SAMPLE_RATE", "NOTE_NAMES",
    "Autoencoder", "Corpus", "TimbreLabError",
    "classify", "embed", "evaluate_mse", "mesh_report", "model_config", "read_wav",
    "render", "stft_magnitudes", "train", "write_demo_clips", "write_wav",
]
