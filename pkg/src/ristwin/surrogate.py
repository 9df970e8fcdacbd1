"""Rate surrogate: feature tensors, training, prediction, recommendation.

A sample is one (location, codeword) pair rendered as a 5-channel image
over the panel grid: Re(v), Im(v), broadcast x, broadcast y, and the
per-element distance map.  The network regresses the achievable rate; the
recommended codeword for a location is the argmax of the N per-codeword
predictions, no channel state required.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .artifacts import (
    MAGIC_MODEL,
    array_from_bytes,
    array_to_bytes,
    atomic_write_bytes,
    pack_json_block,
    sha256_bytes,
    unpack_json_block,
)
from .codebook import Codebook
from .dataset import SampleSet
from .network import ModelConfig, RateNet, TrainReport, fit

N_CHANNELS = 5
MODEL_VERSION = 1
STD_FLOOR = 1e-8


@dataclass(frozen=True)
class FeatureStats:
    """Per-channel standardization moments, estimated on the training set."""

    mean: np.ndarray  # (5,)
    std: np.ndarray  # (5,), floored away from zero

    def __post_init__(self):
        if self.mean.shape != (N_CHANNELS,) or self.std.shape != (N_CHANNELS,):
            raise ValueError("stats must carry one moment pair per channel")
        if not (np.all(np.isfinite(self.mean)) and np.all(self.std > 0)):
            raise ValueError("stats must be finite with positive std")


def config_hash(cfg: ModelConfig) -> str:
    return sha256_bytes(
        json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":")).encode()
    )


def featurize(features, v: np.ndarray, n1: int, n2: int, stats: FeatureStats | None = None):
    """One sample tensor, shape (5, n1, n2).

    features is the (x, y, d) triple of a location; v is one codeword.
    Channel layout: Re(v), Im(v), x, y, d, each reshaped or broadcast onto
    the n1 x n2 element grid in the panel's flat ordering.
    """
    x, y, d = features
    n = n1 * n2
    if v.shape != (n,) or np.asarray(d).shape != (n,):
        raise ValueError("codeword and distance vector must have n1*n2 entries")
    t = np.empty((N_CHANNELS, n1, n2))
    t[0] = v.real.reshape(n1, n2)
    t[1] = v.imag.reshape(n1, n2)
    t[2] = x
    t[3] = y
    t[4] = np.asarray(d).reshape(n1, n2)
    if stats is not None:
        t = (t - stats.mean[:, None, None]) / stats.std[:, None, None]
    return t


def featurize_batch(samples: SampleSet, stats: FeatureStats | None = None) -> np.ndarray:
    """All sample tensors of a SampleSet at once, shape (m, 5, n1, n2)."""
    n1, n2 = samples.n1, samples.n2
    m = len(samples)
    v = samples.codewords[samples.cw_index]
    t = np.empty((m, N_CHANNELS, n1, n2))
    t[:, 0] = v.real.reshape(m, n1, n2)
    t[:, 1] = v.imag.reshape(m, n1, n2)
    t[:, 2] = samples.xy[samples.loc_index, 0][:, None, None]
    t[:, 3] = samples.xy[samples.loc_index, 1][:, None, None]
    t[:, 4] = samples.dvec[samples.loc_index].reshape(m, n1, n2)
    if stats is not None:
        t -= stats.mean[None, :, None, None]
        t /= stats.std[None, :, None, None]
    return t


def compute_stats(raw_tensors: np.ndarray) -> FeatureStats:
    mean = raw_tensors.mean(axis=(0, 2, 3))
    std = np.maximum(raw_tensors.std(axis=(0, 2, 3)), STD_FLOOR)
    return FeatureStats(mean=mean, std=std)


@dataclass
class SurrogateModel:
    net: RateNet
    stats: FeatureStats
    cfg: ModelConfig
    cfg_hash: str
    n1: int
    n2: int


def train(train_set: SampleSet, val_set: SampleSet, cfg: ModelConfig):
    """Fit the surrogate on flattened samples; returns (model, report)."""
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("train and val sample sets must be nonempty")
    if (train_set.n1, train_set.n2) != (val_set.n1, val_set.n2):
        raise ValueError("train/val panel dimensions differ")
    x_train = featurize_batch(train_set)
    stats = compute_stats(x_train)
    x_train -= stats.mean[None, :, None, None]
    x_train /= stats.std[None, :, None, None]
    x_val = featurize_batch(val_set, stats)

    net = RateNet(cfg, N_CHANNELS, train_set.n1, train_set.n2)
    report = fit(net, x_train, train_set.rate, x_val, val_set.rate, cfg)
    model = SurrogateModel(
        net=net,
        stats=stats,
        cfg=cfg,
        cfg_hash=config_hash(cfg),
        n1=train_set.n1,
        n2=train_set.n2,
    )
    return model, report


def _location_tensors(model: SurrogateModel, features, cb: Codebook) -> np.ndarray:
    x, y, d = features
    n1, n2 = model.n1, model.n2
    n_cw = cb.n_codewords
    t = np.empty((n_cw, N_CHANNELS, n1, n2))
    t[:, 0] = cb.matrix.real.reshape(n_cw, n1, n2)
    t[:, 1] = cb.matrix.imag.reshape(n_cw, n1, n2)
    t[:, 2] = x
    t[:, 3] = y
    t[:, 4] = np.asarray(d).reshape(n1, n2)
    t -= model.stats.mean[None, :, None, None]
    t /= model.stats.std[None, :, None, None]
    return t


def predict_rates(model: SurrogateModel, features, cb: Codebook) -> np.ndarray:
    """Predicted rate for every codeword at one location, shape (N,)."""
    if cb.n1 != model.n1 or cb.n2 != model.n2:
        raise ValueError("codebook does not match model dimensions")
    return model.net.predict(_location_tensors(model, features, cb))


def recommend(model: SurrogateModel, features, cb: Codebook) -> int:
    """Argmax of predict_rates; equal predictions resolve to the lower index."""
    return int(np.argmax(predict_rates(model, features, cb)))


def recommend_batch(
    model: SurrogateModel, xy: np.ndarray, dvec: np.ndarray, cb: Codebook, chunk_locs: int = 64
) -> np.ndarray:
    """Recommended codeword index per location, memory-bounded."""
    n_loc = xy.shape[0]
    out = np.empty(n_loc, dtype=np.int64)
    for start in range(0, n_loc, chunk_locs):
        stop = min(start + chunk_locs, n_loc)
        tensors = np.concatenate(
            [
                _location_tensors(model, (xy[i, 0], xy[i, 1], dvec[i]), cb)
                for i in range(start, stop)
            ]
        )
        preds = model.net.predict(tensors).reshape(stop - start, cb.n_codewords)
        out[start:stop] = preds.argmax(axis=1)
    return out


def save_model(model: SurrogateModel, path) -> None:
    """Versioned binary: JSON header + float64 little-endian weights."""
    triples = model.net.param_triples()
    arrays = [
        {"name": name, "dtype": "<f8", "shape": list(arr.shape)}
        for name, arr, _ in triples
    ]
    header = {
        "version": MODEL_VERSION,
        "config": model.cfg.to_dict(),
        "config_hash": model.cfg_hash,
        "stats_mean": [repr(float(v)) for v in model.stats.mean],
        "stats_std": [repr(float(v)) for v in model.stats.std],
        "in_shape": [N_CHANNELS, model.n1, model.n2],
        "arrays": arrays,
    }
    payload = b"".join(array_to_bytes(arr.astype("<f8")) for _, arr, _ in triples)
    atomic_write_bytes(path, MAGIC_MODEL + pack_json_block(header) + payload)


def load_model(path) -> SurrogateModel:
    buf = Path(path).read_bytes()
    if buf[:8] != MAGIC_MODEL:
        raise ValueError(f"not a model file: {path}")
    header, off = unpack_json_block(buf, 8)
    if header["version"] != MODEL_VERSION:
        raise ValueError(f"unsupported model version {header['version']}")
    cfg = ModelConfig.from_dict(header["config"])
    _, n1, n2 = header["in_shape"]
    net = RateNet(cfg, N_CHANNELS, n1, n2)
    weights = []
    for spec in header["arrays"]:
        arr, off = array_from_bytes(buf, off, spec["dtype"], tuple(spec["shape"]))
        weights.append(arr.astype(cfg.dtype))
    net.set_weights(weights)
    stats = FeatureStats(
        mean=np.array([float(v) for v in header["stats_mean"]]),
        std=np.array([float(v) for v in header["stats_std"]]),
    )
    return SurrogateModel(
        net=net, stats=stats, cfg=cfg, cfg_hash=header["config_hash"], n1=n1, n2=n2
    )
