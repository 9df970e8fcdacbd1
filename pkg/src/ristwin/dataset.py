"""Labeled location datasets: build, split, flatten, persist.

A dataset holds one record per receiver grid point: the location features
(x, y, d) and the full per-codeword rate table from the exhaustive oracle.
Records are stored columnar for numpy friendliness; LocationRecord is the
per-row view.  Splits are by location so that no codeword sample of a test
location ever appears in training.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import streams
from .artifacts import (
    MAGIC_DATASET,
    array_from_bytes,
    array_to_bytes,
    atomic_write_bytes,
    pack_json_block,
    sha256_bytes,
    unpack_json_block,
)
from .channel import ChannelParams, ScattererField, link_channel
from .codebook import Codebook
from .geometry import Scenario, location_features, rx_grid_points
from .rates import effective_channel, exhaustive_search

DATASET_VERSION = 1


@dataclass(frozen=True)
class LocationRecord:
    id: int
    x: float
    y: float
    dvec: np.ndarray
    rates: np.ndarray
    opt_index: int
    top3: np.ndarray  # first min(3, N) ranks, padded with -1


@dataclass(frozen=True)
class Dataset:
    ids: np.ndarray  # (n,) int64
    xy: np.ndarray  # (n, 2) float64
    dvec: np.ndarray  # (n, N) float64
    rates: np.ndarray  # (n, N) float64
    opt: np.ndarray  # (n,) int64
    top3: np.ndarray  # (n, 3) int64
    n1: int
    n2: int
    scenario_hash: str
    codebook_hash: str
    seed: int
    split_tag: str = "full"
    feature_mode: str = "per_element"
    config_hash: str = ""  # hash of the driving run config, when built via the CLI

    def __post_init__(self):
        n = self.ids.shape[0]
        if len(set(map(int, self.ids))) != n:
            raise ValueError("record ids must be unique")
        for name in ("xy", "dvec", "rates", "opt", "top3"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"column '{name}' length mismatch")

    def __len__(self) -> int:
        return self.ids.shape[0]

    @property
    def n_codewords(self) -> int:
        return self.rates.shape[1]

    def record(self, i: int) -> LocationRecord:
        return LocationRecord(
            id=int(self.ids[i]),
            x=float(self.xy[i, 0]),
            y=float(self.xy[i, 1]),
            dvec=self.dvec[i],
            rates=self.rates[i],
            opt_index=int(self.opt[i]),
            top3=self.top3[i],
        )

    def take(self, idx: np.ndarray, tag: str) -> "Dataset":
        return replace(
            self,
            ids=self.ids[idx],
            xy=self.xy[idx],
            dvec=self.dvec[idx],
            rates=self.rates[idx],
            opt=self.opt[idx],
            top3=self.top3[idx],
            split_tag=tag,
        )

    def to_bytes(self) -> bytes:
        cols = [
            ("ids", "<i8", self.ids),
            ("xy", "<f8", self.xy),
            ("dvec", "<f8", self.dvec),
            ("rates", "<f8", self.rates),
            ("opt", "<i8", self.opt),
            ("top3", "<i8", self.top3),
        ]
        header = {
            "version": DATASET_VERSION,
            "scenario_hash": self.scenario_hash,
            "codebook_hash": self.codebook_hash,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "split_tag": self.split_tag,
            "feature_mode": self.feature_mode,
            "n_records": len(self),
            "n_codewords": self.n_codewords,
            "n1": self.n1,
            "n2": self.n2,
            "arrays": [
                {"name": name, "dtype": dt, "shape": list(arr.shape)}
                for name, dt, arr in cols
            ],
        }
        payload = b"".join(array_to_bytes(arr.astype(dt)) for _, dt, arr in cols)
        return MAGIC_DATASET + pack_json_block(header) + payload

    def hash(self) -> str:
        return sha256_bytes(self.to_bytes())

    def save(self, path) -> None:
        atomic_write_bytes(path, self.to_bytes())

    @staticmethod
    def load(path) -> "Dataset":
        buf = Path(path).read_bytes()
        if buf[:8] != MAGIC_DATASET:
            raise ValueError(f"not a dataset file: {path}")
        header, off = unpack_json_block(buf, 8)
        if header["version"] != DATASET_VERSION:
            raise ValueError(f"unsupported dataset version {header['version']}")
        cols = {}
        for spec in header["arrays"]:
            arr, off = array_from_bytes(buf, off, spec["dtype"], tuple(spec["shape"]))
            cols[spec["name"]] = arr
        return Dataset(
            ids=cols["ids"],
            xy=cols["xy"],
            dvec=cols["dvec"],
            rates=cols["rates"],
            opt=cols["opt"],
            top3=cols["top3"],
            n1=header["n1"],
            n2=header["n2"],
            scenario_hash=header["scenario_hash"],
            codebook_hash=header["codebook_hash"],
            seed=header["seed"],
            split_tag=header["split_tag"],
            feature_mode=header["feature_mode"],
            config_hash=header.get("config_hash", ""),
        )

    def export_csv(self, path) -> None:
        """Long-format export: one row per (location, codeword) pair."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["location_id", "x_m", "y_m", "codeword", "rate_bps_hz"])
            for i in range(len(self)):
                for p in range(self.n_codewords):
                    w.writerow(
                        [
                            int(self.ids[i]),
                            repr(float(self.xy[i, 0])),
                            repr(float(self.xy[i, 1])),
                            p,
                            repr(float(self.rates[i, p])),
                        ]
                    )


def build(
    scenario: Scenario,
    params: ChannelParams,
    cb: Codebook,
    n_scatterers: int = 32,
    feature_mode: str = "per_element",
    field: ScattererField | None = None,
    config_hash: str = "",
) -> Dataset:
    """Label every grid location with oracle rates.

    The transmitter-side channel is shared by all locations; only the
    receiver-side link varies.  Deterministic in scenario.seed.
    """
    if cb.n1 != scenario.ris.n1 or cb.n2 != scenario.ris.n2:
        raise ValueError("codebook dimensions do not match the panel")
    if field is None:
        field = ScattererField.from_scenario(scenario, count=n_scatterers)
    h_t = link_channel(scenario.tx, scenario, field, params)

    points = rx_grid_points(scenario.rx_grid)
    n = points.shape[0]
    n_cw = cb.n_codewords
    xy = np.empty((n, 2))
    dvec = np.empty((n, cb.n_elements))
    rates = np.empty((n, n_cw))
    opt = np.empty(n, dtype=np.int64)
    top3 = np.full((n, 3), -1, dtype=np.int64)
    k_top = min(3, n_cw)
    for i in range(n):
        x, y, d = location_features(points[i], scenario.ris, scenario.wavelength, feature_mode)
        h_r = link_channel(points[i], scenario, field, params)
        table = exhaustive_search(
            effective_channel(h_r, h_t), cb, scenario.snr_budget, scenario.subcarrier_limit
        )
        xy[i] = (x, y)
        dvec[i] = d
        rates[i] = table.rates
        opt[i] = table.opt_index
        top3[i, :k_top] = table.rank[:k_top]
    return Dataset(
        ids=np.arange(n, dtype=np.int64),
        xy=xy,
        dvec=dvec,
        rates=rates,
        opt=opt,
        top3=top3,
        n1=cb.n1,
        n2=cb.n2,
        scenario_hash=scenario.hash(),
        codebook_hash=cb.hash(),
        seed=scenario.seed,
        feature_mode=feature_mode,
        config_hash=config_hash,
    )


def split(ds: Dataset, n_train: int, n_val: int, seed: int):
    """Disjoint location-level split; the remainder becomes the test set.

    Membership is a uniform draw without replacement; records inside each
    subset keep their original order.
    """
    n = len(ds)
    if n_train < 0 or n_val < 0 or n_train + n_val > n:
        raise ValueError(f"cannot draw {n_train}+{n_val} locations from {n}")
    perm = np.random.default_rng([seed, streams.SPLIT]).permutation(n)
    tr = np.sort(perm[:n_train])
    va = np.sort(perm[n_train : n_train + n_val])
    te = np.sort(perm[n_train + n_val :])
    return ds.take(tr, "train"), ds.take(va, "val"), ds.take(te, "test")


@dataclass(frozen=True)
class SampleSet:
    """Flattened (location, codeword) -> rate samples in lexicographic order.

    Sample j refers to location loc_index[j] of the owning dataset and
    codeword cw_index[j]; rate[j] is its label.  Feature gathering happens
    at tensor-building time, so columns here stay index-sized.
    """

    xy: np.ndarray  # (n_loc, 2)
    dvec: np.ndarray  # (n_loc, N)
    loc_index: np.ndarray  # (m,)
    cw_index: np.ndarray  # (m,)
    rate: np.ndarray  # (m,)
    codewords: np.ndarray  # (n_codewords, N) complex
    n1: int
    n2: int

    def __len__(self) -> int:
        return self.rate.shape[0]

    def sample(self, j: int):
        i = self.loc_index[j]
        features = (float(self.xy[i, 0]), float(self.xy[i, 1]), self.dvec[i])
        return features, self.codewords[self.cw_index[j]], float(self.rate[j])


def flatten(ds: Dataset, cb: Codebook) -> SampleSet:
    if cb.hash() != ds.codebook_hash:
        raise ValueError("codebook does not match the one that labeled this dataset")
    n, n_cw = len(ds), ds.n_codewords
    return SampleSet(
        xy=ds.xy,
        dvec=ds.dvec,
        loc_index=np.repeat(np.arange(n), n_cw),
        cw_index=np.tile(np.arange(n_cw), n),
        rate=ds.rates.ravel(),
        codewords=cb.matrix,
        n1=ds.n1,
        n2=ds.n2,
    )
