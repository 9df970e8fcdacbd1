"""Built-in run configuration: a desk-scale scenario that exercises the
whole pipeline in minutes on one core.

An 8x8 half-wavelength panel at 3.5 GHz serves a 50 x 40 receiver grid
(0.1 m pitch) from a wall mount; the transmitter sits off to the side, and
32 scatterers provide multipath.  The snr_budget is tuned so optimal rates
land in the low bits/s/Hz range with a random-codeword baseline far below
the oracle, giving the recommender headroom that the metrics can resolve.
"""

from __future__ import annotations

import copy

DEFAULT_CONFIG: dict = {
    "schema_version": 1,
    "seed": 0,
    "out_dir": "runs/desk",
    "threads": 1,
    "scenario": {
        "tx_m": [-3.0, 2.0, 2.0],
        "ris": {
            "center_m": [0.0, 0.0, 1.5],
            "n1": 8,
            "n2": 8,
            "spacing_wavelengths": 0.5,
            "axis1": [1.0, 0.0, 0.0],
            "axis2": [0.0, 0.0, 1.0],
        },
        "rx_grid": {
            "origin_m": [-2.45, 0.8, 1.0],
            "rows": 40,
            "cols": 50,
            "pitch_m": 0.1,
        },
        "carrier_freq_hz": 3.5e9,
        "bandwidth_hz": 1.0e8,
        "n_subcarriers": 16,
        "subcarrier_limit": None,
        "snr_budget": 5.0e5,
    },
    "channel": {
        "m_clusters": 5,
        "n_taps": None,
        "path_loss": 1.0,
        "n_scatterers": 32,
    },
    "codebook": {"quant_bits": None},
    "features": {"mode": "per_element"},
    "model": {
        "conv_filters": [16, 32, 64],
        "kernel_size": 3,
        "pool_kind": "max",
        "pool_size": 2,
        "fc_widths": [128, 64],
        "dropout": 0.3,
        "learning_rate": 0.001,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
        "batch_size": 128,
        "max_epochs": 100,
        "patience": 20,
        "dtype": "float64",
    },
    "train": {"size": 500, "val_frac": 0.1},
    "eval": {
        "baseline_trials": 100,
        "stability_fractions": [0.25, 0.5, 0.75, 1.0],
    },
    "sweep": {"sizes": [50, 100, 250, 500], "seeds": [0, 1, 2], "val_frac": 0.1},
}


def default_config() -> dict:
    return copy.deepcopy(DEFAULT_CONFIG)
