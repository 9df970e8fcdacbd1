"""Shared fixtures: a miniature scenario that builds in well under a second.

The mini layout mirrors the desk-scale default (wall panel, horizontal
grid, off-axis transmitter) at 1/16 the element count so unit tests stay
fast.
"""

import numpy as np
import pytest

from ristwin import (
    ChannelParams,
    RisPanel,
    RxGrid,
    Scenario,
    ScattererField,
    build,
    dft_codebook,
)


def make_mini_scenario(seed: int = 7, **overrides) -> Scenario:
    base = dict(
        tx=(-2.0, 1.5, 1.8),
        ris=RisPanel(center=(0.0, 0.0, 1.2), n1=4, n2=4),
        rx_grid=RxGrid(origin=(-1.0, 0.8, 1.0), rows=6, cols=8, pitch=0.25),
        carrier_freq_hz=3.5e9,
        bandwidth_hz=1.0e8,
        n_subcarriers=8,
        snr_budget=2.0e7,
        seed=seed,
    )
    base.update(overrides)
    return Scenario(**base)


@pytest.fixture(scope="session")
def mini_scenario() -> Scenario:
    return make_mini_scenario()


@pytest.fixture(scope="session")
def mini_codebook():
    return dft_codebook(4, 4)


@pytest.fixture(scope="session")
def mini_params(mini_scenario) -> ChannelParams:
    return ChannelParams.for_scenario(mini_scenario)


@pytest.fixture(scope="session")
def mini_field(mini_scenario) -> ScattererField:
    return ScattererField.from_scenario(mini_scenario, count=16)


@pytest.fixture(scope="session")
def mini_dataset(mini_scenario, mini_params, mini_codebook, mini_field):
    return build(
        mini_scenario, mini_params, mini_codebook, n_scatterers=16, field=mini_field
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
