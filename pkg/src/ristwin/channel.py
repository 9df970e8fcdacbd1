"""Seeded geometric multipath channels.

Each link (panel <-> remote point) is a direct ray plus single-bounce rays
via a fixed scatterer field.  Ray parameters feed a wideband tapped-delay
model; tap d of a link is

    h_d = sqrt(N / L) * sum_m g_m * p(d * T_s - tau_m) * a(theta_m, phi_m)

and the per-subcarrier channel is the K-point DFT of the taps.  Ray gains
carry free-space amplitude decay but no carrier-phase rotation, which keeps
the channel a smooth function of position on the scale of c / bandwidth;
that smoothness is what makes location-based rate prediction learnable.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import streams
from .artifacts import (
    MAGIC_CHANNEL,
    array_from_bytes,
    array_to_bytes,
    atomic_write_bytes,
    pack_json_block,
    unpack_json_block,
)
from .geometry import SPEED_OF_LIGHT, RisPanel, Scenario, rx_grid_points


@dataclass(frozen=True)
class RayCluster:
    azimuth: float  # radians, in [0, 2*pi)
    elevation: float  # radians, measured from the panel normal
    gain: complex  # dimensionless amplitude
    delay: float  # seconds, >= 0

    def __post_init__(self):
        if self.delay < 0:
            raise ValueError("delay must be nonnegative")


@dataclass(frozen=True)
class ChannelParams:
    m_clusters: int  # rays per link, direct path included
    n_taps: int  # D, delay taps synthesized
    sample_period: float  # T_s seconds
    path_loss: float = 1.0  # linear per-link normalizer L
    pulse_kind: str = "sinc"

    def __post_init__(self):
        if self.m_clusters < 1:
            raise ValueError("m_clusters must be >= 1")
        if self.n_taps < 1:
            raise ValueError("n_taps must be >= 1")
        if not self.sample_period > 0:
            raise ValueError("sample_period must be positive")
        if not self.path_loss > 0:
            raise ValueError("path_loss must be positive")
        if self.pulse_kind != "sinc":
            raise ValueError(f"unknown pulse_kind '{self.pulse_kind}'")

    @staticmethod
    def for_scenario(
        scenario: Scenario,
        m_clusters: int = 5,
        n_taps: int | None = None,
        path_loss: float = 1.0,
    ) -> "ChannelParams":
        # full tap span D = K unless the caller narrows it
        return ChannelParams(
            m_clusters=m_clusters,
            n_taps=scenario.n_subcarriers if n_taps is None else n_taps,
            sample_period=scenario.sample_period,
            path_loss=path_loss,
        )

    def to_dict(self) -> dict:
        return {
            "m_clusters": self.m_clusters,
            "n_taps": self.n_taps,
            "sample_period_s": self.sample_period,
            "path_loss": self.path_loss,
            "pulse_kind": self.pulse_kind,
        }


@dataclass(frozen=True)
class ScattererField:
    """Fixed point scatterers with complex reflection coefficients.

    Drawn once per scenario seed; every channel in the scenario reuses the
    same field, which ties channel realizations to geometry instead of to
    per-location randomness.
    """

    positions: np.ndarray  # (S, 3) meters
    coefficients: np.ndarray  # (S,) complex

    def __post_init__(self):
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ValueError("positions must be (S, 3)")
        if self.coefficients.shape != (self.positions.shape[0],):
            raise ValueError("one coefficient per scatterer required")

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @staticmethod
    def from_scenario(scenario: Scenario, count: int = 32) -> "ScattererField":
        """Uniform draw over the scenario bounding box, padded by 0.5 m."""
        pts = np.vstack(
            [
                np.asarray(scenario.tx, dtype=float),
                scenario.ris.center_arr,
                rx_grid_points(scenario.rx_grid),
            ]
        )
        lo = pts.min(axis=0) - 0.5
        hi = pts.max(axis=0) + 0.5
        rng = np.random.default_rng([scenario.seed, streams.SCATTERERS])
        positions = lo + rng.random((count, 3)) * (hi - lo)
        mag = rng.uniform(0.2, 0.8, count)
        phase = rng.uniform(0.0, 2 * np.pi, count)
        return ScattererField(positions=positions, coefficients=mag * np.exp(1j * phase))


def array_response(theta: float, phi: float, panel: RisPanel) -> np.ndarray:
    """Unit-modulus response of the panel to a plane wave from (theta, phi).

    Entry for element (p, q):
        exp(j * 2*pi * spacing * (p * sin(phi) * cos(theta) + q * sin(phi) * sin(theta)))
    phi = 0 is broadside and yields the all-ones vector.
    """
    p = np.arange(panel.n1)
    q = np.arange(panel.n2)
    u1 = np.sin(phi) * np.cos(theta)
    u2 = np.sin(phi) * np.sin(theta)
    phase = 2 * np.pi * panel.spacing * (p[:, None] * u1 + q[None, :] * u2)
    return np.exp(1j * phase).reshape(panel.n_elements)


def pulse(tau, t_s: float):
    """Normalized sinc shaping: p(0) = 1, zeros at nonzero integer multiples of t_s."""
    if not t_s > 0:
        raise ValueError("t_s must be positive")
    return np.sinc(np.asarray(tau) / t_s)


def _panel_angles(direction: np.ndarray, panel: RisPanel) -> tuple[float, float]:
    """Azimuth/elevation of a unit direction in the panel's local frame."""
    a1, a2 = panel.axes
    u1 = float(direction @ a1)
    u2 = float(direction @ a2)
    theta = float(np.arctan2(u2, u1)) % (2 * np.pi)
    s = min(1.0, float(np.hypot(u1, u2)))
    phi = float(np.arcsin(s))
    return theta, phi


def clusters_for_link(
    endpoint_a,
    endpoint_b,
    field: ScattererField,
    params: ChannelParams,
    panel: RisPanel,
    wavelength: float,
) -> list[RayCluster]:
    """Rays between two points: the direct path plus single bounces.

    endpoint_b is the array end; arrival angles are evaluated there in the
    panel frame.  Scattered rays route via the params.m_clusters - 1
    scatterers with the shortest total path length (ties by scatterer
    index); their gain is free-space amplitude over the full path times the
    scatterer's reflection coefficient.  Purely geometric, hence the same
    inputs always produce the same rays.
    """
    a = np.asarray(endpoint_a, dtype=float).reshape(3)
    b = np.asarray(endpoint_b, dtype=float).reshape(3)
    n_scat = params.m_clusters - 1
    if n_scat > field.count:
        raise ValueError(
            f"m_clusters={params.m_clusters} needs {n_scat} scatterers, field has {field.count}"
        )

    def friis(dist: float) -> float:
        return wavelength / (4 * np.pi * dist)

    d_direct = float(np.linalg.norm(a - b))
    theta, phi = _panel_angles((a - b) / d_direct, panel)
    rays = [
        RayCluster(
            azimuth=theta,
            elevation=phi,
            gain=complex(friis(d_direct)),
            delay=d_direct / SPEED_OF_LIGHT,
        )
    ]
    if n_scat:
        d_as = np.linalg.norm(field.positions - a, axis=1)
        d_sb = np.linalg.norm(field.positions - b, axis=1)
        total = d_as + d_sb
        chosen = np.argsort(total, kind="stable")[:n_scat]
        for s in chosen:
            direction = (field.positions[s] - b) / d_sb[s]
            theta, phi = _panel_angles(direction, panel)
            rays.append(
                RayCluster(
                    azimuth=theta,
                    elevation=phi,
                    gain=complex(friis(float(total[s])) * field.coefficients[s]),
                    delay=float(total[s]) / SPEED_OF_LIGHT,
                )
            )
    return rays


def delay_channel(
    clusters: list[RayCluster], params: ChannelParams, panel: RisPanel
) -> np.ndarray:
    """Tapped-delay channel, shape (D, N) complex."""
    if not clusters:
        raise ValueError("clusters must be nonempty")
    n = panel.n_elements
    responses = np.stack([array_response(c.azimuth, c.elevation, panel) for c in clusters])
    gains = np.array([c.gain for c in clusters], dtype=complex)
    delays = np.array([c.delay for c in clusters])
    d_grid = np.arange(params.n_taps) * params.sample_period
    shaping = pulse(d_grid[:, None] - delays[None, :], params.sample_period)  # (D, M)
    scale = np.sqrt(n / params.path_loss)
    return scale * (shaping @ (gains[:, None] * responses))


def freq_channel(delay: np.ndarray, k: int) -> np.ndarray:
    """Per-subcarrier channel h_k = sum_d h_d exp(-2j*pi*k*d/K), shape (K, N)."""
    if delay.ndim != 2:
        raise ValueError("delay taps must be (D, N)")
    if delay.shape[0] > k:
        raise ValueError(f"tap count {delay.shape[0]} exceeds subcarrier count {k}")
    return np.fft.fft(delay, n=k, axis=0)


def delay_taps_from_freq(freq: np.ndarray, d: int) -> np.ndarray:
    """Inverse of freq_channel for D <= K: first d rows of the IDFT."""
    return np.fft.ifft(freq, axis=0)[:d]


def link_channel(
    remote_point,
    scenario: Scenario,
    field: ScattererField,
    params: ChannelParams,
) -> np.ndarray:
    """Frequency channel (K, N) of the link panel <-> remote_point."""
    clusters = clusters_for_link(
        remote_point,
        scenario.ris.center_arr,
        field,
        params,
        scenario.ris,
        scenario.wavelength,
    )
    taps = delay_channel(clusters, params, scenario.ris)
    return freq_channel(taps, scenario.n_subcarriers)


def write_channel_dump(path, h: np.ndarray, scenario_hash: str, link: str) -> None:
    """Binary dump: magic, JSON header, then K*N interleaved re/im float64 LE."""
    header = {
        "version": 1,
        "scenario_hash": scenario_hash,
        "link": link,
        "k": int(h.shape[0]),
        "n": int(h.shape[1]),
    }
    inter = np.empty(h.shape + (2,), dtype="<f8")
    inter[..., 0] = h.real
    inter[..., 1] = h.imag
    atomic_write_bytes(path, MAGIC_CHANNEL + pack_json_block(header) + array_to_bytes(inter))


def read_channel_dump(path) -> tuple[np.ndarray, dict]:
    buf = Path(path).read_bytes()
    if buf[:8] != MAGIC_CHANNEL:
        raise ValueError("not a channel dump file")
    header, off = unpack_json_block(buf, 8)
    inter, _ = array_from_bytes(buf, off, "<f8", (header["k"], header["n"], 2))
    return inter[..., 0] + 1j * inter[..., 1], header
