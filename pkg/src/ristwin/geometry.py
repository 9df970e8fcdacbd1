"""Physical layout: transmitter point, reflecting panel, receiver grid.

All positions are meters in a right-handed world frame.  Element spacing is
expressed in carrier wavelengths, so any op that needs absolute element
positions takes the wavelength explicitly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .artifacts import sha256_bytes

SPEED_OF_LIGHT = 299_792_458.0

SCENARIO_SCHEMA_VERSION = 1


def _vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValueError("coordinates must be finite")
    return a


@dataclass(frozen=True)
class Point3:
    """A point in meters."""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @staticmethod
    def of(v) -> "Point3":
        a = _vec3(v)
        return Point3(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class RisPanel:
    """Uniform planar array of n1 x n2 passive elements.

    axis1/axis2 are orthonormal in-plane unit vectors; element (p, q) sits at
    center + (p - (n1-1)/2) * pitch * axis1 + (q - (n2-1)/2) * pitch * axis2
    with pitch = spacing * wavelength.  Flat element index n = p * n2 + q
    (row-major, axis-2 fastest); every consumer of per-element vectors uses
    this one ordering.
    """

    center: tuple[float, float, float]
    n1: int
    n2: int
    spacing: float = 0.5  # element pitch in wavelengths
    axis1: tuple[float, float, float] = (1.0, 0.0, 0.0)
    axis2: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError("n1 and n2 must be positive")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        a1, a2 = _vec3(self.axis1), _vec3(self.axis2)
        if abs(np.linalg.norm(a1) - 1) > 1e-9 or abs(np.linalg.norm(a2) - 1) > 1e-9:
            raise ValueError("axis1/axis2 must be unit vectors")
        if abs(float(a1 @ a2)) > 1e-9:
            raise ValueError("axis1/axis2 must be orthogonal")

    @property
    def n_elements(self) -> int:
        return self.n1 * self.n2

    @property
    def center_arr(self) -> np.ndarray:
        return _vec3(self.center)

    @property
    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return _vec3(self.axis1), _vec3(self.axis2)

    @property
    def normal(self) -> np.ndarray:
        a1, a2 = self.axes
        return np.cross(a1, a2)


@dataclass(frozen=True)
class RxGrid:
    """Regular receiver grid at constant height.

    Point (r, c) = origin + (c * pitch, r * pitch, 0); iteration order is
    row-major with the column index fastest.
    """

    origin: tuple[float, float, float]
    rows: int
    cols: int
    pitch: float  # meters

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be positive")
        if not self.pitch > 0:
            raise ValueError("pitch must be positive")
        _vec3(self.origin)

    @property
    def n_points(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class Scenario:
    """Everything that defines one static downlink layout and its RF constants."""

    tx: tuple[float, float, float]
    ris: RisPanel
    rx_grid: RxGrid
    carrier_freq_hz: float
    bandwidth_hz: float
    n_subcarriers: int
    snr_budget: float  # linear transmit-power to noise-power ratio
    seed: int
    subcarrier_limit: int | None = None  # rate over first k_sub subcarriers only

    def __post_init__(self):
        if not self.carrier_freq_hz > 0:
            raise ValueError("carrier_freq_hz must be positive")
        if not self.bandwidth_hz > 0:
            raise ValueError("bandwidth_hz must be positive")
        if self.n_subcarriers < 1:
            raise ValueError("n_subcarriers must be >= 1")
        if not self.snr_budget > 0:
            raise ValueError("snr_budget must be positive")
        if self.subcarrier_limit is not None and not (
            1 <= self.subcarrier_limit <= self.n_subcarriers
        ):
            raise ValueError("subcarrier_limit must lie in [1, n_subcarriers]")
        _vec3(self.tx)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def sample_period(self) -> float:
        """T_s in seconds, the inverse signaling bandwidth."""
        return 1.0 / self.bandwidth_hz

    @property
    def k_effective(self) -> int:
        return self.subcarrier_limit or self.n_subcarriers

    def to_dict(self) -> dict:
        return {
            "schema_version": SCENARIO_SCHEMA_VERSION,
            "tx_m": list(map(float, self.tx)),
            "ris": {
                "center_m": list(map(float, self.ris.center)),
                "n1": self.ris.n1,
                "n2": self.ris.n2,
                "spacing_wavelengths": self.ris.spacing,
                "axis1": list(map(float, self.ris.axis1)),
                "axis2": list(map(float, self.ris.axis2)),
            },
            "rx_grid": {
                "origin_m": list(map(float, self.rx_grid.origin)),
                "rows": self.rx_grid.rows,
                "cols": self.rx_grid.cols,
                "pitch_m": self.rx_grid.pitch,
            },
            "carrier_freq_hz": float(self.carrier_freq_hz),
            "bandwidth_hz": float(self.bandwidth_hz),
            "n_subcarriers": int(self.n_subcarriers),
            "subcarrier_limit": self.subcarrier_limit,
            "snr_budget": float(self.snr_budget),
            "seed": int(self.seed),
        }

    @staticmethod
    def from_dict(d: dict) -> "Scenario":
        def need(mapping, key, where):
            if key not in mapping:
                raise ValueError(f"scenario config missing required field '{where}{key}'")
            return mapping[key]

        version = need(d, "schema_version", "")
        if version != SCENARIO_SCHEMA_VERSION:
            raise ValueError(f"unsupported scenario schema_version {version}")
        ris_d = need(d, "ris", "")
        grid_d = need(d, "rx_grid", "")
        ris = RisPanel(
            center=tuple(need(ris_d, "center_m", "ris.")),
            n1=int(need(ris_d, "n1", "ris.")),
            n2=int(need(ris_d, "n2", "ris.")),
            spacing=float(ris_d.get("spacing_wavelengths", 0.5)),
            axis1=tuple(ris_d.get("axis1", (1.0, 0.0, 0.0))),
            axis2=tuple(ris_d.get("axis2", (0.0, 0.0, 1.0))),
        )
        grid = RxGrid(
            origin=tuple(need(grid_d, "origin_m", "rx_grid.")),
            rows=int(need(grid_d, "rows", "rx_grid.")),
            cols=int(need(grid_d, "cols", "rx_grid.")),
            pitch=float(need(grid_d, "pitch_m", "rx_grid.")),
        )
        return Scenario(
            tx=tuple(need(d, "tx_m", "")),
            ris=ris,
            rx_grid=grid,
            carrier_freq_hz=float(need(d, "carrier_freq_hz", "")),
            bandwidth_hz=float(need(d, "bandwidth_hz", "")),
            n_subcarriers=int(need(d, "n_subcarriers", "")),
            snr_budget=float(need(d, "snr_budget", "")),
            seed=int(need(d, "seed", "")),
            subcarrier_limit=d.get("subcarrier_limit"),
        )

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return sha256_bytes(self.canonical_json().encode("utf-8"))


def element_positions(panel: RisPanel, wavelength: float) -> np.ndarray:
    """Per-element positions, shape (N, 3), in the panel's flat ordering.

    Centroid equals panel.center; in-axis neighbors are spacing*wavelength
    apart.
    """
    if not wavelength > 0:
        raise ValueError("wavelength must be positive")
    pitch = panel.spacing * wavelength
    a1, a2 = panel.axes
    p = np.arange(panel.n1) - (panel.n1 - 1) / 2.0
    q = np.arange(panel.n2) - (panel.n2 - 1) / 2.0
    # flat index n = p * n2 + q
    offsets = pitch * (p[:, None, None] * a1 + q[None, :, None] * a2)
    return (panel.center_arr + offsets).reshape(panel.n_elements, 3)


def rx_grid_points(grid: RxGrid) -> np.ndarray:
    """All grid points, shape (rows*cols, 3), column index fastest."""
    r = np.arange(grid.rows)
    c = np.arange(grid.cols)
    pts = np.empty((grid.rows, grid.cols, 3))
    origin = _vec3(grid.origin)
    pts[..., 0] = origin[0] + c[None, :] * grid.pitch
    pts[..., 1] = origin[1] + r[:, None] * grid.pitch
    pts[..., 2] = origin[2]
    return pts.reshape(grid.n_points, 3)


def location_features(
    rx, panel: RisPanel, wavelength: float, mode: str = "per_element"
) -> tuple[float, float, np.ndarray]:
    """Feature triple (x, y, d) for one receiver position.

    d[n] is the Euclidean distance in meters from rx to panel element n, or
    to the panel center replicated N times when mode == "panel_center" (the
    degraded feature variant where only the panel reference point is known).
    """
    rx = np.asarray(rx, dtype=float).reshape(3)
    if mode == "per_element":
        d = np.linalg.norm(element_positions(panel, wavelength) - rx, axis=1)
    elif mode == "panel_center":
        d = np.full(panel.n_elements, np.linalg.norm(panel.center_arr - rx))
    else:
        raise ValueError(f"unknown feature mode '{mode}'")
    if np.any(d <= 0):
        raise ValueError("receiver coincides with a panel element")
    return float(rx[0]), float(rx[1]), d
