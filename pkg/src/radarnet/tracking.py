"""Radar measurement synthesis and per-target constant-velocity Kalman tracks.

Measurement noise comes from the fixed signal-to-noise ratio (default 13,
a linear ratio): sigma = resolution / sqrt(2*snr) in both range and
azimuth. The filter is a linear KF over converted Cartesian position
measurements; loads and budgets are exact rationals so per-tick budget
ledgers never drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .geometry import Cov2, CovEllipse, Vec2, polar_cov_to_cartesian

DEFAULT_SNR = 13.0
DEFAULT_RANGE_RESOLUTION = 150.0
DEFAULT_AZIMUTH_RESOLUTION = math.radians(2.0)
DEFAULT_MAX_RANGE = 60_000.0
DEFAULT_TICK_SECONDS = 1.0
DEFAULT_PROCESS_NOISE = 1.0  # white-acceleration intensity, m^2/s^3
DEFAULT_INIT_SPEED_STD = 300.0  # m/s, prior on unknown target velocity


class NotVisible(Exception):
    """Target range is outside (0, max_range]."""


def as_load(value) -> Fraction:
    """Exact load units from user input.

    Floats go through their shortest decimal repr, so 0.2 means exactly
    1/5. Strings accept both decimals ("0.2") and ratios ("1/5").
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as load units")


@dataclass(frozen=True)
class RadarConfig:
    id: int
    position: Vec2
    budget: Fraction = Fraction(1)
    range_resolution: float = DEFAULT_RANGE_RESOLUTION
    azimuth_resolution: float = DEFAULT_AZIMUTH_RESOLUTION
    snr: float = DEFAULT_SNR
    max_range: float = DEFAULT_MAX_RANGE

    def __post_init__(self):
        object.__setattr__(self, "budget", as_load(self.budget))
        if self.budget <= 0:
            raise ValueError(f"budget must be positive, got {self.budget}")
        for name in ("range_resolution", "azimuth_resolution", "snr", "max_range"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class PolarMeasurement:
    """Range/azimuth of one target in the measuring radar's frame."""

    target_id: int
    r: float
    theta: float
    sigma_r: float
    sigma_theta: float
    tick: int

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"measured range must be positive, got {self.r}")
        # sigma == 0 is the perfect-measurement test hook (snr = inf).
        if self.sigma_r < 0 or self.sigma_theta < 0:
            raise ValueError("measurement stds cannot be negative")


@dataclass(frozen=True, eq=False)
class TrackState:
    """Kalman state (x, y, vx, vy) with 4x4 covariance, one radar's view of one target.

    The covariance must be symmetric PSD at construction; the position
    block must additionally be a valid Cov2 wherever it is used as one
    (position_cov raises otherwise, e.g. for the perfect-measurement
    test hook whose posterior is singular).
    """

    target_id: int
    state: np.ndarray
    P: np.ndarray
    last_update_tick: int

    def __post_init__(self):
        state = np.asarray(self.state, dtype=float).reshape(4).copy()
        P = np.asarray(self.P, dtype=float).reshape(4, 4).copy()
        scale = max(np.abs(P).max(), 1e-300)
        if np.abs(P - P.T).max() > 1e-9 * scale:
            raise ValueError("track covariance must be symmetric")
        if np.linalg.eigvalsh(P).min() < -1e-9 * scale:
            raise ValueError("track covariance must be positive semi-definite")
        state.setflags(write=False)
        P.setflags(write=False)
        object.__setattr__(self, "state", state)
        object.__setattr__(self, "P", P)

    def position(self) -> Vec2:
        return Vec2(float(self.state[0]), float(self.state[1]))

    def velocity(self) -> Vec2:
        return Vec2(float(self.state[2]), float(self.state[3]))

    def position_cov(self) -> Cov2:
        return Cov2.from_array(self.P[:2, :2])


def measurement_noise(r: float, cfg: RadarConfig) -> tuple[float, float]:
    """(sigma_r, sigma_theta) for a measurement at range r, or NotVisible.

    Range-independent: range enters downstream via the r*sigma_theta
    cross-range conversion.
    """
    if not 0.0 < r <= cfg.max_range:
        raise NotVisible(f"range {r:.1f} outside (0, {cfg.max_range:.1f}]")
    denom = math.sqrt(2.0 * cfg.snr)
    return cfg.range_resolution / denom, cfg.azimuth_resolution / denom


def synthesize_measurement(
    cfg: RadarConfig,
    target_id: int,
    truth_position: Vec2,
    tick: int,
    rng: np.random.Generator,
) -> PolarMeasurement:
    """True polar coordinates perturbed by independent zero-mean Gaussians.

    Deterministic given the rng state; draws range noise first, then
    azimuth noise.
    """
    rel = truth_position - cfg.position
    r_true = rel.norm()
    sigma_r, sigma_theta = measurement_noise(r_true, cfg)
    theta_true = math.atan2(rel.y, rel.x)
    r = r_true + (float(rng.normal()) * sigma_r if sigma_r > 0.0 else 0.0)
    theta = theta_true + (float(rng.normal()) * sigma_theta if sigma_theta > 0.0 else 0.0)
    return PolarMeasurement(
        target_id=target_id,
        r=max(r, 1e-6),
        theta=theta,
        sigma_r=sigma_r,
        sigma_theta=sigma_theta,
        tick=tick,
    )


def _transition(dt: float, q: float) -> tuple[np.ndarray, np.ndarray]:
    F = np.eye(4)
    F[0, 2] = dt
    F[1, 3] = dt
    # Continuous white-acceleration noise, intensity q in m^2/s^3.
    dt2 = dt * dt
    dt3 = dt2 * dt
    Q = q * np.array(
        [
            [dt3 / 3.0, 0.0, dt2 / 2.0, 0.0],
            [0.0, dt3 / 3.0, 0.0, dt2 / 2.0],
            [dt2 / 2.0, 0.0, dt, 0.0],
            [0.0, dt2 / 2.0, 0.0, dt],
        ]
    )
    return F, Q


def kf_predict(t: TrackState, dt: float, q: float = DEFAULT_PROCESS_NOISE) -> TrackState:
    """Constant-velocity propagation by dt seconds."""
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    F, Q = _transition(dt, q)
    state = F @ t.state
    P = F @ t.P @ F.T + Q
    return TrackState(t.target_id, state, 0.5 * (P + P.T), t.last_update_tick)


def _measurement_cov(m: PolarMeasurement) -> np.ndarray:
    """Cartesian covariance of the converted position measurement.

    Same similarity transform as polar_cov_to_cartesian, but tolerates the
    sigma = 0 and extreme-sigma test hooks that the validated Cov2 type
    rejects.
    """
    a = m.sigma_r * m.sigma_r
    b = (m.r * m.sigma_theta) * (m.r * m.sigma_theta)
    c, s = math.cos(m.theta), math.sin(m.theta)
    return np.array(
        [
            [a * c * c + b * s * s, (a - b) * s * c],
            [(a - b) * s * c, a * s * s + b * c * c],
        ]
    )


def kf_update(t: TrackState, m: PolarMeasurement, radar_position: Vec2) -> TrackState:
    """Linear Kalman update with the measurement converted to ground-frame position."""
    if m.target_id != t.target_id:
        raise ValueError(f"measurement for target {m.target_id} applied to track {t.target_id}")
    z = np.array(
        [radar_position.x + m.r * math.cos(m.theta), radar_position.y + m.r * math.sin(m.theta)]
    )
    R = _measurement_cov(m)
    H = np.zeros((2, 4))
    H[0, 0] = 1.0
    H[1, 1] = 1.0
    S = t.P[:2, :2] + R
    K = np.linalg.solve(S.T, (t.P @ H.T).T).T
    state = t.state + K @ (z - t.state[:2])
    ikh = np.eye(4) - K @ H
    P = ikh @ t.P @ ikh.T + K @ R @ K.T  # Joseph form keeps P symmetric PSD
    return TrackState(t.target_id, state, 0.5 * (P + P.T), m.tick)


def init_track(
    m: PolarMeasurement,
    radar_position: Vec2,
    init_speed_std: float = DEFAULT_INIT_SPEED_STD,
) -> TrackState:
    """Track born from a first measurement: measured position, zero velocity prior."""
    pos_cov = _measurement_cov(m)
    P = np.zeros((4, 4))
    P[:2, :2] = pos_cov
    P[2, 2] = P[3, 3] = init_speed_std * init_speed_std
    state = np.array(
        [
            radar_position.x + m.r * math.cos(m.theta),
            radar_position.y + m.r * math.sin(m.theta),
            0.0,
            0.0,
        ]
    )
    return TrackState(m.target_id, state, P, m.tick)


def predicted_ellipse(
    t: TrackState, dt: float = DEFAULT_TICK_SECONDS, q: float = DEFAULT_PROCESS_NOISE
) -> CovEllipse:
    """Uncertainty ellipse of the position after predicting dt ahead."""
    p = kf_predict(t, dt, q)
    return CovEllipse(center=p.position(), cov=p.position_cov())
