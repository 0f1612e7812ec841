"""Planar geometry for range/bearing observation of a static target.

The world is a flat 2D plane (nadir-view abstraction: the agent flies at a
known, constant altitude, so the vertical axis never enters the math). This
module provides the observation functions for the two sensor modalities,
their position Jacobians, and angle arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

TAU = 2.0 * math.pi


class CoincidentPointsError(ValueError):
    """Agent and target coincide; bearing and Jacobians are undefined there."""


class Modality(Enum):
    """Sensor modality of a single measurement."""

    RTT = "rtt"
    AOA = "aoa"


@dataclass(frozen=True)
class Pose2:
    """Agent position in the plane, meters."""

    x: float
    y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def __array__(self, dtype=None) -> np.ndarray:
        arr = self.as_array()
        return arr if dtype is None else arr.astype(dtype)


def _xy(p) -> tuple[float, float]:
    """Coerce a Pose2 / array-like / (x, y) pair to two floats."""
    if isinstance(p, Pose2):
        return p.x, p.y
    a = np.asarray(p, dtype=float)
    return float(a[0]), float(a[1])


def h_rtt(target, agent) -> float:
    """Ideal range observation: Euclidean distance from agent to target."""
    tx, ty = _xy(target)
    ax, ay = _xy(agent)
    return math.hypot(tx - ax, ty - ay)


def h_aoa(target, agent) -> float:
    """Ideal bearing observation: global bearing of the target seen from the
    agent, ``atan2(dy, dx)`` in ``(-pi, pi]``.

    Raises
    ------
    CoincidentPointsError
        If target and agent coincide (bearing undefined).
    """
    tx, ty = _xy(target)
    ax, ay = _xy(agent)
    dx, dy = tx - ax, ty - ay
    if dx == 0.0 and dy == 0.0:
        raise CoincidentPointsError("bearing undefined for coincident target/agent")
    return math.atan2(dy, dx)


def jacobian(modality: Modality, target, agent) -> np.ndarray:
    """Gradient of the observation function w.r.t. the target position.

    RTT: the unit radial vector u = (target - agent) / d.
    AOA: the unit tangential vector (u rotated +90 degrees) scaled by 1/d.

    The two directions are orthogonal by construction; only the AoA
    magnitude decays with distance.

    Raises
    ------
    CoincidentPointsError
        If d = 0 (both Jacobians singular there).
    """
    tx, ty = _xy(target)
    ax, ay = _xy(agent)
    dx, dy = tx - ax, ty - ay
    d = math.hypot(dx, dy)
    if d == 0.0:
        raise CoincidentPointsError("Jacobian undefined for coincident target/agent")
    if modality is Modality.RTT:
        return np.array([dx / d, dy / d])
    if modality is Modality.AOA:
        # tangential direction / distance: grad atan2 = (-dy, dx) / d^2
        return np.array([-dy / (d * d), dx / (d * d)])
    raise ValueError(f"unknown modality: {modality!r}")


def wrap_angle(a: float) -> float:
    """Wrap an angle to ``(-pi, pi]``, preserving its value mod 2*pi."""
    if -math.pi < a <= math.pi:
        return a
    w = (a + math.pi) % TAU - math.pi
    return math.pi if w == -math.pi else w
