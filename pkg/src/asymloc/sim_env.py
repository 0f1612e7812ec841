"""Stochastic world model: truth state, blocked-path channel, measurements.

Each step the channel decides whether the direct path is blocked. Blocked
(NLOS) steps add a strictly non-negative exponential bias to the range and
a zero-mean Gaussian bias to the bearing, on top of the always-present
systematic offsets and thermal noise. In the structured variant a
rectangular obstacle forces NLOS whenever it cuts the agent-to-target
segment, with a reduced stochastic rate elsewhere.

Angles in `Scenario` are degrees (the configuration boundary); everything
downstream of the ``*_rad`` properties is radians.

Randomness comes from a caller-supplied ``numpy.random.Generator``. All
draws happen every step in a fixed order and are scaled by the scenario
parameters afterwards, so runs with the same seed stay draw-for-draw
paired across parameter sweeps (only the scaling changes, never the
underlying sample path).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import Modality, Pose2, h_aoa, h_rtt, wrap_angle
from .filters import Measurement


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle: center plus half extents, meters."""

    cx: float
    cy: float
    half_width: float
    half_height: float

    def __post_init__(self):
        if self.half_width <= 0.0 or self.half_height <= 0.0:
            raise ValueError("rectangle extents must be positive")

    def contains(self, x: float, y: float) -> bool:
        return (abs(x - self.cx) <= self.half_width
                and abs(y - self.cy) <= self.half_height)


def segment_intersects_rect(a, b, rect: Rect) -> bool:
    """True iff the closed segment a-b meets the closed rectangle.

    Standard slab clipping: intersect the segment's parameter interval
    [0, 1] with the slabs of both axes.
    """
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    t0, t1 = 0.0, 1.0
    for p0, dp, lo, hi in (
        (ax, bx - ax, rect.cx - rect.half_width, rect.cx + rect.half_width),
        (ay, by - ay, rect.cy - rect.half_height, rect.cy + rect.half_height),
    ):
        if dp == 0.0:
            if p0 < lo or p0 > hi:
                return False
            continue
        ta = (lo - p0) / dp
        tb = (hi - p0) / dp
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 > t1:
            return False
    return True


@dataclass(frozen=True)
class Scenario:
    """World plus channel configuration for one experiment.

    ``p_nlos`` drives the stochastic channel; with an ``obstacle`` set the
    blockage is geometric instead and ``p_nlos_clear`` applies on clear
    lines of sight. One blockage coin per step covers both modalities
    unless ``shared_nlos_flag`` is off.
    """

    truth: tuple[float, float] = (50.0, 50.0)
    start: tuple[float, float] = (10.0, 10.0)
    arena: float = 100.0
    p_nlos: float = 0.9
    mu_nlos: float = 8.0
    sigma_b_theta_deg: float = 5.0
    delta_r: float = 1.5
    delta_theta_deg: float = -3.0
    sigma_r: float = 1.5
    sigma_theta_deg: float = 2.0
    steps: int = 300
    obstacle: Optional[Rect] = None
    p_nlos_clear: float = 0.1
    shared_nlos_flag: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_nlos <= 1.0 or not 0.0 <= self.p_nlos_clear <= 1.0:
            raise ValueError("NLOS probabilities must be in [0, 1]")
        for name in ("mu_nlos", "sigma_b_theta_deg", "sigma_r", "sigma_theta_deg", "arena"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        for label, point in (("truth", self.truth), ("start", self.start)):
            x, y = point
            if not (0.0 <= x <= self.arena and 0.0 <= y <= self.arena):
                raise ValueError(f"{label} {point} outside the {self.arena} m arena")

    @property
    def delta_theta_rad(self) -> float:
        return math.radians(self.delta_theta_deg)

    @property
    def sigma_theta_rad(self) -> float:
        return math.radians(self.sigma_theta_deg)

    @property
    def sigma_b_theta_rad(self) -> float:
        return math.radians(self.sigma_b_theta_deg)


@dataclass(frozen=True)
class ChannelDraw:
    """One step's channel realization. ``b_r`` is never negative: a blocked
    path can only lengthen the measured range. ``is_nlos_aoa`` equals
    ``is_nlos`` under the shared-coin default."""

    is_nlos: bool
    b_r: float
    b_theta: float
    eps_r: float
    eps_theta: float
    is_nlos_aoa: bool

    def __post_init__(self):
        if self.b_r < 0.0:
            raise ValueError("range NLOS bias must be non-negative")


def sample_channel(scenario: Scenario, agent, rng: np.random.Generator) -> ChannelDraw:
    """Draw one step of the channel at the given agent pose.

    The five underlying draws (two coins, one exponential, two normals plus
    the bearing-bias normal) are taken unconditionally each call; parameter
    values only scale or gate them.
    """
    u_shared = rng.random()
    u_aoa = rng.random()
    e_bias = rng.standard_exponential()
    z_btheta = rng.standard_normal()
    z_r = rng.standard_normal()
    z_theta = rng.standard_normal()

    if scenario.obstacle is not None:
        blocked = segment_intersects_rect(agent, scenario.truth, scenario.obstacle)
        p = 1.0 if blocked else scenario.p_nlos_clear
    else:
        p = scenario.p_nlos
    is_nlos = u_shared < p
    is_nlos_aoa = is_nlos if scenario.shared_nlos_flag else (u_aoa < p)

    return ChannelDraw(
        is_nlos=is_nlos,
        b_r=scenario.mu_nlos * e_bias if is_nlos else 0.0,
        b_theta=scenario.sigma_b_theta_rad * z_btheta if is_nlos_aoa else 0.0,
        eps_r=scenario.sigma_r * z_r,
        eps_theta=scenario.sigma_theta_rad * z_theta,
        is_nlos_aoa=is_nlos_aoa,
    )


def observe_with_draw(scenario: Scenario, agent, rng: np.random.Generator,
                      step: int = 0) -> tuple[Measurement, Measurement, ChannelDraw, bool]:
    """Generate the step's (range, bearing) measurement pair.

    Returns the pair plus the channel draw and whether the range had to be
    clamped at zero (noise can't make a physical range negative).
    """
    pose = agent if isinstance(agent, Pose2) else Pose2(float(agent[0]), float(agent[1]))
    draw = sample_channel(scenario, pose.as_array(), rng)
    true_range = h_rtt(scenario.truth, pose)
    true_bearing = h_aoa(scenario.truth, pose)

    y_rtt = true_range + scenario.delta_r + draw.b_r + draw.eps_r
    clamped = y_rtt < 0.0
    if clamped:
        y_rtt = 0.0
    y_aoa = wrap_angle(true_bearing + scenario.delta_theta_rad + draw.b_theta + draw.eps_theta)

    m_rtt = Measurement(Modality.RTT, y_rtt, pose, step)
    m_aoa = Measurement(Modality.AOA, y_aoa, pose, step)
    return m_rtt, m_aoa, draw, clamped


def observe(scenario: Scenario, agent, rng: np.random.Generator,
            step: int = 0) -> tuple[Measurement, Measurement]:
    """Measurement pair for one step (see :func:`observe_with_draw`)."""
    m_rtt, m_aoa, _, _ = observe_with_draw(scenario, agent, rng, step)
    return m_rtt, m_aoa


def _canonical(sigma_r: float) -> Scenario:
    return Scenario(sigma_r=sigma_r)


PRESETS = {
    "canonical_low": lambda: _canonical(0.5),
    "canonical_medium": lambda: _canonical(1.5),
    "canonical_high": lambda: _canonical(2.5),
    "obstacle": lambda: Scenario(sigma_r=1.5,
                                 obstacle=Rect(50.0, 35.0, 25.0, 8.0),
                                 p_nlos_clear=0.1),
}


def get_preset(name: str) -> Scenario:
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None
