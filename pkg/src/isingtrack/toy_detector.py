"""Ideal straight-track events on a stack of planes parallel to the xy-plane.

Particles are lines from the origin. Each direction is drawn by picking a point
uniformly on the active rectangle of the last layer, so every particle crosses
every layer inside the aperture. Hits sit at the exact line/plane intersection
unless smearing or inefficiency is switched on.

Randomness comes from ``numpy.random.default_rng(rng_seed)`` (PCG64) and is
consumed in a fixed order: per particle two uniforms (target x, then y); then
per layer one uniform (efficiency test) followed, only when ``smear_sigma > 0``,
by two normals (x, y).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError
from .event_model import Event, Hit, TruthParticle

_GEOMETRY_PREFIX = "toy:"


@dataclass(frozen=True)
class DetectorGeometry:
    layer_z: tuple[float, ...]
    half_aperture_x: float
    half_aperture_y: float

    def __post_init__(self):
        object.__setattr__(self, "layer_z", tuple(float(z) for z in self.layer_z))
        if not self.layer_z:
            raise ConfigError("geometry needs at least one layer")
        if any(b <= a for a, b in zip(self.layer_z, self.layer_z[1:])):
            raise ConfigError("layer_z must be strictly increasing")
        if self.half_aperture_x <= 0 or self.half_aperture_y <= 0:
            raise ConfigError("half apertures must be positive")

    @classmethod
    def regular(cls, n_layers: int, spacing: float, half_x: float, half_y: float) -> "DetectorGeometry":
        # first plane at z = spacing, so the origin is never on a layer
        return cls(tuple(spacing * (k + 1) for k in range(n_layers)), half_x, half_y)

    @property
    def id(self) -> str:
        zs = ",".join(repr(z) for z in self.layer_z)
        return f"{_GEOMETRY_PREFIX}z={zs};hx={self.half_aperture_x!r};hy={self.half_aperture_y!r}"

    @classmethod
    def from_id(cls, geometry_id: str) -> Optional["DetectorGeometry"]:
        """Inverse of :attr:`id`; returns ``None`` for non-toy ids."""
        if not geometry_id.startswith(_GEOMETRY_PREFIX):
            return None
        try:
            fields = dict(part.split("=", 1) for part in geometry_id[len(_GEOMETRY_PREFIX):].split(";"))
            zs = tuple(float(z) for z in fields["z"].split(","))
            return cls(zs, float(fields["hx"]), float(fields["hy"]))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"malformed toy geometry id {geometry_id!r}: {exc}") from None


@dataclass(frozen=True)
class ToyConfig:
    n_layers: int = 3
    n_particles: int = 5
    layer_spacing: float = 30.0
    half_aperture_x: float = 50.0
    half_aperture_y: float = 50.0
    smear_sigma: float = 0.0
    hit_efficiency: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_layers < 1:
            raise ConfigError("n_layers must be >= 1")
        if self.n_particles < 0:
            raise ConfigError("n_particles must be >= 0")
        if self.layer_spacing <= 0:
            raise ConfigError("layer_spacing must be positive")
        if self.smear_sigma < 0:
            raise ConfigError("smear_sigma must be non-negative")
        if not 0.0 <= self.hit_efficiency <= 1.0:
            raise ConfigError("hit_efficiency must lie in [0, 1]")

    @property
    def geometry(self) -> DetectorGeometry:
        return DetectorGeometry.regular(
            self.n_layers, self.layer_spacing, self.half_aperture_x, self.half_aperture_y
        )


def generate_event(config: ToyConfig) -> Event:
    """Generate one event. Hits are ordered by module, then by particle."""
    geometry = config.geometry
    rng = np.random.default_rng(config.rng_seed)
    z_last = geometry.layer_z[-1]

    raw = []  # (module, particle, x, y, z)
    directions = []
    for pid in range(config.n_particles):
        tx = rng.uniform(-geometry.half_aperture_x, geometry.half_aperture_x)
        ty = rng.uniform(-geometry.half_aperture_y, geometry.half_aperture_y)
        norm = np.sqrt(tx * tx + ty * ty + z_last * z_last)
        d = (float(tx / norm), float(ty / norm), float(z_last / norm))
        directions.append(d)
        slope_x, slope_y = d[0] / d[2], d[1] / d[2]
        for module, z in enumerate(geometry.layer_z):
            detected = rng.uniform() < config.hit_efficiency
            x, y = slope_x * z, slope_y * z
            if config.smear_sigma > 0:
                x += rng.normal(0.0, config.smear_sigma)
                y += rng.normal(0.0, config.smear_sigma)
            if detected:
                raw.append((module, pid, float(x), float(y), float(z)))

    raw.sort(key=lambda r: (r[0], r[1]))
    hits = tuple(Hit(k, x, y, z, module, pid) for k, (module, pid, x, y, z) in enumerate(raw))
    particles = tuple(
        TruthParticle(
            pid,
            (0.0, 0.0, 0.0),
            directions[pid],
            tuple(h.id for h in hits if h.truth_id == pid),
        )
        for pid in range(config.n_particles)
    )
    return Event(hits, particles, geometry.id)


def generate_batch(config: ToyConfig, n_events: int) -> list[Event]:
    """Event ``k`` uses seed ``config.rng_seed + k``."""
    if n_events < 0:
        raise ConfigError("n_events must be >= 0")
    base = config.rng_seed
    return [
        generate_event(ToyConfig(**{**config.__dict__, "rng_seed": base + k}))
        for k in range(n_events)
    ]
