"""Observation generation: spherical grid sensors, sphere raycasts and the
proprioceptive vector.

Grid layout (version ``GRID_LAYOUT_VERSION``): values are row-major over
``(row, col, channel)``. Row 0 is the northernmost latitude band, column 0 the
leftmost longitude band, both in the observing agent's yaw-aligned frame.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, fields
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import kernels
from .world import AGENT_KINDS, KINDS, Body, WorldState, forward_vector

GRID_LAYOUT_VERSION = 1
TAG_KINDS = ("hider", "seeker", "prop", "obstacle", "wall", "boundary")
DEFAULT_CHANNELS = ("occupancy",) + TAG_KINDS + ("distance",)


def _coerce(cfg) -> None:
    """Normalize field types so equal configs hash and serialize alike."""
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.type == "float":
            v = float(v)
        elif f.type == "int":
            v = int(v)
        elif f.type == "tuple":
            v = tuple(v)
        object.__setattr__(cfg, f.name, v)


@dataclass(frozen=True)
class GridSensorConfig:
    lat_angle_north: float = 90.0
    lat_angle_south: float = 90.0
    lon_angle: float = 180.0  # half-angle per side
    min_distance: float = 0.1
    max_distance: float = 20.0
    cell_arc: float = 10.0
    normalization_exponent: float = 0.5
    initial_collider_buffer: int = 32
    feature_channels: tuple = DEFAULT_CHANNELS

    def __post_init__(self):
        _coerce(self)
        if not 0 < self.min_distance < self.max_distance:
            raise ValueError("need 0 < min_distance < max_distance")
        if not 0 < self.normalization_exponent <= 1:
            raise ValueError("normalization_exponent must be in (0, 1]")
        if self.cell_arc <= 0:
            raise ValueError("cell_arc must be positive")
        for span in (self.lat_angle_north + self.lat_angle_south, 2 * self.lon_angle):
            q = Fraction(str(span)) / Fraction(str(self.cell_arc))
            if q.denominator != 1 or q <= 0:
                raise ValueError(f"cell_arc {self.cell_arc} does not divide {span}")
        if self.initial_collider_buffer < 1:
            raise ValueError("initial_collider_buffer must be >= 1")
        for ch in self.feature_channels:
            if ch not in ("occupancy", "distance") and ch not in KINDS:
                raise ValueError(f"unknown feature channel {ch!r}")

    @property
    def rows(self) -> int:
        return int(round((self.lat_angle_north + self.lat_angle_south) / self.cell_arc))

    @property
    def cols(self) -> int:
        return int(round(2 * self.lon_angle / self.cell_arc))

    @property
    def size(self) -> int:
        return self.rows * self.cols * len(self.feature_channels)


SPATIAL = GridSensorConfig(90.0, 90.0, 180.0, 0.1, 20.0, 10.0, 0.5, 32)
FRONTAL = GridSensorConfig(90.0, 90.0, 84.0, 0.1, 20.0, 12.0, 0.5, 400)


@dataclass(frozen=True)
class GridObservation:
    rows: int
    cols: int
    channels: int
    values: np.ndarray
    channel_names: tuple = ()
    capacity: int = 0  # final candidate buffer capacity

    def grid(self) -> np.ndarray:
        return self.values.reshape(self.rows, self.cols, self.channels)

    def channel(self, name: str) -> np.ndarray:
        return self.grid()[:, :, self.channel_names.index(name)]


@dataclass(frozen=True)
class RaycastConfig:
    rays_per_direction: int = 8
    max_ray_degrees: float = 180.0
    sphere_radius: float = 0.3
    ray_length: float = 20.0
    tags: tuple = TAG_KINDS

    def __post_init__(self):
        _coerce(self)
        if self.rays_per_direction < 1:
            raise ValueError("rays_per_direction must be >= 1")
        if not 0 <= self.sphere_radius < self.ray_length:
            raise ValueError("need sphere_radius < ray_length")

    @property
    def size(self) -> int:
        return 2 * self.rays_per_direction * (1 + len(self.tags))


@dataclass(frozen=True)
class ProprioVector:
    normalized_position: np.ndarray
    normalized_velocity: np.ndarray
    facing_direction: np.ndarray
    normalized_yaw: float
    is_dragging: float
    normalized_timer: float

    SIZE = 12

    def as_array(self) -> np.ndarray:
        return np.concatenate(
            [
                self.normalized_position,
                self.normalized_velocity,
                self.facing_direction,
                [self.normalized_yaw, self.is_dragging, self.normalized_timer],
            ]
        )


# --- Cartesian cell primitives --------------------------------------------


def cell_center(corner, size) -> np.ndarray:
    return np.asarray(corner, dtype=np.float64) + 0.5 * np.asarray(size, dtype=np.float64)


def _as_boxes(objects):
    """(lo, hi, kind) arrays from Bodies or (lo, hi[, kind]) tuples."""
    lo, hi, kind = [], [], []
    for ob in objects:
        if isinstance(ob, Body):
            lo.append(ob.position - ob.half_extents)
            hi.append(ob.position + ob.half_extents)
            kind.append(ob.kind)
        else:
            lo.append(np.asarray(ob[0], dtype=np.float64))
            hi.append(np.asarray(ob[1], dtype=np.float64))
            kind.append(ob[2] if len(ob) > 2 else None)
    return np.array(lo).reshape(-1, 3), np.array(hi).reshape(-1, 3), kind


def _intersecting(cell_lo, cell_hi, lo, hi):
    return np.all(lo <= cell_hi, axis=1) & np.all(cell_lo <= hi, axis=1)


def cell_occupancy(cell_lo, cell_hi, objects: Sequence) -> int:
    """1 if any object's closed box intersects the closed cell box."""
    lo, hi, _ = _as_boxes(objects)
    if lo.shape[0] == 0:
        return 0
    return int(np.any(_intersecting(np.asarray(cell_lo), np.asarray(cell_hi), lo, hi)))


def cell_features(cell_lo, cell_hi, objects: Sequence, channels: Sequence[str] = DEFAULT_CHANNELS):
    """Per-channel aggregate over the objects intersecting the cell.

    Kind tags and occupancy aggregate by max. ``distance`` is the distance
    from the cell centre to the nearest intersecting box, divided by the
    cell's half-diagonal (so it lies in [0, 1]); an empty cell reads 1.
    """
    cell_lo = np.asarray(cell_lo, dtype=np.float64)
    cell_hi = np.asarray(cell_hi, dtype=np.float64)
    lo, hi, kinds = _as_boxes(objects)
    hit = _intersecting(cell_lo, cell_hi, lo, hi) if lo.shape[0] else np.zeros(0, bool)
    out = np.zeros(len(channels))
    center = 0.5 * (cell_lo + cell_hi)
    half_diag = float(np.linalg.norm(0.5 * (cell_hi - cell_lo)))
    nearest = math.inf
    for j in np.flatnonzero(hit):
        closest = np.clip(center, lo[j], hi[j])
        nearest = min(nearest, float(np.linalg.norm(closest - center)))
    for c, name in enumerate(channels):
        if name == "occupancy":
            out[c] = 1.0 if hit.any() else 0.0
        elif name == "distance":
            out[c] = 1.0 if not hit.any() else min(1.0, nearest / half_diag)
        else:
            out[c] = 1.0 if any(kinds[j] == name for j in np.flatnonzero(hit)) else 0.0
    return out


def cell_size_at_distance(cell_arc: float, distance: float) -> float:
    """Arc length subtended by ``cell_arc`` degrees at radius ``distance``."""
    if cell_arc <= 0 or distance <= 0:
        raise ValueError("cell_arc and distance must be positive")
    return 2.0 * math.pi * distance * (cell_arc / 360.0)


# --- spherical grid sensor ------------------------------------------------


class CandidateBuffer:
    """Growable id list: starts at a fixed capacity and doubles when full."""

    def __init__(self, capacity: int):
        self.ids = np.empty(max(1, int(capacity)), dtype=np.int64)
        self.count = 0

    @property
    def capacity(self) -> int:
        return int(self.ids.shape[0])

    def push(self, i: int) -> None:
        if self.count == self.capacity:
            grown = np.empty(2 * self.capacity, dtype=np.int64)
            grown[: self.count] = self.ids
            self.ids = grown
        self.ids[self.count] = i
        self.count += 1

    def extend(self, ids) -> None:
        ids = np.asarray(ids, dtype=np.int64)
        while self.count + ids.size > self.capacity:
            grown = np.empty(2 * self.capacity, dtype=np.int64)
            grown[: self.count] = self.ids[: self.count]
            self.ids = grown
        self.ids[self.count:self.count + ids.size] = ids
        self.count += ids.size

    def view(self) -> np.ndarray:
        return self.ids[: self.count]


@functools.lru_cache(maxsize=32)
def _local_directions(config: GridSensorConfig) -> np.ndarray:
    R, C, a = config.rows, config.cols, math.radians(config.cell_arc)
    lat = math.radians(config.lat_angle_north) - (np.arange(R) + 0.5) * a
    lon = -math.radians(config.lon_angle) + (np.arange(C) + 0.5) * a
    lat_g, lon_g = np.meshgrid(lat, lon, indexing="ij")
    d = np.stack(
        [np.cos(lat_g) * np.sin(lon_g), np.sin(lat_g), np.cos(lat_g) * np.cos(lon_g)], axis=-1
    )
    return d.reshape(R * C, 3)


def _to_world(local: np.ndarray, yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    x, y, z = local[..., 0], local[..., 1], local[..., 2]
    return np.stack([x * c + z * s, y, z * c - x * s], axis=-1)


def _to_local(world: np.ndarray, yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    x, y, z = world[..., 0], world[..., 1], world[..., 2]
    return np.stack([x * c - z * s, y, x * s + z * c], axis=-1)


def direction_cell(local_dir, config: GridSensorConfig) -> tuple[int, int] | None:
    """(row, col) of the bucket containing a local-frame direction, or None
    when it falls outside the field of view."""
    x, y, z = (float(v) for v in local_dir)
    lat = math.degrees(math.atan2(y, math.hypot(x, z)))
    lon = math.degrees(math.atan2(x, z))
    if lat > config.lat_angle_north or lat < -config.lat_angle_south:
        return None
    if abs(lon) > config.lon_angle:
        return None
    row = min(int((config.lat_angle_north - lat) // config.cell_arc), config.rows - 1)
    col = min(int((lon + config.lon_angle) // config.cell_arc), config.cols - 1)
    return row, col


def _direction_cells(local: np.ndarray, config: GridSensorConfig) -> np.ndarray:
    """Vectorized ``direction_cell``: flat cell index per row, -1 outside."""
    x, y, z = local[:, 0], local[:, 1], local[:, 2]
    lat = np.degrees(np.arctan2(y, np.hypot(x, z)))
    lon = np.degrees(np.arctan2(x, z))
    row = np.minimum(((config.lat_angle_north - lat) // config.cell_arc).astype(np.int64), config.rows - 1)
    col = np.minimum(((lon + config.lon_angle) // config.cell_arc).astype(np.int64), config.cols - 1)
    inside = (lat <= config.lat_angle_north) & (lat >= -config.lat_angle_south)
    inside &= np.abs(lon) <= config.lon_angle
    return np.where(inside, row * config.cols + col, -1)


def _check_agent(state: WorldState, agent_id: int):
    if not (0 <= agent_id < state.n) or state.kind[agent_id] not in AGENT_KINDS:
        raise KeyError(f"unknown agent id {agent_id}")


def gather_candidates(state: WorldState, agent_id: int, max_distance: float, capacity: int) -> CandidateBuffer:
    """Bodies (other than the agent) whose box lies within ``max_distance``."""
    o = state.pos[agent_id]
    closest = np.clip(o, state.pos - state.half, state.pos + state.half)
    dist = np.linalg.norm(closest - o, axis=1)
    near = dist <= max_distance
    near[agent_id] = False
    buf = CandidateBuffer(capacity)
    buf.extend(np.flatnonzero(near))
    return buf


def grid_scan(state: WorldState, agent_id: int, config: GridSensorConfig) -> GridObservation:
    """Spherical grid of the nearest detectable body per direction bucket.

    Each cell casts its centre ray; in addition every candidate body casts a
    ray through its own centre into whichever cell that direction falls in,
    so bodies narrower than a cell are still seen. A cell reports the
    nearest entry distance in ``[min_distance, max_distance]`` over its rays.
    """
    _check_agent(state, agent_id)
    R, C = config.rows, config.cols
    channels = config.feature_channels
    values = np.zeros((R * C, len(channels)))
    dist_ch = [i for i, ch in enumerate(channels) if ch == "distance"]
    values[:, dist_ch] = 1.0
    buf = gather_candidates(state, agent_id, config.max_distance, config.initial_collider_buffer)
    cand = buf.view()
    if cand.size == 0:
        return GridObservation(R, C, len(channels), values.reshape(-1), tuple(channels), buf.capacity)
    yaw = float(state.yaw[agent_id])
    origin = state.pos[agent_id]
    dirs = [_to_world(_local_directions(config), yaw)]
    cells = [np.arange(R * C)]
    rel = state.pos[cand] - origin
    norms = np.linalg.norm(rel, axis=1)
    keep = norms > 0.0
    rel, norms = rel[keep], norms[keep]
    extra = _direction_cells(_to_local(rel, yaw), config)
    ok = extra >= 0
    if np.any(ok):
        dirs.append(rel[ok] / norms[ok][:, None])
        cells.append(extra[ok])
    all_dirs = np.concatenate(dirs)
    all_cells = np.concatenate(cells)
    lo = state.pos[cand] - state.half[cand]
    hi = state.pos[cand] + state.half[cand]
    t, idx = kernels.ray_boxes(origin, all_dirs, lo, hi, config.min_distance, config.max_distance)
    rays = np.flatnonzero(idx >= 0)
    if rays.size:
        # nearest hit per cell; ties keep the lowest ray index
        order = np.lexsort((rays, t[rays], all_cells[rays]))
        rays = rays[order]
        cell_of = all_cells[rays]
        first = np.ones(rays.size, dtype=bool)
        first[1:] = cell_of[1:] != cell_of[:-1]
        rays, hit = rays[first], cell_of[first]
        kinds = state.kind[cand[idx[rays]]]
        norm_d = (t[rays] / config.max_distance) ** config.normalization_exponent
        for ci, name in enumerate(channels):
            if name == "occupancy":
                values[hit, ci] = 1.0
            elif name == "distance":
                values[hit, ci] = norm_d
            else:
                values[hit, ci] = (kinds == KINDS.index(name)).astype(np.float64)
    return GridObservation(R, C, len(channels), values.reshape(-1), tuple(channels), buf.capacity)


# --- raycasts -------------------------------------------------------------


def ray_angles(config: RaycastConfig) -> np.ndarray:
    """Yaw offsets (radians) of the horizontal rays, ascending, symmetric
    about the facing direction; ``rays_per_direction`` rays on each side."""
    n = config.rays_per_direction
    step = config.max_ray_degrees / n
    right = (np.arange(n) + 0.5) * step
    return np.radians(np.concatenate([-right[::-1], right]))


def raycast_sweep(state: WorldState, agent_id: int, config: RaycastConfig) -> np.ndarray:
    """Per ray: normalized hit distance (1 = no hit) then one-hot hit tags."""
    _check_agent(state, agent_id)
    ang = float(state.yaw[agent_id]) + ray_angles(config)
    dirs = np.stack([np.sin(ang), np.zeros_like(ang), np.cos(ang)], axis=1)
    others = np.array([i for i in range(state.n) if i != agent_id and state.kind[i] != _TARGET_KIND])
    width = 1 + len(config.tags)
    out = np.zeros((dirs.shape[0], width))
    out[:, 0] = 1.0
    if others.size == 0:
        return out.reshape(-1)
    lo = state.pos[others] - state.half[others]
    hi = state.pos[others] + state.half[others]
    t, idx = kernels.sphere_sweep(state.pos[agent_id], dirs, config.sphere_radius, config.ray_length, lo, hi)
    for r in np.flatnonzero(idx >= 0):
        out[r, 0] = t[r] / config.ray_length
        kind = KINDS[state.kind[others[idx[r]]]]
        if kind in config.tags:
            out[r, 1 + config.tags.index(kind)] = 1.0
    return out.reshape(-1)


_TARGET_KIND = KINDS.index("target")


# --- proprioception -------------------------------------------------------


def proprio(state: WorldState, agent_id: int, max_steps: int) -> ProprioVector:
    _check_agent(state, agent_id)
    if max_steps <= 0:
        raise ValueError("max_steps must be positive")
    span = state.bounds_hi - state.bounds_lo
    pos = np.clip((state.pos[agent_id] - state.bounds_lo) / span, 0.0, 1.0)
    vel = np.clip(state.vel[agent_id] / state.params.terminal_speed, -1.0, 1.0)
    yaw = float(state.yaw[agent_id])
    nyaw = (yaw % (2 * math.pi)) / (2 * math.pi)
    if nyaw >= 1.0:
        nyaw = 0.0
    return ProprioVector(
        normalized_position=pos,
        normalized_velocity=vel,
        facing_direction=forward_vector(yaw),
        normalized_yaw=nyaw,
        is_dragging=1.0 if np.any(state.dragged_by == agent_id) else 0.0,
        normalized_timer=min(1.0, state.tick / max_steps),
    )


@dataclass(frozen=True)
class SensorSuite:
    """Which sensors feed an agent's observation vector, in layout order."""

    spatial: GridSensorConfig | None = SPATIAL
    frontal: GridSensorConfig | None = FRONTAL
    raycast: RaycastConfig | None = field(default_factory=RaycastConfig)
    use_proprio: bool = True
