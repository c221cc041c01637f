"""Assemble per-agent observation vectors from the sensor suite."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from ..game import FRONTAL, in_fov, line_clear
from ..sensors import (
    GRID_LAYOUT_VERSION,
    SPATIAL,
    GridSensorConfig,
    ProprioVector,
    RaycastConfig,
    grid_scan,
    proprio,
    raycast_sweep,
)
from ..world import HIDER, SEEKER, TARGET, WorldState

RELATIVE_SIZE = 5


@dataclass(frozen=True)
class ObservationConfig:
    """Which sensors feed the policy, concatenated in this order: spatial
    grid, frontal grid, raycasts, proprioception, relative features."""

    spatial: GridSensorConfig | None = SPATIAL
    frontal: GridSensorConfig | None = FRONTAL
    raycast: RaycastConfig | None = RaycastConfig()
    proprio: bool = True
    relative: bool = False

    def size(self) -> int:
        n = 0
        for g in (self.spatial, self.frontal, self.raycast):
            if g is not None:
                n += g.size
        if self.proprio:
            n += ProprioVector.SIZE
        if self.relative:
            n += RELATIVE_SIZE
        return n

    def layout_id(self) -> str:
        """Stable description of the vector layout, hashed into checkpoints."""
        doc = {
            "grid_layout": GRID_LAYOUT_VERSION,
            "spatial": None if self.spatial is None else asdict(self.spatial),
            "frontal": None if self.frontal is None else asdict(self.frontal),
            "raycast": None if self.raycast is None else asdict(self.raycast),
            "proprio": self.proprio,
            "relative": self.relative,
        }
        return json.dumps(doc, sort_keys=True, default=list)


def _opponents(state: WorldState, agent_id: int) -> list[int]:
    k = state.kind[agent_id]
    if k == HIDER:
        return state.ids_of(SEEKER)
    tgt = state.ids_of(TARGET)
    if tgt:
        return tgt
    return state.ids_of(HIDER)


def relative_features(state: WorldState, agent_id: int, frontal: GridSensorConfig = FRONTAL) -> np.ndarray:
    """Unit direction to the nearest opponent (or target) in the agent's yaw
    frame, its distance scaled by the arena span, and an exposure flag: for a
    hider, whether some seeker can see it; otherwise whether the agent sees
    its nearest opponent."""
    out = np.zeros(RELATIVE_SIZE)
    opp = _opponents(state, agent_id)
    if not opp:
        return out
    span = float(np.max(state.bounds_hi - state.bounds_lo))
    rel = state.pos[opp] - state.pos[agent_id]
    dist = np.linalg.norm(rel, axis=1)
    j = int(np.argmin(dist))
    yaw = float(state.yaw[agent_id])
    c, s = math.cos(yaw), math.sin(yaw)
    x, y, z = rel[j]
    if dist[j] > 0.0:
        out[0:3] = np.array([x * c - z * s, y, x * s + z * c]) / dist[j]
    out[3] = min(1.0, dist[j] / span)
    if state.kind[agent_id] == HIDER:
        me = state.pos[agent_id]
        seen = any(in_fov(state, o, me, frontal) and line_clear(state, state.pos[o], me) for o in opp)
    else:
        target = state.pos[opp[j]]
        seen = in_fov(state, agent_id, target, frontal) and line_clear(state, state.pos[agent_id], target)
    out[4] = 1.0 if seen else 0.0
    return out


def observe(state: WorldState, agent_id: int, config: ObservationConfig, max_steps: int) -> np.ndarray:
    parts = []
    if config.spatial is not None:
        parts.append(grid_scan(state, agent_id, config.spatial).values)
    if config.frontal is not None:
        parts.append(grid_scan(state, agent_id, config.frontal).values)
    if config.raycast is not None:
        parts.append(raycast_sweep(state, agent_id, config.raycast))
    if config.proprio:
        parts.append(proprio(state, agent_id, max_steps).as_array())
    if config.relative:
        parts.append(relative_features(state, agent_id, config.frontal or FRONTAL))
    if not parts:
        return np.zeros(0)
    return np.concatenate(parts)
