"""Hand-written opponents used for bootstrapping and oracle tests."""

from __future__ import annotations

import math

import numpy as np

from ..world import HIDER, SEEKER, TARGET, AgentAction, WorldState

SCRIPTED = ("random", "stationary", "pursuit")


def random_action(rng: np.random.Generator) -> AgentAction:
    t = rng.uniform(-1.0, 1.0, 3)
    return AgentAction((float(t[0]), float(t[1]), float(t[2])), float(rng.uniform(-1.0, 1.0)), "none")


def pursuit_action(state: WorldState, agent_id: int) -> AgentAction:
    """Turn toward the nearest opponent and fly at it."""
    if state.kind[agent_id] == SEEKER:
        prey = state.ids_of(HIDER) or state.ids_of(TARGET)
    else:
        prey = state.ids_of(SEEKER)
    if not prey:
        return AgentAction()
    rel = state.pos[prey] - state.pos[agent_id]
    j = int(np.argmin(np.linalg.norm(rel, axis=1)))
    x, y, z = rel[j]
    yaw = float(state.yaw[agent_id])
    c, s = math.cos(yaw), math.sin(yaw)
    lx, lz = x * c - z * s, x * s + z * c
    heading = math.atan2(lx, lz)
    norm = math.sqrt(lx * lx + y * y + lz * lz) or 1.0
    return AgentAction((lx / norm, y / norm, lz / norm), max(-1.0, min(1.0, 2.0 * heading / math.pi)), "none")


def scripted_action(name: str, state: WorldState, agent_id: int, rng: np.random.Generator) -> AgentAction:
    if name == "random":
        return random_action(rng)
    if name == "stationary":
        return AgentAction()
    if name == "pursuit":
        return pursuit_action(state, agent_id)
    raise ValueError(f"unknown scripted policy {name!r}; expected one of {SCRIPTED}")
