"""Arena construction and physics-lite simulation for flying agents.

Coordinates are metres with ``y`` up. An agent with yaw 0 faces ``+z``;
positive yaw turns toward ``+x``. Every body is an axis-aligned box.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import kernels

KINDS = ("hider", "seeker", "prop", "obstacle", "wall", "boundary", "target")
HIDER, SEEKER, PROP, OBSTACLE, WALL, BOUNDARY, TARGET = range(len(KINDS))
AGENT_KINDS = (HIDER, SEEKER)

MANIPULATE = ("none", "grab_or_lock", "release")

STATE_FORMAT = "hideseek.world"
STATE_FORMAT_VERSION = 1

Vec3 = np.ndarray


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending setting."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def vec3(x, y=None, z=None) -> Vec3:
    if y is None:
        arr = np.asarray(x, dtype=np.float64).reshape(3).copy()
    else:
        arr = np.array([x, y, z], dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite vector {arr}")
    return arr


def forward_vector(yaw: float) -> Vec3:
    return np.array([math.sin(yaw), 0.0, math.cos(yaw)])


def right_vector(yaw: float) -> Vec3:
    return np.array([math.cos(yaw), 0.0, -math.sin(yaw)])


@dataclass(frozen=True)
class WorldParams:
    """Physical constants shared by every body in a world."""

    dt: float = 0.02
    accel_gain: float = 10.0
    drag: float = 2.0
    max_yaw_rate: float = math.pi
    gravity: float = 9.81
    object_drag: float = 0.5
    obstacle_gravity_scale: float = 0.1
    grab_radius: float = 1.5
    drag_offset: float = 1.0
    lock_margin: float = 0.1
    coverage: float = 0.9
    pushout_iterations: int = 4

    @property
    def terminal_speed(self) -> float:
        # thrust vectors are capped to unit norm
        return self.accel_gain / self.drag


@dataclass(frozen=True)
class ArenaConfig:
    """Geometry of the hide-and-seek arena (or an open scenario arena)."""

    layout: str = "hideseek"  # "hideseek" or "open"
    size_x: float = 20.0
    size_y: float = 8.0
    size_z: float = 20.0
    boundary_thickness: float = 0.4
    room_half: float = 4.0
    wall_thickness: float = 0.3
    slot_half_width: float = 0.55
    slot_half_height: float = 0.55
    window_sill: float = 3.0
    agent_half: float = 0.4
    prop_half: float = 0.6
    obstacle_half: float = 0.35
    obstacle_count: int = 5
    target: str = "none"  # none | stationary | fleeing | wander
    target_half: float = 0.5
    target_speed: float = 1.5


@dataclass(frozen=True)
class Body:
    id: int
    kind: str
    position: Vec3
    velocity: Vec3
    yaw: float
    half_extents: Vec3
    gravity_scale: float = 0.0
    locked: bool = False
    dragged_by: int | None = None
    group: int = -1


@dataclass(frozen=True)
class Opening:
    id: int
    kind: str  # "door" or "window"
    slot_center: Vec3
    slot_half_extents: Vec3
    enabled: bool = True
    side: int = 0


@dataclass(frozen=True)
class AgentAction:
    thrust: tuple = (0.0, 0.0, 0.0)
    yaw_rate: float = 0.0
    manipulate: str = "none"

    def clamped(self) -> "AgentAction":
        t = tuple(float(min(1.0, max(-1.0, v))) for v in self.thrust)
        return AgentAction(t, float(min(1.0, max(-1.0, self.yaw_rate))), self.manipulate)


ZERO_ACTION = AgentAction()


@dataclass
class WorldState:
    """Full simulation state as parallel arrays indexed by body id."""

    tick: int
    level: int
    bounds_lo: np.ndarray
    bounds_hi: np.ndarray
    kind: np.ndarray
    pos: np.ndarray
    vel: np.ndarray
    yaw: np.ndarray
    half: np.ndarray
    gravity: np.ndarray
    locked: np.ndarray
    dragged_by: np.ndarray
    group: np.ndarray
    openings: tuple = ()
    params: WorldParams = field(default_factory=WorldParams)
    # replaced wholesale when randomness is consumed, never mutated in place
    rng_state: dict = field(default_factory=dict)
    # derived from the layout arrays, which never change after construction
    static_cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def n(self) -> int:
        return int(self.kind.shape[0])

    @property
    def bodies(self) -> list[Body]:
        return [self.body(i) for i in range(self.n)]

    def body(self, i: int) -> Body:
        db = int(self.dragged_by[i])
        return Body(
            id=i,
            kind=KINDS[self.kind[i]],
            position=self.pos[i].copy(),
            velocity=self.vel[i].copy(),
            yaw=float(self.yaw[i]),
            half_extents=self.half[i].copy(),
            gravity_scale=float(self.gravity[i]),
            locked=bool(self.locked[i]),
            dragged_by=None if db < 0 else db,
            group=int(self.group[i]),
        )

    def ids_of(self, kind: int) -> list[int]:
        key = ("ids", kind)
        if key not in self.static_cache:
            self.static_cache[key] = [int(i) for i in np.flatnonzero(self.kind == kind)]
        return list(self.static_cache[key])

    @property
    def agent_ids(self) -> list[int]:
        if "agents" not in self.static_cache:
            self.static_cache["agents"] = [
                int(i) for i in np.flatnonzero((self.kind == HIDER) | (self.kind == SEEKER))
            ]
        return list(self.static_cache["agents"])

    def mask(self, name: str) -> np.ndarray:
        """Cached boolean masks over body kinds (read-only)."""
        if name not in self.static_cache:
            k = self.kind
            masks = {
                "agent": (k == HIDER) | (k == SEEKER),
                "static": (k == WALL) | (k == BOUNDARY),
                "obstacle": k == OBSTACLE,
                "prop": k == PROP,
                "target": k == TARGET,
            }
            for key, m in masks.items():
                m.setflags(write=False)
                self.static_cache[key] = m
        return self.static_cache[name]

    def copy(self) -> "WorldState":
        """Copy of the mutable arrays; layout arrays (kind, half, group,
        bounds) are shared because nothing modifies them after building."""
        return WorldState(
            self.tick, self.level, self.bounds_lo, self.bounds_hi, self.kind,
            self.pos.copy(), self.vel.copy(), self.yaw.copy(), self.half, self.gravity.copy(),
            self.locked.copy(), self.dragged_by.copy(), self.group, self.openings, self.params,
            self.rng_state, self.static_cache,
        )

    def rng(self) -> np.random.Generator:
        bg = np.random.PCG64()
        bg.state = self.rng_state
        return np.random.Generator(bg)

    def with_rng(self, rng: np.random.Generator) -> "WorldState":
        """Copy of this state carrying ``rng``'s current position."""
        out = self.copy()
        out.rng_state = rng.bit_generator.state
        return out

    def box_lo(self) -> np.ndarray:
        return self.pos - self.half

    def box_hi(self) -> np.ndarray:
        return self.pos + self.half


class _Builder:
    def __init__(self):
        self.rows = []

    def add(self, kind, pos, half, gravity=0.0, group=-1, yaw=0.0):
        self.rows.append((kind, vec3(pos), vec3(half), float(gravity), int(group), float(yaw)))
        return len(self.rows) - 1

    def overlaps(self, pos, half, margin):
        for _, p, h, *_ in self.rows:
            if np.all(np.abs(p - pos) < h + half + margin):
                return True
        return False

    def finish(self, level, lo, hi, openings, params, rng) -> WorldState:
        n = len(self.rows)
        return WorldState(
            tick=0,
            level=int(level),
            bounds_lo=np.asarray(lo, dtype=np.float64),
            bounds_hi=np.asarray(hi, dtype=np.float64),
            kind=np.array([r[0] for r in self.rows], dtype=np.int64),
            pos=np.array([r[1] for r in self.rows], dtype=np.float64).reshape(n, 3),
            vel=np.zeros((n, 3)),
            yaw=np.array([r[5] for r in self.rows], dtype=np.float64),
            half=np.array([r[2] for r in self.rows], dtype=np.float64).reshape(n, 3),
            gravity=np.array([r[3] for r in self.rows], dtype=np.float64),
            locked=np.zeros(n, dtype=bool),
            dragged_by=np.full(n, -1, dtype=np.int64),
            group=np.array([r[4] for r in self.rows], dtype=np.int64),
            openings=tuple(openings),
            params=params,
            rng_state=rng.bit_generator.state,
        )


def _arena_bounds(arena: ArenaConfig):
    hx, hz = arena.size_x / 2, arena.size_z / 2
    return np.array([-hx, 0.0, -hz]), np.array([hx, arena.size_y, hz])


def _add_boundaries(b: _Builder, arena: ArenaConfig):
    lo, hi = _arena_bounds(arena)
    t = arena.boundary_thickness / 2
    hy = arena.size_y / 2
    hx, hz = hi[0], hi[2]
    b.add(BOUNDARY, (0.0, hy, hz - t), (hx, hy, t))
    b.add(BOUNDARY, (hx - t, hy, 0.0), (t, hy, hz - 2 * t))
    b.add(BOUNDARY, (0.0, hy, -hz + t), (hx, hy, t))
    b.add(BOUNDARY, (-hx + t, hy, 0.0), (t, hy, hz - 2 * t))
    return lo, hi


# room sides: 0 -> +z, 1 -> +x, 2 -> -z, 3 -> -x
_SIDE_NORMAL_AXIS = (2, 0, 2, 0)
_SIDE_SIGN = (1.0, 1.0, -1.0, -1.0)
# doors on even sides, windows on odd ones
_SIDE_OPENING = ("door", "window", "door", "window")
# L groups sit at corners (+x+z, +x-z, -x-z, -x+z); (negative end, positive end) per side
_SIDE_GROUPS = ((3, 0), (1, 0), (2, 1), (2, 3))


def _side_box(arena: ArenaConfig, side: int, t_lo: float, t_hi: float, y_lo: float, y_hi: float):
    """Box on room side ``side`` spanning tangent [t_lo, t_hi] and height [y_lo, y_hi]."""
    w = arena.wall_thickness / 2
    normal = _SIDE_NORMAL_AXIS[side]
    tangent = 0 if normal == 2 else 2
    c = np.zeros(3)
    h = np.zeros(3)
    c[normal] = _SIDE_SIGN[side] * arena.room_half
    h[normal] = w
    c[tangent] = (t_lo + t_hi) / 2
    h[tangent] = (t_hi - t_lo) / 2
    c[1] = (y_lo + y_hi) / 2
    h[1] = (y_hi - y_lo) / 2
    return c, h


def _add_room(b: _Builder, arena: ArenaConfig, open_sides: Sequence[int]):
    """Four L-shaped wall groups around the room, one framed chunk per side.

    Each side is two arms (belonging to the L groups at its ends) plus a
    central chunk. The chunk is a solid filler when the side is closed, or a
    lintel (and sill for windows) framing the opening slot when it is open.
    """
    R = arena.room_half
    w = arena.wall_thickness / 2
    sw = arena.slot_half_width
    sh = arena.slot_half_height
    Y = arena.size_y
    openings = []
    for side in range(4):
        # z-facing sides reach over the corners; x-facing sides stop inside them
        ext = R + w if _SIDE_NORMAL_AXIS[side] == 2 else R - w
        neg_group, pos_group = _SIDE_GROUPS[side]
        c, h = _side_box(arena, side, -ext, -sw, 0.0, Y)
        b.add(WALL, c, h, group=neg_group)
        c, h = _side_box(arena, side, sw, ext, 0.0, Y)
        b.add(WALL, c, h, group=pos_group)
        chunk = 4 + side
        if side in open_sides:
            kind = _SIDE_OPENING[side]
            y0 = 0.0 if kind == "door" else arena.window_sill
            y1 = y0 + 2 * sh
            if y0 > 0:
                c, h = _side_box(arena, side, -sw, sw, 0.0, y0)
                b.add(WALL, c, h, group=chunk)
            c, h = _side_box(arena, side, -sw, sw, y1, Y)
            b.add(WALL, c, h, group=chunk)
            sc, shalf = _side_box(arena, side, -sw, sw, y0, y1)
            openings.append(Opening(len(openings), kind, sc, shalf, True, side))
        else:
            c, h = _side_box(arena, side, -sw, sw, 0.0, Y)
            b.add(WALL, c, h, group=chunk)
    return openings


def _sample_free(b: _Builder, rng, lo, hi, half, y_range, margin=0.1, predicate=None, tries=2000):
    half = vec3(half)
    for _ in range(tries):
        p = np.array(
            [
                rng.uniform(lo[0] + half[0], hi[0] - half[0]),
                rng.uniform(max(lo[1] + half[1], y_range[0]), min(hi[1] - half[1], y_range[1])),
                rng.uniform(lo[2] + half[2], hi[2] - half[2]),
            ]
        )
        if predicate is not None and not predicate(p):
            continue
        if not b.overlaps(p, half, margin):
            return p
    raise RuntimeError("could not place body without overlap")


def _check_counts(prop_count, hiders, seekers, level):
    if not 1 <= level <= 4:
        raise ConfigError("level", f"must be in 1..4, got {level}")
    if not 1 <= prop_count <= 4:
        raise ConfigError("prop_count", f"must be in 1..4, got {prop_count}")
    if not 1 <= hiders <= 2:
        raise ConfigError("hiders", f"must be in 1..2, got {hiders}")
    if not 1 <= seekers <= 4:
        raise ConfigError("seekers", f"must be in 1..4, got {seekers}")


def build_arena(
    level: int,
    prop_count: int,
    agent_counts: Mapping[str, int],
    seed: int,
    arena: ArenaConfig | None = None,
    params: WorldParams | None = None,
) -> WorldState:
    """Construct a hide-and-seek world.

    ``prop_count`` openings are cut into the room (one prop each), obstacles
    and agents are scattered without overlap. Seekers always start outside the
    room. The same arguments always produce the same state.
    """
    arena = arena or ArenaConfig()
    params = params or WorldParams()
    hiders = int(agent_counts.get("hiders", 1))
    seekers = int(agent_counts.get("seekers", 1))
    _check_counts(prop_count, hiders, seekers, level)
    rng = np.random.Generator(np.random.PCG64(seed))
    b = _Builder()
    lo, hi = _add_boundaries(b, arena)
    inner_lo = lo + np.array([arena.boundary_thickness, 0.0, arena.boundary_thickness])
    inner_hi = hi - np.array([arena.boundary_thickness, 0.0, arena.boundary_thickness])
    openings = _add_room(b, arena, list(range(prop_count)))
    R = arena.room_half + arena.wall_thickness
    outside = lambda p: abs(p[0]) > R + arena.agent_half or abs(p[2]) > R + arena.agent_half  # noqa: E731
    for _ in range(prop_count):
        p = _sample_free(b, rng, inner_lo, inner_hi, [arena.prop_half] * 3, (0.0, 2.5))
        b.add(PROP, p, [arena.prop_half] * 3)
    for _ in range(arena.obstacle_count):
        p = _sample_free(b, rng, inner_lo, inner_hi, [arena.obstacle_half] * 3, (1.0, 4.0))
        b.add(OBSTACLE, p, [arena.obstacle_half] * 3, gravity=params.obstacle_gravity_scale)
    for _ in range(hiders):
        p = _sample_free(b, rng, inner_lo, inner_hi, [arena.agent_half] * 3, (0.5, 3.0))
        b.add(HIDER, p, [arena.agent_half] * 3, yaw=rng.uniform(0, 2 * math.pi))
    for _ in range(seekers):
        p = _sample_free(
            b, rng, inner_lo, inner_hi, [arena.agent_half] * 3, (0.5, 3.0), predicate=outside
        )
        b.add(SEEKER, p, [arena.agent_half] * 3, yaw=rng.uniform(0, 2 * math.pi))
    return b.finish(level, lo, hi, openings, params, rng)


def build_open_arena(
    agents: int,
    seed: int,
    arena: ArenaConfig | None = None,
    params: WorldParams | None = None,
    obstacles: int | None = None,
) -> WorldState:
    """Boundary-only arena for the single-team pre-experiments.

    Learning agents use the seeker kind; an optional target body (kind
    ``target``) is placed at least 3 m away from every agent.
    """
    arena = arena or ArenaConfig(layout="open")
    params = params or WorldParams()
    if agents < 1:
        raise ConfigError("agents", "need at least one agent")
    rng = np.random.Generator(np.random.PCG64(seed))
    b = _Builder()
    lo, hi = _add_boundaries(b, arena)
    inner_lo = lo + np.array([arena.boundary_thickness, 0.0, arena.boundary_thickness])
    inner_hi = hi - np.array([arena.boundary_thickness, 0.0, arena.boundary_thickness])
    n_obs = arena.obstacle_count if obstacles is None else obstacles
    for _ in range(n_obs):
        p = _sample_free(b, rng, inner_lo, inner_hi, [arena.obstacle_half] * 3, (1.0, 4.0))
        b.add(OBSTACLE, p, [arena.obstacle_half] * 3, gravity=params.obstacle_gravity_scale)
    agent_pos = []
    for _ in range(agents):
        p = _sample_free(b, rng, inner_lo, inner_hi, [arena.agent_half] * 3, (0.5, hi[1] - 0.5))
        b.add(SEEKER, p, [arena.agent_half] * 3, yaw=rng.uniform(0, 2 * math.pi))
        agent_pos.append(p)
    if arena.target != "none":
        far = lambda p: all(np.linalg.norm(p - a) >= 3.0 for a in agent_pos)  # noqa: E731
        p = _sample_free(
            b, rng, inner_lo, inner_hi, [arena.target_half] * 3, (0.5, hi[1] - 0.5), predicate=far
        )
        b.add(TARGET, p, [arena.target_half] * 3)
    return b.finish(1, lo, hi, [], params, rng)


def validate_hideseek(state: WorldState) -> None:
    """Raise ``AssertionError`` if a hide-and-seek world breaks its invariants."""
    k = state.kind
    assert np.sum(k == BOUNDARY) == 4, "exactly 4 boundary bodies"
    l_groups = set(int(g) for g in state.group[(k == WALL) & (state.group < 4)])
    assert l_groups == {0, 1, 2, 3}, f"4 L-shaped wall groups, got {sorted(l_groups)}"
    assert 1 <= np.sum(k == HIDER) <= 2
    assert 1 <= np.sum(k == SEEKER) <= 4
    assert 1 <= np.sum(k == PROP) <= 4
    assert np.sum(k == OBSTACLE) == 5
    assert np.all(state.half > 0)
    assert np.all(state.box_lo() >= state.bounds_lo - 1e-9)
    assert np.all(state.box_hi() <= state.bounds_hi + 1e-9)
    assert not np.any(state.locked & (k != PROP))
    dragged = state.dragged_by >= 0
    assert not np.any(dragged & ((k != PROP) | state.locked))
    static = (k == WALL) | (k == BOUNDARY)
    assert np.all(state.vel[static] == 0.0)
    for op in state.openings:
        if op.kind == "window":
            assert op.slot_center[1] > state.half[state.agent_ids[0], 1]


def _priorities(state: WorldState, frozen) -> np.ndarray:
    if "prio" not in state.static_cache:
        prio = np.full(state.n, kernels.LIGHT, dtype=np.int64)
        prio[state.mask("static")] = kernels.STATIC
        prio[state.mask("agent")] = kernels.AGENT
        prio[state.mask("target")] = kernels.GHOST
        state.static_cache["prio"] = prio
    prio = state.static_cache["prio"].copy()
    prio[state.locked] = kernels.STATIC
    for i in frozen:
        prio[i] = kernels.STATIC
    return prio


def _integrate(pos, vel, accel, k, dt):
    """Exact update of dv/dt = accel - k*v over one step of constant accel.

    Works row-wise on (m, 3) arrays with a per-row drag coefficient ``k``.
    """
    k = np.asarray(k, dtype=np.float64)[:, None]
    damped = k[:, 0] > 0.0
    if damped.all():
        e = np.exp(-k * dt)
        v_inf = accel / k
        dv = vel - v_inf
        return pos + v_inf * dt + dv * ((1.0 - e) / k), v_inf + dv * e
    new_pos = np.empty_like(pos)
    new_vel = np.empty_like(vel)
    if np.any(damped):
        kd = k[damped]
        e = np.exp(-kd * dt)
        v_inf = accel[damped] / kd
        dv = vel[damped] - v_inf
        new_vel[damped] = v_inf + dv * e
        new_pos[damped] = pos[damped] + v_inf * dt + dv * ((1.0 - e) / kd)
    free = ~damped
    if np.any(free):
        new_pos[free] = pos[free] + vel[free] * dt + 0.5 * accel[free] * dt * dt
        new_vel[free] = vel[free] + accel[free] * dt
    return new_pos, new_vel


def _support(half, direction):
    return float(np.sum(half * np.abs(direction)))


def drag_anchor(state: WorldState, agent: int, prop: int) -> Vec3:
    """Where a dragged prop sits: ``drag_offset`` clear of its carrier's box
    along the carrier's facing direction."""
    f = forward_vector(state.yaw[agent])
    gap = _support(state.half[agent], f) + _support(state.half[prop], f) + state.params.drag_offset
    return state.pos[agent] + f * gap


def check_actions(state: WorldState, actions: Mapping[int, AgentAction]) -> None:
    agents = state.agent_ids
    for aid, act in actions.items():
        if aid not in agents:
            raise KeyError(f"action for unknown agent id {aid}")
        t = act.thrust
        if len(t) != 3 or not all(map(math.isfinite, (t[0], t[1], t[2], act.yaw_rate))):
            raise ValueError(f"non-finite action for agent {aid}")
        if act.manipulate not in MANIPULATE:
            raise ValueError(f"unknown manipulate option {act.manipulate!r}")


def step_physics(
    state: WorldState,
    actions: Mapping[int, AgentAction],
    dt: float | None = None,
    frozen: Sequence[int] = (),
) -> WorldState:
    """Advance the world one tick. Returns a new state; ``state`` is untouched.

    Bodies listed in ``frozen`` neither move nor get pushed this tick.
    """
    dt = state.params.dt if dt is None else dt
    if not dt > 0:
        raise ValueError("dt must be positive")
    check_actions(state, actions)
    s = state.copy()
    p = s.params
    frozen = set(int(i) for i in frozen)
    n = s.n
    accel = np.zeros((n, 3))
    k = np.zeros(n)
    move = np.zeros(n, dtype=bool)
    g = p.accel_gain
    for aid in s.agent_ids:
        if aid in frozen:
            s.vel[aid] = 0.0
            continue
        act = actions.get(aid, ZERO_ACTION)
        tx, ty, tz = (min(1.0, max(-1.0, float(v))) for v in act.thrust)
        norm = math.sqrt(tx * tx + ty * ty + tz * tz)
        if norm > 1.0:
            tx, ty, tz = tx / norm, ty / norm, tz / norm
        yaw = float(s.yaw[aid])
        c, sn = math.cos(yaw), math.sin(yaw)
        accel[aid] = (g * (tx * c + tz * sn), g * ty, g * (tz * c - tx * sn))
        k[aid] = p.drag
        move[aid] = True
        rate = min(1.0, max(-1.0, float(act.yaw_rate)))
        s.yaw[aid] = (yaw + rate * p.max_yaw_rate * dt) % (2 * math.pi)
    loose = s.mask("obstacle") | (s.mask("prop") & ~s.locked & (s.dragged_by < 0))
    accel[loose, 1] = -p.gravity * s.gravity[loose]
    k[loose] = p.object_drag
    move |= loose
    idx = np.flatnonzero(move)
    if idx.size:
        s.pos[idx], s.vel[idx] = _integrate(s.pos[idx], s.vel[idx], accel[idx], k[idx], dt)
    for i in np.flatnonzero(s.dragged_by >= 0):
        carrier = int(s.dragged_by[i])
        s.pos[i] = drag_anchor(s, carrier, i)
        s.vel[i] = s.vel[carrier]
    if s.locked.any():
        s.vel[s.locked] = 0.0
    if "is_agent" not in s.static_cache:
        s.static_cache["is_agent"] = s.mask("agent").astype(np.uint8)
    kernels.resolve_overlaps(
        s.pos, s.vel, s.half, _priorities(s, frozen), s.static_cache["is_agent"], s.bounds_lo,
        s.bounds_hi, p.pushout_iterations,
    )
    s.tick += 1
    return s


def _boxes_overlap(lo_a, hi_a, lo_b, hi_b, margin=0.0) -> bool:
    return bool(np.all(lo_a - margin <= hi_b) and np.all(lo_b - margin <= hi_a))


def try_manipulate(state: WorldState, agent_id: int, action: str) -> WorldState:
    """Apply a grab/lock/release request. Failure cases are silent no-ops.

    Only hiders manipulate; seekers' requests are ignored. At most one prop
    changes.
    """
    if not (0 <= agent_id < state.n) or state.kind[agent_id] not in AGENT_KINDS:
        raise KeyError(f"unknown agent id {agent_id}")
    if action not in MANIPULATE:
        raise ValueError(f"unknown manipulate option {action!r}")
    if action == "none" or state.kind[agent_id] != HIDER:
        return state
    held = np.flatnonzero(state.dragged_by == agent_id)
    s = state.copy()
    if action == "release":
        if held.size:
            s.dragged_by[held[0]] = -1
            s.vel[held[0]] = 0.0
            return s
        return state
    if held.size:
        i = int(held[0])
        lo, hi = s.pos[i] - s.half[i], s.pos[i] + s.half[i]
        for op in s.openings:
            if not op.enabled:
                continue
            if _boxes_overlap(lo, hi, op.slot_center - op.slot_half_extents,
                              op.slot_center + op.slot_half_extents, s.params.lock_margin):
                s.pos[i] = op.slot_center
                s.vel[i] = 0.0
                s.locked[i] = True
                s.dragged_by[i] = -1
                return s
        return state
    best, best_d = -1, math.inf
    for i in np.flatnonzero((s.kind == PROP) & ~s.locked & (s.dragged_by < 0)):
        closest = np.clip(s.pos[agent_id], s.pos[i] - s.half[i], s.pos[i] + s.half[i])
        d = float(np.linalg.norm(closest - s.pos[agent_id]))
        if d <= s.params.grab_radius and d < best_d:
            best, best_d = int(i), d
    if best < 0:
        return state
    s.dragged_by[best] = agent_id
    return s


def detect_tags(state: WorldState) -> list[tuple[int, int]]:
    """Every (seeker, hider) pair whose closed boxes overlap."""
    lo, hi = state.box_lo(), state.box_hi()
    out = []
    for s in state.ids_of(SEEKER):
        for h in state.ids_of(HIDER):
            if _boxes_overlap(lo[s], hi[s], lo[h], hi[h]):
                out.append((s, h))
    return out


def overlap_volume(lo_a, hi_a, lo_b, hi_b) -> float:
    ext = np.minimum(hi_a, hi_b) - np.maximum(lo_a, lo_b)
    if np.any(ext <= 0):
        return 0.0
    return float(np.prod(ext))


def opening_blocked(state: WorldState, opening_id: int) -> bool:
    """True iff a single locked prop covers the slot to the coverage tolerance."""
    ops = {op.id: op for op in state.openings}
    if opening_id not in ops:
        raise KeyError(f"unknown opening id {opening_id}")
    op = ops[opening_id]
    s_lo, s_hi = op.slot_center - op.slot_half_extents, op.slot_center + op.slot_half_extents
    vol = float(np.prod(2 * op.slot_half_extents))
    for i in np.flatnonzero((state.kind == PROP) & state.locked):
        covered = overlap_volume(state.pos[i] - state.half[i], state.pos[i] + state.half[i], s_lo, s_hi)
        if covered >= state.params.coverage * vol:
            return True
    return False


def agent_contacts(state: WorldState, agent_id: int, tol: float = 1e-6) -> list[int]:
    """Ids of non-agent solid bodies touching (or overlapping) the agent's box,
    plus -1 if the box rests against the arena bounds."""
    lo, hi = state.box_lo(), state.box_hi()
    out = []
    for j in range(state.n):
        if j == agent_id or state.kind[j] == TARGET:
            continue
        if _boxes_overlap(lo[agent_id], hi[agent_id], lo[j], hi[j], tol):
            out.append(j)
    if np.any(lo[agent_id] <= state.bounds_lo + tol) or np.any(hi[agent_id] >= state.bounds_hi - tol):
        out.append(-1)
    return out


def _flt(v):
    return [float(x) for x in v]


def dumps_state(state: WorldState) -> str:
    """Versioned line-delimited JSON: one header line, then one line per body."""
    header = {
        "format": STATE_FORMAT,
        "version": STATE_FORMAT_VERSION,
        "tick": int(state.tick),
        "level": int(state.level),
        "bounds": [_flt(state.bounds_lo), _flt(state.bounds_hi)],
        "openings": [
            {
                "id": op.id,
                "kind": op.kind,
                "center": _flt(op.slot_center),
                "half": _flt(op.slot_half_extents),
                "enabled": op.enabled,
                "side": op.side,
            }
            for op in state.openings
        ],
        "params": dataclasses.asdict(state.params),
        "rng": state.rng_state,
    }
    lines = [json.dumps(header, sort_keys=True)]
    for i in range(state.n):
        lines.append(json.dumps(body_record(state, i), sort_keys=True))
    return "\n".join(lines) + "\n"


def body_record(state: WorldState, i: int) -> dict:
    return {
        "id": i,
        "kind": KINDS[state.kind[i]],
        "pos": _flt(state.pos[i]),
        "vel": _flt(state.vel[i]),
        "yaw": float(state.yaw[i]),
        "half": _flt(state.half[i]),
        "gravity": float(state.gravity[i]),
        "locked": bool(state.locked[i]),
        "dragged_by": int(state.dragged_by[i]),
        "group": int(state.group[i]),
    }


def loads_state(text: str) -> WorldState:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = json.loads(lines[0])
    if header.get("format") != STATE_FORMAT:
        raise ValueError("not a world state record")
    if header.get("version") != STATE_FORMAT_VERSION:
        raise ValueError(f"unsupported world state version {header.get('version')}")
    rows = [json.loads(ln) for ln in lines[1:]]
    n = len(rows)
    return WorldState(
        tick=header["tick"],
        level=header["level"],
        bounds_lo=np.array(header["bounds"][0]),
        bounds_hi=np.array(header["bounds"][1]),
        kind=np.array([KINDS.index(r["kind"]) for r in rows], dtype=np.int64),
        pos=np.array([r["pos"] for r in rows], dtype=np.float64).reshape(n, 3),
        vel=np.array([r["vel"] for r in rows], dtype=np.float64).reshape(n, 3),
        yaw=np.array([r["yaw"] for r in rows], dtype=np.float64),
        half=np.array([r["half"] for r in rows], dtype=np.float64).reshape(n, 3),
        gravity=np.array([r["gravity"] for r in rows], dtype=np.float64),
        locked=np.array([r["locked"] for r in rows], dtype=bool),
        dragged_by=np.array([r["dragged_by"] for r in rows], dtype=np.int64),
        group=np.array([r["group"] for r in rows], dtype=np.int64),
        openings=tuple(
            Opening(o["id"], o["kind"], np.array(o["center"]), np.array(o["half"]), o["enabled"], o["side"])
            for o in header["openings"]
        ),
        params=WorldParams(**header["params"]),
        rng_state=header["rng"],
    )
