"""Synthetic lane maps, lane-following agents and prediction scenes.

Maps are Manhattan grids of two-way roads. Grid nodes are either plain
(lanes pass straight through) or intersections, where every approach lane
fans out into 2-3 turn connectors and may carry a stop control at its end.
Agents follow lane routes with a speed envelope that brakes for stop
controls and slows for turns, so the correct future of an agent depends on
map structure the agent's own history does not reveal.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

T_OBS = 20
T_PRED = 30
DT = 0.1

BEHAVIORS = ("turn", "straight", "stop", "lane_keep")


# ---------------------------------------------------------------- types


@dataclass
class LaneSegment:
    id: int
    centerline: np.ndarray
    successors: list[int] = field(default_factory=list)
    is_intersection: bool = False
    has_control: bool = False

    def __post_init__(self):
        self.centerline = np.asarray(self.centerline, dtype=np.float64)
        self._length = float(np.linalg.norm(np.diff(self.centerline, axis=0), axis=1).sum())

    @property
    def length(self) -> float:
        return self._length


@dataclass
class VectorMap:
    segments: list[LaneSegment]
    bounds: tuple[float, float, float, float]
    # generation metadata; never serialized
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self._index = {s.id: s for s in self.segments}

    def segment(self, seg_id: int) -> LaneSegment:
        return self._index[seg_id]

    def __contains__(self, seg_id) -> bool:
        return seg_id in self._index

    def validate(self) -> None:
        xmin, ymin, xmax, ymax = self.bounds
        for s in self.segments:
            pts = s.centerline
            if len(pts) < 2:
                raise ValueError(f"segment {s.id}: fewer than 2 centerline points")
            if (np.linalg.norm(np.diff(pts, axis=0), axis=1) == 0).any():
                raise ValueError(f"segment {s.id}: repeated consecutive points")
            if (pts[:, 0] < xmin).any() or (pts[:, 0] > xmax).any() \
                    or (pts[:, 1] < ymin).any() or (pts[:, 1] > ymax).any():
                raise ValueError(f"segment {s.id}: centerline leaves map bounds")
            for nxt in s.successors:
                if nxt not in self._index:
                    raise ValueError(f"segment {s.id}: dangling successor {nxt}")


@dataclass
class AgentTrack:
    id: int
    positions: np.ndarray
    valid: np.ndarray
    # segment ids visited, in order; only set by the simulator
    route: list[int] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 2)
        self.valid = np.asarray(self.valid, dtype=bool).reshape(-1)
        if len(self.valid) != len(self.positions):
            raise ValueError(f"agent {self.id}: mask length differs from positions")
        self.positions = np.where(self.valid[:, None], self.positions, 0.0)

    def __len__(self) -> int:
        return len(self.positions)


@dataclass
class Scene:
    """One prediction instance. ``tracks`` hold observed steps only."""

    tracks: list[AgentTrack]
    target_id: int
    future: dict[int, np.ndarray]
    map: VectorMap | None = None
    t_obs: int = T_OBS
    t_pred: int = T_PRED
    seed: int | None = None
    behavior: str | None = None

    def track(self, agent_id: int) -> AgentTrack:
        for t in self.tracks:
            if t.id == agent_id:
                return t
        raise KeyError(agent_id)

    @property
    def target(self) -> AgentTrack:
        return self.track(self.target_id)

    @property
    def gt(self) -> np.ndarray:
        return self.future[self.target_id]

    def without_map(self) -> "Scene":
        return Scene(self.tracks, self.target_id, self.future, None, self.t_obs,
                     self.t_pred, self.seed, self.behavior)

    def model_view(self) -> "Scene":
        """Everything a model may see: observed tracks and (maybe) the map."""
        return Scene(self.tracks, self.target_id, {}, self.map, self.t_obs,
                     self.t_pred, self.seed, self.behavior)

    def __eq__(self, other) -> bool:
        from .sceneio import scene_to_dict

        if not isinstance(other, Scene):
            return NotImplemented
        return scene_to_dict(self) == scene_to_dict(other)


@dataclass
class MapConfig:
    extent: float = 200.0
    spacing: float = 40.0
    intersection_density: float = 0.5
    # lateral bulge amplitude of road centerlines, meters
    curvature: tuple[float, float] = (0.0, 6.0)
    lane_offset: float = 1.75
    junction_margin: float = 6.0
    control_prob: float = 0.5
    # chance an approach loses one of its three turn options
    drop_prob: float = 0.3
    point_spacing: float = 2.0


@dataclass
class SimConfig:
    n_agents: int = 6
    speed: tuple[float, float] = (6.0, 13.0)
    turn_speed: float = 5.0
    accel: float = 2.0
    brake: float = 3.0
    noise_std: float = 0.05
    turn_probs: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    wait_steps: tuple[int, int] = (5, 25)
    preroll: tuple[int, int] = (0, 30)
    context_radius: float = 45.0
    # context agents spawn around a point this far ahead of the target (along its heading)
    context_lookahead: float = 0.0
    # chance a context agent is missing its first few observed steps
    partial_prob: float = 0.2
    t_obs: int = T_OBS
    t_pred: int = T_PRED


@dataclass
class SceneConfig:
    map: MapConfig = field(default_factory=MapConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    # relative frequency of target behaviors (turn, straight, stop, lane_keep)
    behavior_mix: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    max_tries: int = 400

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        d = dict(d)
        kw = {}
        if "map" in d:
            kw["map"] = _build(MapConfig, d.pop("map"))
        if "sim" in d:
            kw["sim"] = _build(SimConfig, d.pop("sim"))
        kw.update(_build(cls, d, construct=False))
        return cls(**kw)


def _build(cls, d: dict, construct: bool = True):
    """Keyword arguments for ``cls`` from plain data: unknown keys rejected, lists become tuples."""
    known = {f.name: f for f in fields(cls)}
    unknown = set(d) - set(known)
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys {sorted(unknown)}")
    kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
    return cls(**kw) if construct else kw


# ---------------------------------------------------------------- geometry


def polyline_lengths(pts: np.ndarray) -> np.ndarray:
    """Cumulative arc length at each vertex, starting at 0."""
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def resample(pts: np.ndarray, n: int) -> np.ndarray:
    cum = polyline_lengths(pts)
    s = np.linspace(0.0, cum[-1], n)
    return np.stack([np.interp(s, cum, pts[:, 0]), np.interp(s, cum, pts[:, 1])], axis=1)


def point_to_polyline(p: np.ndarray, pts: np.ndarray) -> float:
    a, b = pts[:-1], pts[1:]
    ab = b - a
    t = np.clip(((p - a) * ab).sum(1) / np.maximum((ab * ab).sum(1), 1e-300), 0.0, 1.0)
    proj = a + t[:, None] * ab
    return float(np.linalg.norm(proj - p, axis=1).min())


def heading_change(pts: np.ndarray) -> float:
    d0 = pts[1] - pts[0]
    d1 = pts[-1] - pts[-2]
    ang = math.atan2(d1[1], d1[0]) - math.atan2(d0[1], d0[0])
    return (ang + math.pi) % (2 * math.pi) - math.pi


def turn_kind(seg: LaneSegment) -> str:
    """'left', 'right' or 'straight' from the heading change along the segment."""
    ang = heading_change(seg.centerline)
    if ang > math.radians(30):
        return "left"
    if ang < -math.radians(30):
        return "right"
    return "straight"


def _bezier(p0, c, p1, n):
    t = np.linspace(0.0, 1.0, n)[:, None]
    return (1 - t) ** 2 * p0 + 2 * (1 - t) * t * c + t ** 2 * p1


# ---------------------------------------------------------------- maps

_DIRS = {"E": (1, 0), "N": (0, 1), "W": (-1, 0), "S": (0, -1)}
_LEFT = {"E": "N", "N": "W", "W": "S", "S": "E"}
_RIGHT = {v: k for k, v in _LEFT.items()}
_BACK = {"E": "W", "W": "E", "N": "S", "S": "N"}


def generate_map(config: MapConfig, seed) -> VectorMap:
    """Grid road network; deterministic in ``seed``."""
    if config.extent <= 0 or config.spacing <= 0:
        raise ValueError("extent and spacing must be positive")
    if not 0.0 <= config.intersection_density <= 1.0:
        raise ValueError("intersection_density must lie in [0, 1]")
    n = int(config.extent // config.spacing) + 1
    if n < 2:
        raise ValueError("extent smaller than one grid spacing")
    if config.junction_margin * 2 >= config.spacing:
        raise ValueError("junction_margin too large for spacing")
    rng = np.random.default_rng(seed)
    sp, off, r = config.spacing, config.lane_offset, config.junction_margin

    interior = [(i, j) for i in range(1, n - 1) for j in range(1, n - 1)]
    is_inter = {node: bool(rng.random() < config.intersection_density) for node in interior}

    segments: list[LaneSegment] = []

    def new_seg(pts, **flags):
        seg = LaneSegment(len(segments), pts, **flags)
        segments.append(seg)
        return seg

    # lanes[(node, dir)] = lane leaving ``node`` heading ``dir``
    lanes: dict[tuple, LaneSegment] = {}
    edges = [((i, j), "E") for i in range(n - 1) for j in range(n)] + \
            [((i, j), "N") for i in range(n) for j in range(n - 1)]
    for (i, j), d in edges:
        dx, dy = _DIRS[d]
        a = np.array([i * sp, j * sp])
        b = np.array([(i + dx) * sp, (j + dy) * sp])
        amp = rng.uniform(*config.curvature) * rng.choice([-1.0, 1.0])
        npts = max(3, int(math.ceil((sp - 2 * r) / config.point_spacing)) + 1)
        u = np.linspace(r / sp, 1 - r / sp, npts)
        normal = np.array([-dy, dx], dtype=float)
        road = a + u[:, None] * (b - a) + (amp * np.sin(np.pi * u) ** 2)[:, None] * normal
        # offset each direction's lane to its right-hand side
        tang = np.gradient(road, axis=0)
        tang /= np.linalg.norm(tang, axis=1, keepdims=True)
        right = np.stack([tang[:, 1], -tang[:, 0]], axis=1)
        fwd = road + off * right
        bwd = (road - off * right)[::-1]
        lanes[((i, j), d)] = new_seg(fwd)
        lanes[((i + dx, j + dy), _BACK[d])] = new_seg(bwd)

    def incoming(node, d):
        # lane arriving at ``node`` while heading ``d``
        dx, dy = _DIRS[d]
        return lanes.get(((node[0] - dx, node[1] - dy), d))

    for i in range(n):
        for j in range(n):
            node = (i, j)
            for d in _DIRS:
                lane_in = incoming(node, d)
                if lane_in is None:
                    continue
                options = {"straight": d, "left": _LEFT[d], "right": _RIGHT[d]}
                if is_inter.get(node, False):
                    avail = [k for k, nd in options.items() if (node, nd) in lanes]
                    if len(avail) == 3 and rng.random() < config.drop_prob:
                        avail.pop(int(rng.integers(3)))
                    lane_in.has_control = bool(rng.random() < config.control_prob)
                    for kind in avail:
                        lane_out = lanes[(node, options[kind])]
                        p0, p1 = lane_in.centerline[-1], lane_out.centerline[0]
                        if kind == "straight":
                            pts = _bezier(p0, (p0 + p1) / 2, p1, 5)
                        else:
                            h0 = lane_in.centerline[-1] - lane_in.centerline[-2]
                            h1 = lane_out.centerline[1] - lane_out.centerline[0]
                            # corner = intersection of the two heading lines
                            A = np.stack([h0, -h1], axis=1)
                            t = np.linalg.solve(A, p1 - p0)
                            pts = _bezier(p0, p0 + t[0] * h0, p1, 9)
                        conn = new_seg(pts, successors=[lane_out.id], is_intersection=True)
                        lane_in.successors.append(conn.id)
                elif (node, d) in lanes:
                    lane_out = lanes[(node, d)]
                    p0, p1 = lane_in.centerline[-1], lane_out.centerline[0]
                    conn = new_seg(_bezier(p0, (p0 + p1) / 2, p1, 4), successors=[lane_out.id])
                    lane_in.successors.append(conn.id)

    pad = config.lane_offset + max(abs(c) for c in config.curvature) + 1.0
    bounds = (-pad, -pad, (n - 1) * sp + pad, (n - 1) * sp + pad)
    vmap = VectorMap(segments, bounds)
    vmap.meta = {
        "interior_nodes": interior,
        "intersection_nodes": [nd for nd in interior if is_inter[nd]],
        "grid": n,
    }
    return vmap


# ---------------------------------------------------------------- agents


class SpawnError(ValueError):
    pass


@dataclass
class _Route:
    segs: list[int]
    pts: np.ndarray
    cum: np.ndarray
    seg_start: np.ndarray
    limits: list[float]
    stops: list[float]


def _choose_next(vmap: VectorMap, seg: LaneSegment, probs, rng) -> int | None:
    if not seg.successors:
        return None
    if len(seg.successors) == 1:
        return seg.successors[0]
    kinds = [turn_kind(vmap.segment(s)) for s in seg.successors]
    weight = {"left": probs[0], "straight": probs[1], "right": probs[2]}
    w = np.array([weight[k] for k in kinds], dtype=float)
    if w.sum() <= 0:
        w = np.ones(len(kinds))
    return seg.successors[int(rng.choice(len(kinds), p=w / w.sum()))]


def _build_route(vmap, seg_id, s0, need, cfg: SimConfig, cruise, rng) -> _Route:
    segs, chunks = [seg_id], [vmap.segment(seg_id).centerline]
    total = vmap.segment(seg_id).length
    while total - s0 < need:
        nxt = _choose_next(vmap, vmap.segment(segs[-1]), cfg.turn_probs, rng)
        if nxt is None:
            raise SpawnError(f"route from segment {seg_id} ends after {total - s0:.1f} m")
        segs.append(nxt)
        chunks.append(vmap.segment(nxt).centerline[1:])
        total += vmap.segment(nxt).length
    pts = np.concatenate(chunks)
    cum = polyline_lengths(pts)
    starts, limits, stops, acc = [], [], [], 0.0
    for sid in segs:
        seg = vmap.segment(sid)
        starts.append(acc)
        turning = seg.is_intersection and turn_kind(seg) != "straight"
        limits.append(min(cruise, cfg.turn_speed) if turning else cruise)
        acc += seg.length
        if seg.has_control:
            stops.append(acc)
    return _Route(segs, pts, cum, np.array(starts), limits, [s for s in stops if s > s0 + 0.5])


def _envelope(route: _Route, stop: float | None, brake: float, ds: float = 0.5):
    grid = np.arange(0.0, route.cum[-1] + ds, ds)
    idx = np.clip(np.searchsorted(route.seg_start, grid, side="right") - 1, 0, len(route.limits) - 1)
    lim = np.asarray(route.limits)[idx]
    if stop is not None:
        lim = np.where(grid >= stop, 0.0, lim)
    env = lim.copy()
    for k in range(len(env) - 2, -1, -1):
        env[k] = min(lim[k], math.sqrt(env[k + 1] ** 2 + 2 * brake * ds))
    return grid, env


def _simulate(vmap, seg_id, s0, cfg: SimConfig, rng, n_steps, preroll, cruise):
    """Arc-length kinematics along a sampled route. Returns positions and per-step info."""
    need = s0 + cfg.speed[1] * (n_steps + preroll) * DT + 5.0
    route = _build_route(vmap, seg_id, s0, need - s0, cfg, cruise, rng)
    stops = list(route.stops)
    stop = stops.pop(0) if stops else None
    grid, env = _envelope(route, stop, cfg.brake)
    s = s0
    v = min(cruise, float(np.interp(s, grid, env)))
    wait = 0
    svals, waiting = [], []
    for _ in range(n_steps + preroll):
        svals.append(s)
        waiting.append(wait > 0 or (stop is not None and s >= stop))
        if stop is not None and s >= stop:
            if wait == 0:
                wait = int(rng.integers(cfg.wait_steps[0], cfg.wait_steps[1] + 1))
            wait -= 1
            if wait == 0:
                stop = stops.pop(0) if stops else None
                grid, env = _envelope(route, stop, cfg.brake)
            continue
        v = max(0.0, min(v + cfg.accel * DT, float(np.interp(s, grid, env))))
        s_new = s + v * DT
        if stop is not None and s_new >= stop:
            s_new, v = stop, 0.0
        s = s_new
    svals = np.array(svals[preroll:])
    pos = np.stack([np.interp(svals, route.cum, route.pts[:, 0]),
                    np.interp(svals, route.cum, route.pts[:, 1])], axis=1)
    seg_idx = np.clip(np.searchsorted(route.seg_start, svals, side="right") - 1, 0, len(route.segs) - 1)
    on_seg = [route.segs[k] for k in seg_idx]
    return pos, on_seg, np.array(waiting[preroll:]), route


def _lanes(vmap: VectorMap) -> list[LaneSegment]:
    return [s for s in vmap.segments if not s.is_intersection and s.length > 5.0 and len(s.centerline) > 4]


def simulate_agents(vmap: VectorMap, cfg: SimConfig, seed, spawns=None) -> list[AgentTrack]:
    """Lane-following agents with ``t_obs + t_pred`` steps each.

    ``spawns`` is an optional list of ``(segment_id, arc_length)``; otherwise
    ``cfg.n_agents`` spawns are drawn at random on plain lanes.
    """
    if cfg.n_agents < 1 and not spawns:
        raise ValueError("need at least one agent")
    if cfg.noise_std < 0:
        raise ValueError("noise_std must be non-negative")
    rng = np.random.default_rng(seed)
    n_steps = cfg.t_obs + cfg.t_pred
    tracks = []
    if spawns is not None:
        for k, (seg_id, s0) in enumerate(spawns):
            if seg_id not in vmap:
                raise SpawnError(f"unknown segment {seg_id}")
            cruise = float(rng.uniform(*cfg.speed))
            pos, on_seg, _, route = _simulate(vmap, seg_id, float(s0), cfg, rng, n_steps, 0, cruise)
            pos = pos + rng.normal(scale=cfg.noise_std, size=pos.shape) if cfg.noise_std > 0 else pos
            tracks.append(AgentTrack(k, pos, np.ones(n_steps, bool), route=_dedupe(on_seg)))
        return tracks
    lanes = _lanes(vmap)
    if not lanes:
        raise SpawnError("map has no lanes to spawn on")
    k = 0
    for _ in range(cfg.n_agents * 50):
        if len(tracks) == cfg.n_agents:
            break
        seg = lanes[int(rng.integers(len(lanes)))]
        try:
            pos, on_seg, _, _ = _simulate(vmap, seg.id, float(rng.uniform(0, seg.length)), cfg, rng,
                                          n_steps, int(rng.integers(cfg.preroll[0], cfg.preroll[1] + 1)),
                                          float(rng.uniform(*cfg.speed)))
        except SpawnError:
            continue
        if cfg.noise_std > 0:
            pos = pos + rng.normal(scale=cfg.noise_std, size=pos.shape)
        tracks.append(AgentTrack(k, pos, np.ones(n_steps, bool), route=_dedupe(on_seg)))
        k += 1
    if len(tracks) < cfg.n_agents:
        raise SpawnError("no reachable lane for requested spawns")
    return tracks


def _dedupe(seq):
    out = []
    for x in seq:
        if not out or out[-1] != x:
            out.append(x)
    return out


def classify(vmap: VectorMap, on_seg, waiting, t_obs: int) -> str:
    """Behavior of an agent over its future window (plus a short lead-in for stops)."""
    if np.asarray(waiting)[max(0, t_obs - 5):].any():
        return "stop"
    kinds = {turn_kind(vmap.segment(s)) for s in on_seg[t_obs:] if vmap.segment(s).is_intersection}
    if kinds & {"left", "right"}:
        return "turn"
    if "straight" in kinds:
        return "straight"
    return "lane_keep"


# ---------------------------------------------------------------- scenes


def make_scene(vmap: VectorMap | None, tracks: list[AgentTrack], target_id: int,
               include_map: bool = True, t_obs: int = T_OBS, t_pred: int = T_PRED,
               seed: int | None = None, behavior: str | None = None) -> Scene:
    """Split full tracks at ``t_obs``; only fully-valid futures are kept."""
    ids = [t.id for t in tracks]
    if target_id not in ids:
        raise KeyError(f"unknown target id {target_id}")
    observed, future = [], {}
    for t in tracks:
        if len(t) < t_obs + t_pred:
            raise ValueError(f"agent {t.id}: track has {len(t)} steps, need {t_obs + t_pred}")
        observed.append(AgentTrack(t.id, t.positions[:t_obs], t.valid[:t_obs]))
        fut_valid = t.valid[t_obs:t_obs + t_pred]
        if fut_valid.all():
            future[t.id] = t.positions[t_obs:t_obs + t_pred].copy()
    tgt = tracks[ids.index(target_id)]
    if not tgt.valid[:t_obs].any():
        raise ValueError("target has no valid observed step")
    if target_id not in future:
        raise ValueError("target future is not fully valid")
    return Scene(observed, target_id, future, vmap if include_map else None, t_obs, t_pred,
                 seed, behavior)


def scene_seed(master_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(master_seed), int(index)]).generate_state(1)[0])


def generate_scene(config: SceneConfig, seed: int, behavior: str | None = None) -> Scene:
    """One map-annotated scene whose target shows ``behavior`` in its future."""
    rng = np.random.default_rng(seed)
    sim = config.sim
    n_steps = sim.t_obs + sim.t_pred
    vmap = generate_map(config.map, rng.integers(2 ** 32))
    lanes = _lanes(vmap)
    lo, hi = vmap.bounds[0] + config.map.spacing, vmap.bounds[2] - config.map.spacing
    central = [s for s in lanes if ((s.centerline >= lo) & (s.centerline <= hi)).all()] or lanes

    best = None
    for _ in range(config.max_tries):
        seg = central[int(rng.integers(len(central)))]
        cruise = float(rng.uniform(*sim.speed))
        try:
            pos, on_seg, waiting, _ = _simulate(vmap, seg.id, float(rng.uniform(0, seg.length)), sim,
                                                rng, n_steps,
                                                int(rng.integers(sim.preroll[0], sim.preroll[1] + 1)), cruise)
        except SpawnError:
            continue
        kind = classify(vmap, on_seg, waiting, sim.t_obs)
        best = (pos, on_seg, kind)
        if behavior is None or kind == behavior:
            break
    if best is None:
        raise SpawnError("could not place a target agent")
    pos, on_seg, kind = best
    if sim.noise_std > 0:
        pos = pos + rng.normal(scale=sim.noise_std, size=pos.shape)
    target = AgentTrack(0, pos, np.ones(n_steps, bool), route=_dedupe(on_seg))

    anchor = pos[sim.t_obs - 1]
    if sim.context_lookahead > 0:
        head = pos[sim.t_obs - 1] - pos[sim.t_obs - 6]
        norm = float(np.linalg.norm(head))
        if norm > 1e-6:
            anchor = anchor + sim.context_lookahead * head / norm
    near = [s for s in lanes if point_to_polyline(anchor, s.centerline) < sim.context_radius]
    tracks = [target]
    n_ctx = int(rng.integers(max(0, sim.n_agents - 2), sim.n_agents + 1))
    for _ in range(n_ctx * 10):
        if len(tracks) > n_ctx or not near:
            break
        seg = near[int(rng.integers(len(near)))]
        try:
            p, route_segs, _, _ = _simulate(vmap, seg.id, float(rng.uniform(0, seg.length)), sim, rng,
                                            n_steps, int(rng.integers(sim.preroll[0], sim.preroll[1] + 1)),
                                            float(rng.uniform(*sim.speed)))
        except SpawnError:
            continue
        if sim.noise_std > 0:
            p = p + rng.normal(scale=sim.noise_std, size=p.shape)
        valid = np.ones(n_steps, bool)
        if rng.random() < sim.partial_prob:
            valid[: int(rng.integers(1, sim.t_obs - 2))] = False
        tracks.append(AgentTrack(len(tracks), p, valid, route=_dedupe(route_segs)))
    return make_scene(vmap, tracks, 0, True, sim.t_obs, sim.t_pred, seed, kind)


def generate_dataset(config: SceneConfig, n: int, seed: int, start: int = 0) -> list[Scene]:
    """Scenes ``start .. start+n-1``; each uses its own RNG stream from (seed, index)."""
    mix = np.asarray(config.behavior_mix, dtype=float)
    if (mix < 0).any() or mix.sum() <= 0:
        raise ValueError("behavior_mix must be non-negative and not all zero")
    # deterministic balanced cycle over behaviors in proportion to the mix
    weights = mix / mix.sum()
    scenes = []
    for idx in range(start, start + n):
        pos = (idx * 0.6180339887498949) % 1.0
        behavior = BEHAVIORS[int(np.searchsorted(np.cumsum(weights), pos, side="right").clip(0, 3))]
        scenes.append(generate_scene(config, scene_seed(seed, idx), behavior))
    return scenes
