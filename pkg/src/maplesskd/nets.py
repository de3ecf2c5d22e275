"""Small encoder-decoder trajectory predictors with distillation taps.

The teacher reads agent histories and a vector map; the student reads agent
histories only and replaces the map branch with an agent-attention branch.
Both expose the same three taps (agent feature ``f_a``, map feature ``f_m``,
fused feature ``f_f``). Parameters under the ``aux.`` prefix (tap variance
heads, decoder distillation scales, map-feature projector) exist only for
distillation training and are dropped from inference checkpoints.
"""
from __future__ import annotations

import hashlib
import json
import zlib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import diffcore as dc
from .diffcore import Tensor
from .synthworld import Scene, resample

DECODERS = ("regression_gaussian", "regression_laplace", "goal_based")
TAPS = ("f_a", "f_m", "f_f")
LOG_SCALE_BOUNDS = (-10.0, 10.0)  # symmetric
CHECKPOINT_VERSION = 1


@dataclass
class ModelConfig:
    hidden: int = 64
    modes: int = 6
    decoder: str = "regression_laplace"
    taps: tuple[str, ...] = TAPS
    has_map_branch: bool = True
    # build the aux.* heads used only during distillation
    distill_heads: bool = False
    t_obs: int = 20
    t_pred: int = 30
    max_agents: int = 8
    max_segments: int = 40
    seg_points: int = 8
    map_radius: float = 60.0
    goal_radius: float = 50.0
    goal_candidates: int = 160
    coord_scale: float = 10.0
    dtype: str = "float64"
    # log-range of the feature-distillation scales; the floor bounds 1/delta^2
    delta_log_bounds: tuple[float, float] = (-10.0, 10.0)

    def __post_init__(self):
        self.taps = tuple(self.taps)
        self.delta_log_bounds = tuple(float(b) for b in self.delta_log_bounds)
        if not self.delta_log_bounds[0] < 0 < self.delta_log_bounds[1]:
            raise ValueError("delta_log_bounds must straddle 0")
        if self.modes < 1:
            raise ValueError("modes must be >= 1")
        if self.decoder not in DECODERS:
            raise ValueError(f"unknown decoder {self.decoder!r}")
        if self.decoder == "goal_based" and not self.has_map_branch:
            raise ValueError("goal_based decoder needs the map branch")
        bad = set(self.taps) - set(TAPS)
        if bad:
            raise ValueError(f"unknown taps {sorted(bad)}")

    @property
    def distribution(self) -> str:
        return "gaussian" if self.decoder in ("regression_gaussian", "goal_based") else "laplace"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["taps"] = list(self.taps)
        d["delta_log_bounds"] = list(self.delta_log_bounds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config keys {sorted(unknown)}")
        return cls(**d)


# ---------------------------------------------------------------- batches


@dataclass
class Batch:
    agents: np.ndarray          # (B, A, T_obs, 2), target-centered frame
    step_mask: np.ndarray       # (B, A, T_obs)
    agent_mask: np.ndarray      # (B, A)
    origin: np.ndarray          # (B, 2) world position of the frame origin
    rotation: np.ndarray        # (B, 2, 2) world -> local
    gt: np.ndarray | None = None            # (B, T_pred, 2) local frame
    seg_pts: np.ndarray | None = None       # (B, S, P, 2)
    seg_flags: np.ndarray | None = None     # (B, S, 2)
    seg_mask: np.ndarray | None = None      # (B, S)
    goals: np.ndarray | None = None         # (B, N, 2)
    goal_mask: np.ndarray | None = None     # (B, N)

    def __len__(self) -> int:
        return len(self.agents)

    @property
    def has_map(self) -> bool:
        return self.seg_pts is not None

    def to_world(self, local: np.ndarray) -> np.ndarray:
        """Map (B, ..., 2) local points back to world coordinates."""
        b = local.shape[0]
        flat = local.reshape(b, -1, 2)
        world = np.einsum("bnj,bjk->bnk", flat, self.rotation) + self.origin[:, None, :]
        return world.reshape(local.shape)


def target_frame(scene: Scene) -> tuple[np.ndarray, np.ndarray]:
    """Origin at the target's last valid observed point, +x along its heading."""
    tgt = scene.target
    pts = tgt.positions[tgt.valid]
    origin = pts[-1]
    heading = 0.0
    for thresh in (1.0, 0.2):
        disp = origin - pts
        far = np.linalg.norm(disp, axis=1) > thresh
        if far.any():
            d = disp[np.nonzero(far)[0][-1]]
            heading = float(np.arctan2(d[1], d[0]))
            break
    c, s = np.cos(heading), np.sin(heading)
    # row-vector convention: local = (world - origin) @ R.T, world = local @ R + origin
    rot = np.array([[c, s], [-s, c]])
    return origin, rot


def build_batch(scenes: list[Scene], cfg: ModelConfig, with_map: bool | None = None,
                with_gt: bool = True) -> Batch:
    """Pad and normalize scenes. The map is attached only when every scene has one."""
    B, A, T = len(scenes), cfg.max_agents, cfg.t_obs
    dtype = np.dtype(cfg.dtype)
    agents = np.zeros((B, A, T, 2))
    step_mask = np.zeros((B, A, T), bool)
    origin = np.zeros((B, 2))
    rot = np.zeros((B, 2, 2))
    if with_map is None:
        with_map = all(s.map is not None for s in scenes)
    gt = np.zeros((B, cfg.t_pred, 2)) if with_gt else None
    if with_map:
        S, P = cfg.max_segments, cfg.seg_points
        seg_pts = np.zeros((B, S, P, 2))
        seg_flags = np.zeros((B, S, 2))
        seg_mask = np.zeros((B, S), bool)
        N = cfg.goal_candidates
        goals = np.zeros((B, N, 2))
        goal_mask = np.zeros((B, N), bool)
    for b, scene in enumerate(scenes):
        if scene.t_obs != T:
            raise ValueError(f"scene has t_obs={scene.t_obs}, model expects {T}")
        o, R = target_frame(scene)
        origin[b], rot[b] = o, R
        tgt = scene.target
        others = [t for t in scene.tracks if t.id != scene.target_id and t.valid.any()]
        # nearest context agents (by last valid position) fill the remaining slots
        others.sort(key=lambda t: float(np.linalg.norm(t.positions[t.valid][-1] - o)))
        for a, track in enumerate([tgt] + others[: A - 1]):
            agents[b, a] = np.where(track.valid[:, None], (track.positions - o) @ R.T, 0.0)
            step_mask[b, a] = track.valid
        if with_gt:
            gt[b] = (scene.gt - o) @ R.T
        if with_map:
            if scene.map is None:
                raise ValueError("scene without map in a map batch")
            segs = []
            for seg in scene.map.segments:
                local = (seg.centerline - o) @ R.T
                d = float(np.linalg.norm(local, axis=1).min())
                if d < cfg.map_radius:
                    segs.append((d, seg.id, local, seg))
            segs.sort(key=lambda x: (x[0], x[1]))
            for k, (_, _, local, seg) in enumerate(segs[:S]):
                seg_pts[b, k] = resample(local, P)
                seg_flags[b, k] = (seg.is_intersection, seg.has_control)
                seg_mask[b, k] = True
            cand = goal_candidates(scene, o, R, cfg)
            goals[b, : len(cand)] = cand
            goal_mask[b, : len(cand)] = True
    agent_mask = step_mask.any(axis=2)
    cast = (lambda x: None if x is None else x.astype(dtype))
    batch = Batch(cast(agents), step_mask, agent_mask, origin, rot, cast(gt))
    if with_map:
        batch.seg_pts, batch.seg_flags, batch.seg_mask = cast(seg_pts), cast(seg_flags), seg_mask
        batch.goals, batch.goal_mask = cast(goals), goal_mask
    return batch


def goal_candidates(scene: Scene, origin, rot, cfg: ModelConfig, spacing: float = 2.0) -> np.ndarray:
    """Lane centerline points within reach of the target, in the local frame."""
    pts = []
    for seg in scene.map.segments:
        local = (seg.centerline - origin) @ rot.T
        n = max(2, int(seg.length // spacing) + 1)
        dense = resample(local, n)
        keep = np.linalg.norm(dense, axis=1) < cfg.goal_radius
        pts.append(dense[keep])
    cand = np.concatenate(pts) if pts else np.zeros((0, 2))
    if len(cand) > cfg.goal_candidates:
        idx = np.linspace(0, len(cand) - 1, cfg.goal_candidates).round().astype(int)
        cand = cand[idx]
    return cand


# ---------------------------------------------------------------- outputs


@dataclass
class MixturePrediction:
    mu: Tensor                  # (B, K, T, 2)
    sigma: Tensor               # (B, K, T, 2)
    pi_logits: Tensor           # (B, K)
    sigma_prime: Tensor | None = None

    def numpy(self):
        return self.mu.data, self.sigma.data, self.pi_logits.data

    def probs(self) -> np.ndarray:
        z = self.pi_logits.data
        e = np.exp(z - z.max(-1, keepdims=True))
        return e / e.sum(-1, keepdims=True)


@dataclass
class GoalSetPrediction:
    goals: np.ndarray           # (B, N, 2)
    probs: Tensor               # (B, N)
    mask: np.ndarray            # (B, N)


@dataclass
class ForwardOutput:
    taps: dict[str, Tensor]
    deltas: dict[str, Tensor]
    pred: MixturePrediction
    goal: GoalSetPrediction | None = None
    agent_feats: Tensor | None = None
    attention: dict[str, np.ndarray] = field(default_factory=dict)


# ---------------------------------------------------------------- model


def _param_rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([int(seed), zlib.crc32(name.encode())])


def linear(x: Tensor, params: dict, name: str) -> Tensor:
    return x @ params[name + ".w"] + params[name + ".b"]


def bounded_scale(x: Tensor, bounds: tuple[float, float] = LOG_SCALE_BOUNDS) -> Tensor:
    """exp(log-scale) with the log-scale squashed smoothly into ``bounds``; x = 0 maps to scale 1.

    A smooth squash keeps gradients alive where a hard clip would zero them.
    """
    lo, hi = bounds
    mid, half = (hi + lo) / 2, (hi - lo) / 2
    shift = float(np.arctanh(-mid / half))
    return dc.exp(dc.tanh(x * (1.0 / half) + shift) * half + mid)


class Predictor:
    """Teacher (with map branch) or student (agent-attention pseudo-map branch)."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        self.params: dict[str, Tensor] = {}
        self._build()

    # -- parameters

    def _dense(self, name, fan_in, fan_out, gain=np.sqrt(2.0), bias=0.0):
        rng = _param_rng(self.seed, name)
        dt = np.dtype(self.config.dtype)
        w = rng.normal(scale=gain / np.sqrt(fan_in), size=(fan_in, fan_out)).astype(dt)
        self.params[name + ".w"] = Tensor(w, trainable=True, name=name + ".w")
        self.params[name + ".b"] = Tensor(np.full(fan_out, bias, dtype=dt), trainable=True, name=name + ".b")

    def _build(self):
        c = self.config
        H, K, T = c.hidden, c.modes, c.t_pred
        self._dense("agent.enc1", c.t_obs * 5, H)
        self._dense("agent.enc2", H, H)
        for n in ("q", "k", "v"):
            self._dense(f"agent.attn.{n}", H, H, gain=1.0)
        self._dense("agent.out", 2 * H, H)
        if c.has_map_branch:
            self._dense("map.enc1", c.seg_points * 4 + 2, H)
            self._dense("map.enc2", H, H)
            for n in ("q", "k", "v"):
                self._dense(f"map.attn.{n}", H, H, gain=1.0)
        else:
            for n in ("q", "k"):
                self._dense(f"pseudo.attn.{n}", H, H, gain=1.0)
        self._dense("fuse.1", 2 * H, H)
        self._dense("fuse.2", H, H, gain=1.0)
        self._dense("dec.hidden", H, 2 * H)
        self._dense("dec.mu", 2 * H, K * T * 2, gain=0.5)
        self._dense("dec.log_sigma", 2 * H, K * T * 2, gain=0.1)
        self._dense("dec.pi", 2 * H, K, gain=0.1)
        if c.decoder == "goal_based":
            self._dense("goal.1", H + 2, H)
            self._dense("goal.2", H, 1, gain=1.0)
        if c.distill_heads:
            self._dense("aux.proj.1", H, H)
            self._dense("aux.proj.2", H, H, gain=1.0)
            self._dense("aux.sigma_prime.1", 2 * H, 2 * H)
            self._dense("aux.sigma_prime.2", 2 * H, K * T * 2, gain=0.1)
            widths = {"f_a": 2 * H, "f_m": H, "f_f": H}
            for tap in c.taps:
                self._dense(f"aux.delta.{tap}", widths[tap], H, gain=0.1)

    def inference_params(self) -> dict[str, Tensor]:
        return {k: v for k, v in self.params.items() if not k.startswith("aux.")}

    def freeze(self) -> "Predictor":
        for p in self.params.values():
            p.trainable = p.requires_grad = False
        return self

    def parameter_count(self) -> int:
        return sum(p.size for p in self.params.values())

    # -- branches

    def encode_agents(self, batch: Batch):
        """Per-agent features (B, A, H) and the target feature f_a (B, H)."""
        c, p = self.config, self.params
        if not batch.step_mask[:, 0].any(axis=1).all():
            raise ValueError("target with no valid observed step")
        B, A, T, _ = batch.agents.shape
        xy = batch.agents / c.coord_scale
        m = batch.step_mask[..., None]
        prev = np.concatenate([xy[:, :, :1], xy[:, :, :-1]], axis=2)
        pm = np.concatenate([batch.step_mask[:, :, :1], batch.step_mask[:, :, :-1]], axis=2)[..., None]
        vel = np.where(m & pm, (xy - prev) * 10.0, 0.0)
        feat = np.concatenate([np.where(m, xy, 0.0), vel, m.astype(xy.dtype)], axis=-1)
        feat = feat.reshape(B, A, T * 5).astype(xy.dtype)
        h = dc.relu(linear(Tensor(feat), p, "agent.enc1"))
        h = dc.relu(linear(h, p, "agent.enc2"))
        h = h * batch.agent_mask[..., None].astype(xy.dtype)
        target = h[:, 0:1, :]
        ctx, w = self._attend(target, h, batch.agent_mask, "agent.attn", value=True)
        pre = dc.concat([target, ctx], axis=-1)
        f_a = dc.relu(linear(pre, p, "agent.out"))
        return h, f_a[:, 0, :], pre[:, 0, :], w

    def _attend(self, query, keys, mask, name, value):
        p, H = self.params, self.config.hidden
        q = linear(query, p, name + ".q")
        k = linear(keys, p, name + ".k")
        scores = (q @ dc.transpose(k, (0, 2, 1))) * (1.0 / np.sqrt(H))
        w = dc.masked_softmax(scores, mask[:, None, :])
        vals = linear(keys, p, name + ".v") if value else keys
        return dc.attend(w, vals), w

    def encode_map(self, batch: Batch, target_feat: Tensor):
        """Per-segment features and the attention-pooled map feature f_m."""
        c, p = self.config, self.params
        if not c.has_map_branch:
            raise RuntimeError("encode_map called on a mapless model")
        if not batch.has_map or not batch.seg_mask.any(axis=1).all():
            raise ValueError("map branch needs a non-empty map for every scene")
        B, S, P, _ = batch.seg_pts.shape
        pts = batch.seg_pts / c.coord_scale
        d = np.concatenate([pts[:, :, 1:] - pts[:, :, :-1], np.zeros_like(pts[:, :, :1])], axis=2)
        feat = np.concatenate([pts, d * 5.0], axis=-1).reshape(B, S, P * 4)
        feat = np.concatenate([feat, batch.seg_flags], axis=-1).astype(pts.dtype)
        m = dc.relu(linear(Tensor(feat), p, "map.enc1"))
        m = dc.relu(linear(m, p, "map.enc2"))
        f_m, w = self._attend(target_feat[:, None, :], m, batch.seg_mask, "map.attn", value=True)
        return m, f_m[:, 0, :], w

    def pseudo_map_branch(self, agent_feats: Tensor, batch: Batch):
        """Attention-weighted sum of raw agent features, query = target."""
        if self.config.has_map_branch:
            raise RuntimeError("pseudo_map_branch is the student's replacement for the map branch")
        g, w = self._attend(agent_feats[:, 0:1, :], agent_feats, batch.agent_mask, "pseudo.attn", value=False)
        return g[:, 0, :], w

    def project(self, f_m_raw: Tensor):
        p = self.params
        hid = dc.relu(linear(f_m_raw, p, "aux.proj.1"))
        return linear(hid, p, "aux.proj.2"), hid

    def fuse(self, f_a: Tensor, f_m: Tensor):
        p = self.params
        hid = dc.relu(linear(dc.concat([f_a, f_m], axis=-1), p, "fuse.1"))
        return f_a + linear(hid, p, "fuse.2"), hid

    def decode_regression(self, f_f: Tensor, with_sigma_prime: bool = False) -> MixturePrediction:
        c, p = self.config, self.params
        B = f_f.shape[0]
        z = dc.relu(linear(f_f, p, "dec.hidden"))
        mu = linear(z, p, "dec.mu").reshape(B, c.modes, c.t_pred, 2) * c.coord_scale
        sigma = bounded_scale(linear(z, p, "dec.log_sigma")).reshape(B, c.modes, c.t_pred, 2)
        pi = linear(z, p, "dec.pi")
        sp = None
        if with_sigma_prime:
            hid = dc.relu(linear(z, p, "aux.sigma_prime.1"))
            sp = bounded_scale(linear(hid, p, "aux.sigma_prime.2")).reshape(B, c.modes, c.t_pred, 2)
        return MixturePrediction(mu, sigma, pi, sp)

    def decode_goal(self, f_f: Tensor, goals: np.ndarray, goal_mask: np.ndarray) -> GoalSetPrediction:
        if self.config.decoder != "goal_based":
            raise RuntimeError("model has no goal decoder")
        if goals.shape[1] == 0 or not goal_mask.any(axis=1).all():
            raise ValueError("empty goal set")
        p, c = self.params, self.config
        B, N, _ = goals.shape
        ff = f_f.reshape(B, 1, -1) * np.ones((1, N, 1), dtype=goals.dtype)
        x = dc.concat([ff, Tensor(goals / c.coord_scale)], axis=-1)
        score = linear(dc.relu(linear(x, p, "goal.1")), p, "goal.2")[..., 0]
        return GoalSetPrediction(goals, dc.masked_softmax(score, goal_mask), goal_mask)

    def _delta(self, tap: str, pre: Tensor) -> Tensor:
        return bounded_scale(linear(pre, self.params, f"aux.delta.{tap}"), self.config.delta_log_bounds)

    # -- full pass

    def forward(self, batch: Batch, distill: bool = False) -> ForwardOutput:
        """Run all branches; ``distill`` adds the aux.* heads (student training only)."""
        c = self.config
        if distill and not c.distill_heads:
            raise RuntimeError("model was built without distillation heads")
        agent_feats, f_a, f_a_pre, w_agents = self.encode_agents(batch)
        attn = {"agents": w_agents.data[:, 0]}
        taps: dict[str, Tensor] = {"f_a": f_a}
        deltas: dict[str, Tensor] = {}
        if c.has_map_branch:
            _, f_m, w = self.encode_map(batch, agent_feats[:, 0, :])
            taps["f_m"] = f_m
            attn["map"] = w.data[:, 0]
            f_m_in = f_m
        else:
            f_m_in, w = self.pseudo_map_branch(agent_feats, batch)
            attn["pseudo_map"] = w.data[:, 0]
            if distill:
                taps["f_m"], proj_hidden = self.project(f_m_in)
                if "f_m" in c.taps:
                    deltas["f_m"] = self._delta("f_m", proj_hidden)
            else:
                taps["f_m"] = f_m_in
        f_f, fuse_hidden = self.fuse(f_a, f_m_in)
        taps["f_f"] = f_f
        if distill:
            if "f_a" in c.taps:
                deltas["f_a"] = self._delta("f_a", f_a_pre)
            if "f_f" in c.taps:
                deltas["f_f"] = self._delta("f_f", fuse_hidden)
        pred = self.decode_regression(f_f, with_sigma_prime=distill)
        goal = None
        if c.decoder == "goal_based":
            goal = self.decode_goal(f_f, batch.goals, batch.goal_mask)
        return ForwardOutput(taps, deltas, pred, goal, agent_feats, attn)

    def predict(self, batch: Batch) -> MixturePrediction:
        return self.forward(batch).pred


# ---------------------------------------------------------------- decomposition


@dataclass
class EquivalentFeatureDecomposition:
    f_global: np.ndarray
    f_sub_a: np.ndarray
    f_sub_m: np.ndarray
    w_a: np.ndarray
    w_m: np.ndarray
    f_e_a: np.ndarray | None
    f_e_m: np.ndarray | None
    w_a_norm: np.ndarray | None
    w_m_norm: np.ndarray | None
    a_m_student: np.ndarray | None = None

    def reconstruct(self) -> np.ndarray:
        out = np.zeros_like(self.f_global)
        if self.f_e_a is not None:
            out = out + self.w_a.sum() * self.f_e_a
        if self.f_e_m is not None:
            out = out + self.w_m.sum() * self.f_e_m
        return out


def joint_attention_weights(query: np.ndarray, f_sub_a: np.ndarray, f_sub_m: np.ndarray) -> tuple:
    """Softmax weights of one joint pooling over agent and map sub-features."""
    keys = np.concatenate([f_sub_a, f_sub_m], axis=0)
    s = keys @ query / np.sqrt(len(query))
    w = np.exp(s - s.max())
    w /= w.sum()
    return w[: len(f_sub_a)], w[len(f_sub_a):]


def decompose_equivalent(f_sub_a: np.ndarray, f_sub_m: np.ndarray, w_a: np.ndarray, w_m: np.ndarray,
                         a_m_student: np.ndarray | None = None) -> EquivalentFeatureDecomposition:
    """Split a jointly pooled feature into equivalent agent and map features.

    A side with zero total weight has no equivalent feature (``None``); the
    other side alone then reconstructs the pooled feature.
    """
    f_sub_a, f_sub_m = np.asarray(f_sub_a, float), np.asarray(f_sub_m, float)
    w_a, w_m = np.asarray(w_a, float), np.asarray(w_m, float)
    f_global = w_a @ f_sub_a + w_m @ f_sub_m
    sa, sm = w_a.sum(), w_m.sum()
    wa_n = w_a / sa if sa > 0 else None
    wm_n = w_m / sm if sm > 0 else None
    return EquivalentFeatureDecomposition(
        f_global, f_sub_a, f_sub_m, w_a, w_m,
        None if wa_n is None else wa_n @ f_sub_a,
        None if wm_n is None else wm_n @ f_sub_m,
        wa_n, wm_n,
        None if a_m_student is None else np.asarray(a_m_student, float) / np.sum(a_m_student),
    )


# ---------------------------------------------------------------- checkpoints


def save_checkpoint(model: Predictor, path, inference_only: bool = False, extra: dict | None = None) -> str:
    """Write header line + raw little-endian blocks; returns the file's sha256."""
    params = model.inference_params() if inference_only else model.params
    manifest, blobs, offset = [], [], 0
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name].data)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        raw = le.tobytes()
        manifest.append({"name": name, "shape": list(arr.shape), "dtype": le.dtype.str, "offset": offset,
                         "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    cfg = model.config.to_dict()
    if inference_only:
        cfg["distill_heads"] = False
    header = {"version": CHECKPOINT_VERSION, "model_config": cfg, "seed": model.seed,
              "params": manifest, "extra": extra or {}}
    data = json.dumps(header, sort_keys=True).encode() + b"\n" + b"".join(blobs)
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def load_checkpoint(path) -> tuple[Predictor, dict]:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl])
    if header.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {header.get('version')!r}")
    body = raw[nl + 1:]
    model = Predictor(ModelConfig.from_dict(header["model_config"]), header.get("seed", 0))
    names = {e["name"] for e in header["params"]}
    if names != set(model.params):
        raise ValueError(f"checkpoint parameters do not match the model: {sorted(names ^ set(model.params))}")
    for e in header["params"]:
        arr = np.frombuffer(body, dtype=np.dtype(e["dtype"]), count=int(np.prod(e["shape"])),
                            offset=e["offset"]).reshape(e["shape"])
        t = model.params[e["name"]]
        t.data = arr.astype(arr.dtype.newbyteorder("="), copy=True)
    return model, header


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
