"""Scene files (one JSON object per line) and Argoverse-style CSV import."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable

import numpy as np

from .synthworld import DT, T_OBS, T_PRED, AgentTrack, LaneSegment, Scene, VectorMap

FORMAT_VERSION = 1
CSV_COLUMNS = ("TIMESTAMP", "TRACK_ID", "OBJECT_TYPE", "X", "Y")


class SceneFormatError(ValueError):
    pass


def map_to_dict(vmap: VectorMap) -> dict:
    return {
        "bounds": [float(b) for b in vmap.bounds],
        "segments": [
            {
                "id": int(s.id),
                "pts": s.centerline.tolist(),
                "succ": [int(x) for x in s.successors],
                "flags": {"is_intersection": bool(s.is_intersection), "has_control": bool(s.has_control)},
            }
            for s in vmap.segments
        ],
    }


def map_from_dict(d: dict) -> VectorMap:
    segs = [
        LaneSegment(s["id"], np.asarray(s["pts"], dtype=np.float64), list(s["succ"]),
                    bool(s["flags"].get("is_intersection", False)), bool(s["flags"].get("has_control", False)))
        for s in d["segments"]
    ]
    return VectorMap(segs, tuple(d["bounds"]))


def scene_to_dict(scene: Scene) -> dict:
    out = {
        "version": FORMAT_VERSION,
        "seed": scene.seed,
        "t_obs": scene.t_obs,
        "t_pred": scene.t_pred,
        "target_id": int(scene.target_id),
        "tracks": [{"id": int(t.id), "xy": t.positions.tolist(), "mask": t.valid.astype(int).tolist()}
                   for t in scene.tracks],
        "future": {str(k): np.asarray(v).tolist() for k, v in scene.future.items()},
    }
    if scene.map is not None:
        out["map"] = map_to_dict(scene.map)
    if scene.behavior is not None:
        out["behavior"] = scene.behavior
    return out


def scene_from_dict(d: dict) -> Scene:
    if d.get("version") != FORMAT_VERSION:
        raise SceneFormatError(f"unsupported scene version {d.get('version')!r}")
    try:
        tracks = [AgentTrack(t["id"], np.asarray(t["xy"], dtype=np.float64).reshape(-1, 2),
                             np.asarray(t["mask"], dtype=bool)) for t in d["tracks"]]
        future = {int(k): np.asarray(v, dtype=np.float64).reshape(-1, 2) for k, v in d["future"].items()}
        vmap = map_from_dict(d["map"]) if d.get("map") is not None else None
        return Scene(tracks, int(d["target_id"]), future, vmap, int(d["t_obs"]), int(d["t_pred"]),
                     d.get("seed"), d.get("behavior"))
    except KeyError as e:
        raise SceneFormatError(f"missing field {e}") from None


def write_scenes(path, scenes: Iterable[Scene]) -> int:
    n = 0
    with open(path, "w") as fh:
        for scene in scenes:
            fh.write(json.dumps(scene_to_dict(scene), separators=(",", ":")))
            fh.write("\n")
            n += 1
    return n


def read_scenes(path) -> list[Scene]:
    scenes = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                scenes.append(scene_from_dict(json.loads(line)))
            except (json.JSONDecodeError, SceneFormatError) as e:
                raise SceneFormatError(f"{path}:{lineno}: {e}") from None
    return scenes


def import_csv(path, t_obs: int = T_OBS, t_pred: int = T_PRED, target_type: str = "AGENT") -> list[Scene]:
    """Read one Argoverse-style forecasting sequence.

    Timestamps are binned to 10 Hz relative to the target's first timestamp;
    bins without a row are masked invalid. No map is attached.
    """
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in CSV_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise SceneFormatError(f"{path}: missing columns {missing}")
        for rowno, row in enumerate(reader, 2):
            try:
                rows.append((rowno, float(row["TIMESTAMP"]), row["TRACK_ID"], row["OBJECT_TYPE"],
                             float(row["X"]), float(row["Y"])))
            except ValueError as e:
                raise SceneFormatError(f"{path}:{rowno}: {e}") from None
    target_rows = [r for r in rows if r[3] == target_type]
    if not target_rows:
        raise SceneFormatError(f"{path}: no row with OBJECT_TYPE={target_type}")
    target_track = target_rows[0][2]
    if any(r[2] != target_track for r in target_rows):
        raise SceneFormatError(f"{path}: more than one target track")
    t0 = min(r[1] for r in target_rows)
    n_steps = t_obs + t_pred

    track_ids: list[str] = []
    pos: dict[str, np.ndarray] = {}
    valid: dict[str, np.ndarray] = {}
    for rowno, ts, tid, _, x, y in rows:
        b = int(round((ts - t0) / DT))
        if b < 0 or b >= n_steps:
            continue
        if tid not in pos:
            track_ids.append(tid)
            pos[tid] = np.zeros((n_steps, 2))
            valid[tid] = np.zeros(n_steps, bool)
        if valid[tid][b]:
            raise SceneFormatError(f"{path}:{rowno}: duplicate timestamp for track {tid}")
        pos[tid][b] = (x, y)
        valid[tid][b] = True
    if valid[target_track].sum() < n_steps:
        raise SceneFormatError(
            f"{path}: target has {int(valid[target_track].sum())} distinct timestamps, need {n_steps}")

    # target first, others in order of appearance
    order = [target_track] + [t for t in track_ids if t != target_track]
    tracks = [AgentTrack(k, pos[tid], valid[tid]) for k, tid in enumerate(order)]
    observed = [AgentTrack(t.id, t.positions[:t_obs], t.valid[:t_obs]) for t in tracks]
    observed = [t for t in observed if t.valid.any()]
    future = {t.id: t.positions[t_obs:].copy() for t in tracks if t.valid[t_obs:].all()}
    return [Scene(observed, 0, future, None, t_obs, t_pred, None, None)]
