"""Scenario file format: line-delimited JSON records, one scenario per file.

Layout (record kinds in order):

    {"kind": "header", "format": "scenario.v1", "scenario_id": str,
     "label": str, "dt": float, "history_len": int, "horizon": int,
     "ego_index": int, "num_agents": int, "num_polylines": int,
     "pad_points": int}
    {"kind": "agent", "index": int, "id": int, "type": str,
     "extent": [length, width]}                          # one per agent
    {"kind": "state", "agent": int, "t": int, "x": float, "y": float,
     "ch": float, "sh": float, "v": float, "valid": bool}  # agent-major, t-minor
    {"kind": "roadpoint", "polyline": int, "point": int, "x": float,
     "y": float, "ux": float, "uy": float, "light": str, "class": str}

Only valid road points are written; padding is implicit up to pad_points.
The schema is strict: unknown keys, missing keys, or wrong kinds are
rejected with the offending field and line number.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .types import (AGENT_TYPES, POLYLINE_CLASSES, ROADPOINT_DIM, TL_STATES,
                    AgentTrack, RoadGraph, Scenario, ValidationError,
                    class_onehot, light_onehot)

FORMAT_NAME = "scenario.v1"


class ScenarioFormatError(Exception):
    """Parse or schema failure, with line/field context in the message."""


_HEADER_KEYS = {"kind", "format", "scenario_id", "label", "dt", "history_len",
                "horizon", "ego_index", "num_agents", "num_polylines", "pad_points"}
_AGENT_KEYS = {"kind", "index", "id", "type", "extent"}
_STATE_KEYS = {"kind", "agent", "t", "x", "y", "ch", "sh", "v", "valid"}
_ROADPOINT_KEYS = {"kind", "polyline", "point", "x", "y", "ux", "uy", "light", "class"}
_KEYSETS = {"header": _HEADER_KEYS, "agent": _AGENT_KEYS,
            "state": _STATE_KEYS, "roadpoint": _ROADPOINT_KEYS}


def _dump(obj: dict) -> str:
    return json.dumps(obj, separators=(", ", ": "))


def scenario_to_lines(sc: Scenario) -> list[str]:
    lines = [_dump({
        "kind": "header", "format": FORMAT_NAME, "scenario_id": sc.scenario_id,
        "label": sc.label, "dt": sc.dt, "history_len": sc.history_len,
        "horizon": sc.horizon, "ego_index": sc.ego_index,
        "num_agents": sc.num_agents, "num_polylines": sc.roadgraph.num_polylines,
        "pad_points": sc.roadgraph.pad_points,
    })]
    for i, tr in enumerate(sc.tracks):
        lines.append(_dump({"kind": "agent", "index": i, "id": tr.agent_id,
                            "type": tr.agent_type,
                            "extent": [float(tr.extent[0]), float(tr.extent[1])]}))
    for i, tr in enumerate(sc.tracks):
        for t in range(sc.num_steps):
            st = tr.states[t]
            lines.append(_dump({
                "kind": "state", "agent": i, "t": t,
                "x": float(st[0]), "y": float(st[1]), "ch": float(st[2]),
                "sh": float(st[3]), "v": float(st[4]), "valid": bool(tr.valid[t]),
            }))
    rg = sc.roadgraph
    for li in range(rg.num_polylines):
        for pi in range(rg.pad_points):
            if not rg.mask[li, pi]:
                continue
            f = rg.features[li, pi]
            lines.append(_dump({
                "kind": "roadpoint", "polyline": li, "point": pi,
                "x": float(f[0]), "y": float(f[1]),
                "ux": float(f[2]), "uy": float(f[3]),
                "light": TL_STATES[int(np.argmax(f[4:8]))],
                "class": POLYLINE_CLASSES[int(np.argmax(f[8:14]))],
            }))
    return lines


def save_scenario(sc: Scenario, path):
    Path(path).write_text("\n".join(scenario_to_lines(sc)) + "\n", encoding="utf-8")


def _check_keys(rec: dict, lineno: int):
    kind = rec.get("kind")
    if kind not in _KEYSETS:
        raise ScenarioFormatError(f"line {lineno}: unknown record kind {kind!r}")
    keys = set(rec.keys())
    expected = _KEYSETS[kind]
    extra = keys - expected
    if extra:
        raise ScenarioFormatError(
            f"line {lineno}: unknown field {sorted(extra)[0]!r} in {kind!r} record")
    missing = expected - keys
    if missing:
        raise ScenarioFormatError(
            f"line {lineno}: missing field {sorted(missing)[0]!r} in {kind!r} record")


def scenario_from_lines(lines) -> Scenario:
    records = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise ScenarioFormatError(f"line {lineno}: malformed record ({e.msg})") from e
        if not isinstance(rec, dict):
            raise ScenarioFormatError(f"line {lineno}: record is not an object")
        _check_keys(rec, lineno)
        records.append((lineno, rec))
    if not records:
        raise ScenarioFormatError("empty scenario file")

    lineno, header = records[0]
    if header["kind"] != "header":
        raise ScenarioFormatError(f"line {lineno}: first record must be the header")
    if header["format"] != FORMAT_NAME:
        raise ScenarioFormatError(
            f"line {lineno}: unsupported format {header['format']!r}, expected {FORMAT_NAME!r}")

    num_agents = int(header["num_agents"])
    num_poly = int(header["num_polylines"])
    pad = int(header["pad_points"])
    K, N = int(header["history_len"]), int(header["horizon"])
    T = K + N + 1

    agents: dict[int, dict] = {}
    states = np.zeros((num_agents, T, 5))
    valid = np.zeros((num_agents, T), dtype=bool)
    seen_state = np.zeros((num_agents, T), dtype=bool)
    feats = np.zeros((num_poly, pad, ROADPOINT_DIM))
    mask = np.zeros((num_poly, pad), dtype=bool)

    for lineno, rec in records[1:]:
        kind = rec["kind"]
        if kind == "header":
            raise ScenarioFormatError(f"line {lineno}: duplicate header")
        if kind == "agent":
            idx = int(rec["index"])
            if not (0 <= idx < num_agents):
                raise ScenarioFormatError(f"line {lineno}: agent index {idx} out of range")
            if idx in agents:
                raise ScenarioFormatError(f"line {lineno}: duplicate agent index {idx}")
            if rec["type"] not in AGENT_TYPES:
                raise ScenarioFormatError(f"line {lineno}: unknown agent type {rec['type']!r}")
            ext = rec["extent"]
            if not (isinstance(ext, list) and len(ext) == 2):
                raise ScenarioFormatError(f"line {lineno}: extent must be [length, width]")
            agents[idx] = rec
        elif kind == "state":
            ai, t = int(rec["agent"]), int(rec["t"])
            if not (0 <= ai < num_agents):
                raise ScenarioFormatError(f"line {lineno}: state agent {ai} out of range")
            if not (0 <= t < T):
                raise ScenarioFormatError(f"line {lineno}: state t {t} out of range")
            if seen_state[ai, t]:
                raise ScenarioFormatError(f"line {lineno}: duplicate state (agent {ai}, t {t})")
            seen_state[ai, t] = True
            states[ai, t] = [rec["x"], rec["y"], rec["ch"], rec["sh"], rec["v"]]
            valid[ai, t] = bool(rec["valid"])
        else:  # roadpoint
            li, pi = int(rec["polyline"]), int(rec["point"])
            if not (0 <= li < num_poly):
                raise ScenarioFormatError(f"line {lineno}: polyline {li} out of range")
            if not (0 <= pi < pad):
                raise ScenarioFormatError(f"line {lineno}: point {pi} out of range")
            if rec["light"] not in TL_STATES:
                raise ScenarioFormatError(f"line {lineno}: unknown light {rec['light']!r}")
            if rec["class"] not in POLYLINE_CLASSES:
                raise ScenarioFormatError(f"line {lineno}: unknown class {rec['class']!r}")
            feats[li, pi, 0:4] = [rec["x"], rec["y"], rec["ux"], rec["uy"]]
            feats[li, pi, 4:8] = light_onehot(rec["light"])
            feats[li, pi, 8:14] = class_onehot(rec["class"])
            mask[li, pi] = True

    if len(agents) != num_agents:
        raise ScenarioFormatError(
            f"header declares {num_agents} agents, found {len(agents)} agent records")
    if not seen_state.all():
        ai, t = np.argwhere(~seen_state)[0]
        raise ScenarioFormatError(f"missing state record (agent {ai}, t {t})")

    tracks = []
    for idx in range(num_agents):
        rec = agents[idx]
        tracks.append(AgentTrack(
            agent_id=int(rec["id"]), states=states[idx], valid=valid[idx],
            extent=(float(rec["extent"][0]), float(rec["extent"][1])),
            agent_type=rec["type"]))

    sc = Scenario(
        scenario_id=str(header["scenario_id"]), dt=float(header["dt"]),
        history_len=K, horizon=N, ego_index=int(header["ego_index"]),
        tracks=tracks, roadgraph=RoadGraph(feats, mask), label=str(header["label"]))
    try:
        sc.validate()
    except ValidationError as e:
        raise ScenarioFormatError(f"invalid scenario: {e}") from e
    return sc


def load_scenario(path) -> Scenario:
    text = Path(path).read_text(encoding="utf-8")
    return scenario_from_lines(text.splitlines())


# -- corpus directories ------------------------------------------------------

def save_corpus(scenarios, directory, seed=None, extra=None) -> dict:
    """Write one file per scenario plus a manifest with content hashes."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    digest = hashlib.sha256()
    for sc in scenarios:
        name = f"{sc.scenario_id}.jsonl"
        data = ("\n".join(scenario_to_lines(sc)) + "\n").encode("utf-8")
        (directory / name).write_bytes(data)
        digest.update(data)
        files.append(name)
    manifest = {
        "format": FORMAT_NAME,
        "generator_version": 1,
        "seed": seed,
        "count": len(files),
        "files": files,
        "corpus_sha256": digest.hexdigest(),
    }
    if extra:
        manifest.update(extra)
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest


def load_corpus(directory) -> list[Scenario]:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        names = manifest["files"]
    else:
        names = sorted(p.name for p in directory.glob("*.jsonl"))
    if not names:
        raise ScenarioFormatError(f"no scenarios found in {directory}")
    return [load_scenario(directory / name) for name in names]
