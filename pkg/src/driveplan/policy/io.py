"""Checkpoint files: binary parameter container plus a JSON sidecar.

A checkpoint stem `model` produces `model.params` (the binary container)
and `model.json` holding the architecture config and free-form metadata;
both are validated against each other on load.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..diffcore import ParamStore
from .config import PolicyConfig, PolicyConfigError
from .network import MAP_POINT_DIM, NODE_IN_DIM


class CheckpointError(Exception):
    pass


def param_shapes(cfg: PolicyConfig) -> dict:
    """Expected parameter names and shapes for a config, in store order."""
    d, nd, h = cfg.embed_dim, cfg.node_dim, cfg.hidden_dim
    shapes = {}

    def lin(name, fi, fo):
        shapes[name + ".w"] = (fi, fo)
        shapes[name + ".b"] = (fo,)

    lin("node_enc", NODE_IN_DIM, nd)
    lin("edge_enc", 2, nd)
    lin("edge_net", 3 * nd, nd)
    lin("node_net", 2 * nd, nd)
    lin("gnn_dec", nd, d)
    for proj in ("q", "k", "v", "out"):
        lin(f"intent.{proj}", d, d)
    lin("map_enc1", MAP_POINT_DIM, nd)
    lin("map_enc2", 2 * nd, d)
    for proj in ("q", "k", "v"):
        lin(f"map_attn.{proj}", d, d)
    shapes["gru.wx"] = (cfg.gru_input, 3 * h)
    shapes["gru.wh"] = (h, 3 * h)
    shapes["gru.bx"] = (3 * h,)
    shapes["gru.bh"] = (3 * h,)
    lin("head.l1", h, cfg.head_hidden)
    lin("head.l2", cfg.head_hidden, cfg.head_hidden)
    lin("head.mean", cfg.head_hidden, 2)
    shapes["log_std"] = (2,)
    return shapes


def check_store(store: ParamStore, cfg: PolicyConfig):
    expected = param_shapes(cfg)
    names = store.names()
    if names != list(expected.keys()):
        raise CheckpointError("parameter names do not match the config wiring")
    for name in names:
        if store[name].data.shape != expected[name]:
            raise CheckpointError(
                f"parameter {name!r} has shape {store[name].data.shape}, "
                f"expected {expected[name]}")


def save_checkpoint(stem, store: ParamStore, cfg: PolicyConfig, meta: dict | None = None):
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    store.save(stem.with_suffix(".params"))
    payload = {"policy": cfg.to_dict(), "meta": meta or {}}
    stem.with_suffix(".json").write_text(json.dumps(payload, indent=2) + "\n",
                                         encoding="utf-8")


def load_checkpoint(stem) -> tuple[ParamStore, PolicyConfig, dict]:
    stem = Path(stem)
    params_path = stem.with_suffix(".params")
    json_path = stem.with_suffix(".json")
    if not params_path.exists() or not json_path.exists():
        raise CheckpointError(f"checkpoint {stem} is missing {params_path.name} "
                              f"or {json_path.name}")
    payload = json.loads(json_path.read_text(encoding="utf-8"))
    try:
        cfg = PolicyConfig.from_dict(payload["policy"])
    except (KeyError, TypeError, PolicyConfigError) as e:
        raise CheckpointError(f"bad checkpoint config: {e}") from e
    store = ParamStore.load(params_path)
    check_store(store, cfg)
    return store, cfg, payload.get("meta", {})
