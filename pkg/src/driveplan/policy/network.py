"""The interactive driving policy, tape-differentiable forward pass.

One shared network controls every agent. Per step it fuses three
per-agent feature blocks of width 64:

* interaction graph over physical states: two damped message-passing
  iterations on a fully connected graph with self edges; node features
  are state + extent + type, edge features start as (dx, dy);
* intent attention: 16-head dot-product attention whose queries, keys
  and values all come from the recurrent hidden states;
* map attention: single-head cross-attention from the interaction-graph
  output onto per-polyline map embeddings (encoded once per scene).

The concatenated 192-vector drives a GRU cell (hidden 64), whose output
feeds a tanh MLP emitting the mean of a squashed Gaussian over
(accel, yaw rate); samples are reparametrized and land strictly inside
the physical action bounds.

All functions take `P`, a dict of parameter tensors (attach a ParamStore
to a tape for training, or pass its raw tensors for tape-free
inference), plus the shared PolicyConfig.
"""

from __future__ import annotations

import numpy as np

from .. import diffcore as dc
from .. import dynamics
from ..diffcore import ParamStore, Tensor
from .config import PolicyConfig

NODE_IN_DIM = 10      # state (5) + extent (2) + type one-hot (3)
EDGE_IN_DIM = 2       # relative position (dx, dy)
MAP_POINT_DIM = 14
ACTION_SCALE = np.array([dynamics.ACCEL_MAX, dynamics.YAW_MAX])

# input feature conditioning: positions and speeds are O(10..100) in
# meters(/s); the encoders see them scaled to O(1)
POS_SCALE = 0.02
EDGE_SCALE = 0.1          # relative positions live on a ~10 m scale
VEL_SCALE = 0.1
EXTENT_SCALE = 0.2
STATE_FEATURE_SCALE = np.array([POS_SCALE, POS_SCALE, 1.0, 1.0, VEL_SCALE])
META_FEATURE_SCALE = np.array([EXTENT_SCALE, EXTENT_SCALE, 1.0, 1.0, 1.0])
MAP_FEATURE_SCALE = np.concatenate([[POS_SCALE, POS_SCALE], np.ones(12)])

_LOG_2PI = float(np.log(2.0 * np.pi))


def _uniform_fanin(rng, fan_in, shape):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _orthogonal(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


def init_params(cfg: PolicyConfig, seed: int) -> ParamStore:
    """Fresh weights: uniform fan-in for linears, orthogonal recurrence."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    d, nd, h = cfg.embed_dim, cfg.node_dim, cfg.hidden_dim
    store = ParamStore()

    def lin(name, fan_in, fan_out):
        store.add(name + ".w", _uniform_fanin(rng, fan_in, (fan_in, fan_out)))
        # nonzero bias init also keeps ReLU pre-activations off the exact kink
        store.add(name + ".b", _uniform_fanin(rng, fan_in, (fan_out,)))

    lin("node_enc", NODE_IN_DIM, nd)
    lin("edge_enc", EDGE_IN_DIM, nd)
    lin("edge_net", 3 * nd, nd)
    lin("node_net", 2 * nd, nd)
    lin("gnn_dec", nd, d)
    for proj in ("q", "k", "v", "out"):
        lin(f"intent.{proj}", d, d)
    lin("map_enc1", MAP_POINT_DIM, nd)
    lin("map_enc2", 2 * nd, d)
    for proj in ("q", "k", "v"):
        lin(f"map_attn.{proj}", d, d)
    store.add("gru.wx", _uniform_fanin(rng, cfg.gru_input, (cfg.gru_input, 3 * h)))
    store.add("gru.wh", np.concatenate([_orthogonal(rng, h) for _ in range(3)], axis=1))
    store.add("gru.bx", np.zeros(3 * h))
    store.add("gru.bh", np.zeros(3 * h))
    lin("head.l1", h, cfg.head_hidden)
    lin("head.l2", cfg.head_hidden, cfg.head_hidden)
    store.add("head.mean.w", 0.01 * _uniform_fanin(rng, cfg.head_hidden, (cfg.head_hidden, 2)))
    store.add("head.mean.b", np.zeros(2))
    store.add("log_std", np.full(2, cfg.log_std_init))
    return store


def raw_params(store: ParamStore) -> dict:
    """Tape-free parameter dict for inference forwards."""
    return dict(store.items())


def _linear(P, name, x):
    return dc.linear(x, P[name + ".w"], P[name + ".b"])


def interaction_graph(P, cfg: PolicyConfig, states: Tensor, meta: Tensor) -> Tensor:
    """Physical-interaction embedding, (I, 5)+(I, 5) -> (I, embed_dim)."""
    I = states.shape[0]
    sfs = Tensor(np.broadcast_to(STATE_FEATURE_SCALE, (I, 5)).copy())
    mfs = Tensor(np.broadcast_to(META_FEATURE_SCALE, (I, 5)).copy())
    n = dc.relu(_linear(P, "node_enc", dc.concat([states * sfs, meta * mfs], axis=1)))
    if cfg.use_interaction:
        src = np.repeat(np.arange(I), I)
        dst = np.tile(np.arange(I), I)
        block = I
    else:
        src = dst = np.arange(I)
        block = 1
    pos = dc.narrow(states, 1, 0, 2)
    rel = dc.sub(dc.gather_rows(pos, dst), dc.gather_rows(pos, src)) * EDGE_SCALE
    e = dc.relu(_linear(P, "edge_enc", rel))
    for _ in range(cfg.mpn_iterations):
        ni = dc.gather_rows(n, src)
        nj = dc.gather_rows(n, dst)
        e = dc.relu(_linear(P, "edge_net", dc.concat([ni, nj, e], axis=1)))
        msg = dc.relu(_linear(P, "node_net", dc.concat([nj, e], axis=1)))
        agg = dc.block_mean_rows(msg, block)
        n = n * (1.0 - cfg.mix) + agg * cfg.mix
    return _linear(P, "gnn_dec", n)


def intent_attention(P, cfg: PolicyConfig, hidden: Tensor) -> Tensor:
    """Multi-head attention over recurrent states, (I, H) -> (I, embed_dim)."""
    v = _linear(P, "intent.v", hidden)
    if not cfg.use_interaction:
        # self-only attention: the singleton softmax weight is exactly 1
        return _linear(P, "intent.out", v)
    q = _linear(P, "intent.q", hidden)
    k = _linear(P, "intent.k", hidden)
    att = dc.multi_head_attention(q, k, v, cfg.intent_heads)
    return _linear(P, "intent.out", att)


def encode_map(P, cfg: PolicyConfig, roadgraph) -> tuple[Tensor | None, np.ndarray]:
    """Per-polyline embeddings, evaluated once per scene.

    Two encoder+max-pool stages; stage one concatenates each point's
    encoding with its polyline's pooled vector. All-masked polylines are
    dropped; returns (embeddings (Lv, embed_dim) or None, kept indices).
    """
    keep = np.where(roadgraph.mask.any(axis=1))[0]
    if keep.size == 0:
        return None, keep
    embs = []
    for li in keep:
        pts = Tensor(roadgraph.features[li][roadgraph.mask[li]] * MAP_FEATURE_SCALE)
        n = pts.shape[0]
        ones = np.ones(n, dtype=bool)
        g1 = dc.relu(_linear(P, "map_enc1", pts))
        pool1 = dc.reshape(dc.masked_max_rows(g1, ones), (1, cfg.node_dim))
        c1 = dc.concat([g1, dc.gather_rows(pool1, np.zeros(n, dtype=np.intp))], axis=1)
        g2 = dc.relu(_linear(P, "map_enc2", c1))
        embs.append(dc.reshape(dc.masked_max_rows(g2, ones), (1, cfg.embed_dim)))
    return dc.concat(embs, axis=0), keep


def map_attention(P, cfg: PolicyConfig, queries: Tensor, map_emb: Tensor) -> Tensor:
    """Single-head cross-attention onto the map, (I, D) x (Lv, D) -> (I, D)."""
    q = _linear(P, "map_attn.q", queries)
    k = _linear(P, "map_attn.k", map_emb)
    v = _linear(P, "map_attn.v", map_emb)
    return dc.multi_head_attention(q, k, v, 1)


def gru_cell(P, cfg: PolicyConfig, x: Tensor, h: Tensor) -> Tensor:
    """Fused gated recurrent update: r/z/n gates, reset applied to the
    hidden contribution of the candidate, h' = n + z (h - n)."""
    hd = cfg.hidden_dim
    wx, wh = P["gru.wx"], P["gru.wh"]
    bx, bh = P["gru.bx"], P["gru.bh"]
    xd, hdta = x.data, h.data
    gx = xd @ wx.data + bx.data
    gh = hdta @ wh.data + bh.data
    r = 1.0 / (1.0 + np.exp(-(gx[:, :hd] + gh[:, :hd])))
    z = 1.0 / (1.0 + np.exp(-(gx[:, hd:2 * hd] + gh[:, hd:2 * hd])))
    ghn = gh[:, 2 * hd:]
    n = np.tanh(gx[:, 2 * hd:] + r * ghn)
    out = n + z * (hdta - n)

    def bwd(g):
        dn = g * (1.0 - z)
        dz = g * (hdta - n)
        dpre_n = dn * (1.0 - n * n)
        dr = dpre_n * ghn
        dpre_r = dr * r * (1.0 - r)
        dpre_z = dz * z * (1.0 - z)
        dgx = np.concatenate([dpre_r, dpre_z, dpre_n], axis=1)
        dgh = np.concatenate([dpre_r, dpre_z, dpre_n * r], axis=1)
        dx = dgx @ wx.data.T
        dh = g * z + dgh @ wh.data.T
        return (dx, dh, xd.T @ dgx, hdta.T @ dgh,
                dgx.sum(axis=0), dgh.sum(axis=0))

    return dc.custom_op(out, (x, h, wx, wh, bx, bh), bwd, "gru_cell")


def action_head(P, h: Tensor) -> Tensor:
    a = dc.tanh(_linear(P, "head.l1", h))
    a = dc.tanh(_linear(P, "head.l2", a))
    return _linear(P, "head.mean", a)


def squash_actions(P, cfg: PolicyConfig, mean: Tensor, eps: np.ndarray | None):
    """Reparametrized squashed-Gaussian sample plus diagnostic log-probs.

    eps is the frozen standard-normal draw (I, 2); None means
    deterministic mode (the squashed mean). Log-probs include the tanh
    change-of-variables term and are plain numbers, not tape values.
    """
    I = mean.shape[0]
    scale = Tensor(np.broadcast_to(ACTION_SCALE, (I, 2)).copy())
    if eps is None:
        u = mean
    else:
        std = dc.exp(dc.clamp(P["log_std"], cfg.log_std_min, cfg.log_std_max))
        stdm = dc.gather_rows(dc.reshape(std, (1, 2)), np.zeros(I, dtype=np.intp))
        u = mean + stdm * Tensor(eps)
    action = dc.tanh(u) * scale

    log_std = np.clip(P["log_std"].data, cfg.log_std_min, cfg.log_std_max)
    if eps is None:
        z = np.zeros((I, 2))
    else:
        z = np.asarray(eps)
    gauss = -0.5 * z ** 2 - log_std - 0.5 * _LOG_2PI
    th = np.tanh(u.data)
    jac = np.log(ACTION_SCALE) + np.log1p(-np.clip(th * th, 0.0, 1.0 - 1e-15))
    log_prob = np.sum(gauss - jac, axis=1)
    return action, log_prob


def _fuse_and_update(P, cfg: PolicyConfig, states: Tensor, meta: Tensor,
                     hidden: Tensor, map_emb: Tensor | None) -> tuple[Tensor, Tensor]:
    inter = interaction_graph(P, cfg, states, meta)
    intent = intent_attention(P, cfg, hidden)
    if cfg.use_map and map_emb is not None:
        ctx = map_attention(P, cfg, inter, map_emb)
    else:
        ctx = Tensor(np.zeros((states.shape[0], cfg.embed_dim)))
    x = dc.concat([inter, intent, ctx], axis=1)
    return gru_cell(P, cfg, x, hidden), inter


def policy_step(P, cfg: PolicyConfig, states: Tensor, meta: Tensor, hidden: Tensor,
                map_emb: Tensor | None, eps: np.ndarray | None):
    """One decision step for all agents.

    Returns (actions (I, 2), log_probs (I,) ndarray, new hidden (I, H)).
    """
    h_new, _ = _fuse_and_update(P, cfg, states, meta, hidden, map_emb)
    mean = action_head(P, h_new)
    action, log_prob = squash_actions(P, cfg, mean, eps)
    return action, log_prob, h_new


def encode_history(P, cfg: PolicyConfig, scenario, map_emb: Tensor | None) -> Tensor:
    """Teacher-forced hidden states at step k=0 from the K history steps.

    Ground-truth states are fed at k = -K..-1; the action head is never
    evaluated (its output would be discarded). Agents missing a history
    step contribute zero-filled states.
    """
    I = scenario.num_agents
    meta = Tensor(scenario.metadata())
    h = Tensor(np.zeros((I, cfg.hidden_dim)))
    for t in range(scenario.history_len):
        raw = scenario.states_at(t)
        raw = np.where(scenario.valid_at(t)[:, None], raw, 0.0)
        h, _ = _fuse_and_update(P, cfg, Tensor(raw), meta, h, map_emb)
    return h
