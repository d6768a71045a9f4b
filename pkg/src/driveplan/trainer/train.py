"""Imitation-learning loop: perturb, roll out, backpropagate, update.

Per batch: each scenario is (with probability p) recentered on a random
agent and rigidly jittered, optionally followed by the feasibility-
restoring ego perturbation; the closed-loop loss tape is built and
backpropagated, gradients averaged over the batch, clipped by global
norm, and applied with an adaptive-moment (Adam) update. Validation loss
and displacement metrics on a held-out split are logged every epoch and
parameters are checkpointed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import diffcore as dc
from ..diffcore import NumericError, ParamStore
from ..metrics import evaluate_corpus
from ..policy import PolicyConfig, save_checkpoint
from ..scene.transforms import recenter_on_agent, transform_scene
from .loss import TrainConfig, rollout_loss
from .nlls import NllsConfig, nlls_perturb


class TrainingDiverged(Exception):
    """Loss went non-finite; the store holds the last good parameters."""


class Adam:
    def __init__(self, store: ParamStore, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.store = store
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in store.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in store.items()}

    def step(self):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for name, p in self.store.items():
            g = p.grad
            if g is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


@dataclass
class TrainResult:
    store: ParamStore
    history: list = field(default_factory=list)
    nlls_applied: int = 0
    nlls_skipped: int = 0
    train_ids: list = field(default_factory=list)
    val_ids: list = field(default_factory=list)


METRICS_COLUMNS = ("epoch", "train_loss", "val_loss", "ade_ego", "fde_ego",
                   "ade_other", "fde_other")


def metrics_log_lines(history) -> list[str]:
    lines = [",".join(METRICS_COLUMNS)]
    for row in history:
        lines.append(",".join([
            str(row["epoch"]),
            f"{row['train_loss']:.6f}", f"{row['val_loss']:.6f}",
            f"{row['ade_ego']:.6f}", f"{row['fde_ego']:.6f}",
            f"{row['ade_other']:.6f}", f"{row['fde_other']:.6f}",
        ]))
    return lines


def split_corpus(corpus, val_frac: float, seed: int):
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(corpus))
    n_val = int(math.ceil(val_frac * len(corpus))) if val_frac > 0 else 0
    val_idx = sorted(order[:n_val].tolist())
    train_idx = sorted(order[n_val:].tolist())
    return [corpus[i] for i in train_idx], [corpus[i] for i in val_idx]


def _perturb(scenario, rng, tcfg: TrainConfig, nlls_cfg, result: TrainResult):
    agent = scenario.tracks[int(rng.integers(0, scenario.num_agents))]
    sc = scenario
    if agent.valid[scenario.t_of(0)]:
        sc = recenter_on_agent(sc, agent.agent_id)
    dx, dy = rng.uniform(-tcfg.se2_xy, tcfg.se2_xy, size=2)
    dphi = rng.uniform(-tcfg.se2_phi, tcfg.se2_phi)
    sc = transform_scene(sc, float(dx), float(dy), float(dphi))
    if tcfg.nlls:
        sc, applied = nlls_perturb(sc, rng, nlls_cfg)
        if applied:
            result.nlls_applied += 1
        else:
            result.nlls_skipped += 1
    return sc


def train(corpus, store: ParamStore, policy_cfg: PolicyConfig,
          train_cfg: TrainConfig, out_dir=None, nlls_cfg: NllsConfig | None = None,
          start_epoch: int = 0, log=None) -> TrainResult:
    """Optimize the store in place over the corpus; returns the log.

    With out_dir set, writes ckpt-NNN checkpoints, a final `model`
    checkpoint, and metrics.csv. On divergence the last finite-loss
    parameters are restored before TrainingDiverged is raised.
    """
    train_cfg.validate()
    if not corpus:
        raise ValueError("empty corpus")
    rng = np.random.default_rng(train_cfg.seed)
    # perturbations draw from their own stream (one child generator per
    # event), so toggling augmentations never shifts the sampling noise
    perturb_rng = np.random.default_rng((train_cfg.seed, 0x9E3779B9))
    train_set, val_set = split_corpus(corpus, train_cfg.val_frac, train_cfg.seed)
    if not train_set:
        raise ValueError("training split is empty")
    opt = Adam(store, lr=train_cfg.lr)
    result = TrainResult(store=store,
                         train_ids=[sc.scenario_id for sc in train_set],
                         val_ids=[sc.scenario_id for sc in val_set])
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    last_good = store.state_copy()

    for epoch in range(start_epoch, start_epoch + train_cfg.epochs):
        if train_cfg.lr_schedule == "cosine":
            progress = (epoch - start_epoch) / max(train_cfg.epochs - 1, 1)
            opt.lr = train_cfg.lr * (0.025 + 0.975 * 0.5 * (1.0 + math.cos(math.pi * progress)))
        order = rng.permutation(len(train_set))
        epoch_loss = 0.0
        seen = 0
        for ofs in range(0, len(order), train_cfg.batch_size):
            batch = [train_set[i] for i in order[ofs:ofs + train_cfg.batch_size]]
            store.zero_grad()
            batch_loss = 0.0
            for sc in batch:
                gate = perturb_rng.random()
                child = np.random.default_rng(perturb_rng.integers(2 ** 63))
                if gate < train_cfg.perturb_prob:
                    sc = _perturb(sc, child, train_cfg, nlls_cfg, result)
                try:
                    loss, tape, _ = rollout_loss(sc, store, policy_cfg, train_cfg, rng)
                    dc.backward(tape, loss)
                except NumericError as e:
                    store.load_state(last_good)
                    raise TrainingDiverged(
                        f"non-finite value at epoch {epoch} on {sc.scenario_id}: {e}") from e
                value = loss.item()
                if not np.isfinite(value):
                    store.load_state(last_good)
                    raise TrainingDiverged(
                        f"loss diverged at epoch {epoch} on {sc.scenario_id}")
                batch_loss += value
            store.scale_grads(1.0 / len(batch))
            store.clip_grad_norm(train_cfg.grad_clip)
            opt.step()
            epoch_loss += batch_loss
            seen += len(batch)
        last_good = store.state_copy()

        val_loss = 0.0
        if val_set:
            for sc in val_set:
                loss, _, _ = rollout_loss(sc, store, policy_cfg, train_cfg, rng=None)
                val_loss += loss.item()
            val_loss /= len(val_set)
            report = evaluate_corpus(val_set, store, policy_cfg)
            ade_e, fde_e = report.ade_e, report.fde_e
            ade_o, fde_o = report.ade_noe, report.fde_noe
        else:
            ade_e = fde_e = ade_o = fde_o = float("nan")
        row = {"epoch": epoch, "train_loss": epoch_loss / max(seen, 1),
               "val_loss": val_loss, "ade_ego": ade_e, "fde_ego": fde_e,
               "ade_other": ade_o, "fde_other": fde_o}
        result.history.append(row)
        if log is not None:
            log(row)
        if out_dir is not None:
            save_checkpoint(out_dir / f"ckpt-{epoch:03d}", store, policy_cfg,
                            meta={"epoch": epoch})
            (out_dir / "metrics.csv").write_text(
                "\n".join(metrics_log_lines(result.history)) + "\n", encoding="utf-8")

    if out_dir is not None:
        final_epoch = start_epoch + train_cfg.epochs - 1
        save_checkpoint(out_dir / "model", store, policy_cfg,
                        meta={"epoch": final_epoch,
                              "nlls_applied": result.nlls_applied,
                              "nlls_skipped": result.nlls_skipped})
    return result
