from .config import PolicyConfig, PolicyConfigError
from .network import (ACTION_SCALE, NODE_IN_DIM, action_head, encode_history,
                      encode_map, init_params, intent_attention,
                      interaction_graph, gru_cell, map_attention, policy_step,
                      raw_params, squash_actions)
from .batched import BatchedPolicy
from .io import (CheckpointError, check_store, load_checkpoint, param_shapes,
                 save_checkpoint)

__all__ = [
    "PolicyConfig", "PolicyConfigError",
    "ACTION_SCALE", "NODE_IN_DIM",
    "init_params", "raw_params", "policy_step", "encode_history", "encode_map",
    "interaction_graph", "intent_attention", "map_attention", "gru_cell",
    "action_head", "squash_actions",
    "BatchedPolicy",
    "CheckpointError", "check_store", "load_checkpoint", "param_shapes",
    "save_checkpoint",
]
