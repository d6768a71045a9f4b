from .reward import (RewardConfig, RewardError, angle_difference,
                     evaluate_reward, evaluate_reward_batch)
from .cem import CemConfig, CemState, DegenerateObjective, cem_optimize
from .mpc import (PlanResult, PlannerError, PlanningContext, ibr_mpc, ilf_mpc,
                  nominal_rollout, plan_to_scenario)

__all__ = [
    "RewardConfig", "RewardError", "angle_difference",
    "evaluate_reward", "evaluate_reward_batch",
    "CemConfig", "CemState", "DegenerateObjective", "cem_optimize",
    "PlanResult", "PlannerError", "PlanningContext",
    "ilf_mpc", "ibr_mpc", "nominal_rollout", "plan_to_scenario",
]
