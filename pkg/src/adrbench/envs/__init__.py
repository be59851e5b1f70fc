from adrbench.envs.core import (
    ENV_NAMES,
    DivergedDynamicsError,
    DynamicsVector,
    EnvState,
    EnvironmentSpec,
    UnmodeledSetup,
    clamp_action,
    dynamics,
    get_state,
    make_unmodeled,
    observe,
    reset,
    rollout,
    set_state,
    step,
    step_batch,
)

__all__ = [
    "ENV_NAMES",
    "DivergedDynamicsError",
    "DynamicsVector",
    "EnvState",
    "EnvironmentSpec",
    "UnmodeledSetup",
    "clamp_action",
    "dynamics",
    "get_state",
    "make_unmodeled",
    "observe",
    "reset",
    "rollout",
    "set_state",
    "step",
    "step_batch",
]
