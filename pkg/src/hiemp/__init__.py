"""Hierarchical empowerment skill learning on analytic point-mass fields.

Goal-conditioned and goal-space actor-critics are trained jointly as a
variational lower bound on the mutual information between skills and the
states they reach, nested over k levels so the horizon grows exponentially.
Includes brute-force and quadrature oracles plus a CLI experiment harness.
"""

__version__ = "0.1.0"

from .env import EnvModel, PointFieldConfig, make_channel_env_1d, make_env, project_goal, step
from .goalspace import BoxParams, box_from_raw, neg_log_prob, reparam, sample_eps, var_logpdf
from .gc_actor_critic import GCActorCritic, GCTransition
from .gs_actor_critic import GSActorCritic, GSTransition
from .hierarchy import (Agent, LevelSpec, RolloutMonitor, TrainConfig, build_agent,
                        execute_skill, execute_subgoal, refresh_start_states,
                        scale_action, train_phase1)
from .nnet import Net, OptState, backward, forward, init_net, init_opt, opt_step
from .oracle import (ReachableSet, exact_mi_quadrature, reachable_bruteforce,
                     variational_bound_estimate)
from .phase2 import EvalReport, ExtendedAgent, TaskSpec, attach_task_level, evaluate, train_phase2
from .config import ConfigError, RunConfig
