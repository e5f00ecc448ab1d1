"""Sample-then-transmit scheduling for edge Gaussian-splatting data collection.

Pilot images are picked per client by feature-domain clustering, uploaded
within a minimized pilot time, and used to predict each client's rendering
loss. Clients are then selected and powered to maximize the predicted loss
collected before the deadline.
"""

from .scenario import (
    Allocation,
    ClientDataset,
    ScenarioConfig,
    ScenarioError,
    SyntheticSpec,
    default_scenario_path,
    load_loss_manifest,
    load_scenario,
    reference_losses_path,
)
from .channel import composite_gains, rate, sample_channel
from .powerctl import certify, min_power, min_power_iterative
from .pttm import PttmInfeasible, pttm_bisect
from .pamm import JcspcProblem, eta_targets, pamm_solve, round_and_repair, solve_jcspc
from .oracle import brute_force_p2

__version__ = "0.1.0"
