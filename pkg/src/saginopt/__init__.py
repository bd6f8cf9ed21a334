"""Weighted sum-rate optimization for a RIS-UAV assisted satellite/terrestrial
downlink with rate-splitting transmitters."""

from .bcd import (BcdOptions, InitializationInfeasible, IterationTrace,
                  check_feasibility, optimize)
from .channel import (ChannelSet, HalfspaceViolation, InvalidGeometry,
                      build_channels, effective_channels, receive_gain,
                      sample_rain, steering_vector)
from .convex_kernel import ConvexProblem, ConvexSolution, SubproblemInfeasible, solve
from .geometry import (DirectionAngles, EulerAngles, Frame, ZeroVector,
                       direction_angles, forward_halfspace, rotation_from_euler,
                       to_local)
from .harness import ExperimentConfig, ExperimentRecord, run
from .rate_allocation import (InfeasibleAllocation, RateBounds, compute_bounds,
                              greedy_allocate)
from .scenario import (ArrayGeometry, ConfigError, DesignVariables, Scenario,
                       default_scenario, scenario_from_config, scenario_to_config,
                       validate)
from .signal_model import (SinrSet, WmmseState, compute_sinrs, total_rates,
                           update_receivers, update_weights, weighted_sum_rate,
                           wmmse_objective)

__version__ = "0.1.0"
