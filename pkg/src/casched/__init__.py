"""Application-aware RB scheduling with carrier aggregation."""

from .channel import Carrier, ChannelModel, GainMode, coverage_radius, pathloss_db, rb_power, rb_rate, rb_snr
from .grouping import GroupAssignment, UserEquipment, build_groups, in_range_carriers
from .oracle import StageProblem, kkt_residual, objective_L, solve_stage_optimum
from .scenario import Scenario, bundled, load_scenario
from .scheduler import (Policy, ScheduleState, SimResult, assign_frame, pf_metric, run_carrier_stage,
                        run_simulation, update_shares, upf_metric)
from .utility import Utility, log_utility, make_logarithmic, make_sigmoidal, utility_slope, utility_value

__version__ = "0.1.0"
