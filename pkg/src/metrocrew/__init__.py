"""Crew planning and replanning for urban rail networks on a hierarchical time-space network."""

from .model import (CrewMember, DutyFrame, Instance, InstanceError, Line, Params, TrainTask, TransferStation,
                    desk_config, instance_from_dict, load_instance, save_instance)
from .roster import PathStep, Roster, load_roster, save_roster
from .validate import ReplanMode, ValidationReport, validate_roster
from .htsn import Network, NetworkView, build_network
from .pulse import Limits, solve_cspp
from .planner import PlanResult, plan
from .replanner import DisruptionScenario, ReplanResult, apply_disruption, replan, surge_scenario
from .heuristics import lgh, lgh_r, sph
from .bench import BenchmarkReport, run_benchmark

__version__ = "0.1.0"
