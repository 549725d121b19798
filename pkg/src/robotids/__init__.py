"""Intrusion detection for multi-robot cooperation protocols.

Local monitors reconstruct which protocol state a neighbor may be in from
what they can see, keep set-valued estimates of where hidden agents must
be, and reconcile those estimates with a distributed consensus.
"""

from .geometry import Region, area, difference, intersect, is_empty, is_subset, region_equal, union
from .protocol import AgentConfig, DetectorCondition, ProtocolSpec, WorldState, flow, integrate, world_step
from .scenarios import HighwayParams, WarehouseParams, build_highway, build_warehouse
from .monitor import (OccupancyEstimate, OccupancyHypothesis, Verdict, classify, event_estimate,
                      hidden_presence, new_monitor, predict, update)
from .consensus import CommGraph, graph_diam, graph_dist, merge, run_consensus
from .harness import ScenarioConfig, load_scenario, run

__version__ = "0.1.0"
