"""TSCH slot-frame scheduling under statistical, zero and instantaneous CSI."""
from .channel import (ChannelModel, ChannelRealization, ChannelStateSpace,
                      LinkChannelDistribution, RadioParams, capacity,
                      generate_distributions, hop_frequency, mean_capacity,
                      power_required, sample_cycle)
from .engine import (ConfigError, MetricsSeries, SimulationConfig, SimulationResult,
                     build_scenario, compute_optimal_mean, desk_scale, run_cycle,
                     run_simulation, update_metrics)
from .matching import (Assignment, BipartiteSchedulingGraph, assignment_weight,
                       build_bipartite, hungarian_max_weight, max_weight_assignment)
from .schedulers import (CMABScheduler, ErroneousCSIScheduler, LearnerState,
                         PerfectCSIScheduler, PolicyConfig, SchedulingProblem,
                         StaticCSIScheduler, StatisticalScheduler, llr_index,
                         make_scheduler)
from .topology import (CatalogOverflow, CollisionGraph, IndependentSetCatalog,
                       NetworkTopology, Node, TopologyError, build_collision_graph,
                       enumerate_independent_sets, generate_topology, load_topology,
                       save_topology)

__version__ = "0.1.0"
