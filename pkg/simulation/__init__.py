"""
Simulation scenarios and replication drivers.
"""

from .simgen import (
    Scenario,
    ScenarioName,
    GroundTruth,
    erdos_renyi_adjacency,
    remove_edges,
    build_E,
    build_R,
    mvn_sample,
    make_truth,
    make_scenario,
    support_difference,
)

__all__ = [
    'Scenario',
    'ScenarioName',
    'GroundTruth',
    'erdos_renyi_adjacency',
    'remove_edges',
    'build_E',
    'build_R',
    'mvn_sample',
    'make_truth',
    'make_scenario',
    'support_difference',
]
