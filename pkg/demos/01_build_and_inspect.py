"""
Build sensor networks and read their rigidity reports
=====================================================

A network is a set of agent positions plus the proximity graph of agent
pairs that can measure each other.  The rigidity report says whether the
distance (or bearing) measurements pin the configuration up to the usual
ambient motions, and how well conditioned that pinning is.
"""
import numpy as np

from sparseloc import (
    build_network,
    rigidity_matrix,
    rigidity_report,
    save_network,
    uav13_network,
)

# the 13-agent preset: a 3D formation in a 10-unit box whose proximity
# graph always has 36 edges and maximal rank
cfg, graph = uav13_network(seed=0)
print(f"preset network: {cfg.num_agents} agents in {cfg.dim}D, "
      f"{graph.num_edges} edges")

report = rigidity_report(rigidity_matrix(cfg, graph, "distance"))
print(f"distance rank {report.rank} of {report.max_rank} "
      f"(nullity {report.nullity}, rigid: {report.is_rigid})")
print(f"spectral rigidity index {report.lambda_tilde:.6f}")

# the same positions support bearing measurements; the trivial motions
# change (translations plus scaling instead of rigid motions)
bearing = rigidity_report(rigidity_matrix(cfg, graph, "bearing"))
print(f"bearing rank {bearing.rank} of {bearing.max_rank} "
      f"(nullity {bearing.nullity})")

# generated sources reject draws until the requested kind is rigid
cfg2, graph2 = build_network(
    {"agents": 8, "dim": 2, "radius": 9.0, "box": 10.0, "seed": 2},
    kind="distance",
)
r2 = rigidity_report(rigidity_matrix(cfg2, graph2, "distance"))
print(f"\ngenerated 2D network: {cfg2.num_agents} agents, "
      f"{graph2.num_edges} edges, rank {r2.rank} of {r2.max_rank}")

# networks round-trip through a small JSON schema
save_network("demo_network.json", cfg2, graph2)
print("wrote demo_network.json")

# edge lengths give a feel for the proximity radius
lengths = [
    float(np.linalg.norm(cfg2.positions[i] - cfg2.positions[j]))
    for i, j in graph2.edges
]
print(f"edge lengths {min(lengths):.2f}..{max(lengths):.2f}")
