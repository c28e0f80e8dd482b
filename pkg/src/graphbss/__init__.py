"""Blind source separation for signals on graphs."""
from .crb import NonIdentifiable, crb_gamma, crb_omega, crb_omega_known_theta, fim
from .graphs import (AdjacencyMatrix, erdos_renyi, geometric_graph, graph_error,
                     sbm_two_block)
from .jointdiag import joint_diagonalize, whiten
from .metrics import aggregate, align, md_index
from .separators import (GraphSet, fastica_sq, grade, graph_fastica, graph_jade,
                         jade, ml_two_sources)
from .sources import GmaSpec, InnovationLaw, Scenario, mix

__version__ = "0.1.0"

__all__ = [
    "AdjacencyMatrix", "GmaSpec", "GraphSet", "InnovationLaw", "NonIdentifiable",
    "Scenario", "aggregate", "align", "crb_gamma", "crb_omega",
    "crb_omega_known_theta", "erdos_renyi", "fastica_sq", "fim",
    "geometric_graph", "grade", "graph_error", "graph_fastica", "graph_jade",
    "jade", "joint_diagonalize", "md_index", "mix", "ml_two_sources",
    "sbm_two_block", "whiten",
]
