"""Local bargaining dynamics on exchange networks, with exact LP oracles."""
from .dynamics import DynamicsConfig, apply_T, compute_earnings, compute_offers, eps_residual, run
from .instance import Edge, NetworkInstance, load, make_instance, save
from .outcomes import TradeOutcome, balance_residual, check_stability, induced_matching

__version__ = "0.1.0"

__all__ = [
    "DynamicsConfig", "Edge", "NetworkInstance", "TradeOutcome", "apply_T", "balance_residual",
    "check_stability", "compute_earnings", "compute_offers", "eps_residual", "induced_matching",
    "load", "make_instance", "run", "save",
]
