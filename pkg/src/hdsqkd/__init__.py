"""Simulator and key-rate analyzer for high-dimensional semi-quantum key distribution."""

from .attacks import (
    CollectiveAttack,
    DepolarizingModel,
    OneWayAttack,
    identity_attack,
    measure_resend_attack,
    random_attack,
    reduce_attack,
    weyl_dilation_attack,
)
from .keyrate_analysis import Scenario, delta_total, keyrate, noise_tolerance, sweep
from .protocol_sim import ProtocolConfig, run_ent, run_ow, run_sqkd, verify_reduction

__version__ = "0.1.0"
