"""Max-min rate optimization for IRS-aided OFDMA downlinks.

Submodules
----------
channel_model
    CIR/CFR algebra of direct and IRS-cascaded multipath links.
scenario
    Configuration, geometry, path loss and seeded channel generation.
resource_allocation
    RB assignment and power allocation by Lagrange duality.
passive_beamforming
    SCA design of the reflection coefficients for a fixed allocation.
alternating_optimizer
    Joint design and the benchmark schemes.
experiment, cli
    Monte Carlo driver, result files and command line interface.
"""

from .alternating_optimizer import SCHEMES, SolveResult, run_scheme, solve_p1
from .resource_allocation import Allocation, solve_p11
from .scenario import ChannelRealization, ScenarioConfig, generate_realization

__all__ = [
    "SCHEMES", "SolveResult", "run_scheme", "solve_p1", "Allocation",
    "solve_p11", "ChannelRealization", "ScenarioConfig", "generate_realization",
]
