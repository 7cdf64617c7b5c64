"""Non-separable lattice coding for ergodic block-fading channels.

Subpackages cover nested lattice codebooks (``lattice``), fading laws and
typicality (``fading``), waterfilling and capacity (``waterfilling``), the
full-CSI transceiver (``csit``), the CSIR-only MIMO transceiver (``csir``),
shared gap-bound calculators (``gaps``) and the experiment CLI (``cli``).
"""

from . import csir, csit, fading, gaps, lattice, waterfilling

__all__ = ["csir", "csit", "fading", "gaps", "lattice", "waterfilling"]
__version__ = "0.1.0"
