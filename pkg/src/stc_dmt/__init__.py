"""Space-time lattice codes and their diversity-multiplexing trade-off.

Construction of algebraic code lattices (cyclic division algebra orders,
the Golden code, diagonal replications, number-field multi-block codes),
exact shell enumeration and determinant probes, Rayleigh MIMO simulation
with exhaustive ML decoding, and the closed-form DMT curves the empirical
slopes are checked against.
"""

__version__ = "0.1.0"

from . import algebra, channel, decoder, dmt, lattice  # noqa: F401
