"""Plasma-band and transport toolkit for Rydberg-blockaded chains.

Modules
-------
hilbert     blockaded bases, dimensions, momentum sectors
models      PXP, long-range Rydberg, Schwinger spin form, Ising and XXZ chains
trace       infinite-temperature traces and operator inner products by counting
liouville   Liouvillian graphs, operator-size truncation, mean-field bands
spectral    exact diagonalization and structure factors
evolve      Krylov time evolution and correlators
wigner      many-body Wigner distributions with Fejer regularization
entangle    reduced states, mutual information, negativity
analyze     snapshot statistics, fronts, bands, Ursell functions
acceptance  the acceptance suite shared by tests and ``rydlink report``
"""

__version__ = "0.1.0"
