"""Exact-diagonalization workbench for transport and thermalization in
spin-1/2 chains, with boundary-driven Lindblad steady states and
mesoscopic-lead (superfermion) heat engines benchmarked against
Landauer-Buttiker theory.
"""

from . import spinops, spectra, kubo, ethstats, dynamics, lindblad, mesoleads, landauer

__all__ = [
    "spinops",
    "spectra",
    "kubo",
    "ethstats",
    "dynamics",
    "lindblad",
    "mesoleads",
    "landauer",
]

__version__ = "0.1.0"
