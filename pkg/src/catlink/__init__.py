"""Simulation toolkit for two-mode entangled coherent states: heralded
preparation, lossy transmission, purification and nondemolition readout,
with closed forms cross-checked against truncated Fock-space numerics."""

__version__ = "0.1.0"
