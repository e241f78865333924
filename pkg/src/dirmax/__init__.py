"""Directional maximal operators on the lattice: direction families, comb incidences,
exponential sums and major-arc approximations, evaluated exactly at desk scale."""

__version__ = "0.1.0"
