# cdforge/__init__.py

"""Counterdiabatic driving with nested-commutator gauge potentials on 1D chains."""

__version__ = "0.1.0"
