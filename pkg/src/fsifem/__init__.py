"""Finite-element solver for a coupled Stokes/linear-elasticity resolvent
problem on the square-annulus benchmark geometry, with convergence,
inf-sup, and semigroup-contraction studies."""

__version__ = "0.1.0"
