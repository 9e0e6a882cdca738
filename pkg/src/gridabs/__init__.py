"""Finite-state grid abstractions of coupled multi-agent systems.

The package builds, per agent, a lattice decomposition of an
overapproximation of its reachable set over a finite horizon, certifies a
space-time discretization against the feasibility inequalities, extracts
individual and product transition systems, and validates transitions and
paths by closed-loop simulation.  A FastAPI service exposes the pipeline;
the bundled CLI is a thin client of that service.
"""

__version__ = "0.1.0"
