"""Grid-aligned cell decompositions of the reach-tube hulls.

Each agent gets a uniform hypercube lattice anchored so that its initial
state is a cell center.  Cell width is ``d_max(i) / sqrt(n)``, which makes
the cell diameter (the diagonal) exactly ``d_max(i)`` and the center a
valid reference point: no cell point is farther than ``d_max(i) / 2``.

Region marks are grid-snapped: the working copy of a ball hull is the union
of all lattice cells meeting it.  Snapping only enlarges an
overapproximation, so guarantees persist, and it makes compliance exact:
a cell meets a snapped region iff it belongs to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DecompositionTooFineError, OutOfCoverError
from .geometry import Ball, Box, distance_to_box
from .reach import ReachTube
from .scenario import Scenario

Cell = tuple[int, ...]
GlobalConfiguration = tuple[Cell, ...]


@dataclass(frozen=True)
class CellConfiguration:
    """An agent's own cell plus its neighbors' cells in neighbor order."""

    agent_id: int
    own: Cell
    neighbors: tuple[Cell, ...]

    def key(self) -> tuple:
        return (self.own, self.neighbors)


@dataclass(frozen=True, eq=False)
class CellDecomposition:
    """Lattice decomposition of one agent's reachable overapproximation.

    ``cells`` covers the full-horizon hull; ``initial_cells`` is the subset
    covering the hull shrunk by one time step (only these may start a
    transition); ``extended_cells`` covers the inflated shrunk-by-tau hull
    and is a superset of ``cells``.
    """

    agent_id: int
    origin: np.ndarray
    width: float
    d_max: float
    cells: frozenset[Cell]
    initial_cells: frozenset[Cell]
    extended_cells: frozenset[Cell]

    @property
    def dim(self) -> int:
        return self.origin.shape[0]

    def box(self, cell: Cell) -> Box:
        idx = np.asarray(cell, dtype=float)
        lo = self.origin + idx * self.width
        return Box(lo, lo + self.width)

    def center(self, cell: Cell) -> np.ndarray:
        return self.origin + (np.asarray(cell, dtype=float) + 0.5) * self.width

    def locate(self, x, eps: float = 1e-9, extended: bool = False) -> Cell:
        """Canonical cell of a point: floor of the lattice coordinate.

        Coordinates within ``eps`` of a cell face snap onto the face first,
        so the assignment at (near-)boundaries is deterministic and matches
        the exact-multiple convention ``floor(k) = k``.
        """
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a point of dimension {self.dim}")
        q = (x - self.origin) / self.width
        nearest_face = np.rint(q)
        snapped = np.where(np.abs(q - nearest_face) <= eps / self.width, nearest_face, np.floor(q))
        cell = tuple(int(v) for v in snapped)
        universe = self.extended_cells if extended else self.cells
        if cell not in universe:
            raise OutOfCoverError(
                f"point {x.tolist()} falls outside the decomposition cover of "
                f"agent {self.agent_id} (cell {cell})"
            )
        return cell

    def cells_touching(self, ball: Ball, tol: float = 0.0) -> frozenset[Cell]:
        """All lattice cells whose closed box meets the closed ball."""
        return frozenset(self._enumerate(ball, tol))

    def _enumerate(self, ball: Ball, tol: float):
        pad = ball.radius + tol
        lo = np.floor((ball.center - pad - self.origin) / self.width).astype(int)
        hi = np.floor((ball.center + pad - self.origin) / self.width).astype(int)
        ranges = [range(a, b + 1) for a, b in zip(lo, hi)]
        total = math.prod(len(r) for r in ranges)
        if total > 50_000_000:
            raise DecompositionTooFineError(
                f"cell enumeration for agent {self.agent_id} would visit {total} cells"
            )
        grids = np.meshgrid(*[np.asarray(r) for r in ranges], indexing="ij")
        idx = np.stack([g.reshape(-1) for g in grids], axis=-1)
        lows = self.origin + idx * self.width
        nearest = np.clip(ball.center, lows, lows + self.width)
        dist = np.linalg.norm(nearest - ball.center, axis=-1)
        keep = idx[dist <= ball.radius + tol]
        return (tuple(int(v) for v in row) for row in keep)


def build_decomposition(
    scenario: Scenario,
    tube: ReachTube,
    d_max: dict[int, float],
    delta_t: float,
) -> dict[int, CellDecomposition]:
    """Build the per-agent decompositions for given diameters and time step.

    The index set covers the full-horizon hull; cells meeting the hull over
    ``[0, T - delta_t]`` are marked as transition starts.  The extended
    index set is attached later (``extend_decomposition``) once the
    inflation window ``tau`` is known.
    """
    eps = scenario.numerics.eps_geo
    horizon = scenario.horizon
    out = {}
    total = 0
    for spec in scenario.agents:
        if d_max[spec.id] <= 0:
            raise ValueError(f"d_max must be positive for agent {spec.id}")
        width = d_max[spec.id] / math.sqrt(spec.n)
        origin = spec.x0 - 0.5 * width
        decomp = CellDecomposition(
            agent_id=spec.id,
            origin=origin,
            width=width,
            d_max=d_max[spec.id],
            cells=frozenset(),
            initial_cells=frozenset(),
            extended_cells=frozenset(),
        )
        hull = tube[spec.id].hull(0.0, horizon)
        expected = math.prod(
            int(2 * (hull.radius + eps) / width) + 2 for _ in range(spec.n)
        )
        total += expected
        if total > scenario.numerics.cell_cap:
            raise DecompositionTooFineError(
                f"discretization too fine: ~{total} cells exceed the cap "
                f"{scenario.numerics.cell_cap}"
            )
        cells = decomp.cells_touching(hull, tol=eps)
        initial = decomp.cells_touching(tube[spec.id].hull(0.0, horizon - delta_t), tol=eps)
        out[spec.id] = CellDecomposition(
            agent_id=spec.id,
            origin=origin,
            width=width,
            d_max=d_max[spec.id],
            cells=cells,
            initial_cells=initial & cells,
            extended_cells=cells,
        )
    return out


def extend_decomposition(
    scenario: Scenario,
    decomps: dict[int, CellDecomposition],
    tube: ReachTube,
    tau: float,
    inflation: dict[int, float],
) -> dict[int, CellDecomposition]:
    """Attach the extended index sets covering the inflated shrunk hulls.

    The extension reuses the same lattice, so shared cells keep identical
    indices and compliance with the snapped full-horizon region is
    automatic.
    """
    eps = scenario.numerics.eps_geo
    horizon = scenario.horizon
    out = {}
    for spec in scenario.agents:
        decomp = decomps[spec.id]
        inflated = tube[spec.id].inflated_hull(0.0, horizon - tau, inflation[spec.id])
        extended = decomp.cells_touching(inflated, tol=eps) | decomp.cells
        out[spec.id] = CellDecomposition(
            agent_id=decomp.agent_id,
            origin=decomp.origin,
            width=decomp.width,
            d_max=decomp.d_max,
            cells=decomp.cells,
            initial_cells=decomp.initial_cells,
            extended_cells=extended,
        )
    return out


def check_diameter_restrictions(
    scenario: Scenario, d_max: dict[int, float]
) -> list[str]:
    """Re-verify ``d_max(j) <= mu(j, i) * d_max(i)`` on every edge."""
    eps = scenario.numerics.eps_geo
    problems = []
    for (j, i), ratio in scenario.graph.mu.items():
        if d_max[j] > ratio * d_max[i] + eps:
            problems.append(
                f"d_max({j}) = {d_max[j]} exceeds mu({j},{i}) * d_max({i}) = "
                f"{ratio * d_max[i]}"
            )
    return problems


def project_configuration(
    scenario: Scenario, config: GlobalConfiguration, agent_id: int
) -> CellConfiguration:
    """Restrict a global cell configuration to one agent and its neighbors."""
    ids = scenario.graph.agent_ids
    position = {a: k for k, a in enumerate(ids)}
    own = config[position[agent_id]]
    neighbors = tuple(
        config[position[j]] for j in scenario.graph.neighbors[agent_id]
    )
    return CellConfiguration(agent_id=agent_id, own=own, neighbors=neighbors)
