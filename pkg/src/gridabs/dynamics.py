"""Fixed-step integration and the continuous machinery behind transitions.

The controller that realizes a discrete transition has three parts:

* ``k1`` cancels the coupling: the field evaluated along a reference curve
  (neighbors frozen at their cell reference points) minus the field at the
  actual state and actual neighbor signals;
* ``k2`` removes the start offset inside the cell, ``(ref - start) / dt``;
* ``k3`` steers: ``lam * w`` for a target parameter ``w`` in the input ball.

Under ``k1 + k2 + k3`` the step lands exactly on ``chi(dt) + lam dt w``
regardless of the disturbance, so every cell meeting the ball of radius
``r = lam dt v_max`` around ``chi(dt)`` is a certified successor.

All evaluators are batch-aware over a leading trial axis and deterministic
given a seed.  Integration is classical RK4 with a fixed step; no adaptive
stepping, so trajectories are bit-stable across runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .fields import FieldFn
from .geometry import Ball, Box, distance_to_box, project

TimeField = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Dense RK4 output: states and field values at every node.

    ``at`` interpolates with a cubic Hermite spline through the stored
    derivatives, keeping interpolation error at the integrator's own order.
    """

    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1]

    def at(self, t: float) -> np.ndarray:
        times = self.times
        if t <= times[0]:
            return self.states[0]
        if t >= times[-1]:
            return self.states[-1]
        k = int(np.searchsorted(times, t, side="right") - 1)
        h = times[k + 1] - times[k]
        s = (t - times[k]) / h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return (
            h00 * self.states[k]
            + h10 * h * self.derivs[k]
            + h01 * self.states[k + 1]
            + h11 * h * self.derivs[k + 1]
        )


def integrate(field: TimeField, x0, t_final: float, steps: int) -> Trajectory:
    """Classical RK4 with fixed step ``t_final / steps``.

    Deterministic given its inputs; fourth-order accurate for smooth fields.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = np.asarray(x0, dtype=float)
    times = np.linspace(0.0, t_final, steps + 1)
    states = np.empty((steps + 1,) + x.shape)
    derivs = np.empty_like(states)
    states[0] = x
    derivs[0] = field(0.0, x)
    h = t_final / steps
    for m in range(steps):
        t = times[m]
        k1 = derivs[m]
        k2 = field(t + h / 2.0, x + (h / 2.0) * k1)
        k3 = field(t + h / 2.0, x + (h / 2.0) * k2)
        k4 = field(t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[m + 1] = x
        derivs[m + 1] = field(times[m + 1], x)
    return Trajectory(times=times, states=states, derivs=derivs)


@dataclass(frozen=True, eq=False)
class ExtendedField:
    """Globally bounded, globally Lipschitz extension of a coupling field.

    Arguments are projected onto their (convex) domain hulls before
    evaluation and the result is norm-truncated to the certified bound.
    Inside the domains, where the field already respects the bound, both
    steps are the identity, so the extension agrees with the raw field
    there; projections are 1-Lipschitz, so the declared constants survive.
    """

    raw: FieldFn
    own_domain: Ball
    neighbor_domains: tuple[Ball, ...]
    bound: float

    def __call__(self, x_i, neighbors: Sequence[np.ndarray]) -> np.ndarray:
        xi = project(np.asarray(x_i, dtype=float), self.own_domain)
        njs = [
            project(np.asarray(x, dtype=float), dom)
            for x, dom in zip(neighbors, self.neighbor_domains)
        ]
        values = self.raw(xi, njs)
        norms = np.linalg.norm(values, axis=-1, keepdims=True)
        scale = np.where(norms > self.bound, self.bound / np.maximum(norms, 1e-300), 1.0)
        return values * scale


def reach_radius(lam: float, delta_t: float, v_max: float) -> float:
    """Distance coverable by the steering part of the input in one step."""
    return lam * delta_t * v_max


def reference_trajectory(
    g: ExtendedField,
    own_ref: np.ndarray,
    neighbor_refs: Sequence[np.ndarray],
    delta_t: float,
    steps: int,
) -> Trajectory:
    """Integrate the extension from the cell reference point with neighbors
    frozen at their reference points."""
    refs = [np.asarray(r, dtype=float) for r in neighbor_refs]

    def frozen(t, chi):
        return g(chi, refs)

    return integrate(frozen, own_ref, delta_t, steps)


def target_parameter(
    x_target: np.ndarray,
    chi_end: np.ndarray,
    lam: float,
    delta_t: float,
    v_max: float,
    tol: float = 1e-9,
) -> np.ndarray:
    """Steering parameter ``w = (target - chi(dt)) / (lam dt)``.

    Rejects targets outside the reach ball; the result then always lies in
    the input ball ``B(v_max)``.
    """
    offset = np.asarray(x_target, dtype=float) - np.asarray(chi_end, dtype=float)
    distance = float(np.linalg.norm(offset))
    radius = reach_radius(lam, delta_t, v_max)
    if distance > radius + tol:
        raise ValueError(
            f"target at distance {distance:.6g} exceeds reach radius {radius:.6g}"
        )
    return offset / (lam * delta_t)


@dataclass(frozen=True, eq=False)
class HybridController:
    """One agent's feedback law for a single transition step.

    Parameterized by the start state inside the source cell and the
    steering parameter ``w``; both may carry a leading trial axis.
    """

    agent_id: int
    g: ExtendedField
    reference: Trajectory
    own_ref: np.ndarray
    neighbor_refs: tuple[np.ndarray, ...]
    x_start: np.ndarray
    w: np.ndarray
    lam: float
    delta_t: float
    v_max: float

    @property
    def k2(self) -> np.ndarray:
        return (self.own_ref - self.x_start) / self.delta_t

    @property
    def k3(self) -> np.ndarray:
        return self.lam * self.w

    def k1(self, t: float, x_i, neighbors: Sequence[np.ndarray]) -> np.ndarray:
        chi = self.reference.at(t)
        return self.g(chi, self.neighbor_refs) - self.g(x_i, neighbors)

    def __call__(self, t: float, x_i, neighbors: Sequence[np.ndarray]) -> np.ndarray:
        if t < -1e-12 or t > self.delta_t + 1e-12:
            raise ValueError(f"controller evaluated outside [0, {self.delta_t}]: {t}")
        return self.k1(t, x_i, neighbors) + self.k2 + self.k3


def _uniform_ball(rng: np.random.Generator, radius: float, dim: int, size: int):
    direction = rng.standard_normal((size, dim))
    norms = np.linalg.norm(direction, axis=-1, keepdims=True)
    norms = np.where(norms == 0, 1.0, norms)
    shell = rng.random((size, 1)) ** (1.0 / dim)
    return direction / norms * shell * radius


def _project_box_sum(p: np.ndarray, box: Box, c: float) -> np.ndarray:
    """Exact projection onto ``{x : d(x, box) <= c}`` (box + ball, exact)."""
    d = distance_to_box(p, box)
    d = np.asarray(d)
    nearest = np.clip(p, box.lower, box.upper)
    frac = np.where(d > c, (d - c) / np.maximum(d, 1e-300), 0.0)
    return p + frac[..., None] * (nearest - p)


@dataclass(frozen=True, eq=False)
class DisturbanceSignal:
    """Continuous surrogate for a neighbor's motion over one step.

    An affine seed ``a + b t`` (anchor in the neighbor's cell, slope inside
    its speed ball) is projected at each query time onto the admissible set:
    the cell grown by the neighbor's worst-case travel, intersected with its
    full-horizon hull.  Both sets are convex, so projection alternation
    converges; the result is continuous in ``t``.
    """

    cell: Box
    hull: Ball
    rate: float
    anchor: np.ndarray
    slope: np.ndarray
    alternations: int = 32

    def __call__(self, t: float) -> np.ndarray:
        p = self.anchor + self.slope * t
        budget = self.rate * t
        for _ in range(self.alternations):
            p = _project_box_sum(p, self.cell, budget)
            p = project(p, self.hull)
        return p

    def admissible(self, t: float, eps: float) -> np.ndarray:
        p = self(t)
        in_grown_cell = distance_to_box(p, self.cell) <= self.rate * t + eps
        in_hull = np.linalg.norm(p - self.hull.center, axis=-1) <= self.hull.radius + eps
        return np.asarray(in_grown_cell & in_hull)


def sample_disturbance(
    cell: Box,
    hull: Ball,
    rate: float,
    rng: np.random.Generator,
    trials: int = 1,
) -> DisturbanceSignal:
    """Draw a batch of disturbance signals for one neighbor cell.

    The admissible set is nonempty at every ``t >= 0`` because the cell
    meets the hull; the alternation therefore lands inside it.
    """
    anchor = cell.sample(rng, size=trials)
    slope = _uniform_ball(rng, rate, cell.dim, trials)
    return DisturbanceSignal(cell=cell, hull=hull, rate=rate, anchor=anchor, slope=slope)
