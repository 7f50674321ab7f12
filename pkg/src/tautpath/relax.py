"""Quasi-static relaxation of a truss network while its anchors are pulled apart.

Elements are linear springs in both tension and compression: the force an
element exerts on node i is ``stiffness * strain * unit(x_j - x_i)`` with
``strain = length / rest - 1``. There is no gravity and no contact.

Two integrators share the semi-implicit Euler step ``v += dt F/m; x += dt v``:

* ``fire`` (default): FIRE velocity mixing with an adaptive step, restarted
  whenever the power ``F.v`` turns negative.
* ``damped``: constant step with exponential velocity drag,
  ``v <- (v + dt F/m) exp(-damping dt)``.

Both stop once the largest free-node force is below ``residual_tol`` and the
kinetic energy is below ``kinetic_tol``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numba
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (AnchorsDisconnected, InputError, NonConvergence,
                     NumericalBlowup)
from .truss import TrussNetwork, segment_lengths

INTEGRATORS = ("fire", "damped")
CAUSES = ("taut", "separation_cap", "iteration_cap")

# FIRE constants (Bitzek et al. 2006 defaults)
FIRE_N_MIN = 5
FIRE_F_INC = 1.1
FIRE_F_DEC = 0.5
FIRE_ALPHA0 = 0.1
FIRE_F_ALPHA = 0.99


@dataclass(frozen=True)
class SolverParams:
    """Solver settings; ``None`` fields are derived by :meth:`resolve`."""

    stiffness: float = 1.0
    mass: float = 1.0
    damping: float | None = None
    dt: float | None = None
    dt_max: float | None = None
    residual_tol: float | None = None
    kinetic_tol: float | None = None
    max_iters: int = 200_000
    pull_increment: float = 0.02
    taut_strain: float = 0.01
    max_total_stretch: float = 4.0
    max_phases: int = 1000
    integrator: str = "fire"

    def validate(self):
        for name in ("stiffness", "mass", "max_iters", "pull_increment", "taut_strain",
                     "max_total_stretch", "max_phases"):
            val = getattr(self, name)
            if not (val > 0 and math.isfinite(val)):
                raise InputError(f"{name} must be positive, got {val}")
        for name in ("damping", "dt", "dt_max", "residual_tol", "kinetic_tol"):
            val = getattr(self, name)
            if val is not None and not (val > 0 and math.isfinite(val)):
                raise InputError(f"{name} must be positive, got {val}")
        if not self.taut_strain < 0.5:
            raise InputError("taut_strain must be below 0.5")
        if not self.pull_increment <= 0.2:
            raise InputError("pull_increment must be in (0, 0.2]")
        if self.integrator not in INTEGRATORS:
            raise InputError(f"integrator must be one of {INTEGRATORS}")

    @property
    def resolved(self) -> bool:
        return None not in (self.damping, self.dt, self.dt_max, self.residual_tol,
                            self.kinetic_tol)

    def resolve(self, network: TrussNetwork) -> "SolverParams":
        """Fill derived defaults from the network's stiffest element and node."""
        self.validate()
        k = self.stiffness / network.rest
        k_max = float(k.max())
        node_k = np.bincount(network.elements.ravel(), np.repeat(k, 2), network.n_nodes)
        out = replace(
            self,
            damping=2.0 * math.sqrt(k_max / self.mass) if self.damping is None else self.damping,
            dt=0.2 * math.sqrt(self.mass / k_max) if self.dt is None else self.dt,
            dt_max=(0.8 * math.sqrt(2.0 * self.mass / float(node_k.max()))
                    if self.dt_max is None else self.dt_max),
            residual_tol=1e-8 * self.stiffness if self.residual_tol is None else self.residual_tol,
            kinetic_tol=(1e-12 * self.stiffness * network.initial_separation
                         if self.kinetic_tol is None else self.kinetic_tol),
        )
        limit = 2.0 * math.sqrt(self.mass / k_max)
        if not out.dt < limit:
            raise InputError(f"dt {out.dt:.3g} violates the stability bound {limit:.3g}")
        return out

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "SolverParams":
        names = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - names
        if unknown:
            raise InputError(f"unknown solver parameters: {sorted(unknown)}")
        p = cls(**d)
        p.validate()
        return p


@dataclass
class SimState:
    positions: np.ndarray
    velocities: np.ndarray
    strains: np.ndarray
    separation: float
    phase: int = 0
    residual: float = 0.0
    kinetic_energy: float = 0.0
    iterations: int = 0

    def copy(self) -> "SimState":
        return replace(self, positions=self.positions.copy(),
                       velocities=self.velocities.copy(), strains=self.strains.copy())


@dataclass(frozen=True)
class PhaseRecord:
    separation: float
    residual: float
    max_strain: float
    kinetic_energy: float
    iterations: int


@dataclass
class SolveResult:
    state: SimState
    peak_strains: np.ndarray
    cause: str
    history: list
    params: SolverParams
    anchors: tuple

    @property
    def max_strain(self) -> float:
        return float(self.state.strains.max())

    @property
    def max_peak(self) -> float:
        return float(self.peak_strains.max())

    def to_json(self) -> str:
        doc = {
            "cause": self.cause,
            "anchors": list(self.anchors),
            "final_strains": self.state.strains.tolist(),
            "peak_strains": self.peak_strains.tolist(),
            "positions": self.state.positions.tolist(),
            "separation": self.state.separation,
            "history": [asdict(h) for h in self.history],
            "params": self.params.to_dict(),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "SolveResult":
        doc = json.loads(text)
        pos = np.array(doc["positions"], dtype=np.float64).reshape(-1, 3)
        hist = [PhaseRecord(**h) for h in doc["history"]]
        last = hist[-1] if hist else PhaseRecord(doc["separation"], 0.0, 0.0, 0.0, 0)
        state = SimState(pos, np.zeros_like(pos), np.array(doc["final_strains"], dtype=np.float64),
                         float(doc["separation"]), len(hist), last.residual,
                         last.kinetic_energy, last.iterations)
        return cls(state, np.array(doc["peak_strains"], dtype=np.float64), doc["cause"], hist,
                   SolverParams.from_dict(doc["params"]), tuple(doc["anchors"]))


@numba.njit(cache=True)
def _forces(x, ei, ej, rest, kappa, F):
    F[:] = 0.0
    for e in range(ei.shape[0]):
        i = ei[e]
        j = ej[e]
        dx = x[j, 0] - x[i, 0]
        dy = x[j, 1] - x[i, 1]
        dz = x[j, 2] - x[i, 2]
        length = np.sqrt(dx * dx + dy * dy + dz * dz)
        f = kappa * (length / rest[e] - 1.0) / length
        F[i, 0] += f * dx
        F[i, 1] += f * dy
        F[i, 2] += f * dz
        F[j, 0] -= f * dx
        F[j, 1] -= f * dy
        F[j, 2] -= f * dz


@numba.njit(cache=True)
def _measure(F, v, free, mass):
    """Largest free-node force, kinetic energy, power F.v, |v|, |F|; NaN flags blowup."""
    res = 0.0
    ke = 0.0
    power = 0.0
    vn = 0.0
    fn = 0.0
    for k in range(F.shape[0]):
        if free[k]:
            f2 = F[k, 0] * F[k, 0] + F[k, 1] * F[k, 1] + F[k, 2] * F[k, 2]
            v2 = v[k, 0] * v[k, 0] + v[k, 1] * v[k, 1] + v[k, 2] * v[k, 2]
            if not np.isfinite(f2):
                return np.nan, ke, power, vn, fn
            r = np.sqrt(f2)
            if r > res:
                res = r
            ke += 0.5 * mass * v2
            power += F[k, 0] * v[k, 0] + F[k, 1] * v[k, 1] + F[k, 2] * v[k, 2]
            vn += v2
            fn += f2
    return res, ke, power, np.sqrt(vn), np.sqrt(fn)


@numba.njit(cache=True)
def _relax_damped(x, v, free, ei, ej, rest, kappa, mass, damping, dt, tol, ke_tol, max_iters):
    F = np.zeros_like(x)
    decay = np.exp(-damping * dt)
    res = 0.0
    ke = 0.0
    for it in range(max_iters + 1):
        _forces(x, ei, ej, rest, kappa, F)
        res, ke, _, _, _ = _measure(F, v, free, mass)
        if np.isnan(res):
            return it, res, ke, 2
        if res < tol and ke < ke_tol:
            return it, res, ke, 0
        if it == max_iters:
            break
        for k in range(x.shape[0]):
            if free[k]:
                for d in range(3):
                    v[k, d] = (v[k, d] + dt * F[k, d] / mass) * decay
                    x[k, d] += dt * v[k, d]
    return max_iters, res, ke, 1


@numba.njit(cache=True)
def _relax_fire(x, v, free, ei, ej, rest, kappa, mass, dt0, dt_max, tol, ke_tol, max_iters):
    F = np.zeros_like(x)
    dt = dt0
    alpha = FIRE_ALPHA0
    n_pos = 0
    res = 0.0
    ke = 0.0
    for it in range(max_iters + 1):
        _forces(x, ei, ej, rest, kappa, F)
        res, ke, power, vn, fn = _measure(F, v, free, mass)
        if np.isnan(res):
            return it, res, ke, 2
        if res < tol and ke < ke_tol:
            return it, res, ke, 0
        if it == max_iters:
            break
        if power > 0.0:
            n_pos += 1
            if n_pos > FIRE_N_MIN:
                dt = min(dt * FIRE_F_INC, dt_max)
                alpha *= FIRE_F_ALPHA
        else:
            n_pos = 0
            dt *= FIRE_F_DEC
            alpha = FIRE_ALPHA0
            # step back half a step and stop
            for k in range(x.shape[0]):
                if free[k]:
                    for d in range(3):
                        x[k, d] -= 0.5 * dt * v[k, d]
                        v[k, d] = 0.0
            vn = 0.0
        for k in range(x.shape[0]):
            if free[k]:
                for d in range(3):
                    v[k, d] += dt * F[k, d] / mass
                if fn > 0.0:
                    for d in range(3):
                        v[k, d] = (1.0 - alpha) * v[k, d] + alpha * vn * F[k, d] / fn
                for d in range(3):
                    x[k, d] += dt * v[k, d]
    return max_iters, res, ke, 1


def element_strains(positions: np.ndarray, network: TrussNetwork) -> np.ndarray:
    e = network.elements
    return segment_lengths(positions[e[:, 1]], positions[e[:, 0]]) / network.rest - 1.0


def init_state(network: TrussNetwork) -> SimState:
    x = np.array(network.nodes, dtype=np.float64)
    return SimState(x, np.zeros_like(x), element_strains(x, network),
                    network.initial_separation)


def _free_mask(network):
    free = np.ones(network.n_nodes, dtype=np.bool_)
    free[list(network.anchors)] = False
    return free


def relax(state: SimState, network: TrussNetwork, params: SolverParams) -> SimState:
    """Integrate with the anchors held until the network is in equilibrium."""
    if not params.resolved:
        params = params.resolve(network)
    out = state.copy()
    x, v = out.positions, out.velocities
    ei = np.ascontiguousarray(network.elements[:, 0])
    ej = np.ascontiguousarray(network.elements[:, 1])
    rest = np.ascontiguousarray(network.rest)
    free = _free_mask(network)
    if params.integrator == "fire":
        it, res, ke, status = _relax_fire(
            x, v, free, ei, ej, rest, params.stiffness, params.mass, params.dt,
            params.dt_max, params.residual_tol, params.kinetic_tol, params.max_iters)
    else:
        it, res, ke, status = _relax_damped(
            x, v, free, ei, ej, rest, params.stiffness, params.mass, params.damping,
            params.dt, params.residual_tol, params.kinetic_tol, params.max_iters)
    if status == 2 or not np.all(np.isfinite(x)):
        raise NumericalBlowup(f"non-finite positions after {it} iterations")
    if status == 1 and not res < 10.0 * params.residual_tol:
        raise NonConvergence(
            f"residual {res:.3e} after {it} iterations (tolerance {params.residual_tol:.3e}); "
            "reduce dt or adjust damping")
    out.strains = element_strains(x, network)
    out.residual = float(res)
    out.kinetic_energy = float(ke)
    out.iterations = int(it)
    return out


def pull_phase(state: SimState, network: TrussNetwork, params: SolverParams) -> SimState:
    """Move anchor_b radially away from anchor_a, then relax."""
    if not params.resolved:
        params = params.resolve(network)
    a, b = network.anchors
    moved = state.copy()
    x = moved.positions
    x[b] = x[b] + params.pull_increment * (x[b] - x[a])
    moved.separation = float(np.linalg.norm(x[b] - x[a]))
    moved.phase = state.phase + 1
    return relax(moved, network, params)


def anchors_connected(network: TrussNetwork) -> bool:
    e = network.elements
    n = network.n_nodes
    g = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    _, labels = connected_components(g, directed=False)
    a, b = network.anchors
    return bool(labels[a] == labels[b])


def solve_taut(network: TrussNetwork, params: SolverParams | None = None) -> SolveResult:
    """Pull the anchors apart phase by phase until some element is taut."""
    params = (params or SolverParams())
    params = params if params.resolved else params.resolve(network)
    if not anchors_connected(network):
        raise AnchorsDisconnected(
            f"no element path joins anchors {network.anchors[0]} and {network.anchors[1]}")
    state = init_state(network)
    s0 = state.separation
    peak = state.strains.copy()
    history = []
    cause = "iteration_cap"
    while state.phase < params.max_phases:
        state = pull_phase(state, network, params)
        np.maximum(peak, state.strains, out=peak)
        smax = float(state.strains.max())
        history.append(PhaseRecord(state.separation, state.residual, smax,
                                   state.kinetic_energy, state.iterations))
        if smax >= params.taut_strain:
            cause = "taut"
            break
        if state.separation > params.max_total_stretch * s0:
            cause = "separation_cap"
            break
    return SolveResult(state, peak, cause, history, params, tuple(network.anchors))
