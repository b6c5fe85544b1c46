"""Sliding-window factor graph and Levenberg-Marquardt solver.

State space is a mixed product of Euclidean blocks (root positions, link
lengths) and SO(3) blocks (link rotations). Variable values live in a plain
dict keyed by VariableKey: 3-vectors for root positions, 3x3 rotation
matrices for link rotations, floats for link lengths. Steps are applied
through a retraction: rotations update as R @ Exp(delta), everything else
additively.

The normal system is assembled densely; problem sizes stay small (a window
of ten keyframes is ~220 tangent dimensions).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import SolverError
from .so3 import project_to_so3, right_jacobian_inv, so3_exp, so3_log

KIND_ROOT = "root"
KIND_ROT = "rot"
KIND_LEN = "len"

GLOBAL_FRAME = -1

_TANGENT_DIM = {KIND_ROOT: 3, KIND_ROT: 3, KIND_LEN: 1}


@dataclass(frozen=True, order=True)
class VariableKey:
    """Identifies one optimization variable.

    Link-length variables are window-global (frame == GLOBAL_FRAME); root
    positions and link rotations belong to a keyframe.
    """

    kind: str
    frame: int
    link: int = -1

    def __post_init__(self):
        if self.kind not in _TANGENT_DIM:
            raise ValueError(f"unknown variable kind {self.kind!r}")
        # keys are hashed in tight assembly loops; precompute
        object.__setattr__(self, "_hash", hash((self.kind, self.frame, self.link)))
        object.__setattr__(self, "dim", _TANGENT_DIM[self.kind])

    def __hash__(self):
        return self._hash


_key_cache: dict = {}


def _interned(kind: str, frame: int, link: int) -> VariableKey:
    ident = (kind, frame, link)
    key = _key_cache.get(ident)
    if key is None:
        key = VariableKey(kind, frame, link)
        _key_cache[ident] = key
    return key


def root_key(frame: int) -> VariableKey:
    return _interned(KIND_ROOT, frame, -1)


def rot_key(frame: int, link: int) -> VariableKey:
    return _interned(KIND_ROT, frame, link)


def len_key(link: int) -> VariableKey:
    return _interned(KIND_LEN, GLOBAL_FRAME, link)


class Factor:
    """One residual term with its connected variables and weight.

    Subclasses implement residual() and jacobians(); jacobian blocks use the
    right-perturbation convention for rotation variables.
    """

    def __init__(self, keys, dim: int, information):
        self.keys = tuple(keys)
        self.dim = int(dim)
        raw = np.asarray(information, dtype=float)
        if raw.ndim == 0:
            # isotropic weight: whitening is a scalar multiply
            self.sqrt_scale = float(np.sqrt(float(raw)))
            information = np.eye(self.dim) * float(raw)
        else:
            self.sqrt_scale = None
            information = raw
        if information.shape != (self.dim, self.dim):
            raise ValueError("information matrix shape does not match residual dim")
        self.information = information
        # whitening matrix: cost contribution is || sqrt_info @ r ||^2
        self.sqrt_info = np.linalg.cholesky(information).T

    @classmethod
    def isotropic_information(cls, sigma: float) -> float:
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        return 1.0 / (sigma * sigma)

    def residual(self, values: dict, memo: dict | None = None) -> np.ndarray:
        """Residual at the estimate; `memo` shares per-pass intermediates."""
        raise NotImplementedError

    def jacobians(self, values: dict, memo: dict | None = None) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(keys={list(self.keys)})"


class VectorPrior(Factor):
    """Unary prior on a Euclidean variable, r = x - target."""

    def __init__(self, key: VariableKey, target, sigma: float):
        target = np.atleast_1d(np.asarray(target, dtype=float))
        super().__init__([key], target.size, self.isotropic_information(sigma))
        self.target = target

    def residual(self, values, memo=None):
        return np.atleast_1d(np.asarray(values[self.keys[0]], dtype=float)) - self.target

    def jacobians(self, values, memo=None):
        return {self.keys[0]: np.eye(self.dim)}


class RotationPrior(Factor):
    """Unary prior on a rotation variable, r = Log(target^T R)."""

    def __init__(self, key: VariableKey, target, sigma: float):
        super().__init__([key], 3, self.isotropic_information(sigma))
        self.target = np.asarray(target, dtype=float)

    def residual(self, values, memo=None):
        return so3_log(self.target.T @ values[self.keys[0]], validate=False)

    def jacobians(self, values, memo=None):
        return {self.keys[0]: right_jacobian_inv(self.residual(values))}


def anchor_prior(key: VariableKey, value, sigma_position: float, sigma_rotation: float) -> Factor:
    if key.kind == KIND_ROT:
        return RotationPrior(key, value, sigma_rotation)
    return VectorPrior(key, value, sigma_position)


class WindowGraph:
    """Variables and factors over a bounded span of keyframes."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("window capacity must be >= 1")
        self.capacity = capacity
        self._variables: dict = {}  # insertion-ordered key -> None
        self.factors: list = []

    @property
    def variables(self) -> tuple:
        return tuple(self._variables)

    def add_variable(self, key: VariableKey) -> None:
        if key in self._variables:
            raise ValueError(f"duplicate variable {key}")
        self._variables[key] = None

    def has_variable(self, key: VariableKey) -> bool:
        return key in self._variables

    def add_factor(self, factor: Factor) -> None:
        for key in factor.keys:
            if key not in self._variables:
                raise ValueError(f"factor {factor!r} references unknown variable {key}")
        self.factors.append(factor)

    def frames(self) -> list:
        return sorted({k.frame for k in self._variables if k.frame != GLOBAL_FRAME})

    def frame_variables(self, frame: int) -> list:
        return [k for k in self._variables if k.frame == frame]

    def remove_frame(self, frame: int) -> list:
        """Drop a keyframe's variables and every factor touching them."""
        removed = self.frame_variables(frame)
        removed_set = set(removed)
        self.factors = [f for f in self.factors if not removed_set.intersection(f.keys)]
        for key in removed:
            del self._variables[key]
        return removed

    def tangent_offsets(self):
        offsets = {}
        total = 0
        for key in self._variables:
            offsets[key] = total
            total += key.dim
        return offsets, total

    def is_connected(self) -> bool:
        if not self._variables:
            return True
        index = {k: i for i, k in enumerate(self._variables)}
        parent = list(range(len(index)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for f in self.factors:
            ids = [index[k] for k in f.keys]
            for a, b in zip(ids, ids[1:]):
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[ra] = rb
        roots = {find(i) for i in index.values()}
        return len(roots) == 1


def graph_cost(graph: WindowGraph, values: dict) -> float:
    """Direct weighted squared-residual sum, sum_k ||r_k||^2_Sigma."""
    cost = 0.0
    memo: dict = {}
    for f in graph.factors:
        r = f.residual(values, memo)
        if f.sqrt_scale is not None:
            cost += f.sqrt_scale * f.sqrt_scale * float(r @ r)
        else:
            wr = f.sqrt_info @ r
            cost += float(wr @ wr)
    return cost


def linearize(graph: WindowGraph, values: dict):
    """Assemble the damped-ready normal system.

    Returns (H, b, cost) with H = sum J^T W J, b = -sum J^T W r and
    cost = sum r^T W r at the given estimate.
    """
    offsets, total = graph.tangent_offsets()
    h = np.zeros((total, total))
    b = np.zeros(total)
    cost = 0.0
    memo: dict = {}
    for f in graph.factors:
        r = f.residual(values, memo)
        if not np.isfinite(r).all():
            raise SolverError(f"non-finite residual from factor {f!r}")
        jac = f.jacobians(values, memo)
        blocks = [jac[key] for key in f.keys]
        local = np.concatenate(blocks, axis=1) if len(blocks) > 1 else blocks[0]
        if not np.isfinite(local).all():
            raise SolverError(f"non-finite Jacobian from factor {f!r}")
        if f.sqrt_scale is not None:
            wj = local * f.sqrt_scale
            wr = r * f.sqrt_scale
        else:
            wj = f.sqrt_info @ local
            wr = f.sqrt_info @ r
        cost += float(wr @ wr)
        idx = np.concatenate(
            [np.arange(offsets[key], offsets[key] + key.dim) for key in f.keys]
        )
        h[np.ix_(idx, idx)] += wj.T @ wj
        b[idx] -= wj.T @ wr
    return h, b, cost


def retract(values: dict, step: np.ndarray, offsets: dict) -> dict:
    """Apply a tangent step, re-orthonormalizing rotations afterwards."""
    out = dict(values)
    for key, off in offsets.items():
        delta = step[off : off + key.dim]
        if key.kind == KIND_ROT:
            out[key] = project_to_so3(values[key] @ so3_exp(delta))
        elif key.kind == KIND_ROOT:
            out[key] = values[key] + delta
        else:
            out[key] = float(values[key]) + float(delta[0])
    return out


@dataclass
class SolverConfig:
    max_iterations: int = 50
    init_damping: float = 1e-6
    damping_up: float = 10.0
    damping_down: float = 0.1
    max_damping: float = 1e12
    cost_tolerance: float = 1e-10
    step_tolerance: float = 1e-10

    def __post_init__(self):
        for name in ("max_iterations", "init_damping", "damping_up", "damping_down",
                     "max_damping", "cost_tolerance", "step_tolerance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"solver config field {name} must be positive")


@dataclass
class IterationRecord:
    iteration: int
    cost: float
    damping: float
    step_norm: float
    accepted: bool
    predicted_decrease: float


@dataclass
class SolveResult:
    values: dict
    cost: float
    iterations: list
    converged: bool
    message: str


def iterations_to_csv(records) -> str:
    lines = ["iteration,cost,damping,step_norm,accepted,predicted_decrease"]
    for r in records:
        lines.append(
            f"{r.iteration},{r.cost!r},{r.damping!r},{r.step_norm!r},"
            f"{int(r.accepted)},{r.predicted_decrease!r}"
        )
    return "\n".join(lines) + "\n"


def solve_lm(graph: WindowGraph, initial: dict, config: SolverConfig | None = None) -> SolveResult:
    """Levenberg-Marquardt with on-manifold retraction.

    Accepted steps never increase the cost; rejected trials raise the
    damping. Terminates on relative cost decrease, step norm, or the
    iteration cap.
    """
    config = config or SolverConfig()
    for key in graph.variables:
        if key not in initial:
            raise SolverError(f"initial estimate missing variable {key}")
    values = dict(initial)
    offsets, total = graph.tangent_offsets()
    if total == 0:
        return SolveResult(values, graph_cost(graph, values), [], True, "empty graph")
    h, b, cost = linearize(graph, values)
    damping = config.init_damping
    records: list = []
    message = "iteration cap reached"
    converged = False
    identity = np.eye(total)
    for it in range(config.max_iterations):
        step = None
        while True:
            try:
                factor = scipy.linalg.cho_factor(h + damping * identity, lower=True)
                step = scipy.linalg.cho_solve(factor, b)
                break
            except np.linalg.LinAlgError as exc:
                damping *= config.damping_up
                if damping > config.max_damping:
                    raise SolverError(
                        f"singular damped system (damping {damping:.3e})"
                    ) from exc
        step_norm = float(np.linalg.norm(step))
        # linearized model: cost(x + d) ~= cost - 2 b^T d + d^T H d
        predicted = float(2.0 * b @ step - step @ h @ step)
        trial = retract(values, step, offsets)
        trial_cost = graph_cost(graph, trial)
        accepted = trial_cost <= cost and np.isfinite(trial_cost)
        records.append(IterationRecord(it, trial_cost if accepted else cost, damping,
                                       step_norm, accepted, predicted))
        if accepted:
            decrease = cost - trial_cost
            values = trial
            cost = trial_cost
            damping = max(damping * config.damping_down, 1e-15)
            if step_norm < config.step_tolerance:
                converged, message = True, "step tolerance"
                break
            if decrease < config.cost_tolerance * max(cost, 1.0):
                converged, message = True, "cost tolerance"
                break
            h, b, cost = linearize(graph, values)
        else:
            damping *= config.damping_up
            if damping > config.max_damping:
                converged, message = True, "stalled at damping cap"
                break
    return SolveResult(values, cost, records, converged, message)


@dataclass
class KeyframeUpdate:
    """New keyframe bundle handed to slide_window."""

    frame: int
    variables: dict
    factors: list = field(default_factory=list)


@dataclass
class AnchorConfig:
    sigma_position: float = 1e-3
    sigma_rotation: float = 1e-3


def slide_window(graph: WindowGraph, values: dict, update: KeyframeUpdate,
                 anchors: AnchorConfig | None = None) -> dict:
    """Append a keyframe; evict the oldest ones past capacity.

    Evicted keyframes' variables leave the graph (their last estimates are
    returned, keyed by frame) and unary anchor priors fixed to the current
    estimate are placed on the variables of the frame that becomes oldest.
    Window-global length variables persist.
    """
    anchors = anchors or AnchorConfig()
    for key, value in update.variables.items():
        graph.add_variable(key)
        values[key] = value
    for f in update.factors:
        graph.add_factor(f)
    evicted: dict = {}
    while len(graph.frames()) > graph.capacity:
        frames = graph.frames()
        oldest = frames[0]
        removed = graph.remove_frame(oldest)
        evicted[oldest] = {k: values.pop(k) for k in removed}
        new_oldest = frames[1]
        for key in graph.frame_variables(new_oldest):
            graph.add_factor(
                anchor_prior(key, values[key], anchors.sigma_position, anchors.sigma_rotation)
            )
    return evicted
