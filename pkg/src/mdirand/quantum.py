"""States, measurements and observed statistics for prepare-and-measure setups.

Bloch convention: component 1 multiplies sigma_x, so |+> sits along e1,
|0>/|1> along +-e3 and |+i> along e2. The first state of an ensemble is the
generation state unless a scenario says otherwise.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .config import DEFAULT_TOLS, Tolerances
from . import linalg

__all__ = [
    "PAULI",
    "DensityMatrix",
    "Povm",
    "BlochPovmSpec",
    "StateEnsemble",
    "ObservedStatistics",
    "bloch_to_density",
    "povm_from_bloch",
    "sigma_z_povm",
    "sigma_x_povm",
    "extremal4",
    "extremal3",
    "check_unbiased",
    "check_extremal",
    "extremal_diagnosis",
    "tomographic_set",
    "angle_states",
    "tensor_ensemble",
    "tensor_povm",
    "double_ensemble",
    "honest_statistics",
    "mix_white_noise",
    "double_statistics",
]

_I2 = np.eye(2, dtype=complex)
_SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_SY = np.array([[0.0, -1.0j], [1.0j, 0.0]])
_SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PAULI = (_SX, _SY, _SZ)


@dataclass(frozen=True)
class DensityMatrix:
    """A validated density matrix (hermitian, unit trace, PSD)."""

    mat: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.mat, dtype=complex)
        object.__setattr__(self, "mat", m)
        linalg.require_hermitian(m, DEFAULT_TOLS.hermitian)
        if abs(np.trace(m).real - 1.0) > DEFAULT_TOLS.trace:
            raise ValueError("density matrix trace differs from 1")
        if linalg.min_eigenvalue(m) < -DEFAULT_TOLS.psd:
            raise ValueError("density matrix has a negative eigenvalue")

    @property
    def dim(self) -> int:
        return self.mat.shape[0]


@dataclass(frozen=True)
class Povm:
    """A validated POVM: hermitian PSD elements summing to the identity."""

    elements: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        elems = tuple(np.asarray(e, dtype=complex) for e in self.elements)
        object.__setattr__(self, "elements", elems)
        if not elems:
            raise ValueError("POVM needs at least one element")
        d = elems[0].shape[0]
        total = np.zeros((d, d), dtype=complex)
        for e in elems:
            if e.shape != (d, d):
                raise ValueError("POVM elements must share one dimension")
            linalg.require_hermitian(e, DEFAULT_TOLS.hermitian)
            if linalg.min_eigenvalue(e) < -DEFAULT_TOLS.psd:
                raise ValueError("POVM element has a negative eigenvalue")
            total += e
        if np.max(np.abs(total - np.eye(d))) > DEFAULT_TOLS.completeness:
            raise ValueError("POVM elements do not sum to the identity")

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    @property
    def n_outcomes(self) -> int:
        return len(self.elements)


@dataclass(frozen=True)
class BlochPovmSpec:
    """Qubit POVM in Bloch form: element k is weights[k] * (I + m_k . sigma)."""

    weights: np.ndarray
    directions: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        m = np.asarray(self.directions, dtype=float)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "directions", m)
        if w.ndim != 1 or m.shape != (w.size, 3):
            raise ValueError("need n weights and n Bloch directions")
        if np.any(w <= 0.0):
            raise ValueError("Bloch weights must be positive")
        if abs(float(np.sum(w)) - 1.0) > DEFAULT_TOLS.bloch:
            raise ValueError("Bloch weights must sum to 1")
        if np.max(np.abs(w @ m)) > DEFAULT_TOLS.bloch:
            raise ValueError("weighted Bloch directions must sum to 0")
        if np.any(np.linalg.norm(m, axis=1) > 1.0 + DEFAULT_TOLS.bloch):
            raise ValueError("Bloch directions must have norm <= 1")

    @property
    def n_outcomes(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class StateEnsemble:
    """States with input probabilities; index 0 is the generation state."""

    states: tuple[DensityMatrix, ...]
    probs: np.ndarray

    def __post_init__(self) -> None:
        states = tuple(self.states)
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "probs", p)
        if not states:
            raise ValueError("ensemble needs at least one state")
        d = states[0].dim
        if any(s.dim != d for s in states):
            raise ValueError("ensemble states must share one dimension")
        if p.shape != (len(states),):
            raise ValueError("need one probability per state")
        if np.any(p < -DEFAULT_TOLS.completeness):
            raise ValueError("input probabilities must be non-negative")
        if abs(float(np.sum(p)) - 1.0) > DEFAULT_TOLS.completeness:
            raise ValueError("input probabilities must sum to 1")

    @property
    def dim(self) -> int:
        return self.states[0].dim

    @property
    def n_states(self) -> int:
        return len(self.states)

    def with_probs(self, probs: np.ndarray) -> "StateEnsemble":
        return replace(self, probs=np.asarray(probs, dtype=float))


@dataclass(frozen=True)
class ObservedStatistics:
    """Conditional outcome table P(x|a) plus the input distribution p_a.

    Entries below zero by more than the completeness tolerance are hard
    errors; tiny negative floats are clipped to 0 and each row is
    renormalized, provided its sum was already 1 within tolerance.
    """

    conditionals: np.ndarray
    input_probs: np.ndarray

    def __post_init__(self) -> None:
        c = np.array(self.conditionals, dtype=float)
        p = np.asarray(self.input_probs, dtype=float)
        if c.ndim != 2:
            raise ValueError("conditionals must be a 2-d table")
        if p.shape != (c.shape[0],):
            raise ValueError("need one input probability per state")
        if np.any(c < -DEFAULT_TOLS.completeness):
            raise ValueError("conditional probability is negative")
        row_sums = np.sum(c, axis=1)
        if np.max(np.abs(row_sums - 1.0)) > DEFAULT_TOLS.completeness:
            raise ValueError("conditional rows must sum to 1")
        c = np.clip(c, 0.0, None)
        c /= np.sum(c, axis=1, keepdims=True)
        object.__setattr__(self, "conditionals", c)
        object.__setattr__(self, "input_probs", p)
        if np.any(p < -DEFAULT_TOLS.completeness):
            raise ValueError("input probabilities must be non-negative")
        if abs(float(np.sum(p)) - 1.0) > DEFAULT_TOLS.completeness:
            raise ValueError("input probabilities must sum to 1")

    @property
    def n_states(self) -> int:
        return self.conditionals.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.conditionals.shape[1]


def bloch_to_density(r: np.ndarray) -> DensityMatrix:
    """Qubit state (I + r . sigma) / 2 for a Bloch vector with |r| <= 1."""
    r = np.asarray(r, dtype=float)
    if r.shape != (3,):
        raise ValueError("Bloch vector must have three components")
    if float(np.linalg.norm(r)) > 1.0 + DEFAULT_TOLS.bloch:
        raise ValueError("Bloch vector norm exceeds 1")
    m = 0.5 * (_I2 + r[0] * _SX + r[1] * _SY + r[2] * _SZ)
    return DensityMatrix(m)


def povm_from_bloch(spec: BlochPovmSpec) -> Povm:
    """Materialize a Bloch-form POVM as matrices."""
    elems = []
    for w, m in zip(spec.weights, spec.directions):
        elems.append(w * (_I2 + m[0] * _SX + m[1] * _SY + m[2] * _SZ))
    return Povm(tuple(elems))


def sigma_z_povm() -> Povm:
    """Projective measurement onto |0>, |1>."""
    return povm_from_bloch(
        BlochPovmSpec(np.array([0.5, 0.5]), np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]))
    )


def sigma_x_povm() -> Povm:
    """Projective measurement onto |+>, |->."""
    return povm_from_bloch(
        BlochPovmSpec(np.array([0.5, 0.5]), np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]))
    )


def extremal4() -> BlochPovmSpec:
    """Extremal four-outcome qubit POVM, unbiased on the |+> input.

    First direction along e1 with weight 1/8; the other three weights are
    7/24 with directions forming a tetrahedral arrangement.
    """
    s3 = math.sqrt(3.0)
    weights = np.array([1.0 / 8.0, 7.0 / 24.0, 7.0 / 24.0, 7.0 / 24.0])
    directions = np.array(
        [
            [1.0, 0.0, 0.0],
            [-1.0 / 7.0, 4.0 * s3 / 7.0, 0.0],
            [-1.0 / 7.0, -2.0 * s3 / 7.0, 6.0 / 7.0],
            [-1.0 / 7.0, -2.0 * s3 / 7.0, -6.0 / 7.0],
        ]
    )
    return BlochPovmSpec(weights, directions)


def extremal3() -> BlochPovmSpec:
    """Extremal trine POVM in the e2-e3 plane, unbiased on |+>."""
    s3 = math.sqrt(3.0)
    weights = np.full(3, 1.0 / 3.0)
    directions = np.array(
        [
            [0.0, 1.0, 0.0],
            [0.0, -0.5, s3 / 2.0],
            [0.0, -0.5, -s3 / 2.0],
        ]
    )
    return BlochPovmSpec(weights, directions)


def check_unbiased(spec: BlochPovmSpec, n_outcomes: int) -> bool:
    """All outcomes equally likely on the |+> input: w_k (1 + m_k1) = 1/n."""
    probs = spec.weights * (1.0 + spec.directions[:, 0])
    return bool(np.max(np.abs(probs - 1.0 / n_outcomes)) <= 1e-10)


def extremal_diagnosis(spec: BlochPovmSpec) -> str | None:
    """None if the Bloch POVM is extremal, else a short failure reason."""
    n = spec.n_outcomes
    if n > 4:
        return "more than four outcomes cannot be extremal for a qubit"
    norms = np.linalg.norm(spec.directions, axis=1)
    if np.max(np.abs(norms - 1.0)) > 1e-10:
        return "non-unit Bloch direction (element is not rank one)"
    # element k spans (w_k, w_k m_k) in the (I, sigma) basis
    coords = np.hstack([spec.weights[:, None], spec.weights[:, None] * spec.directions])
    if np.linalg.matrix_rank(coords, tol=1e-10) < n:
        if n == 4:
            return "directions are coplanar"
        return "elements are linearly dependent"
    return None


def check_extremal(spec: BlochPovmSpec) -> bool:
    """Rank-one elements with linearly independent Bloch coordinates."""
    return extremal_diagnosis(spec) is None


def tomographic_set() -> StateEnsemble:
    """The four-state tomographically complete set |+>, |0>, |1>, |+i>."""
    vecs = [
        np.array([1.0, 0.0, 0.0]),
        np.array([0.0, 0.0, 1.0]),
        np.array([0.0, 0.0, -1.0]),
        np.array([0.0, 1.0, 0.0]),
    ]
    states = tuple(bloch_to_density(v) for v in vecs)
    return StateEnsemble(states, np.full(4, 0.25))


def angle_states(alpha: float) -> StateEnsemble:
    """Pair of real qubit states with overlap 1 - alpha, sent uniformly.

    The two state vectors are sqrt(1-alpha/2)|0> +- sqrt(alpha/2)|1>; at
    alpha=0 they coincide, at alpha=1 they are orthogonal.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    c = math.sqrt(1.0 - alpha / 2.0)
    s = math.sqrt(alpha / 2.0)
    phi = np.array([c, s], dtype=complex)
    psi = np.array([c, -s], dtype=complex)
    states = (DensityMatrix(np.outer(phi, phi.conj())), DensityMatrix(np.outer(psi, psi.conj())))
    return StateEnsemble(states, np.array([0.5, 0.5]))


_MAX_TENSOR_DIM = 32


def tensor_ensemble(base: StateEnsemble, copies: int) -> StateEnsemble:
    """All tensor products of `copies` base states, row-major index order.

    The joint index runs over (a_1, ..., a_m) with the first factor slowest;
    probabilities multiply. Refuses products with dimension above 32.
    """
    if copies < 1:
        raise ValueError("copies must be >= 1")
    if base.dim**copies > _MAX_TENSOR_DIM:
        raise ValueError("tensor product dimension exceeds 32")
    states = []
    probs = []
    for combo in itertools.product(range(base.n_states), repeat=copies):
        m = base.states[combo[0]].mat
        p = float(base.probs[combo[0]])
        for a in combo[1:]:
            m = linalg.kron(m, base.states[a].mat)
            p *= float(base.probs[a])
        states.append(DensityMatrix(m))
        probs.append(p)
    return StateEnsemble(tuple(states), np.array(probs))


def tensor_povm(base: Povm, copies: int) -> Povm:
    """Product measurement with outcome tuples in row-major order."""
    if copies < 1:
        raise ValueError("copies must be >= 1")
    if base.dim**copies > _MAX_TENSOR_DIM:
        raise ValueError("tensor product dimension exceeds 32")
    elems = []
    for combo in itertools.product(range(base.n_outcomes), repeat=copies):
        e = base.elements[combo[0]]
        for x in combo[1:]:
            e = linalg.kron(e, base.elements[x])
        elems.append(e)
    return Povm(tuple(elems))


def double_ensemble(base: StateEnsemble) -> StateEnsemble:
    """Two independent copies of the ensemble (first copy slowest index)."""
    return tensor_ensemble(base, 2)


def honest_statistics(ensemble: StateEnsemble, povm: Povm) -> ObservedStatistics:
    """Born-rule table P(x|a) = tr(rho_a M_x) for an honest device."""
    if ensemble.dim != povm.dim:
        raise ValueError("ensemble and POVM dimensions differ")
    table = np.empty((ensemble.n_states, povm.n_outcomes))
    for a, state in enumerate(ensemble.states):
        for x, elem in enumerate(povm.elements):
            val = np.trace(state.mat @ elem)
            if abs(val.imag) > 1e-12:
                raise ValueError("Born probability has an imaginary part")
            table[a, x] = val.real
    return ObservedStatistics(table, ensemble.probs)


def mix_white_noise(stats: ObservedStatistics, eta: float) -> ObservedStatistics:
    """Visibility-eta mixture with the uniform distribution over outcomes."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    n_o = stats.n_outcomes
    mixed = eta * stats.conditionals + (1.0 - eta) / n_o
    return ObservedStatistics(mixed, stats.input_probs)


def double_statistics(stats: ObservedStatistics) -> ObservedStatistics:
    """Product table for two independent uses of the device.

    Index order matches double_ensemble: joint state index a1*n_s + a2 and
    joint outcome index x1*n_o + x2, first copy slowest.
    """
    c = stats.conditionals
    joint = np.einsum("ax,by->abxy", c, c).reshape(
        stats.n_states**2, stats.n_outcomes**2
    )
    p = np.outer(stats.input_probs, stats.input_probs).reshape(-1)
    return ObservedStatistics(joint, p)
