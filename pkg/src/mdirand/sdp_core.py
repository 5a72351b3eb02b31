"""Block-diagonal SDP container, preprocessing and debug dump.

Problems are stated over real symmetric block variables:

    maximize   sum_k <C_k, X_k>
    subject to sum_k <A_ik, X_k> = b_i,   X_k >= 0.

Constraints and objective are block-sparse: dict mapping block index to a
dense symmetric matrix. Complex Hermitian blocks enter through the real
embedding with every matrix divided by 2 once at assembly, so b values and
objective keep their complex-side meaning.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .config import DEFAULT_TOLS, Tolerances
from .linalg import row_space_basis

__all__ = [
    "OPTIMAL",
    "NEAR_OPTIMAL",
    "INFEASIBLE",
    "NUMERICAL_FAILURE",
    "InfeasibleProblemError",
    "SdpProblem",
    "SdpSolution",
    "IterationRecord",
    "PreprocessReport",
    "preprocess",
    "dump_problem",
]

OPTIMAL = "optimal"
NEAR_OPTIMAL = "near-optimal"
INFEASIBLE = "infeasible-detected"
NUMERICAL_FAILURE = "numerical-failure"


class InfeasibleProblemError(ValueError):
    """Raised when constraints are provably inconsistent."""


BlockMap = dict[int, np.ndarray]


@dataclass
class SdpProblem:
    block_dims: tuple[int, ...]
    objective: BlockMap
    constraints: list[BlockMap]
    b: np.ndarray
    preprocessed: bool = False
    cert_vector: np.ndarray | None = None  # w with sum_i w_i A_i = identity
    cert_b: float = float("nan")           # b . w

    def __post_init__(self) -> None:
        self.b = np.asarray(self.b, dtype=float)
        if len(self.constraints) != self.b.size:
            raise ValueError("need one b value per constraint")
        for blk_map in [self.objective, *self.constraints]:
            for k, m in blk_map.items():
                s = self.block_dims[k]
                if m.shape != (s, s):
                    raise ValueError("constraint block has wrong shape")
                if np.max(np.abs(m - m.T)) > 1e-12 * max(1.0, np.max(np.abs(m))):
                    raise ValueError("constraint blocks must be symmetric")

    @property
    def n_constraints(self) -> int:
        return self.b.size

    @property
    def n_blocks(self) -> int:
        return len(self.block_dims)

    def apply_constraints(self, x_blocks: list[np.ndarray]) -> np.ndarray:
        """Evaluate the constraint map A(X)."""
        out = np.zeros(self.n_constraints)
        for i, blk_map in enumerate(self.constraints):
            out[i] = sum(float(np.sum(m * x_blocks[k])) for k, m in blk_map.items())
        return out

    def adjoint(self, y: np.ndarray) -> list[np.ndarray]:
        """Evaluate the adjoint map A*(y) as dense blocks."""
        out = [np.zeros((s, s)) for s in self.block_dims]
        for i, blk_map in enumerate(self.constraints):
            yi = y[i]
            if yi != 0.0:
                for k, m in blk_map.items():
                    out[k] += yi * m
        return out

    def objective_value(self, x_blocks: list[np.ndarray]) -> float:
        return sum(float(np.sum(m * x_blocks[k])) for k, m in self.objective.items())


@dataclass
class IterationRecord:
    iteration: int
    mu: float
    primal_objective: float
    dual_objective: float
    complementarity: float
    rel_gap: float
    primal_residual: float
    dual_residual: float
    step_primal: float
    step_dual: float
    x_norm: float
    y_norm: float
    certified_bound: float = math.nan


@dataclass
class SdpSolution:
    status: str
    x_blocks: list[np.ndarray]
    y: np.ndarray
    slack_blocks: list[np.ndarray]
    primal_objective: float
    dual_objective: float
    certified_upper_bound: float
    dual_min_eigenvalue: float
    primal_residual: float
    dual_residual: float
    duality_gap: float
    iterations: list[IterationRecord] = field(default_factory=list)

    @property
    def n_iterations(self) -> int:
        return len(self.iterations)


@dataclass
class PreprocessReport:
    n_raw: int
    kept_rows: list[int]
    dropped_rows: list[int]
    max_consistency_residual: float
    cert_residual: float
    notes: list[str] = field(default_factory=list)


# Dense-row materialization limit for the exact row_space_basis path; above
# it the Gram-matrix route is used (same greedy order, no dense rows).
_DENSE_ENTRY_LIMIT = 20_000_000


def _flat_rows(p: SdpProblem) -> np.ndarray:
    offsets = np.concatenate([[0], np.cumsum([s * s for s in p.block_dims])])
    rows = np.zeros((p.n_constraints, offsets[-1]))
    for i, blk_map in enumerate(p.constraints):
        for k, m in blk_map.items():
            rows[i, offsets[k]:offsets[k + 1]] = m.reshape(-1)
    return rows


def _gram_matrix(p: SdpProblem) -> np.ndarray:
    m = p.n_constraints
    g = np.zeros((m, m))
    touching: dict[int, list[int]] = {}
    for i, blk_map in enumerate(p.constraints):
        for k in blk_map:
            touching.setdefault(k, []).append(i)
    for k, rows in touching.items():
        s = p.block_dims[k]
        flat = np.stack([p.constraints[i][k].reshape(-1) for i in rows])
        g[np.ix_(rows, rows)] += flat @ flat.T
    return 0.5 * (g + g.T)


def _select_rows_gram(g: np.ndarray) -> tuple[list[int], list[int], np.ndarray]:
    """Order-preserving greedy selection from the Gram matrix.

    Left-looking Cholesky that skips rows whose Schur-complement diagonal
    falls below the float-noise threshold (these are numerically dependent
    on the kept rows). Returns kept indices, dropped indices and the lower
    factor of the kept-row Gram matrix.
    """
    m = g.shape[0]
    diag = np.diag(g).copy()
    # exact dependencies collapse the pivot to accumulation noise ~ m*eps*G_ii
    thresh = np.maximum(1e-12 * diag, 1e-20)
    left = np.zeros((m, m))
    kept: list[int] = []
    dropped: list[int] = []
    panel = 256
    n_kept_applied = 0
    for start in range(0, m, panel):
        stop = min(m, start + panel)
        cols = g[:, start:stop].copy()
        if kept:
            lk = left[:, :len(kept)]
            cols -= lk @ lk[start:stop, :].T
        local: list[int] = []
        for i in range(start, stop):
            ci = cols[:, i - start]
            if local:
                lp = left[:, len(kept):len(kept) + len(local)]
                ci = ci - lp @ lp[i, :]
            d = float(ci[i])
            if d <= thresh[i]:
                dropped.append(i)
                continue
            col = np.zeros(m)
            col[i:] = ci[i:] / np.sqrt(d)
            left[:, len(kept) + len(local)] = col
            local.append(i)
        kept.extend(local)
        n_kept_applied = len(kept)
    l_kept = left[np.ix_(kept, range(n_kept_applied))]
    return kept, dropped, l_kept


def preprocess(
    p: SdpProblem,
    tols: Tolerances = DEFAULT_TOLS,
) -> tuple[SdpProblem, PreprocessReport]:
    """Drop dependent constraint rows, check consistency, rescale.

    Dependent rows must be reproducible from kept rows with matching b
    (residual below the consistency tolerance), otherwise the problem is
    inconsistent and InfeasibleProblemError is raised. Kept rows are scaled
    to unit Frobenius norm; scaling never moves the optimal objective.
    Also computes the certificate vector w with A*(w) = identity when the
    identity lies in the row space (used to repair dual infeasibility).
    """
    if p.preprocessed:
        return p, PreprocessReport(p.n_constraints, list(range(p.n_constraints)), [], 0.0, 0.0)
    m = p.n_constraints
    total_entries = m * sum(s * s for s in p.block_dims)
    notes: list[str] = []

    if total_entries <= _DENSE_ENTRY_LIMIT:
        rows = _flat_rows(p)
        kept, coeff_map = row_space_basis(rows, tols.rank)
        dropped = sorted(coeff_map)
        coeffs = {i: coeff_map[i] for i in dropped}
        l_kept = None
    else:
        notes.append("gram-matrix row selection (dense rows too large)")
        g = _gram_matrix(p)
        kept, dropped, l_kept = _select_rows_gram(g)
        gram_kept = g[np.ix_(kept, kept)]
        coeffs = {}
        if dropped:
            rhs = g[np.ix_(kept, dropped)]
            sol = sla.cho_solve((l_kept, True), rhs, check_finite=False)
            for j, i in enumerate(dropped):
                coeffs[i] = sol[:, j]

    b_kept = p.b[kept]
    max_resid = 0.0
    for i in dropped:
        resid = abs(p.b[i] - float(coeffs[i] @ b_kept))
        max_resid = max(max_resid, resid)
        if resid > tols.consistency:
            raise InfeasibleProblemError(
                f"constraint {i} contradicts the rows it depends on "
                f"(residual {resid:.3e})"
            )

    # certificate direction u with sum_i u_i A_i = identity, if attainable
    u = None
    if kept:
        try:
            if l_kept is None:
                offsets = np.concatenate([[0], np.cumsum([s * s for s in p.block_dims])])
                id_vec = np.zeros(offsets[-1])
                for k, s in enumerate(p.block_dims):
                    id_vec[offsets[k]:offsets[k + 1]] = np.eye(s).reshape(-1)
                u, *_ = np.linalg.lstsq(rows[kept].T, id_vec, rcond=None)
            else:
                trace_kept = np.array(
                    [sum(float(np.trace(mm)) for mm in p.constraints[i].values())
                     for i in kept]
                )
                u = sla.cho_solve((l_kept, True), trace_kept, check_finite=False)
        except np.linalg.LinAlgError:
            u = None

    scales = np.empty(len(kept))
    new_constraints: list[BlockMap] = []
    for j, i in enumerate(kept):
        norm = np.sqrt(sum(float(np.sum(mm * mm)) for mm in p.constraints[i].values()))
        scales[j] = norm
        new_constraints.append({k: mm / norm for k, mm in p.constraints[i].items()})
    new_b = b_kept / scales

    cert_vector = None
    cert_b = float("nan")
    cert_residual = float("inf")
    if u is not None:
        resid = 0.0
        for k, s in enumerate(p.block_dims):
            acc = -np.eye(s)
            for j, i in enumerate(kept):
                mk = p.constraints[i].get(k)
                if mk is not None:
                    acc = acc + u[j] * mk
            resid = max(resid, float(np.max(np.abs(acc))))
        cert_residual = resid
        if resid < 1e-9:
            cert_vector = u * scales  # valid for the rescaled rows
            cert_b = float(b_kept @ u)
        else:
            notes.append("identity not in constraint row space; no certificate shift")

    out = SdpProblem(
        block_dims=p.block_dims,
        objective={k: mm.copy() for k, mm in p.objective.items()},
        constraints=new_constraints,
        b=new_b,
        preprocessed=True,
        cert_vector=cert_vector,
        cert_b=cert_b,
    )
    report = PreprocessReport(
        n_raw=m,
        kept_rows=kept,
        dropped_rows=list(dropped),
        max_consistency_residual=max_resid,
        cert_residual=cert_residual,
        notes=notes,
    )
    return out, report


def dump_problem(p: SdpProblem, fp=None) -> str:
    """Readable text dump (block sizes, b, dense objective and constraints)."""
    buf = io.StringIO()
    buf.write("sdp-problem\n")
    buf.write("block_dims: " + " ".join(str(s) for s in p.block_dims) + "\n")
    buf.write(f"n_constraints: {p.n_constraints}\n")

    def write_blocks(blk_map: BlockMap) -> None:
        for k in sorted(blk_map):
            buf.write(f"  block {k}\n")
            for row in blk_map[k]:
                buf.write("    " + " ".join(format(v, ".17g") for v in row) + "\n")

    buf.write("objective\n")
    write_blocks(p.objective)
    for i, blk_map in enumerate(p.constraints):
        buf.write(f"constraint {i} b {format(p.b[i], '.17g')}\n")
        write_blocks(blk_map)
    text = buf.getvalue()
    if fp is not None:
        fp.write(text)
    return text
