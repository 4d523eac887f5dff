"""Principal eigenpair computation with a dense oracle for small grids.

The solver is shifted inverse iteration on the reduced symmetric matrix:
plain inverse iteration (shift 0, all-positive start) until the iterate
is safely inside the target basin, then Rayleigh-quotient shifts for the
final digits. Higher states are obtained by deflating previously found
eigenvectors out of every iterate. In the reduced variable the Euclidean
inner product coincides with the weighted quadrature product, so
orthogonality and normalisation transfer exactly to physical vectors.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla
from scipy.linalg import eigh

from .operators import DiscreteOperator

# Ratio statistics u/phi are trusted only where phi clears this relative
# floor; Dirichlet truncation zeroes the far tail artificially.
COLLAR_FLOOR = 1e-12
# Relative spectral-gap floor below which simplicity is rejected.
SIMPLICITY_TOL = 1e-9

DENSE_LIMIT = 512


class SpectrumError(RuntimeError):
    """Eigensolver failure."""


class NonConvergenceError(SpectrumError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


def collar_mask(phi: np.ndarray) -> np.ndarray:
    """Nodes where phi is large enough for trustworthy ratio statistics."""
    return phi >= COLLAR_FLOOR * float(phi.max())


@dataclass(frozen=True)
class GroundState:
    """Principal eigenpair with the second eigenvalue for gap budgeting.

    ``phi`` is quadrature-normalised and strictly positive; ``residual``
    is the weighted norm of L phi - lambda1 phi.
    """

    grid: object
    lambda1: float
    phi: np.ndarray
    lambda2: float
    residual: float

    @property
    def gap(self) -> float:
        return self.lambda2 - self.lambda1


@dataclass(frozen=True)
class Eigenpair:
    value: float
    vector: np.ndarray
    residual: float


def _start_vector(total: int, j: int) -> np.ndarray:
    if j == 0:
        return np.ones(total)
    idx = np.arange(1, total + 1, dtype=float)
    return np.sin((j + 1) * math.pi * idx / (total + 1))


def _reduced_pairs(op: DiscreteOperator, k: int, tol: float, maxiter: int):
    """Lowest-k eigenpairs of the reduced matrix via deflated inverse iteration."""
    T = op.mat
    total = T.shape[0]
    identity = sparse.identity(total, format="csc")
    Tc = T.tocsc()
    # the residual T x - rho x cannot beat rounding relative to the
    # operator scale; floor the target accordingly
    op_scale = float(np.max(np.abs(T).sum(axis=1)))
    tol = max(tol, 32.0 * np.finfo(float).eps * op_scale)
    values: list[float] = []
    vectors: list[np.ndarray] = []
    residuals: list[float] = []

    for j in range(k):
        basis = np.column_stack(vectors) if vectors else None

        def deflate(v: np.ndarray) -> np.ndarray:
            if basis is None:
                return v
            return v - basis @ (basis.T @ v)

        x = deflate(_start_vector(total, j))
        nx = np.linalg.norm(x)
        if nx < 1e-10:
            x = deflate(np.cos(np.linspace(0.0, (j + 1) * math.pi, total)))
            nx = np.linalg.norm(x)
        x /= nx

        shift = 0.0 if j == 0 else values[-1] + 1e-6 * max(1.0, abs(values[-1]))
        lu = spla.splu(Tc - shift * identity)
        rho = float(x @ (T @ x))
        res = math.inf
        for _ in range(maxiter):
            y = deflate(lu.solve(x))
            ny = np.linalg.norm(y)
            if not np.isfinite(ny) or ny == 0.0:
                raise SpectrumError("inverse iteration produced a degenerate iterate")
            x = y / ny
            Tx = T @ x
            rho = float(x @ Tx)
            res = float(np.linalg.norm(Tx - rho * x))
            if res <= tol:
                break
            if res <= 1e-2 * max(1.0, abs(rho)):
                # Rayleigh acceleration; nudge the shift if the factor is singular
                s = rho
                for _ in range(3):
                    try:
                        lu = spla.splu(Tc - s * identity)
                        break
                    except RuntimeError:
                        s += 1e-10 * max(1.0, abs(rho))
        else:
            raise NonConvergenceError(
                f"eigenpair {j} did not converge within {maxiter} iterations", res)

        # two rounds of re-orthogonalisation keep pairwise overlaps at rounding level
        for _ in range(2):
            x = deflate(x)
            x /= np.linalg.norm(x)
        Tx = T @ x
        rho = float(x @ Tx)
        res = float(np.linalg.norm(Tx - rho * x))
        values.append(rho)
        vectors.append(x)
        residuals.append(res)

    order = np.argsort(values)
    return ([values[i] for i in order], [vectors[i] for i in order],
            [residuals[i] for i in order])


def _to_physical(op: DiscreteOperator, w: np.ndarray) -> np.ndarray:
    """Map a unit reduced vector to a quadrature-normalised physical one."""
    return w / (op.scale * math.sqrt(op.grid.cell))


def _positivity_polish(op: DiscreteOperator, w: np.ndarray, lam: float):
    """Final inverse-iteration steps with a shift safely below the target.

    The shifted matrix is then an M-matrix, whose triangular solves sum
    positive terms only, so rounding cannot flip the sign of the far tail
    the way a Rayleigh-shifted final solve can.
    """
    T = op.mat
    shift = lam - 0.1 * max(1.0, abs(lam))
    lu = spla.splu((T - shift * sparse.identity(T.shape[0], format="csc")).tocsc())
    for _ in range(3):
        w = lu.solve(np.maximum(w, 0.0))
        w /= np.linalg.norm(w)
        if w.min() > 0.0:
            break
    Tw = T @ w
    rho = float(w @ Tw)
    return w, rho, float(np.linalg.norm(Tw - rho * w))


def ground_state(op: DiscreteOperator, tol: float = 1e-10,
                 maxiter: int = 400) -> GroundState:
    """Principal eigenpair (positive, normalised) plus the second eigenvalue."""
    values, vectors, residuals = _reduced_pairs(op, 2, tol, maxiter)
    lam1, lam2 = values
    w = vectors[0]
    if abs(w.min()) > abs(w.max()):
        w = -w
    if w.min() <= 0.0 and w.min() >= -1e-12 * w.max():
        # rounding-level sign noise in the exponentially small tail
        w, lam1, res = _positivity_polish(op, w, lam1)
        residuals[0] = res
    if w.min() <= 0.0:
        raise SpectrumError(
            "converged principal vector is not sign-definite; wrong eigenpair "
            "or discretisation failure")
    if abs(lam2 - lam1) < SIMPLICITY_TOL * max(1.0, abs(lam1)):
        raise SpectrumError(
            f"ground state numerically non-simple: lambda1 = {lam1:.12e}, "
            f"lambda2 = {lam2:.12e}")
    phi = _to_physical(op, w)
    return GroundState(grid=op.grid, lambda1=lam1, phi=phi,
                       lambda2=lam2, residual=residuals[0])


def lowest_k(op: DiscreteOperator, k: int, tol: float = 1e-10,
             maxiter: int = 400) -> list[Eigenpair]:
    """Lowest k eigenpairs, ascending, mutually orthogonal under quadrature."""
    if k < 1 or k > 8:
        raise ValueError("k must be between 1 and 8")
    values, vectors, residuals = _reduced_pairs(op, k, tol, maxiter)
    spacings = np.diff(values)
    if k > 1 and np.any(np.abs(spacings) < tol * max(1.0, abs(values[0]))):
        warnings.warn("eigenvalue clustering below tolerance spacing", stacklevel=2)
    pairs = []
    for lam, w, res in zip(values, vectors, residuals):
        if abs(w.min()) > abs(w.max()):
            w = -w
        pairs.append(Eigenpair(value=lam, vector=_to_physical(op, w), residual=res))
    return pairs


def dense_oracle(op: DiscreteOperator):
    """Full spectrum by dense symmetric decomposition; small grids only."""
    if op.grid.total > DENSE_LIMIT:
        raise ValueError(
            f"dense oracle limited to {DENSE_LIMIT} unknowns, got {op.grid.total}")
    values, w = eigh(op.mat.toarray())
    vecs = np.empty_like(w)
    for j in range(w.shape[1]):
        col = w[:, j]
        if abs(col.min()) > abs(col.max()):
            col = -col
        vecs[:, j] = _to_physical(op, col)
    return values, vecs


def check_comparability(gs_q: GroundState, gs_Q1: GroundState,
                        gs_Q2: GroundState) -> tuple[float, float]:
    """Collar envelope constants k1, k2 with k1*phi <= Phi_1, Phi_2 <= k2*phi."""
    phi = gs_q.phi
    for other in (gs_Q1, gs_Q2):
        if other.phi.shape != phi.shape:
            raise ValueError("comparability requires ground states on the same grid")
    mask = collar_mask(phi)
    p1 = gs_Q1.phi[mask]
    p2 = gs_Q2.phi[mask]
    base = phi[mask]
    k1 = float(np.min(np.minimum(p1, p2) / base))
    k2 = float(np.max(np.maximum(p1, p2) / base))
    return k1, k2
