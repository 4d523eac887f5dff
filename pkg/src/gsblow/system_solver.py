"""Constant-coefficient 2x2 systems: Jordan reduction, solves, blow-up sweeps.

The coupled system L u = A u + mu u + F is transformed with the change of
basis A = P J P^-1. Two distinct eigenvalues give two independent scalar
resolvent problems; a double eigenvalue gives a triangular chain where
the second transformed component feeds the first at the same resonance,
producing a double pole in the generic case. Solutions are always mapped
back and validated against the original equations, and a dense coupled
solve on small grids serves as the independent oracle.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .operators import DiscreteOperator
from .scalar_solver import (POLE_GUARD, DeflationError, PoleError,
                            collar_ratio_stats, in_x_space, solve_scalar)
from .spectrum import DENSE_LIMIT, GroundState

CONDITION_MARGIN = 1e-10


class DegenerateMatrixError(ValueError):
    """Double eigenvalue with a = d; the stated change of basis divides by a - d."""


class SweepAborted(RuntimeError):
    def __init__(self, message: str, partial: "SweepResult", cause: Exception):
        super().__init__(message)
        self.partial = partial
        self.cause = cause


@dataclass(frozen=True)
class CouplingMatrix:
    a: float
    b: float
    c: float
    d: float

    @property
    def discriminant(self) -> float:
        return (self.a - self.d) ** 2 + 4.0 * self.b * self.c

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    def swapped(self) -> "CouplingMatrix":
        """Order of the two equations (and unknowns) exchanged."""
        return CouplingMatrix(a=self.d, b=self.c, c=self.b, d=self.a)


@dataclass(frozen=True)
class MatrixAnalysis:
    """Eigenstructure and Jordan data of the (possibly reordered) matrix."""

    original: CouplingMatrix
    matrix: CouplingMatrix
    swapped: bool
    D: float
    xi1: float
    xi2: float
    case: str
    cooperative: bool
    P: np.ndarray
    Pinv: np.ndarray
    J: np.ndarray
    reconstruction_error: float

    @property
    def X(self) -> np.ndarray:
        """Principal eigenvector (working order)."""
        return np.array([self.matrix.b, self.xi1 - self.matrix.a])


def analyze(A) -> MatrixAnalysis:
    """Eigenvalues, case classification, and explicit Jordan factors.

    A matrix with b <= 0 but c > 0 is normalised by swapping the two
    equations; if both off-diagonal entries are non-positive the matrix
    is rejected. Negative discriminants (complex pair) and defective
    matrices with a = d are rejected as out of scope.
    """
    if not isinstance(A, CouplingMatrix):
        arr = np.asarray(A, dtype=float)
        if arr.shape != (2, 2):
            raise ValueError("coupling matrix must be 2x2")
        A = CouplingMatrix(arr[0, 0], arr[0, 1], arr[1, 0], arr[1, 1])

    original = A
    swapped = False
    if A.b <= 0.0:
        if A.c <= 0.0:
            raise ValueError(
                "both off-diagonal entries are non-positive; no equation order "
                "makes the upper coupling positive")
        A = A.swapped()
        swapped = True

    a, b, c, d = A.a, A.b, A.c, A.d
    scale = max(1.0, abs(a), abs(b), abs(c), abs(d))
    D = A.discriminant
    d_tol = 1e-10 * scale ** 2
    if D < -d_tol:
        raise ValueError(f"negative discriminant D = {D:.6e}; complex eigenvalues "
                         "are out of scope")

    if D <= d_tol:
        if abs(a - d) <= 1e-12 * scale:
            raise DegenerateMatrixError(
                "double eigenvalue with a = d; generalized eigenvector form "
                "requires a != d")
        xi = 0.5 * (a + d)
        xi1 = xi2 = xi
        P = np.array([[b, 2.0 * b / (a - d)],
                      [0.5 * (d - a), 0.0]])
        Pinv = (1.0 / b) * np.array([[0.0, -2.0 * b / (a - d)],
                                     [0.5 * (a - d), b]])
        J = np.array([[xi, 1.0], [0.0, xi]])
        case = "double"
    else:
        root = math.sqrt(D)
        xi1 = 0.5 * (a + d + root)
        xi2 = 0.5 * (a + d - root)
        P = np.array([[b, b], [xi1 - a, xi2 - a]])
        Pinv = (1.0 / (b * (xi1 - xi2))) * np.array([[a - xi2, b],
                                                     [xi1 - a, -b]])
        J = np.diag([xi1, xi2])
        case = "distinct"

    recon = float(np.max(np.abs(P @ J @ Pinv - A.as_array())))
    if recon > 1e-6 * scale:
        raise RuntimeError(f"Jordan reconstruction error {recon:.3e} is implausibly large")
    return MatrixAnalysis(original=original, matrix=A, swapped=swapped, D=D,
                          xi1=xi1, xi2=xi2, case=case, cooperative=c >= 0.0,
                          P=P, Pinv=Pinv, J=J, reconstruction_error=recon)


# ---------------------------------------------------------------------------
# Principal pair and problems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PrincipalPair:
    nu: float
    mode1: np.ndarray
    mode2: np.ndarray
    residual: float


def principal_pair(gs: GroundState, ma: MatrixAnalysis,
                   op: DiscreteOperator | None = None) -> PrincipalPair:
    """Principal system eigenvalue nu = lambda1 - xi1 with eigenfield X*phi."""
    nu = gs.lambda1 - ma.xi1
    X = ma.X
    m1w, m2w = X[0] * gs.phi, X[1] * gs.phi
    mode1, mode2 = (m2w, m1w) if ma.swapped else (m1w, m2w)
    residual = float("nan")
    if op is not None:
        A = ma.original.as_array()
        r1 = op.apply(mode1) - A[0, 0] * mode1 - A[0, 1] * mode2 - nu * mode1
        r2 = op.apply(mode2) - A[1, 0] * mode1 - A[1, 1] * mode2 - nu * mode2
        grid = op.grid
        denom = max(grid.norm(mode1) + grid.norm(mode2), 1e-300)
        residual = (grid.norm(r1) + grid.norm(r2)) / denom
    return PrincipalPair(nu=nu, mode1=mode1, mode2=mode2, residual=residual)


@dataclass(frozen=True)
class SystemProblem:
    mu: float
    f1: np.ndarray
    f2: np.ndarray
    f1_1: float | None = None
    f2_1: float | None = None

    @staticmethod
    def build(gs: GroundState, mu: float, f1: np.ndarray,
              f2: np.ndarray) -> "SystemProblem":
        return SystemProblem(mu=float(mu), f1=np.asarray(f1, dtype=float),
                             f2=np.asarray(f2, dtype=float),
                             f1_1=gs.grid.inner(f1, gs.phi),
                             f2_1=gs.grid.inner(f2, gs.phi))


@dataclass(frozen=True)
class ComponentStats:
    ratio_min: float
    ratio_max: float
    abs_ratio_min: float


@dataclass(frozen=True)
class SystemSolution:
    u1: np.ndarray
    u2: np.ndarray
    tilde_u1: np.ndarray
    tilde_u2: np.ndarray
    nu: float
    mu: float
    residual1: float
    residual2: float
    stats1: ComponentStats
    stats2: ComponentStats


def _equation_residuals(op: DiscreteOperator, A: np.ndarray, mu: float,
                        u1: np.ndarray, u2: np.ndarray,
                        f1: np.ndarray, f2: np.ndarray) -> tuple[float, float]:
    grid = op.grid
    out = []
    for i, (ui, fi) in enumerate(((u1, f1), (u2, f2))):
        lu = op.apply(ui)
        r = lu - A[i, 0] * u1 - A[i, 1] * u2 - mu * ui - fi
        denom = (grid.norm(lu) + abs(mu) * grid.norm(ui) + grid.norm(fi)
                 + abs(A[i, 0]) * grid.norm(u1) + abs(A[i, 1]) * grid.norm(u2))
        out.append(grid.norm(r) / max(denom, 1e-300))
    return out[0], out[1]


def _stats(u: np.ndarray, gs: GroundState) -> ComponentStats:
    r_min, r_max, abs_min, _, _ = collar_ratio_stats(u, gs)
    return ComponentStats(ratio_min=r_min, ratio_max=r_max, abs_ratio_min=abs_min)


def _working_sources(ma: MatrixAnalysis, prob: SystemProblem):
    if ma.swapped:
        return prob.f2, prob.f1
    return prob.f1, prob.f2


def _finalize(op, gs, ma, prob, u1w, u2w, t1, t2) -> SystemSolution:
    u1, u2 = (u2w, u1w) if ma.swapped else (u1w, u2w)
    res1, res2 = _equation_residuals(op, ma.original.as_array(), prob.mu,
                                     u1, u2, prob.f1, prob.f2)
    return SystemSolution(u1=u1, u2=u2, tilde_u1=t1, tilde_u2=t2,
                          nu=gs.lambda1 - ma.xi1, mu=prob.mu,
                          residual1=res1, residual2=res2,
                          stats1=_stats(u1, gs), stats2=_stats(u2, gs))


def solve_distinct(op: DiscreteOperator, gs: GroundState, ma: MatrixAnalysis,
                   prob: SystemProblem, tol: float = 1e-10) -> SystemSolution:
    """Decoupled solve for two distinct eigenvalues via F_tilde = P^-1 F."""
    if ma.case != "distinct":
        raise ValueError("solve_distinct requires a matrix with distinct eigenvalues")
    f1w, f2w = _working_sources(ma, prob)
    tilde_f = [ma.Pinv[0, 0] * f1w + ma.Pinv[0, 1] * f2w,
               ma.Pinv[1, 0] * f1w + ma.Pinv[1, 1] * f2w]
    tilde_u = []
    for k, (xi, tf) in enumerate(zip((ma.xi1, ma.xi2), tilde_f), start=1):
        sigma = xi + prob.mu
        if abs(gs.lambda1 - sigma) < POLE_GUARD:
            raise PoleError(f"mu = {prob.mu:.12e} hits the k = {k} pole at "
                            f"lambda1 - xi{k}")
        try:
            tilde_u.append(solve_scalar(op, gs, sigma, tf, tol=tol).u)
        except DeflationError as exc:
            raise DeflationError(f"transformed component k = {k}: {exc}") from exc
    a, b = ma.matrix.a, ma.matrix.b
    u1w = b * (tilde_u[0] + tilde_u[1])
    u2w = (ma.xi1 - a) * tilde_u[0] + (ma.xi2 - a) * tilde_u[1]
    return _finalize(op, gs, ma, prob, u1w, u2w, tilde_u[0], tilde_u[1])


def solve_double(op: DiscreteOperator, gs: GroundState, ma: MatrixAnalysis,
                 prob: SystemProblem, tol: float = 1e-10) -> SystemSolution:
    """Back-substitution through the triangular Jordan chain (double eigenvalue)."""
    if ma.case != "double":
        raise ValueError("solve_double requires a defective matrix")
    a, b, d = ma.matrix.a, ma.matrix.b, ma.matrix.d
    f1w, f2w = _working_sources(ma, prob)
    tilde_f1 = (-2.0 / (a - d)) * f2w
    tilde_f2 = ((a - d) / (2.0 * b)) * f1w + f2w
    sigma = ma.xi1 + prob.mu
    if abs(gs.lambda1 - sigma) < POLE_GUARD:
        raise PoleError(f"mu = {prob.mu:.12e} hits the double pole at lambda1 - xi")
    tilde_u2 = solve_scalar(op, gs, sigma, tilde_f2, tol=tol).u
    tilde_u1 = solve_scalar(op, gs, sigma, tilde_u2 + tilde_f1, tol=tol).u
    u1w = b * tilde_u1 + (2.0 * b / (a - d)) * tilde_u2
    u2w = 0.5 * (d - a) * tilde_u1
    return _finalize(op, gs, ma, prob, u1w, u2w, tilde_u1, tilde_u2)


def solve_system(op: DiscreteOperator, gs: GroundState, ma: MatrixAnalysis,
                 prob: SystemProblem, tol: float = 1e-10) -> SystemSolution:
    if ma.case == "double":
        return solve_double(op, gs, ma, prob, tol=tol)
    return solve_distinct(op, gs, ma, prob, tol=tol)


def solve_direct_coupled(op: DiscreteOperator, gs: GroundState, ma: MatrixAnalysis,
                         prob: SystemProblem) -> SystemSolution:
    """Dense 2n x 2n block solve; the oracle path for equivalence tests."""
    total = op.grid.total
    if total > DENSE_LIMIT:
        raise ValueError(f"direct coupled solve limited to {DENSE_LIMIT} unknowns")
    A = ma.original.as_array()
    T = op.mat.toarray()
    eye = np.eye(total)
    M = np.block([[T - (A[0, 0] + prob.mu) * eye, -A[0, 1] * eye],
                  [-A[1, 0] * eye, T - (A[1, 1] + prob.mu) * eye]])
    rhs = np.concatenate([op.scale * prob.f1, op.scale * prob.f2])
    try:
        y = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"coupled block system singular at mu = {prob.mu:.12e}") from exc
    u1 = y[:total] / op.scale
    u2 = y[total:] / op.scale
    u1w, u2w = (u2, u1) if ma.swapped else (u1, u2)
    t = ma.Pinv @ np.vstack([u1w, u2w])
    res1, res2 = _equation_residuals(op, A, prob.mu, u1, u2, prob.f1, prob.f2)
    return SystemSolution(u1=u1, u2=u2, tilde_u1=t[0], tilde_u2=t[1],
                          nu=gs.lambda1 - ma.xi1, mu=prob.mu,
                          residual1=res1, residual2=res2,
                          stats1=_stats(u1, gs), stats2=_stats(u2, gs))


# ---------------------------------------------------------------------------
# Theorem conditions and sign predictions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionReport:
    """Which blow-up statement applies and the predicted collar sign pattern.

    Predictions follow the transformed-mode mechanism: for distinct
    eigenvalues the simple pole flips sign across nu, while the defective
    chain produces an even double pole whose pattern persists on both
    sides whenever the chained source coefficient is non-zero.
    """

    f1_1: float
    f2_1: float
    condition_value: float
    branch: str
    hf1_ok: bool
    hf2_ok: bool
    predicted_below: tuple[int, int]
    predicted_above: tuple[int, int]
    cooperative: bool
    note: str = ""


def check_theorem_conditions(ma: MatrixAnalysis, prob: SystemProblem,
                             gs: GroundState) -> ConditionReport:
    f1_1 = gs.grid.inner(prob.f1, gs.phi)
    f2_1 = gs.grid.inner(prob.f2, gs.phi)
    # strict positivity of the projection, above rounding level
    floor1 = 1e-14 * max(gs.grid.norm(prob.f1), 1e-300)
    floor2 = 1e-14 * max(gs.grid.norm(prob.f2), 1e-300)
    hf1 = f1_1 > floor1 and in_x_space(prob.f1, gs)
    hf2 = f2_1 > floor2 and in_x_space(prob.f2, gs)

    w1, w2 = (f2_1, f1_1) if ma.swapped else (f1_1, f2_1)
    a, b, d = ma.matrix.a, ma.matrix.b, ma.matrix.d
    condition = (a - ma.xi2) * w1 + b * w2

    scale = max(1.0, abs(w1), abs(w2))
    if abs(condition) < CONDITION_MARGIN * scale:
        return ConditionReport(f1_1=f1_1, f2_1=f2_1, condition_value=condition,
                               branch="inconclusive", hf1_ok=hf1, hf2_ok=hf2,
                               predicted_below=(0, 0), predicted_above=(0, 0),
                               cooperative=ma.cooperative,
                               note="condition margin below resolution")

    s = 1 if condition > 0 else -1
    note = ""
    if ma.case == "double":
        branch = "thsd"
        s2 = s * (1 if d - a > 0 else -1)
        below = (s, s2)
        above = below
        note = ("defective chain: even double pole, the pattern persists on "
                "both sides of nu")
    else:
        second = ma.xi1 - a
        if abs(second) < 1e-12 * max(1.0, abs(ma.xi1), abs(a)):
            branch = "thss"
            below = (s, 0)
            above = (-s, 0)
            note = "second eigencomponent degenerate (xi1 = a); its sign is unresolved"
        else:
            s2 = s * (1 if second > 0 else -1)
            below = (s, s2)
            above = (-below[0], -below[1])
            if d - a > 0:
                branch = "thss"
            elif second < 0:
                branch = "thss_remark"
            else:
                branch = "thss"
                note = ("d - a < 0 with a cooperative matrix: outside the stated "
                        "hypotheses, pattern predicted from the mechanism")

    if ma.swapped:
        below = (below[1], below[0])
        above = (above[1], above[0])
    return ConditionReport(f1_1=f1_1, f2_1=f2_1, condition_value=condition,
                           branch=branch, hf1_ok=hf1, hf2_ok=hf2,
                           predicted_below=below, predicted_above=above,
                           cooperative=ma.cooperative, note=note)


# ---------------------------------------------------------------------------
# Blow-up sweeps
# ---------------------------------------------------------------------------

SYSTEM_SWEEP_COLUMNS = ("mu", "nu_minus_mu", "side", "u1_ratio_min", "u1_ratio_max",
                        "u2_ratio_min", "u2_ratio_max", "residual1", "residual2")


@dataclass(frozen=True)
class SweepRecord:
    mu: float
    nu_minus_mu: float
    side: str
    u1_ratio_min: float
    u1_ratio_max: float
    u2_ratio_min: float
    u2_ratio_max: float
    residual1: float
    residual2: float
    u1_abs_min: float
    u2_abs_min: float

    def csv_row(self):
        return (self.mu, self.nu_minus_mu, self.side, self.u1_ratio_min,
                self.u1_ratio_max, self.u2_ratio_min, self.u2_ratio_max,
                self.residual1, self.residual2)


@dataclass(frozen=True)
class SweepResult:
    schedule: tuple
    records: tuple
    fitted_slope: tuple[float, float]
    gamma_est: tuple[float, float]
    sign_pattern: str


def make_schedule(nu: float, side: str = "below", start: float = 1e-1,
                  stop: float = 1e-6, count: int = 6) -> list[float]:
    """Geometric pole-distance schedule on one side of nu."""
    offsets = np.geomspace(start, stop, count)
    sign = -1.0 if side == "below" else 1.0
    return [float(nu + sign * off) for off in offsets]


def _pattern_char(stats: ComponentStats) -> str:
    if stats.ratio_min > 0.0:
        return "+"
    if stats.ratio_max < 0.0:
        return "-"
    return "0"


def blowup_sweep(op: DiscreteOperator, gs: GroundState, ma: MatrixAnalysis,
                 F, schedule, tol: float = 1e-10, threads: int = 1) -> SweepResult:
    """Per-mu solves along the schedule with a log-log blow-up rate fit.

    The schedule must stay strictly on one side of nu and span at least
    four decades of pole distance. A failing solve aborts the sweep and
    surfaces the records gathered so far.
    """
    f1, f2 = np.asarray(F[0], dtype=float), np.asarray(F[1], dtype=float)
    nu = gs.lambda1 - ma.xi1
    offs = np.array([nu - mu for mu in schedule])
    if np.any(offs == 0.0) or (np.any(offs > 0) and np.any(offs < 0)):
        raise ValueError("schedule must stay strictly on one side of nu")
    decades = np.max(np.abs(offs)) / np.min(np.abs(offs))
    if decades < 1e4 * (1.0 - 1e-9):
        raise ValueError("schedule must span at least four decades of |nu - mu|")
    side = "below" if offs[0] > 0 else "above"

    def run_one(mu: float) -> SweepRecord:
        prob = SystemProblem.build(gs, mu, f1, f2)
        sol = solve_system(op, gs, ma, prob, tol=tol)
        return SweepRecord(
            mu=mu, nu_minus_mu=nu - mu, side=side,
            u1_ratio_min=sol.stats1.ratio_min, u1_ratio_max=sol.stats1.ratio_max,
            u2_ratio_min=sol.stats2.ratio_min, u2_ratio_max=sol.stats2.ratio_max,
            residual1=sol.residual1, residual2=sol.residual2,
            u1_abs_min=sol.stats1.abs_ratio_min, u2_abs_min=sol.stats2.abs_ratio_min)

    records: list[SweepRecord] = []
    try:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                records = list(pool.map(run_one, schedule))
        else:
            for mu in schedule:
                records.append(run_one(mu))
    except Exception as exc:
        partial = _fit_result(schedule, records, allow_partial=True)
        raise SweepAborted(f"sweep aborted at record {len(records)}: {exc}",
                           partial, exc) from exc
    return _fit_result(schedule, records, allow_partial=False)


def _fit_result(schedule, records, allow_partial: bool) -> SweepResult:
    if len(records) >= 2:
        dist = np.array([abs(r.nu_minus_mu) for r in records])
        slopes = []
        gammas = []
        for key in ("u1_abs_min", "u2_abs_min"):
            vals = np.array([getattr(r, key) for r in records])
            vals = np.maximum(vals, 1e-300)
            slope, intercept = np.polyfit(np.log(dist), np.log(vals), 1)
            slopes.append(float(slope))
            gammas.append(float(math.exp(intercept)))
    else:
        slopes = [float("nan"), float("nan")]
        gammas = [float("nan"), float("nan")]
    if records:
        closest = min(records, key=lambda r: abs(r.nu_minus_mu))
        pattern = (_pattern_char(ComponentStats(closest.u1_ratio_min,
                                                closest.u1_ratio_max, 0.0))
                   + _pattern_char(ComponentStats(closest.u2_ratio_min,
                                                  closest.u2_ratio_max, 0.0)))
    else:
        pattern = ""
    return SweepResult(schedule=tuple(schedule), records=tuple(records),
                       fitted_slope=(slopes[0], slopes[1]),
                       gamma_est=(gammas[0], gammas[1]), sign_pattern=pattern)
