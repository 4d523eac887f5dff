"""Grids, potential specifications, and growth-hypothesis checks.

Domain conventions
------------------
The computational domain is a Dirichlet truncation of the whole space:

* ``radial(N)``: nodes r_i = i*h, i = 1..n with h = r_max/(n+1). The
  origin node is excluded and r = r_max is a homogeneous Dirichlet
  boundary. Quadrature weights carry the r^(N-1) measure factor, so
  sum(w * f) approximates the per-angular-sector volume integral.
* ``cartesian(d)``, d <= 2: every axis spans (-r_max/2, r_max/2) with n
  interior nodes and the same spacing h = r_max/(n+1); the box boundary
  is Dirichlet. The symmetric span is required so that even potentials
  such as x^2 keep their whole-line ground state.

With functions that vanish on the boundary the composite trapezoid rule
reduces to interior weights only, which keeps the discrete inner product
exactly symmetric with the finite-difference operator.

Hypothesis checks
-----------------
``check_class_P`` decides membership in the class of increasing radial
potentials whose inverse square root has a convergent tail integral.
On a truncated grid the improper integral cannot be evaluated, so the
verdict combines a log-log slope fit with a slope-trend extrapolation:
potentials such as r^2 * log(r), whose local exponent drifts down to 2,
are reported as non-members, while genuinely superquadratic growth
(r^p with p > 2, or exponentials) is accepted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

# Membership margin above the critical exponent 2; local-slope estimates
# within this band are treated as "not provably convergent".
ASYMPTOTIC_MARGIN = 0.05
# Escape hatch for faster-than-polynomial growth: local log-log slopes
# that keep increasing by more than this are accepted outright.
SUPERLINEAR_TREND = 0.25
SUPERLINEAR_FLOOR = 2.5


class GeometryError(ValueError):
    """Grid/potential geometry mismatch."""


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Uniform truncated grid with quadrature weights.

    Attributes
    ----------
    geometry : "radial" or "cartesian"
    dim : ambient dimension N (radial) or number of axes d (cartesian)
    r_max : truncation length; radial reach is r_max (radial) or the
        half-diagonal of the box (cartesian)
    n : interior nodes per axis
    h : uniform spacing, r_max / (n + 1)
    axis : per-axis interior coordinates, shape (n,)
    nodes : node coordinates, shape (total, 1) or (total, 2)
    radii : Euclidean distance of each node from the origin
    weights : quadrature weights (radial mode includes r^(N-1))
    """

    geometry: str
    dim: int
    r_max: float
    n: int
    h: float
    axis: np.ndarray
    nodes: np.ndarray
    radii: np.ndarray
    weights: np.ndarray

    @property
    def total(self) -> int:
        return self.nodes.shape[0]

    @property
    def cell(self) -> float:
        """Plain measure of one cell, h (1D-like) or h^d."""
        if self.geometry == "radial":
            return self.h
        return self.h ** self.dim

    @property
    def radial_reach(self) -> float:
        """Largest node radius representable on this grid."""
        return float(self.radii.max())

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        """Weighted (quadrature) inner product."""
        return float(np.dot(self.weights * u, v))

    def norm(self, u: np.ndarray) -> float:
        return math.sqrt(max(self.inner(u, u), 0.0))


def build_grid(geometry: str, r_max: float, n: int, dim: int = 1) -> Grid:
    """Build a uniform grid. Rejects n < 16 and cartesian dim > 2."""
    if n < 16:
        raise ValueError(f"n = {n} is too small; need at least 16 nodes per axis")
    if r_max <= 0:
        raise ValueError("r_max must be positive")
    if geometry not in ("radial", "cartesian"):
        raise GeometryError(f"unknown geometry {geometry!r}")
    if geometry == "cartesian" and not 1 <= dim <= 2:
        raise GeometryError("cartesian grids support only 1 or 2 axes")
    if geometry == "radial" and dim < 1:
        raise GeometryError("radial dimension must be >= 1")

    h = r_max / (n + 1)
    if geometry == "radial":
        axis = h * np.arange(1, n + 1, dtype=float)
        nodes = axis[:, None]
        radii = axis.copy()
        weights = h * axis ** (dim - 1)
    else:
        axis = -0.5 * r_max + h * np.arange(1, n + 1, dtype=float)
        if dim == 1:
            nodes = axis[:, None]
            weights = np.full(n, h)
        else:
            xg, yg = np.meshgrid(axis, axis, indexing="ij")
            nodes = np.column_stack([xg.ravel(), yg.ravel()])
            weights = np.full(n * n, h * h)
        radii = np.linalg.norm(nodes, axis=1)
    return Grid(geometry=geometry, dim=dim, r_max=float(r_max), n=int(n),
                h=h, axis=axis, nodes=nodes, radii=radii, weights=weights)


# ---------------------------------------------------------------------------
# Potential specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PotentialSpec:
    """Declarative potential description, evaluable on grids or radii.

    Kinds:

    * ``power``: scale * r^alpha
    * ``polynomial``: sum_k coeffs[k] * r^k (ascending coefficients)
    * ``exponential``: scale * exp(rate * r)
    * ``tabulated``: linear interpolation of a two-column (r, Q) table
    * ``perturbed``: base * (1 + sin_amplitude * sin(sin_freq * x1))
      plus an optional additive radial Gaussian shell bump; only the
      purely radial variant (sin_amplitude = 0) counts as radial
    * ``effective_radial``: base + coef / r^2 (produced by the radial
      reduction, not meant for config files)
    """

    kind: str
    params: dict = field(default_factory=dict)

    # -- constructors -------------------------------------------------
    @staticmethod
    def power(alpha: float, scale: float = 1.0) -> "PotentialSpec":
        return PotentialSpec("power", {"alpha": float(alpha), "scale": float(scale)})

    @staticmethod
    def polynomial(coeffs) -> "PotentialSpec":
        return PotentialSpec("polynomial", {"coeffs": tuple(float(c) for c in coeffs)})

    @staticmethod
    def exponential(rate: float, scale: float = 1.0) -> "PotentialSpec":
        return PotentialSpec("exponential", {"rate": float(rate), "scale": float(scale)})

    @staticmethod
    def tabulated(r: np.ndarray, values: np.ndarray) -> "PotentialSpec":
        r = np.asarray(r, dtype=float)
        values = np.asarray(values, dtype=float)
        if r.ndim != 1 or r.shape != values.shape:
            raise ValueError("tabulated potential needs matching 1D (r, Q) columns")
        if not np.all(np.diff(r) > 0):
            raise ValueError("tabulated radii must be strictly increasing")
        return PotentialSpec("tabulated", {"r": r, "values": values})

    @staticmethod
    def from_csv(path) -> "PotentialSpec":
        data = np.loadtxt(path, delimiter=",", ndmin=2)
        return PotentialSpec.tabulated(data[:, 0], data[:, 1])

    @staticmethod
    def perturbed(base: "PotentialSpec", sin_amplitude: float = 0.0,
                  sin_freq: float = 1.0, bump_amplitude: float = 0.0,
                  bump_center: float = 0.0, bump_width: float = 1.0) -> "PotentialSpec":
        return PotentialSpec("perturbed", {
            "base": base,
            "sin_amplitude": float(sin_amplitude),
            "sin_freq": float(sin_freq),
            "bump_amplitude": float(bump_amplitude),
            "bump_center": float(bump_center),
            "bump_width": float(bump_width),
        })

    @staticmethod
    def effective_radial(base: "PotentialSpec", coef: float) -> "PotentialSpec":
        return PotentialSpec("effective_radial", {"base": base, "coef": float(coef)})

    # -- evaluation ----------------------------------------------------
    @property
    def radial(self) -> bool:
        if self.kind == "perturbed":
            return self.params["sin_amplitude"] == 0.0
        return True

    def evaluate_radial(self, r: np.ndarray) -> np.ndarray:
        """Evaluate as a function of the radius alone."""
        r = np.asarray(r, dtype=float)
        p = self.params
        if self.kind == "power":
            return p["scale"] * r ** p["alpha"]
        if self.kind == "polynomial":
            return np.polynomial.polynomial.polyval(r, p["coeffs"])
        if self.kind == "exponential":
            return p["scale"] * np.exp(p["rate"] * r)
        if self.kind == "tabulated":
            return np.interp(r, p["r"], p["values"])
        if self.kind == "effective_radial":
            return p["base"].evaluate_radial(r) + p["coef"] / r ** 2
        if self.kind == "perturbed":
            if not self.radial:
                raise GeometryError("perturbed potential with a sinusoidal factor is not radial")
            vals = p["base"].evaluate_radial(r)
            if p["bump_amplitude"]:
                vals = vals + p["bump_amplitude"] * np.exp(
                    -((r - p["bump_center"]) ** 2) / (2.0 * p["bump_width"] ** 2))
            return vals
        raise ValueError(f"unknown potential kind {self.kind!r}")

    def evaluate(self, grid: Grid) -> np.ndarray:
        """Evaluate at every grid node."""
        if self.kind != "perturbed" or self.radial:
            return self.evaluate_radial(grid.radii)
        p = self.params
        vals = p["base"].evaluate_radial(grid.radii)
        x1 = grid.nodes[:, 0]
        vals = vals * (1.0 + p["sin_amplitude"] * np.sin(p["sin_freq"] * x1))
        if p["bump_amplitude"]:
            vals = vals + p["bump_amplitude"] * np.exp(
                -((grid.radii - p["bump_center"]) ** 2) / (2.0 * p["bump_width"] ** 2))
        return vals

    def describe(self) -> str:
        p = self.params
        if self.kind == "power":
            return f"{p['scale']:g} * r^{p['alpha']:g}"
        if self.kind == "polynomial":
            return "poly" + repr(tuple(p["coeffs"]))
        if self.kind == "exponential":
            return f"{p['scale']:g} * exp({p['rate']:g} r)"
        if self.kind == "tabulated":
            return f"tabulated[{p['r'][0]:g}, {p['r'][-1]:g}]"
        if self.kind == "perturbed":
            return f"perturbed({p['base'].describe()})"
        if self.kind == "effective_radial":
            return f"{p['base'].describe()} + {p['coef']:g}/r^2"
        return self.kind


# ---------------------------------------------------------------------------
# Class-P membership
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassPReport:
    """Verdict on increasing superquadratic growth of a radial potential."""

    R0: float
    monotone_ok: bool
    tail_integral: float
    tail_exponent: float
    member: bool
    asymptotic_exponent: float
    superlinear: bool


def _sample_count(grid: Grid, lo: int = 256, hi: int = 2048) -> int:
    return int(np.clip(grid.n, lo, hi))


def check_class_P(Q: PotentialSpec, grid: Grid, R0: float) -> ClassPReport:
    """Check monotone growth on [R0, reach] and tail convergence of Q^(-1/2).

    The plain least-squares exponent of log Q against log r on the outer
    half is reported as ``tail_exponent``. Membership additionally
    requires the slope-trend extrapolated exponent (intercept of local
    slopes against 1/log r) to clear 2 by ``ASYMPTOTIC_MARGIN``, unless
    the slopes themselves keep growing (the superlinear escape hatch).
    """
    if not Q.radial:
        raise GeometryError("class-P check requires a radial potential")
    reach = grid.radial_reach
    if not 0 < R0 < reach / 2:
        raise ValueError(f"R0 = {R0:g} must lie in (0, reach/2) with reach = {reach:g}")

    node_vals = Q.evaluate_radial(grid.radii)
    if np.any(node_vals <= 0):
        bad = int(np.argmin(node_vals))
        raise ValueError(
            f"potential is non-positive at node {bad} (r = {grid.radii[bad]:.6g}); "
            "positivity of the potential is required")

    m = _sample_count(grid)
    rs = np.linspace(R0, reach, m)
    qs = Q.evaluate_radial(rs)

    dq = np.diff(qs)
    scale = float(np.max(np.abs(qs)))
    monotone_ok = bool(np.all(dq >= -1e-12 * scale) and np.mean(dq) > 0)

    # outer-half window for asymptotic statistics
    mask = rs >= max(R0, reach / 2.0)
    rt, qt = rs[mask], qs[mask]
    lnr, lnq = np.log(rt), np.log(qt)
    tail_exponent = float(np.polyfit(lnr, lnq, 1)[0])

    slopes = np.diff(lnq) / np.diff(lnr)
    mid = 0.5 * (lnr[:-1] + lnr[1:])
    quarter = len(slopes) // 4
    s3 = float(np.median(slopes[2 * quarter:3 * quarter]))
    s4 = float(np.median(slopes[3 * quarter:]))
    superlinear = (s4 - s3 > SUPERLINEAR_TREND) and (s4 > SUPERLINEAR_FLOOR)

    # extrapolate the local exponent to r -> infinity: s ~ p_inf + beta/ln r
    coeffs = np.polyfit(1.0 / mid, slopes, 1)
    asymptotic_exponent = float(coeffs[1])

    if superlinear:
        p_used = s4
    else:
        p_used = min(asymptotic_exponent, s4)

    member = bool(monotone_ok and tail_exponent > 2.0
                  and (superlinear or asymptotic_exponent > 2.0 + ASYMPTOTIC_MARGIN))

    window = float(np.trapezoid(qs ** -0.5, rs))
    if p_used > 2.0 + ASYMPTOTIC_MARGIN:
        remainder = float(qs[-1] ** -0.5 * reach / (p_used / 2.0 - 1.0))
        tail_integral = window + remainder
    else:
        tail_integral = math.inf

    return ClassPReport(R0=float(R0), monotone_ok=monotone_ok,
                        tail_integral=tail_integral, tail_exponent=tail_exponent,
                        member=member, asymptotic_exponent=asymptotic_exponent,
                        superlinear=superlinear)


# ---------------------------------------------------------------------------
# Sandwich check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SandwichReport:
    """Result of the two-sided radial envelope check around q."""

    Q1: PotentialSpec
    Q2: PotentialSpec
    C0: float
    R0: float
    pointwise_ok: bool
    perturbation_integral: float
    holds: bool
    integral_finite: bool
    q1_member: bool
    q2_member: bool
    violation_node: int | None


def check_sandwich(q: PotentialSpec, Q1: PotentialSpec, Q2: PotentialSpec,
                   grid: Grid, R0: float) -> SandwichReport:
    """Verify Q1 <= q <= Q2 <= C0*Q1 node-wise and report the damping integral.

    ``holds`` certifies the pointwise chain together with class-P
    membership of both envelopes on the truncated domain. The nested
    double integral of (Q2 - Q1) against the exponentially damped inner
    kernel is evaluated on [R0, reach] and reported, with a log-log tail
    fit deciding ``integral_finite``; the flag is diagnostic and does not
    gate ``holds``.
    """
    rep1 = check_class_P(Q1, grid, R0)
    rep2 = check_class_P(Q2, grid, R0)

    qv = q.evaluate(grid)
    q1v = Q1.evaluate_radial(grid.radii)
    q2v = Q2.evaluate_radial(grid.radii)
    if np.any(q1v <= 0):
        raise ValueError("lower envelope must be strictly positive on the grid")

    tol = 1e-12 * (np.abs(qv) + np.abs(q1v) + np.abs(q2v))
    low_ok = qv - q1v >= -tol
    high_ok = q2v - qv >= -tol
    pointwise_ok = bool(np.all(low_ok) and np.all(high_ok))
    violation_node = None
    if not np.all(low_ok):
        violation_node = int(np.argmin(qv - q1v))
    elif not np.all(high_ok):
        violation_node = int(np.argmin(q2v - qv))

    C0 = float(np.max(q2v / q1v))

    # damped perturbation integral on [R0, reach]
    reach = grid.radial_reach
    m = _sample_count(grid, hi=1200)
    rs = np.linspace(R0, reach, m)
    hq = rs[1] - rs[0]
    g = np.sqrt(Q1.evaluate_radial(rs)) + np.sqrt(Q2.evaluate_radial(rs))
    G = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * hq)])
    diff = Q2.evaluate_radial(rs) - Q1.evaluate_radial(rs)

    # inner(s) = int_{R0}^{s} exp(G(r) - G(s)) dr, trapezoid row by row
    expo = G[None, :] - G[:, None]          # row s, column r
    kernel = np.where(expo <= 0.0, np.exp(np.minimum(expo, 0.0)), 0.0)
    kernel = np.tril(kernel)
    row_w = np.full(m, hq)
    inner = kernel @ row_w - 0.5 * hq * (kernel[:, 0] + np.diagonal(kernel))
    integrand = diff * inner
    window = float(np.trapezoid(integrand, rs))

    top = np.abs(integrand[rs >= max(R0, reach / 2.0)])
    if np.max(np.abs(integrand)) == 0.0:
        integral_finite = True
    else:
        sel = top > 1e-300
        if sel.sum() < 4:
            integral_finite = True
        else:
            rr = rs[rs >= max(R0, reach / 2.0)][sel]
            slope = float(np.polyfit(np.log(rr), np.log(top[sel]), 1)[0])
            integral_finite = slope < -1.05

    holds = bool(pointwise_ok and rep1.member and rep2.member)
    return SandwichReport(Q1=Q1, Q2=Q2, C0=C0, R0=float(R0),
                          pointwise_ok=pointwise_ok,
                          perturbation_integral=window, holds=holds,
                          integral_finite=integral_finite,
                          q1_member=rep1.member, q2_member=rep2.member,
                          violation_node=violation_node)
