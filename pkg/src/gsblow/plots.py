"""Matplotlib figure rendering for the report path (file output only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def render_eigen(grid, gs, path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if grid.geometry == "cartesian" and grid.dim == 2:
        img = gs.phi.reshape(grid.n, grid.n)
        extent = [grid.axis[0], grid.axis[-1], grid.axis[0], grid.axis[-1]]
        im = ax.imshow(img.T, origin="lower", extent=extent, aspect="auto")
        fig.colorbar(im, ax=ax, label="phi")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
    else:
        ax.plot(grid.nodes[:, 0], gs.phi, lw=1.2)
        ax.set_xlabel("r" if grid.geometry == "radial" else "x")
        ax.set_ylabel("phi")
    ax.set_title(f"ground state, lambda1 = {gs.lambda1:.6g}")
    _save(fig, path)


def render_scalar_sweep(result, path) -> None:
    dist = np.array([abs(r.lambda_minus_sigma) for r in result.rows])
    peak = np.array([max(abs(r.ratio_min), abs(r.ratio_max)) for r in result.rows])
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.loglog(dist, peak, "o-", label="max |u|/phi")
    ax.loglog(dist, result.gamma * dist ** result.slope, "--",
              label=f"fit slope {result.slope:.3f}")
    ax.set_xlabel("|lambda1 - sigma|")
    ax.set_ylabel("collar ratio")
    ax.legend()
    ax.set_title("scalar blow-up sweep")
    _save(fig, path)


def render_scalar_solution(grid, gs, sol, path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    x = grid.nodes[:, 0]
    ax.plot(x, sol.u, lw=1.2, label="u")
    ax.plot(x, gs.phi, lw=0.8, ls=":", color="k", label="phi")
    ax.set_xlabel("r" if grid.geometry == "radial" else "x")
    ax.legend()
    ax.set_title(f"resolvent solve at sigma = {sol.sigma:.6g}")
    _save(fig, path)


def render_system_sweep(result, path) -> None:
    dist = np.array([abs(r.nu_minus_mu) for r in result.records])
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for k, key in enumerate(("u1_abs_min", "u2_abs_min"), start=1):
        vals = np.array([getattr(r, key) for r in result.records])
        ax.loglog(dist, vals, "o-", label=f"u{k} min |ratio|")
        ax.loglog(dist, result.gamma_est[k - 1] * dist ** result.fitted_slope[k - 1],
                  "--", label=f"u{k} fit slope {result.fitted_slope[k - 1]:.3f}")
    ax.set_xlabel("|nu - mu|")
    ax.set_ylabel("collar ratio")
    ax.legend(fontsize=8)
    ax.set_title("system blow-up sweep")
    _save(fig, path)


def render_system_solution(grid, gs, sol, path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    x = grid.nodes[:, 0]
    ax.plot(x, sol.u1, lw=1.2, label="u1")
    ax.plot(x, sol.u2, lw=1.2, label="u2")
    ax.plot(x, gs.phi, lw=0.8, ls=":", color="k", label="phi")
    ax.set_xlabel("r" if grid.geometry == "radial" else "x")
    ax.legend()
    ax.set_title(f"system solution at mu = {sol.mu:.6g}")
    _save(fig, path)


def render_hypotheses(grid, potential, report, path, sandwich=None) -> None:
    rs = np.linspace(report.R0, grid.radial_reach, 400)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if potential.radial:
        ax.semilogy(rs, potential.evaluate_radial(rs), label="Q(r)")
    if sandwich is not None:
        ax.semilogy(rs, sandwich.Q1.evaluate_radial(rs), ls="--", label="Q1")
        ax.semilogy(rs, sandwich.Q2.evaluate_radial(rs), ls="--", label="Q2")
    ax.set_xlabel("r")
    ax.set_ylabel("potential")
    ax.legend()
    verdict = "member" if report.member else "non-member"
    ax.set_title(f"growth check: {verdict}, fitted exponent {report.tail_exponent:.3f}")
    _save(fig, path)
