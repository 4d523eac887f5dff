import numpy as np
import pytest

import gsblow as gb
from conftest import bump_source


# ---------------------------------------------------------------------------
# matrix analysis
# ---------------------------------------------------------------------------

def test_analyze_symmetric_cooperative():
    ma = gb.analyze(gb.CouplingMatrix(0.0, 1.0, 1.0, 0.0))
    assert ma.D == pytest.approx(4.0)
    assert ma.xi1 == pytest.approx(1.0)
    assert ma.xi2 == pytest.approx(-1.0)
    assert ma.case == "distinct"
    assert ma.cooperative
    assert not ma.swapped
    assert np.max(np.abs(ma.P @ ma.J @ ma.Pinv - ma.matrix.as_array())) <= 1e-12


def test_analyze_defective():
    ma = gb.analyze(gb.CouplingMatrix(1.0, 1.0, -1.0, -1.0))
    assert ma.D == pytest.approx(0.0, abs=1e-14)
    assert ma.case == "double"
    assert ma.xi1 == pytest.approx(0.0)
    assert not ma.cooperative
    assert np.allclose(ma.P, [[1.0, 1.0], [-1.0, 0.0]])
    assert np.allclose(ma.J, [[0.0, 1.0], [0.0, 0.0]])
    assert np.max(np.abs(ma.P @ ma.J @ ma.Pinv - ma.matrix.as_array())) <= 1e-12
    assert np.max(np.abs(ma.Pinv @ ma.P - np.eye(2))) <= 1e-13


def test_analyze_degenerate_rejected():
    with pytest.raises(gb.DegenerateMatrixError):
        gb.analyze(gb.CouplingMatrix(2.0, 1.0, 0.0, 2.0))


def test_analyze_guards():
    with pytest.raises(ValueError):
        gb.analyze(gb.CouplingMatrix(0.0, 1.0, -1.0, 0.0))  # D = -4
    with pytest.raises(ValueError):
        gb.analyze(gb.CouplingMatrix(0.0, -1.0, -1.0, 0.0))  # both offdiag <= 0


def test_analyze_row_swap_normalisation():
    ma = gb.analyze(gb.CouplingMatrix(2.0, -0.25, 1.0, 0.0))
    assert ma.swapped
    assert ma.matrix.b == pytest.approx(1.0)
    assert ma.D == pytest.approx(3.0)
    recon = ma.P @ ma.J @ ma.Pinv
    assert np.max(np.abs(recon - ma.matrix.as_array())) <= 1e-12


def test_jordan_reconstruction_random():
    rng = np.random.default_rng(42)
    checked = 0
    while checked < 200:
        a, d = rng.uniform(-3, 3, 2)
        b = rng.uniform(0.1, 3.0)
        if rng.uniform() < 0.5:
            c = rng.uniform(0.0, 3.0)
        else:
            if abs(a - d) < 0.5:
                continue
            c = -rng.uniform(0.05, 0.95) * (a - d) ** 2 / (4 * b)
        A = gb.CouplingMatrix(a, b, c, d)
        if A.discriminant < 0.01:
            continue
        ma = gb.analyze(A)
        assert np.max(np.abs(ma.P @ ma.J @ ma.Pinv - A.as_array())) <= 1e-12
        assert np.max(np.abs(ma.Pinv @ ma.P - np.eye(2))) <= 1e-13
        checked += 1


def test_double_case_never_cooperative():
    rng = np.random.default_rng(9)
    for _ in range(100):
        a, d = rng.uniform(-3, 3, 2)
        if abs(a - d) < 0.5:
            continue
        b = rng.uniform(0.1, 3.0)
        ma = gb.analyze(gb.CouplingMatrix(a, b, -(a - d) ** 2 / (4 * b), d))
        assert ma.case == "double"
        assert not ma.cooperative


# ---------------------------------------------------------------------------
# principal pair
# ---------------------------------------------------------------------------

def test_principal_pair_oscillator(osc2000):
    grid, op, gs = osc2000
    ma = gb.analyze(gb.CouplingMatrix(0.0, 1.0, 1.0, 0.0))
    pair = gb.principal_pair(gs, ma, op)
    assert pair.nu == pytest.approx(gs.lambda1 - 1.0, abs=1e-12)
    assert abs(pair.nu) <= 2e-4
    assert pair.residual <= 1e-8


def test_principal_pair_double(osc2000):
    grid, op, gs = osc2000
    ma = gb.analyze(gb.CouplingMatrix(1.0, 1.0, -1.0, -1.0))
    pair = gb.principal_pair(gs, ma, op)
    assert pair.nu == pytest.approx(gs.lambda1)
    assert pair.residual <= 1e-8
    assert np.allclose(pair.mode1, gs.phi)
    assert np.allclose(pair.mode2, -gs.phi)


# ---------------------------------------------------------------------------
# solves
# ---------------------------------------------------------------------------

def test_distinct_eigenvector_source(osc2000):
    grid, op, gs = osc2000
    ma = gb.analyze(gb.CouplingMatrix(0.0, 1.0, 1.0, 1.0))
    nu = gs.lambda1 - ma.xi1
    X = ma.X
    mu = nu - 0.02
    prob = gb.SystemProblem.build(gs, mu, X[0] * gs.phi, X[1] * gs.phi)
    sol = gb.solve_distinct(op, gs, ma, prob)
    factor = 1.0 / (nu - mu)
    assert gb.x_norm(sol.u1 - factor * X[0] * gs.phi, gs) <= 1e-7 * factor
    assert gb.x_norm(sol.u2 - factor * X[1] * gs.phi, gs) <= 1e-7 * factor


def test_distinct_pole_named(osc2000):
    _, op, gs = osc2000
    ma = gb.analyze(gb.CouplingMatrix(0.0, 1.0, 1.0, 1.0))
    nu = gs.lambda1 - ma.xi1
    prob = gb.SystemProblem.build(gs, nu, gs.phi, gs.phi)
    with pytest.raises(gb.PoleError, match="k = 1"):
        gb.solve_distinct(op, gs, ma, prob)


def test_double_hand_arithmetic(osc2000):
    grid, op, gs = osc2000
    ma = gb.analyze(gb.CouplingMatrix(1.0, 1.0, -1.0, -1.0))
    nu = gs.lambda1
    mu = nu - 1e-2
    prob = gb.SystemProblem.build(gs, mu, gs.phi, gs.phi)
    sol = gb.solve_double(op, gs, ma, prob)
    # tilde_f2 = 2 phi, tilde_f1 = -phi; pure phi-modes throughout
    assert gb.x_norm(sol.tilde_u2 - 200.0 * gs.phi, gs) <= 1e-10 * 200.0
    assert gb.x_norm(sol.tilde_u1 - 19900.0 * gs.phi, gs) <= 1e-10 * 19900.0
    assert gb.x_norm(sol.u1 - 20100.0 * gs.phi, gs) <= 1e-10 * 20100.0
    assert gb.x_norm(sol.u2 + 19900.0 * gs.phi, gs) <= 1e-10 * 19900.0
    assert sol.residual1 <= 1e-10
    assert sol.residual2 <= 1e-10


def test_reconstruction_from_transformed(osc2000):
    grid, op, gs = osc2000
    ma = gb.analyze(gb.CouplingMatrix(0.0, 1.0, 1.0, 1.0))
    nu = gs.lambda1 - ma.xi1
    f1 = bump_source(grid, gs)
    f2 = gs.phi.copy()
    prob = gb.SystemProblem.build(gs, nu - 0.05, f1, f2)
    sol = gb.solve_distinct(op, gs, ma, prob)
    U = ma.P @ np.vstack([sol.tilde_u1, sol.tilde_u2])
    assert np.max(np.abs(U[0] - sol.u1)) <= 1e-10 * np.max(np.abs(sol.u1))
    assert np.max(np.abs(U[1] - sol.u2)) <= 1e-10 * np.max(np.abs(sol.u2))


def _random_admissible(rng, case, gs):
    while True:
        a, d = rng.uniform(-2, 2, 2)
        b = rng.uniform(0.2, 2.0)
        if case == "cooperative":
            c = rng.uniform(0.05, 2.0)
        elif case == "noncooperative":
            if abs(a - d) < 0.5:
                continue
            c = -rng.uniform(0.05, 0.9) * (a - d) ** 2 / (4 * b)
        else:
            if abs(a - d) < 0.5:
                continue
            c = -(a - d) ** 2 / (4 * b)
        A = gb.CouplingMatrix(a, b, c, d)
        if case != "double" and A.discriminant < 0.05:
            continue
        ma = gb.analyze(A)
        nu = gs.lambda1 - ma.xi1
        # stay clear of both poles and the deflation bound
        mu = nu - rng.uniform(0.1, 0.4) * gs.gap
        ok = True
        for xi in (ma.xi1, ma.xi2):
            sig = xi + mu
            if abs(gs.lambda1 - sig) < 0.05 or sig > gs.lambda2 - 0.1 * gs.gap:
                ok = False
        if ok:
            return ma, mu


def test_oracle_equivalence_all_cases(quartic200):
    grid, op, gs = quartic200
    rng = np.random.default_rng(777)
    for case in ("cooperative", "noncooperative", "double"):
        for _ in range(4):
            ma, mu = _random_admissible(rng, case, gs)
            f1 = rng.uniform(-1, 1) * gs.phi + gb.gaussian_bump(
                grid, rng.uniform(-1, 1), rng.uniform(0.4, 0.8), rng.uniform(-.5, .5))
            f2 = rng.uniform(-1, 1) * gs.phi + gb.gaussian_bump(
                grid, rng.uniform(-1, 1), rng.uniform(0.4, 0.8), rng.uniform(-.5, .5))
            prob = gb.SystemProblem.build(gs, mu, f1, f2)
            sj = gb.solve_system(op, gs, ma, prob)
            sd = gb.solve_direct_coupled(op, gs, ma, prob)
            for uj, ud in ((sj.u1, sd.u1), (sj.u2, sd.u2)):
                assert gb.x_norm(uj - ud, gs) <= 1e-8 * gb.x_norm(ud, gs)


def test_row_swap_covariance(quartic200):
    grid, op, gs = quartic200
    A = gb.CouplingMatrix(0.0, 1.0, 1.0, 1.0)
    Aswap = A.swapped()
    f1 = bump_source(grid, gs, amplitude=0.4)
    f2 = gs.phi.copy()
    ma = gb.analyze(A)
    nu = gs.lambda1 - ma.xi1
    mu = nu - 0.1
    sol = gb.solve_system(op, gs, ma, gb.SystemProblem.build(gs, mu, f1, f2))
    ma_s = gb.analyze(Aswap)
    sol_s = gb.solve_system(op, gs, ma_s, gb.SystemProblem.build(gs, mu, f2, f1))
    scale = np.max(np.abs(sol.u1))
    assert np.max(np.abs(sol_s.u2 - sol.u1)) <= 1e-10 * scale
    assert np.max(np.abs(sol_s.u1 - sol.u2)) <= 1e-10 * scale


def test_direct_coupled_zero_source(quartic200):
    grid, op, gs = quartic200
    ma = gb.analyze(gb.CouplingMatrix(0.0, 1.0, 1.0, 1.0))
    nu = gs.lambda1 - ma.xi1
    prob = gb.SystemProblem.build(gs, nu - 0.2, np.zeros(grid.total),
                                  np.zeros(grid.total))
    sol = gb.solve_direct_coupled(op, gs, ma, prob)
    assert np.max(np.abs(sol.u1)) <= 1e-12
    assert np.max(np.abs(sol.u2)) <= 1e-12


# ---------------------------------------------------------------------------
# theorem conditions
# ---------------------------------------------------------------------------

def test_conditions_thss_main(osc2000):
    grid, op, gs = osc2000
    ma = gb.analyze(gb.CouplingMatrix(0.0, 1.0, 1.0, 1.0))
    prob = gb.SystemProblem.build(gs, 0.0, gs.phi, gs.phi)
    rep = gb.check_theorem_conditions(ma, prob, gs)
    assert rep.branch == "thss"
    assert rep.hf1_ok and rep.hf2_ok
    # (xi2 - a) f1 < b f2 holds: condition value = (a - xi2) f1 + b f2 > 0
    assert rep.condition_value == pytest.approx(1.0 - ma.xi2, rel=1e-6)
    assert rep.predicted_below == (1, 1)
    assert rep.predicted_above == (-1, -1)


def test_conditions_thsd(osc2000):
    grid, op, gs = osc2000
    ma = gb.analyze(gb.CouplingMatrix(1.0, 1.0, -1.0, -1.0))
    prob = gb.SystemProblem.build(gs, 0.0, gs.phi, gs.phi)
    rep = gb.check_theorem_conditions(ma, prob, gs)
    assert rep.branch == "thsd"
    assert rep.condition_value == pytest.approx(2.0, rel=1e-6)
    assert rep.predicted_below == (1, -1)
    assert rep.predicted_above == (1, -1)  # even double pole, no reversal
    assert rep.note != ""


def test_conditions_inconclusive(osc2000, osc2000_pairs):
    grid, op, gs = osc2000
    ma = gb.analyze(gb.CouplingMatrix(0.0, 1.0, 1.0, 0.0))
    # f1 with zero phi-projection and f2 = 0 drives the margin to zero
    phi2 = osc2000_pairs[1].vector
    prob = gb.SystemProblem.build(gs, 0.0, phi2, np.zeros_like(phi2))
    rep = gb.check_theorem_conditions(ma, prob, gs)
    assert rep.branch == "inconclusive"
    assert not rep.hf1_ok


def test_conditions_remark_branch(osc2000):
    grid, op, gs = osc2000
    # d - a < 0 and non-cooperative: mixed blow-up pattern
    ma = gb.analyze(gb.CouplingMatrix(1.0, 1.0, -0.05, 0.5))
    assert ma.xi1 - 1.0 < 0.0
    prob = gb.SystemProblem.build(gs, 0.0, gs.phi, gs.phi)
    rep = gb.check_theorem_conditions(ma, prob, gs)
    assert rep.branch == "thss_remark"
    assert rep.predicted_below == (1, -1)
    assert rep.predicted_above == (-1, 1)


def test_sign_pattern_matches_prediction(osc2000):
    grid, op, gs = osc2000
    cases = [
        gb.CouplingMatrix(0.0, 1.0, 1.0, 1.0),    # thss, both positive below
        gb.CouplingMatrix(1.0, 1.0, -0.05, 0.5),  # remark, mixed
        gb.CouplingMatrix(1.0, 1.0, -1.0, -1.0),  # thsd, mixed both sides
    ]
    f1, f2 = gs.phi, gs.phi
    for A in cases:
        ma = gb.analyze(A)
        nu = gs.lambda1 - ma.xi1
        rep = gb.check_theorem_conditions(
            ma, gb.SystemProblem.build(gs, 0.0, f1, f2), gs)
        for side, predicted in (("below", rep.predicted_below),
                                ("above", rep.predicted_above)):
            mu = nu - 1e-4 if side == "below" else nu + 1e-4
            sol = gb.solve_system(op, gs, ma,
                                  gb.SystemProblem.build(gs, mu, f1, f2))
            for stats, expect in ((sol.stats1, predicted[0]),
                                  (sol.stats2, predicted[1])):
                if expect > 0:
                    assert stats.ratio_min > 0.0
                elif expect < 0:
                    assert stats.ratio_max < 0.0


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def test_sweep_eigenvector_source_exact_slope(osc2000):
    grid, op, gs = osc2000
    ma = gb.analyze(gb.CouplingMatrix(0.0, 1.0, 1.0, 1.0))
    nu = gs.lambda1 - ma.xi1
    X = ma.X
    F = (X[0] * gs.phi, X[1] * gs.phi)
    result = gb.blowup_sweep(op, gs, ma, F, gb.make_schedule(nu, "below"))
    assert result.fitted_slope[0] == pytest.approx(-1.0, abs=1e-6)
    assert result.fitted_slope[1] == pytest.approx(-1.0, abs=1e-6)
    assert result.sign_pattern == "++"


def test_sweep_gamma_matches_transform_coefficient(osc2000):
    # gamma for u1 approaches b * (tilde_f1 projection) for F = (phi, phi)
    grid, op, gs = osc2000
    ma = gb.analyze(gb.CouplingMatrix(0.0, 1.0, 1.0, 1.0))
    nu = gs.lambda1 - ma.xi1
    result = gb.blowup_sweep(op, gs, ma, (gs.phi, gs.phi),
                             gb.make_schedule(nu, "below"))
    tf1 = ((ma.matrix.a - ma.xi2) * 1.0 + ma.matrix.b * 1.0) \
        / (ma.matrix.b * (ma.xi1 - ma.xi2))
    gamma_theory = ma.matrix.b * tf1
    assert result.gamma_est[0] == pytest.approx(gamma_theory, rel=0.05)
    assert result.fitted_slope[0] == pytest.approx(-1.0, abs=0.01)


def test_sweep_schedule_validation(osc2000):
    _, op, gs = osc2000
    ma = gb.analyze(gb.CouplingMatrix(0.0, 1.0, 1.0, 1.0))
    nu = gs.lambda1 - ma.xi1
    F = (gs.phi, gs.phi)
    with pytest.raises(ValueError, match="one side"):
        gb.blowup_sweep(op, gs, ma, F, [nu - 1e-2, nu + 1e-2, nu - 1e-4,
                                        nu - 1e-5, nu - 1e-6])
    with pytest.raises(ValueError, match="four decades"):
        gb.blowup_sweep(op, gs, ma, F, [nu - 1e-2, nu - 1e-3, nu - 1e-4])


def test_sweep_abort_partial(osc2000):
    _, op, gs = osc2000
    ma = gb.analyze(gb.CouplingMatrix(0.0, 1.0, 1.0, 1.0))
    nu = gs.lambda1 - ma.xi1
    # ascending distances; the last mu violates the deflation bound
    schedule = [nu + 1e-5, nu + 1e-3, nu + 0.05, nu + 2.5]
    with pytest.raises(gb.SweepAborted) as info:
        gb.blowup_sweep(op, gs, ma, (gs.phi, gs.phi), schedule)
    assert len(info.value.partial.records) == 3


def test_sweep_threads_deterministic(osc2000):
    grid, op, gs = osc2000
    ma = gb.analyze(gb.CouplingMatrix(0.0, 1.0, 1.0, 1.0))
    nu = gs.lambda1 - ma.xi1
    sched = gb.make_schedule(nu, "below")
    r1 = gb.blowup_sweep(op, gs, ma, (gs.phi, gs.phi), sched, threads=1)
    r2 = gb.blowup_sweep(op, gs, ma, (gs.phi, gs.phi), sched, threads=3)
    for a, b in zip(r1.records, r2.records):
        assert a == b
