import os

import numpy as np
import pytest

import gsblow as gb
from gsblow.cli import main
from gsblow.config import ConfigError, load_config

OSC_CFG = """
[grid]
geometry = cartesian
dim = 1
r_max = 10.0
n = 400

[potential]
kind = "power"
alpha = 2.0
scale = 1.0

[output]
prefix = osc

[tolerances]
eigen_tol = 1e-10
solve_tol = 1e-10
"""

SCALAR_SWEEP_CFG = """
[grid]
geometry = cartesian
r_max = 10.0
n = 400

[potential]
kind = power
alpha = 2.0

[source]
phi_coeff = 1.0
bump_amplitude = 0.3
bump_center = 0.8
bump_width = 0.6

[parameters]
side = below
offset_start = 1e-1
offset_stop = 1e-6
points = 6
estimate_delta = true

[output]
prefix = sc
"""

SWEEP_CFG = """
[grid]
geometry = cartesian
r_max = 10.0
n = 400

[potential]
kind = power
alpha = 2.0

[matrix]
a = 0.0
b = 1.0
c = 1.0
d = 1.0

[source_f1]
phi_coeff = 1.0

[source_f2]
phi_coeff = 1.0

[parameters]
side = below
offset_start = 1e-1
offset_stop = 1e-6
points = 6

[output]
prefix = sw
"""

HYPO_FAIL_CFG = """
[grid]
geometry = radial
dim = 3
r_max = 10.0
n = 600

[potential]
kind = power
alpha = 2.0

[classp]
r0 = 1.0

[output]
prefix = harm
"""

HYPO_PASS_CFG = """
[grid]
geometry = cartesian
dim = 1
r_max = 10.0
n = 600

[potential]
kind = perturbed
base_kind = power
base_alpha = 4.0
sin_amplitude = 0.1

[classp]
r0 = 1.0

[sandwich]
q1_kind = power
q1_alpha = 4.0
q1_scale = 0.9
q2_kind = power
q2_alpha = 4.0
q2_scale = 1.1

[output]
prefix = quart
"""

SYSTEM_CFG = """
[grid]
geometry = cartesian
r_max = 10.0
n = 400

[potential]
kind = power
alpha = 2.0

[matrix]
a = 1.0
b = 1.0
c = -1.0
d = -1.0

[source_f1]
phi_coeff = 1.0

[source_f2]
phi_coeff = 1.0

[parameters]
mu_offset = -1e-2

[output]
prefix = sys
"""


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def _report(tmp_path, prefix):
    return (tmp_path / f"{prefix}_report.txt").read_text()


def _report_value(text, key):
    for line in text.splitlines():
        if line.startswith(key + " = "):
            return line.split(" = ", 1)[1]
    raise KeyError(key)


def test_eigen_command(tmp_path):
    cfg = _write(tmp_path, "osc.cfg", OSC_CFG)
    assert main(["eigen", "--config", cfg, "--out", str(tmp_path)]) == 0
    report = _report(tmp_path, "osc")
    lam = float(_report_value(report, "lambda1"))
    assert abs(lam - 1.0) <= 1e-3
    csv = (tmp_path / "osc_eigen.csv").read_text().splitlines()
    assert csv[0] == "node,r_or_x,phi"
    assert len(csv) == 401
    assert (tmp_path / "osc_eigen.png").exists()
    assert (tmp_path / "osc_plot.gp").exists()


def test_scalar_sweep_command(tmp_path):
    cfg = _write(tmp_path, "sc.cfg", SCALAR_SWEEP_CFG)
    assert main(["scalar", "--config", cfg, "--out", str(tmp_path)]) == 0
    csv = (tmp_path / "sc_scalar.csv").read_text().splitlines()
    assert csv[0] == "sigma,lambda_minus_sigma,u1,x_norm_u,gsp_c,gsn_cprime,residual"
    assert len(csv) == 7
    report = _report(tmp_path, "sc")
    slope = float(_report_value(report, "fitted_slope"))
    assert abs(slope + 1.0) <= 0.02
    delta = float(_report_value(report, "delta_estimate"))
    assert delta > 0.0
    assert (tmp_path / "sc_scalar.png").exists()


def test_scalar_single_sigma(tmp_path):
    text = SCALAR_SWEEP_CFG.replace("side = below", "sigma_offset = -1.0")
    cfg = _write(tmp_path, "sc1.cfg", text)
    assert main(["scalar", "--config", cfg, "--out", str(tmp_path)]) == 0
    report = _report(tmp_path, "sc")
    assert _report_value(report, "certificate_gsp_holds") == "true"


def test_system_command(tmp_path):
    cfg = _write(tmp_path, "sys.cfg", SYSTEM_CFG)
    assert main(["system", "--config", cfg, "--out", str(tmp_path)]) == 0
    report = _report(tmp_path, "sys")
    assert _report_value(report, "case") == "double"
    assert _report_value(report, "theorem") == "thsd"
    csv = (tmp_path / "sys_system.csv").read_text().splitlines()
    assert csv[0] == "node,r_or_x,phi,u1,u2"


def test_sweep_command_and_determinism(tmp_path):
    cfg = _write(tmp_path, "sw.cfg", SWEEP_CFG)
    out1 = tmp_path / "run1"
    out2 = tmp_path / "run2"
    assert main(["sweep", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["sweep", "--config", cfg, "--out", str(out2)]) == 0
    data1 = (out1 / "sw_sweep.csv").read_bytes()
    data2 = (out2 / "sw_sweep.csv").read_bytes()
    assert data1 == data2
    report = (out1 / "sw_report.txt").read_text()
    assert abs(float(_report_value(report, "fitted_slope_u1")) + 1.0) <= 0.02
    assert _report_value(report, "pattern_match") == "true"
    header = data1.decode().splitlines()[0]
    assert header == ("mu,nu_minus_mu,side,u1_ratio_min,u1_ratio_max,"
                      "u2_ratio_min,u2_ratio_max,residual1,residual2")


def test_hypotheses_fail_exit_2(tmp_path):
    cfg = _write(tmp_path, "harm.cfg", HYPO_FAIL_CFG)
    assert main(["hypotheses", "--config", cfg, "--out", str(tmp_path)]) == 2
    report = _report(tmp_path, "harm")
    assert "class P membership: false" in report


def test_hypotheses_sandwich_pass(tmp_path):
    cfg = _write(tmp_path, "quart.cfg", HYPO_PASS_CFG)
    assert main(["hypotheses", "--config", cfg, "--out", str(tmp_path)]) == 0
    report = _report(tmp_path, "quart")
    assert "sandwich holds: true" in report
    c0 = float(_report_value(report, "C0"))
    assert c0 <= 1.23


def test_config_error_missing_section(tmp_path):
    cfg = _write(tmp_path, "bad.cfg", "[grid]\ngeometry = cartesian\nr_max = 10\nn = 100\n")
    assert main(["eigen", "--config", cfg]) == 64


def test_config_error_parse_diagnostic(tmp_path):
    cfg = _write(tmp_path, "broken.cfg", "[grid\ngeometry = cartesian\n")
    with pytest.raises(ConfigError) as info:
        load_config(cfg, "eigen")
    assert "broken.cfg" in str(info.value)
    assert main(["eigen", "--config", cfg]) == 64


def test_config_error_bad_number(tmp_path):
    text = OSC_CFG.replace("alpha = 2.0", "alpha = squiggle")
    cfg = _write(tmp_path, "nan.cfg", text)
    assert main(["eigen", "--config", cfg]) == 64


def test_missing_file_exit_64(tmp_path):
    assert main(["eigen", "--config", str(tmp_path / "nope.cfg")]) == 64


def test_env_out_override(tmp_path, monkeypatch):
    cfg = _write(tmp_path, "osc.cfg", OSC_CFG)
    env_dir = tmp_path / "envout"
    monkeypatch.setenv("GSBLOW_OUT", str(env_dir))
    assert main(["eigen", "--config", cfg, "--out", str(tmp_path / "cliout")]) == 0
    assert (env_dir / "osc_report.txt").exists()
    assert not (tmp_path / "cliout" / "osc_report.txt").exists()


def test_solver_error_exit_1(tmp_path):
    # mu exactly on the pole: solver error surfaces as exit 1
    text = SYSTEM_CFG.replace("mu_offset = -1e-2", "mu_offset = 0.0")
    cfg = _write(tmp_path, "pole.cfg", text)
    assert main(["system", "--config", cfg, "--out", str(tmp_path)]) == 1


def test_operator_dump_option(tmp_path):
    text = OSC_CFG + "\n" + "[output2]\n"
    text = text.replace("prefix = osc", "prefix = osc\ndump_operator = true")
    cfg = _write(tmp_path, "dump.cfg", text)
    assert main(["eigen", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "osc_operator.mtx").exists()


def test_tabulated_source(tmp_path):
    r = np.linspace(0.0, 8.0, 200)
    np.savetxt(tmp_path / "src.csv", np.column_stack([r, np.exp(-r)]),
               delimiter=",")
    grid = gb.build_grid("cartesian", 10.0, 64)
    op = gb.assemble(grid, gb.PotentialSpec.power(2.0))
    gs = gb.ground_state(op)
    spec = gb.SourceSpec(phi_coeff=1.0, tabulated_path=str(tmp_path / "src.csv"))
    f = spec.build(grid, gs)
    assert np.all(f > 0)
    assert f.shape == (grid.total,)
