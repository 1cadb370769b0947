import io
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tailsitter.aero import (V_EPS, AnalyticAeroModel, VehicleParams, aero_force_body, aero_moment_body, airflow,
                             airflow_from_state, dfa_dvab, load_coefficient_table, write_coefficient_table)
from tailsitter.dynamics import VehicleState
from tailsitter.errors import DegenerateSpeedError, DomainError, SymmetrizationWarning, TableParseError
from tailsitter.so3 import exp_map, random_rotation

angle = st.floats(-np.pi, np.pi, allow_nan=False)
small_beta = st.floats(-1.2, 1.2, allow_nan=False)


def _flow(alpha, beta, V):
    vb = V * np.array([np.cos(alpha) * np.cos(beta), np.sin(beta), np.sin(alpha) * np.cos(beta)])
    return airflow(np.eye(3), vb)


def test_airflow_examples():
    f = airflow(np.eye(3), [8.0, 0, 0])
    assert (f.alpha, f.beta, f.speed) == (0.0, 0.0, 8.0)
    f = airflow(np.eye(3), [0.0, 0, -5.0])
    np.testing.assert_allclose(f.alpha, -np.pi / 2)
    f = airflow(np.eye(3), [8.0, 0, 0], wind=[1.0, 0, 0])
    np.testing.assert_allclose([f.speed, f.alpha], [7.0, 0.0])
    state = VehicleState(np.zeros(3), np.array([8.0, 0, 0]), np.eye(3), np.zeros(3))
    assert airflow_from_state(state).speed == 8.0


def test_airflow_low_speed_fallback():
    f = airflow(np.eye(3), [0.01, 0, 0])
    assert (f.alpha, f.beta) == (np.pi / 2, 0.0)
    f = airflow(np.eye(3), [0.01, 0, 0], previous=(0.3, 0.1))
    assert (f.alpha, f.beta) == (0.3, 0.1)


@given(st.floats(-20, 20), st.floats(-20, 20), st.floats(-20, 20))
def test_airflow_invariants(x, y, z):
    R = exp_map(np.array([0.3, -0.2, 1.0]))
    v = np.array([x, y, z])
    f = airflow(R, v, wind=[0.5, 0, 0])
    np.testing.assert_allclose(f.v_air_body, R.T @ (v - [0.5, 0, 0]), atol=1e-12)
    np.testing.assert_allclose(f.speed, np.linalg.norm(f.v_air_body), atol=1e-12)
    if f.speed > V_EPS:
        vb = f.v_air_body
        rebuilt = f.speed * np.array([np.cos(f.alpha) * np.cos(f.beta), np.sin(f.beta),
                                      np.sin(f.alpha) * np.cos(f.beta)])
        np.testing.assert_allclose(rebuilt, vb, atol=1e-9)


def test_analytic_examples(model):
    c = model.coefficients(np.pi / 2, 0.0)
    np.testing.assert_allclose(c.Cz, -(model.cd0 + model.cd90), atol=1e-15)
    for a in np.linspace(-np.pi, np.pi, 37):
        c = model.coefficients(a, 0.0)
        assert c.Cy == 0.0
        assert c.dC_dbeta[0] == 0.0 and c.dC_dbeta[2] == 0.0
        assert c.Cl == 0.0 and c.Cn == 0.0


@given(angle, small_beta)
def test_analytic_partials_match_finite_differences(model, alpha, beta):
    h = 1e-6
    c = model.coefficients(alpha, beta)
    cap = model.coefficients(alpha + h, beta)
    cam = model.coefficients(alpha - h, beta)
    cbp = model.coefficients(alpha, beta + h)
    cbm = model.coefficients(alpha, beta - h)
    np.testing.assert_allclose(c.dC_dalpha, (cap.C - cam.C) / (2 * h), atol=1e-6)
    np.testing.assert_allclose(c.dC_dbeta, (cbp.C - cbm.C) / (2 * h), atol=1e-6)
    # second derivatives from first derivatives, relative 1e-4
    d2 = (cap.dC_dalpha - cam.dC_dalpha) / (2 * h)
    np.testing.assert_allclose(c.d2C_dalpha2, d2, rtol=1e-4, atol=1e-6)
    dab = (cap.dC_dbeta - cam.dC_dbeta) / (2 * h)
    np.testing.assert_allclose(c.d2C_dbeta_dalpha, dab, rtol=1e-4, atol=1e-6)


@given(angle, st.floats(0.0, 1.2))
def test_lateral_symmetry(model, alpha, beta):
    cp, cm = model.coefficients(alpha, beta), model.coefficients(alpha, -beta)
    np.testing.assert_allclose([cp.Cx, cp.Cz, cp.Cm], [cm.Cx, cm.Cz, cm.Cm], atol=1e-14)
    np.testing.assert_allclose([cp.Cy, cp.Cl, cp.Cn], [-cm.Cy, -cm.Cl, -cm.Cn], atol=1e-14)


def test_force_matches_lift_drag_decomposition(params, model):
    """Body force equals -D x_w - L z_w + Y y_w with the usual wind axes."""
    alpha, V = np.radians(10.0), 8.0
    flow = _flow(alpha, 0.0, V)
    q = 0.5 * params.rho * V**2 * params.wing_area
    k = 0.5 * model.lift_slope
    CL = k * np.sin(2 * alpha)
    CD = model.cd0 + model.cd90 * np.sin(alpha) ** 2
    drag_dir = flow.v_air_body / V
    lift_dir = np.array([np.sin(alpha), 0.0, -np.cos(alpha)])
    expected = q * (CL * lift_dir - CD * drag_dir)
    np.testing.assert_allclose(aero_force_body(flow, params, model), expected, rtol=1e-12, atol=1e-12)


def test_force_and_moment_scaling(params, model):
    f0 = _flow(0.3, 0.0, 0.0)
    np.testing.assert_array_equal(aero_force_body(f0, params, model), 0.0)
    np.testing.assert_array_equal(aero_moment_body(f0, params, model), 0.0)
    f1, f2 = _flow(0.3, 0.1, 5.0), _flow(0.3, 0.1, 10.0)
    np.testing.assert_allclose(aero_force_body(f2, params, model), 4 * aero_force_body(f1, params, model))
    m = aero_moment_body(_flow(0.4, 0.0, 6.0), params, model)
    assert m[0] == 0 and m[2] == 0 and m[1] != 0


def test_moment_formula(params, model):
    flow = _flow(0.4, 0.2, 7.0)
    c = model.coefficients(0.4, 0.2)
    q = 0.5 * params.rho * 49.0 * params.wing_area
    np.testing.assert_allclose(aero_moment_body(flow, params, model),
                               q * np.array([params.span * c.Cl, params.chord * c.Cm, params.span * c.Cn]))


def test_dfa_dvab_matches_finite_differences(params, model, rng):
    h = 1e-6
    worst = 0.0
    for _ in range(100):
        alpha, V = rng.uniform(-np.pi, np.pi), rng.uniform(1.0, 25.0)
        flow = _flow(alpha, 0.0, V)
        J = dfa_dvab(flow, params, model)
        fd = np.column_stack([
            (aero_force_body(airflow(np.eye(3), flow.v_air_body + h * e), params, model)
             - aero_force_body(airflow(np.eye(3), flow.v_air_body - h * e), params, model)) / (2 * h)
            for e in np.eye(3)
        ])
        worst = max(worst, np.max(np.abs(J - fd)) / np.max(np.abs(fd)))
    assert worst < 1e-5


def test_dfa_dvab_structure(params, model):
    V = 9.0
    flow = _flow(0.0, 0.0, V)
    c = model.coefficients(0.0, 0.0)
    J = dfa_dvab(flow, params, model)
    q = params.qbar_factor
    # lateral column: only the sideslip slope acts
    np.testing.assert_allclose(J[:, 1], q * V * c.dC_dbeta, atol=1e-12)
    # aligned flow: first column is rho S C V
    np.testing.assert_allclose(J[:, 0], params.rho * params.wing_area * c.C * V, atol=1e-12)


def test_dfa_dvab_degenerate(params, model):
    flow = _flow(0.3, 0.0, 0.05)
    with pytest.raises(DegenerateSpeedError):
        dfa_dvab(flow, params, model)
    np.testing.assert_array_equal(dfa_dvab(flow, params, model, allow_degenerate=True), 0.0)


def test_vehicle_params_validation():
    with pytest.raises(DomainError):
        VehicleParams(mass=-1.0)
    with pytest.raises(DomainError):
        VehicleParams(inertia=np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(DomainError):
        VehicleParams(inertia=np.array([[1.0, 0.1, 0], [0, 1, 0], [0, 0, 1]]))
    np.testing.assert_array_equal(VehicleParams().gravity, [0, 0, 9.8])


# ---------------------------------------------------------------------------
# coefficient tables


def _table_text(model, betas=np.arange(-90, 91, 10)):
    buf = io.StringIO()
    write_coefficient_table(model, buf, betas_deg=betas)
    return buf.getvalue()


def test_table_reproduces_model_on_grid(model):
    table = load_coefficient_table(_table_text(model).encode())
    for a_deg in (-170, -40, 0, 20, 90, 130):
        for b_deg in (-30, 0, 20):
            a, b = np.radians(a_deg), np.radians(b_deg)
            ct, cm = table.coefficients(a, b), model.coefficients(a, b)
            np.testing.assert_allclose(ct.C, cm.C, atol=1e-10)
            np.testing.assert_allclose([ct.Cl, ct.Cm, ct.Cn], [cm.Cl, cm.Cm, cm.Cn], atol=1e-10)


def test_table_between_grid_and_partials(model):
    table = load_coefficient_table(io.StringIO(_table_text(model)))
    a, b = np.radians(23.0), np.radians(7.0)
    np.testing.assert_allclose(table.coefficients(a, b).C, model.coefficients(a, b).C, atol=5e-3)
    c = table.coefficients(a, 0.0)
    assert c.Cy == 0.0 and c.dC_dbeta[0] == 0.0 and c.dC_dbeta[2] == 0.0
    h = 1e-6
    fd = (table.coefficients(a + h, b).C - table.coefficients(a - h, b).C) / (2 * h)
    np.testing.assert_allclose(table.coefficients(a, b).dC_dalpha, fd, atol=1e-6)
    fd2 = (table.coefficients(a + h, b).dC_dalpha - table.coefficients(a - h, b).dC_dalpha) / (2 * h)
    np.testing.assert_allclose(table.coefficients(a, b).d2C_dalpha2, fd2, rtol=1e-4, atol=1e-5)


def test_table_full_grid_and_out_of_domain(model):
    table = load_coefficient_table(_table_text(model, np.arange(-180, 181, 10)).encode())
    table.coefficients(np.radians(185.0), 0.0)  # alpha wraps on a full-turn grid
    small = load_coefficient_table(_table_text(model, np.arange(-30, 31, 10)).encode())
    with pytest.raises(DomainError):
        small.coefficients(0.1, np.radians(45.0))


def test_table_missing_cell_names_hole(model):
    lines = _table_text(model).splitlines()
    dropped = [ln for ln in lines if not ln.startswith("20,10,")]
    with pytest.raises(TableParseError, match=r"missing cell \(alpha, beta\) = \(20, 10\)"):
        load_coefficient_table("\n".join(dropped).encode())


@pytest.mark.parametrize("bad, row", [("nan", 3), ("abc", 3)])
def test_table_bad_value_reports_row(model, bad, row):
    lines = _table_text(model).splitlines()
    fields = lines[row].split(",")
    fields[4] = bad
    lines[row] = ",".join(fields)
    with pytest.raises(TableParseError) as exc:
        load_coefficient_table("\n".join(lines).encode())
    assert exc.value.row == row


def test_table_off_grid_and_header(model):
    lines = _table_text(model).splitlines()
    lines[5] = "15" + lines[5][lines[5].index(","):]
    with pytest.raises(TableParseError):
        load_coefficient_table("\n".join(lines).encode())
    with pytest.raises(TableParseError):
        load_coefficient_table(b"a,b,c\n1,2,3\n")


def test_table_symmetrization_warns(model):
    lines = _table_text(model).splitlines()
    header = lines[0].split(",")
    iy = header.index("CY")
    out = [lines[0]]
    for ln in lines[1:]:
        f = ln.split(",")
        if float(f[0]) == 20.0 and float(f[1]) == 10.0:
            cy_pos = float(f[iy])
            f[iy] = repr(cy_pos + 0.2)
        out.append(",".join(f))
    with pytest.warns(SymmetrizationWarning):
        table = load_coefficient_table("\n".join(out).encode())
    # symmetrised value is (CY(a,b) - CY(a,-b)) / 2
    cy_neg = model.coefficients(np.radians(20), np.radians(-10)).Cy
    expected = 0.5 * ((cy_pos + 0.2) - cy_neg)
    np.testing.assert_allclose(table.coefficients(np.radians(20), np.radians(10)).Cy, expected, atol=1e-9)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        load_coefficient_table(_table_text(model).encode())


def test_random_rotation_airflow_speed(params, model, rng):
    for _ in range(20):
        R = random_rotation(rng)
        v = rng.normal(size=3) * 5
        f = airflow(R, v)
        np.testing.assert_allclose(np.linalg.norm(aero_force_body(f, params, model)),
                                   params.qbar_factor * f.speed**2 * np.linalg.norm(model.coefficients(f.alpha, f.beta).C))


@given(angle)
def test_analytic_cz_fast_path_matches_generic(alpha):
    m = AnalyticAeroModel()
    c = m.coefficients(alpha, 0.0)
    np.testing.assert_allclose(m.cz_and_slope(alpha), (c.C[2], c.dC_dalpha[2]), atol=1e-12)
