import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sbenpy.dynamics import OracleConfig, oracle_trajectory, symplectic_gradient, velocity_split
from sbenpy.errors import AdmissibilityError, SolverError
from sbenpy.extended import INF, is_inf
from sbenpy.functional import (
    PathCoordinates,
    StepSpace,
    assemble_functional,
    irreversible_defect,
    minimize_global,
    minimize_incremental,
    residual_profile,
    step_residual,
)
from sbenpy.path import DiscretePath, uniform_times
from sbenpy.scenarios import (
    HalfSine,
    OscillatorParams,
    PiecewiseLinear,
    ReversibleParams,
    SliderParams,
    build_coulomb_slider,
    build_elastoplastic_oscillator,
    build_reversible_oscillator,
    oscillator_coordinates,
    stress_path,
)
from sbenpy.symplectic import PhaseVector, omega

PULSE = OscillatorParams(load=(HalfSine(2.0, 3.0),))
OSC = build_elastoplastic_oscillator(PULSE)
REV = build_reversible_oscillator(ReversibleParams())


def oracle(s, dt, t_end):
    return oracle_trajectory(s.system, s.law, s.z0, OracleConfig(dt=dt, t_end=t_end), constraint=s.constraint)


# --- paths -------------------------------------------------------------------------


def test_path_validation():
    z = PhaseVector([0.0], [0.0])
    with pytest.raises(AdmissibilityError):
        DiscretePath([0.0], (z,), z)
    with pytest.raises(AdmissibilityError):
        DiscretePath([0.0, 0.0], (z, z), z)
    with pytest.raises(AdmissibilityError):
        DiscretePath([0.0, 1.0], (z,), z)
    with pytest.raises(AdmissibilityError):
        DiscretePath([0.0, 1.0], (z, PhaseVector([0.0, 1.0], [0.0, 1.0])), z)


def test_uniform_times():
    assert uniform_times(0.5, 2.0).tolist() == [0.0, 0.5, 1.0, 1.5, 2.0]
    with pytest.raises(ValueError):
        uniform_times(1.0, 0.2)


def test_wrong_initial_condition_is_rejected_before_assembly():
    path = oracle(REV, 0.1, 1.0)
    moved = path.replace_nodes((PhaseVector([0.9], [0.0]),) + path.nodes[1:])
    with pytest.raises(AdmissibilityError):
        assemble_functional(moved, REV.law, REV.system)


def test_constraint_violation_is_rejected():
    path = oracle(OSC, 0.1, 2.0)
    nodes = list(path.nodes)
    z = nodes[3]
    nodes[3] = PhaseVector(z.x, z.y + np.array([1e-3, 0.0]))  # momentum off the equation of motion
    with pytest.raises(AdmissibilityError):
        path.replace_nodes(nodes).check_admissible()


# --- step residuals ----------------------------------------------------------------


def test_reversible_oracle_step_is_extremal():
    path = oracle(REV, 0.01, 0.5)
    for k, t0, z0, t1, z1 in path.steps():
        assert step_residual(REV.law, REV.system, z0, z1, t0, t1, k).gap <= 1e-10


def test_frozen_step_hits_the_indicator():
    z = PhaseVector([1.0], [0.0])
    r = step_residual(REV.law, REV.system, z, z, 0.0, 0.01)
    assert r.gap is INF and r.dissipation_term is INF


def test_step_residual_needs_increasing_times():
    z = PhaseVector([1.0], [0.0])
    with pytest.raises(ValueError):
        step_residual(REV.law, REV.system, z, z, 0.1, 0.1)


def test_plastic_oracle_steps_are_extremal():
    cfg = OracleConfig(dt=0.01, t_end=6.0)
    path = oracle(OSC, cfg.dt, cfg.t_end)
    prof = residual_profile(path, OSC.system, OSC.law)
    assert any(r.dissipates for r in prof)
    for r in prof:
        assert abs(r.gap) <= cfg.inner_tol * cfg.dt * max(1.0, r.dissipation_term / cfg.dt)


@given(st.floats(-1.0, 1.0), st.floats(0.0, 6.0), st.floats(1e-3, 0.2))
def test_residual_nonnegative_for_admissible_oscillator_increments(sigma, t0, dt):
    path = oracle(OSC, 0.05, 6.0)
    k = min(int(t0 / 0.05), path.n_steps - 1)
    space = OSC.step_space(path.times[k], path.nodes[k], dt)
    z1 = space.node(np.array([sigma]))
    r = step_residual(OSC.law, OSC.system, path.nodes[k], z1, path.times[k], path.times[k] + dt)
    assert not is_inf(r.gap)
    assert r.gap >= -1e-9


@given(st.floats(0.0, 1.0), st.floats(-np.pi, np.pi), st.floats(0.0, 3.0))
def test_residual_nonnegative_for_admissible_slider_increments(radius_frac, ang, t0):
    s = build_coulomb_slider(SliderParams(stiffness=(4.0, 2.0), drive=(PiecewiseLinear([0, 3], [0, 2]), 0.5)))
    z0 = PhaseVector([0.1, -0.2, 0.0], [0.3, 0.1, 0.0])
    space = s.step_space(t0, z0, 0.01)
    th = np.array([radius_frac * space.upper[0], space.start[1] + ang])
    r = step_residual(s.law, s.system, z0, space.node(th), t0, t0 + 0.01)
    assert not is_inf(r.gap)
    assert r.gap >= -1e-9


@given(st.lists(st.floats(-2, 2), min_size=8, max_size=8), st.floats(0.0, 5.0), st.floats(1e-3, 0.5))
def test_antisymmetry_reduction(v, t, dt):
    z0 = PhaseVector.from_flat(np.array(v[:4]))
    z1 = PhaseVector.from_flat(np.array(v[4:]))
    z_dot = (z1 - z0) / dt
    xh = symplectic_gradient(OSC.system, t + dt, z1)
    _, z_irr = velocity_split(z_dot, xh)
    lhs, rhs = -omega(z_irr, z_dot), omega(xh, z_dot)
    # round-off of the cancelled omega(z_dot, z_dot) scales with |z_dot| |z_I|
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, z_dot.norm() * (z_irr.norm() + xh.norm()))


# --- assembly ----------------------------------------------------------------------


def test_oracle_paths_have_vanishing_functional():
    for s, dt, t_end in ((OSC, 0.01, 6.0), (REV, 0.01, 2.0)):
        cfg = OracleConfig(dt=dt, t_end=t_end)
        path = oracle(s, dt, t_end)
        pi, prof = assemble_functional(path, s.law, s.system)
        assert pi <= path.n_steps * cfg.inner_tol * dt
        assert len(prof) == path.n_steps


def test_analytic_reversible_path_residual_is_first_order():
    # the analytic flow is not a discrete extremal: b_0 sees a nonzero z_I, so Pi is +inf
    # and the finite defect sum dt ||z_dot - X_H|| measures the discretization residual
    defects = []
    for dt in (0.02, 0.01, 0.005):
        times = uniform_times(dt, 2.0)
        nodes = [PhaseVector([np.cos(t)], [-np.sin(t)]) for t in times]
        path = DiscretePath(times, tuple(nodes), nodes[0])
        assert assemble_functional(path, REV.law, REV.system)[0] is INF
        defects.append(irreversible_defect(path, REV.system))
    assert defects[0] > defects[1] > defects[2]
    for a, b in zip(defects, defects[1:]):
        assert 1.6 <= a / b <= 2.4


def test_any_infinite_step_makes_pi_infinite():
    path = oracle(REV, 0.1, 1.0)
    nodes = list(path.nodes)
    nodes[-1] = nodes[-2]
    pi, prof = assemble_functional(DiscretePath(path.times, tuple(nodes), path.z0), REV.law, REV.system)
    assert pi is INF
    assert prof[-1].gap is INF and all(not is_inf(r.gap) for r in prof[:-1])


# --- incremental minimization ---------------------------------------------------------


def test_incremental_matches_oracle_on_oscillator():
    cfg = OracleConfig(dt=0.01, t_end=6.0)
    a = oracle(OSC, cfg.dt, cfg.t_end)
    b = minimize_incremental(OSC.system, OSC.law, OSC.z0, cfg, OSC.step_space, constraint=OSC.constraint)
    ua = np.array([z.x[0] for z in a.nodes])
    ub = np.array([z.x[0] for z in b.nodes])
    assert np.max(np.abs(ua - ub)) <= 1e-6 * np.max(np.abs(ua))
    pi, _ = assemble_functional(b, OSC.law, OSC.system)
    assert pi <= b.n_steps * 1e-8 * max(1.0, OSC.system.H(0, OSC.z0))


def test_incremental_slider_stick_phase_has_zero_slip():
    s = build_coulomb_slider(SliderParams(stiffness=(4.0, 4.0), normal_force=2.0,
                                          drive=(PiecewiseLinear([0, 10], [0, 2]), 0.0)))
    cfg = OracleConfig(dt=0.01, t_end=1.0)  # stick limit is reached at t = 1.25
    path = minimize_incremental(s.system, s.law, s.z0, cfg, s.step_space)
    assert max(abs(z.x[:2]).max() for z in path.nodes) <= 1e-15


def test_incremental_rest_state_stays_at_rest():
    s = build_elastoplastic_oscillator(OscillatorParams())
    cfg = OracleConfig(dt=0.1, t_end=2.0)
    path = minimize_incremental(s.system, s.law, s.z0, cfg, s.step_space)
    assert all(z.norm() == 0.0 for z in path.nodes)
    assert assemble_functional(path, s.law, s.system)[0] == 0.0


def test_incremental_failure_reports_step():
    def space(t0, z0, dt):
        return StepSpace(node=lambda th: z0, lower=np.zeros(1), upper=np.ones(1), start=np.zeros(1))

    cfg = OracleConfig(dt=0.1, t_end=1.0)
    with pytest.raises(SolverError) as info:
        minimize_incremental(REV.system, REV.law, REV.z0, cfg, space)
    assert info.value.step == 0


def test_step_tolerance_flags_stagnation():
    def space(t0, z0, dt):
        # only the frozen increment and one far-off node are offered
        base = REV.step_space(t0, z0, dt).node(np.zeros(1))
        off = PhaseVector(base.x + 0.1, base.y)
        return StepSpace(node=lambda th: off, lower=np.zeros(1), upper=np.zeros(1), start=np.zeros(1))

    s = build_elastoplastic_oscillator(OscillatorParams(load=(HalfSine(0.5, 1.0),)))

    def osc_space(t0, z0, dt):
        inner = s.step_space(t0, z0, dt)
        # admissible but away from the minimizer
        return StepSpace(node=inner.node, lower=inner.upper, upper=inner.upper, start=inner.upper)

    with pytest.raises(SolverError) as info:
        minimize_incremental(s.system, s.law, s.z0, OracleConfig(dt=0.1, t_end=1.0), osc_space, step_tol=1e-8)
    assert "did not reach" in str(info.value)
    assert info.value.partial


# --- global descent -------------------------------------------------------------------------


def _pulse_cfg():
    return OracleConfig(dt=0.1, t_end=6.0)


def _perturbed_start(cfg, amount=0.2, seed=3):
    ref = oracle(OSC, cfg.dt, cfg.t_end)
    sig = np.array([OSC.observe(t, z)[1] for t, z in zip(ref.times[1:], ref.nodes[1:])])
    pert = np.clip(sig + amount * np.random.default_rng(seed).uniform(-1, 1, sig.size), -1, 1)
    return stress_path(PULSE, cfg, pert)


def test_stress_coordinates_round_trip():
    path = _perturbed_start(_pulse_cfg())
    coords = oscillator_coordinates(PULSE, path)
    back = coords.to_path(coords.from_path(path))
    np.testing.assert_allclose(back.array(), path.array(), atol=1e-12)
    assert np.all(np.abs(coords.from_path(path)) <= 1.0 + 1e-12)


def test_global_from_oracle_path_does_not_move():
    cfg = _pulse_cfg()
    path = oracle(OSC, cfg.dt, cfg.t_end)
    res = minimize_global(path, OSC.system, OSC.law, oscillator_coordinates(PULSE, path), iters=3)
    assert res.final <= res.initial + 1e-12
    assert res.final <= 1e-10
    ua = np.array([z.x[0] for z in path.nodes])
    ub = np.array([z.x[0] for z in res.path.nodes])
    assert np.max(np.abs(ua - ub)) <= 1e-6


def test_global_descent_is_monotone_from_perturbed_path():
    path0 = _perturbed_start(_pulse_cfg())
    res = minimize_global(path0, OSC.system, OSC.law, oscillator_coordinates(PULSE, path0), iters=15)
    h = np.array(res.history)
    assert np.all(np.diff(h) <= 0)
    assert res.final < 0.2 * res.initial
    res.path.check_admissible()
    assert assemble_functional(res.path, OSC.law, OSC.system)[0] == pytest.approx(res.final, abs=1e-12)


def test_single_step_global_equals_incremental():
    cfg = OracleConfig(dt=0.5, t_end=0.5)
    p = OscillatorParams(load=(PiecewiseLinear([0, 0.5], [0, 3.0]),))
    s = build_elastoplastic_oscillator(p)
    inc = minimize_incremental(s.system, s.law, s.z0, cfg, s.step_space)
    start = stress_path(p, cfg, [0.0])
    res = minimize_global(start, s.system, s.law, oscillator_coordinates(p, start), iters=20)
    assert res.path.nodes[1].x[0] == pytest.approx(inc.nodes[1].x[0], abs=1e-9)
    assert res.final == pytest.approx(assemble_functional(inc, s.law, s.system)[0], abs=1e-12)


def test_global_rejects_infinite_trials():
    # a box wider than the yield surface lets the line search propose inadmissible stresses
    path0 = _perturbed_start(_pulse_cfg())
    good = oscillator_coordinates(PULSE, path0)
    wide = PathCoordinates(good.from_path, good.to_path, 5 * good.lower, 5 * good.upper, good.first_step)
    res = minimize_global(path0, OSC.system, OSC.law, wide, iters=5)
    assert res.reverted_blocks > 0
    assert all(np.isfinite(res.history))
    assert np.all(np.diff(res.history) <= 0)


def test_global_needs_finite_start():
    path = oracle(REV, 0.1, 1.0)
    nodes = list(path.nodes)
    nodes[-1] = nodes[-2]
    bad = DiscretePath(path.times, tuple(nodes), path.z0)
    dummy = PathCoordinates(lambda p: np.zeros(1), lambda c: bad, np.zeros(1), np.zeros(1))
    with pytest.raises(AdmissibilityError):
        minimize_global(bad, REV.system, REV.law, dummy)
