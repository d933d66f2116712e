import numpy as np
import pytest

from backwave.scenarios import (RunSpec, ScenarioError, fit_window_for,
                                record_times_for, run_scenario)

GAUSS2 = [(2, 0, {"kind": "gaussian", "amplitude": 1.0, "width": 1.0, "center": 0.0})]


def test_spec_validation():
    with pytest.raises(ScenarioError):
        RunSpec(scenario="mystery").validate()
    with pytest.raises(ScenarioError):
        RunSpec(scenario="homogeneous", gamma=1.2).validate()
    with pytest.raises(ScenarioError):
        RunSpec(scenario="homogeneous", gamma=0.8, s=1.4).validate()   # s >= gamma+1/2
    with pytest.raises(ScenarioError):
        RunSpec(scenario="homogeneous", T=2.0, t0=2.0).validate()
    with pytest.raises(ScenarioError):
        RunSpec(scenario="tlimit", T_list=[40.0]).validate()
    RunSpec(scenario="homogeneous", gamma=0.8, s=1.2).validate()


def test_fit_window_rule():
    spec = RunSpec(T=80.0, t0=2.0)
    assert fit_window_for(spec) == (20.0, 80.0)          # last factor-4 span
    spec = RunSpec(T=400.0, t0=2.0)
    assert fit_window_for(spec) == (20.0, 200.0)         # last decade available
    spec = RunSpec(T=80.0, t0=2.0, fit_lo=5.0, fit_hi=40.0)
    assert fit_window_for(spec) == (5.0, 40.0)


def test_record_times_cover_endpoints():
    spec = RunSpec(T=40.0, t0=2.0, n_records=12)
    ts = record_times_for(spec)
    assert ts[0] == 40.0 and ts[-1] == 2.0
    assert all(a > b for a, b in zip(ts, ts[1:]))


def test_free_wave_gate():
    rep = run_scenario(RunSpec(scenario="free_wave", h=0.1))
    assert rep.passed
    names = {it.name for it in rep.items}
    assert "dalembert_backward_order" in names


def test_homogeneous_zero_data_trivial():
    rep = run_scenario(RunSpec(scenario="homogeneous", f0_modes=[], mass=0.0,
                               gamma=0.8, s=1.2))
    assert rep.passed


def test_homogeneous_gaussian_realizes_borderline_class():
    # rapidly decaying radiation data realizes the borderline decay class
    # (the second-order field tends to a nonzero constant), so the measured
    # source-norm exponent is -(3/2 + 1 - s); this is the regression anchor
    # for the decay-rate formula
    spec = RunSpec(scenario="homogeneous", h=0.25, T=40.0, t0=2.0, gamma=0.8, s=1.2,
                   f0_modes=GAUSS2, mass=0.25, n_records=24)
    rep = run_scenario(spec)
    assert rep.status == "ok"
    items = {it.name: it for it in rep.items}
    src = items["source_norm_exponent"]
    assert src.measured == pytest.approx(-(1.5 + 1.0 - 1.2), abs=0.1), src
    assert items["norm_1s_bounded"].passed
    assert items["envelope_bounded"].passed
    assert items["backward_estimate_constant"].passed
    # the criterion target computed from the declared gamma is recorded as
    # such even though gaussian data cannot realize it
    assert src.target == pytest.approx(-1.1)


def test_homogeneous_determinism():
    spec = dict(scenario="homogeneous", h=0.25, T=24.0, t0=2.0, gamma=0.8, s=1.2,
                f0_modes=GAUSS2, mass=0.25, n_records=12)
    a = run_scenario(RunSpec(**spec))
    b = run_scenario(RunSpec(**spec))
    va = [(fr.t, sorted(fr.values.items())) for fr in a.series]
    vb = [(fr.t, sorted(fr.values.items())) for fr in b.series]
    assert va == vb           # bit-identical series
    assert [it.measured for it in a.items] == [it.measured for it in b.items]


def test_tlimit_small():
    spec = RunSpec(scenario="tlimit", h=0.25, T=40.0, t0=2.0, gamma=0.8, s=1.2,
                   T_list=[10.0, 20.0, 40.0], f0_modes=GAUSS2)
    rep = run_scenario(spec)
    assert rep.status == "ok"
    items = {it.name: it for it in rep.items}
    assert items["difference_monotone_decreasing"].passed
    assert items["difference_ratio_per_doubling"].passed


def test_nullradial_small():
    # T well past the focusing time of the data pulse so the fit window sits
    # in the decay regime
    spec = RunSpec(scenario="nullradial", h=0.125, T=40.0, t0=2.0, amplitude=0.01,
                   mu=0.1, delta=0.3)
    rep = run_scenario(spec)
    items = {it.name: it for it in rep.items}
    assert items["reaches_t0_without_blowup"].passed
    assert items["quadratic_amplitude_scaling"].passed
    assert items["energy_decay_exponent"].passed


def test_weaknull_small_pipeline():
    spec = RunSpec(scenario="weaknull", h=0.2, T=24.0, t0=2.0, gamma=0.8, s=1.2,
                   f0_modes=[(2, 0, {"kind": "poly-tail", "amplitude": 2.0,
                                     "p": 0.85, "scale": 1.0})],
                   g0_modes=[(0, 0, {"kind": "gaussian", "amplitude": 0.25})],
                   mass=0.02, n_records=12, envelope_window=(4.0, 16.0),
                   check_points=[])
    rep = run_scenario(spec)
    assert rep.status == "ok"
    items = {it.name: it for it in rep.items}
    assert items["w_norm_exponent"].passed
    # series populated with finite values
    assert all(np.isfinite(list(fr.values.values())).all() for fr in rep.series)


def test_weaknull_zero_coupling_reduces_to_homogeneous():
    # F0 = 0: the quadratic coupling vanishes and w solves the plain
    # homogeneous remainder problem for G0
    spec = RunSpec(scenario="weaknull", h=0.25, T=24.0, t0=2.0, gamma=0.8, s=1.2,
                   f0_modes=[],
                   g0_modes=[(2, 0, {"kind": "gaussian", "amplitude": 1.0})],
                   mass=0.0, n_records=12, envelope_window=(4.0, 16.0))
    rep = run_scenario(spec)
    assert rep.status == "ok"
    spec_h = RunSpec(scenario="homogeneous", h=0.25, T=24.0, t0=2.0, gamma=0.8,
                     s=1.2, f0_modes=[(2, 0, {"kind": "gaussian", "amplitude": 1.0})],
                     mass=0.0, n_records=12)
    rep_h = run_scenario(spec_h)
    # w solves exactly the homogeneous remainder problem for G0: unweighted
    # energies agree at shared record times
    wn = {round(fr.t, 6): fr.values["energy_w1"] for fr in rep.series}
    for fr in rep_h.series:
        key = round(fr.t, 6)
        if key in wn and wn[key] > 1e-12:
            assert wn[key] == pytest.approx(fr.values["energy_w1"], rel=1e-9), fr.t


def test_backscatter_scenario_zero_field():
    rep = run_scenario(RunSpec(scenario="backscatter", f0_modes=[]))
    assert rep.passed


def test_convergence_scenario():
    rep = run_scenario(RunSpec(scenario="convergence", h=0.1))
    assert rep.status == "ok"
    items = {it.name: it for it in rep.items}
    assert items["residual_order_traveling_wave"].passed
    assert items["residual_order_mass_term"].passed


def test_nullradial_zero_data_zero_solution():
    spec = RunSpec(scenario="nullradial", h=0.25, T=12.0, t0=2.0, amplitude=0.0,
                   mu=0.1, delta=0.3)
    rep = run_scenario(spec)
    for fr in rep.series:
        assert fr.values["energy_w1"] == 0.0


def test_assembled_field_solves_wave_equation():
    # backward remainder solve with source -box psi01; the assembled field
    # psi = v + psi01 + psi_e must satisfy the homogeneous equation: the
    # discrete box of its u-array converges to zero at order >= 1.9
    import math
    from backwave.engine import RadialGrid, FieldState, solve_backward, discrete_box_triplet
    from backwave.radiation import (MassTerm, derive_F1, eval_approximant,
                                    eval_dt_psi01_exact, residual_box_psi01)

    spec = RunSpec(scenario="homogeneous", gamma=0.8, s=1.2, f0_modes=GAUSS2, mass=0.25)
    f0 = spec.field_from(spec.f0_modes)
    mass = MassTerm(spec.mass)
    # the cutoff-transition ring carries the mollifier's large high
    # derivatives; check away from the tightest ring radii
    T, tc = 24.0, 16.0
    errs = []
    for h in (0.1, 0.05, 0.025):
        grid = RadialGrid.for_run(h, T, 2.0)
        f1 = derive_F1(f0, q_max=grid.r_max + 2.0)
        r_pos = grid.r[1:]

        def src(t, _view):
            res = residual_box_psi01(f0, f1, t, r_pos)
            out = np.zeros((1, grid.J + 1))
            out[0, 1:] = -res[(2, 0)]
            return out

        data = FieldState(T, grid, [(2, 0)])
        traj = solve_backward(data, src, T, 2.0, [tc - h, tc, tc + h],
                              track_origin=False)

        def psi_u(t):
            st = traj.state_at(t)
            u = st.u[0].copy()
            p01 = eval_approximant(f0, f1, mass, "psi01", t, r_pos)[(2, 0)]
            u[1:] += p01 * r_pos
            return u

        res = discrete_box_triplet(psi_u(tc - h), psi_u(tc), psi_u(tc + h), h, grid, 2)
        interior = (grid.r[1:-1] > 2.0) & (grid.r[1:-1] < grid.r_max - 2.0)
        errs.append(float(np.max(np.abs(res[interior]))))
    order = math.log2(errs[1] / errs[2])   # asymptotic (finest) pair
    assert order >= 1.9, (errs, order)


def test_weaknull_non_axisymmetric_modes():
    # m != 0 data exercises the full (l, m) product path
    spec = RunSpec(scenario="weaknull", h=0.25, T=24.0, t0=2.0, gamma=0.8, s=1.2,
                   f0_modes=[(2, 1, {"kind": "gaussian", "amplitude": 0.5})],
                   g0_modes=[(1, -1, {"kind": "gaussian", "amplitude": 0.25})],
                   mass=0.02, n_records=16, envelope_window=(4.0, 16.0), l_max=4)
    rep = run_scenario(spec)
    assert rep.status == "ok"
    assert all(np.isfinite(list(fr.values.values())).all() for fr in rep.series)


def test_stage_failure_becomes_error_report():
    # too few records for the decay fit: the run reports an error with a
    # stage tag instead of raising
    spec = RunSpec(scenario="weaknull", h=0.25, T=16.0, t0=2.0, gamma=0.8, s=1.2,
                   f0_modes=[(2, 0, {"kind": "gaussian", "amplitude": 0.5})],
                   n_records=8, envelope_window=(4.0, 12.0), l_max=4)
    rep = run_scenario(spec)
    assert rep.status == "error"
    assert "weaknull" in rep.error
    assert not rep.passed
