"""Acceptance suite: one test per criterion, run at the stated tolerances.

Each test prints a single PASS/FAIL line (run pytest with -s or check the
captured output).  The heavy pipelines run once per session through the
fixtures below; reference configurations live in configs/ and are loaded
through the same parser the CLI uses.
"""

import os
import time

import pytest

from backwave.config import parse_config
from backwave.scenarios import RunSpec, run_scenario

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


def load_spec(name):
    with open(os.path.join(CONFIG_DIR, name), encoding="utf-8") as fh:
        return parse_config(fh.read())


def report_line(num, ok, detail):
    flag = "PASS" if ok else "FAIL"
    print(f"[criterion {num:2d}] {flag}: {detail}")


def items_of(rep):
    return {it.name: it for it in rep.items}


@pytest.fixture(scope="session")
def free_wave_run():
    start = time.time()
    rep = run_scenario(RunSpec(scenario="free_wave", h=0.1))
    return rep, time.time() - start


@pytest.fixture(scope="session")
def convergence_run():
    return run_scenario(load_spec("convergence.cfg"))


@pytest.fixture(scope="session")
def audit_run():
    return run_scenario(load_spec("audit.cfg"))


@pytest.fixture(scope="session")
def homogeneous_run():
    # criterion 5 pins gamma = 0.8, s = 1.2, single (2,0) gaussian, T = 80,
    # t0 = 2 (the general reference config in configs/homogeneous.cfg uses
    # critical-tail data instead and passes; criterion 5 is run as stated)
    start = time.time()
    rep = run_scenario(load_spec("criterion5_homogeneous.cfg"))
    return rep, time.time() - start


@pytest.fixture(scope="session")
def tlimit_run():
    return run_scenario(load_spec("tlimit.cfg"))


@pytest.fixture(scope="session")
def weaknull_run():
    return run_scenario(load_spec("weaknull.cfg"))


@pytest.fixture(scope="session")
def backscatter_run():
    return run_scenario(load_spec("backscatter.cfg"))


@pytest.fixture(scope="session")
def nullradial_run():
    return run_scenario(load_spec("nullradial.cfg"))


def test_criterion_1_solver_gate(free_wave_run):
    rep, elapsed = free_wave_run
    it = items_of(rep)["dalembert_backward_order"]
    ok = it.passed and elapsed < 60.0
    report_line(1, ok, f"backward d'Alembert order {it.measured:.3f} "
                       f"(target 2.0 +/- 0.1), runtime {elapsed:.1f}s < 60s")
    assert it.passed, it
    assert elapsed < 60.0


def test_criterion_2_exact_solution_residuals(convergence_run):
    items = items_of(convergence_run)
    trav = items["residual_order_traveling_wave"]
    mass = items["residual_order_mass_term"]
    ok = trav.passed and mass.measured >= 1.9
    report_line(2, ok, f"discrete-box residual orders: traveling wave "
                       f"{trav.measured:.3f}, mass term {mass.measured:.3f} (>= 1.9)")
    assert trav.passed, trav
    assert mass.measured >= 1.9, mass


def test_criterion_3_morawetz_identity(audit_run):
    items = items_of(audit_run)
    checks = [items[f"identity_residual_scaling_{tag}_s{s:g}"]
              for tag in ("free", "sourced") for s in (1.0, 1.2)]
    orders = [items[f"identity_order_{tag}_s{s:g}"]
              for tag in ("free", "sourced") for s in (1.0, 1.2)]
    ok = all(c.passed for c in checks) and all(o.passed for o in orders)
    report_line(3, ok, "identity residual h^2 scaling on free and sourced runs, "
                       f"orders {[round(o.measured, 2) for o in orders]}")
    for c in checks + orders:
        assert c.passed, c


def test_criterion_4_bulk_sign(audit_run):
    items = items_of(audit_run)
    slacks = {a: items[f"bulk_sign_a{a:g}"] for a in (2.0, 2.5, 3.0, 4.0)}
    ok = all(it.passed for it in slacks.values())
    report_line(4, ok, "deformation slack <= 1e-12 on 200x200 of [0,100]^2: "
                       + ", ".join(f"a={a}: {it.measured:.1e}" for a, it in slacks.items()))
    for it in slacks.values():
        assert it.passed, it


def test_criterion_5_homogeneous_exponents(homogeneous_run):
    rep, elapsed = homogeneous_run
    items = items_of(rep)
    src = items["source_norm_exponent"]
    en = items["energy_exponent"]
    conf = items["conformal_norm_exponent"]
    ok = src.passed and en.passed and conf.passed and elapsed < 900.0
    report_line(5, ok,
                f"source norm {src.measured:.3f} vs {src.target:g} +/- 0.15; "
                f"energy {en.measured:.3f} vs {en.target:g} +/- 0.15; "
                f"conformal {conf.note.split(';')[0] if conf.kind == 'bound' else conf.measured}; "
                f"runtime {elapsed:.0f}s")
    assert elapsed < 900.0
    assert conf.passed, conf
    # Known defect of the stated configuration: gaussian radiation data
    # realizes the borderline decay class (the second-order profile tends to
    # a nonzero constant), so the realized source-norm rate is -(3/2+1-s) =
    # -1.3 rather than the declared-gamma arithmetic -1.1, and the energy
    # rate is steepened further by the finite data horizon.  The assertions
    # below implement the criterion as stated; see the regression test
    # test_homogeneous_gaussian_realizes_borderline_class for the rate check
    # against the data's true class.
    assert src.passed, (f"source-norm exponent {src.measured:.3f} vs target "
                        f"{src.target:g} +/- {src.tol:g} (unattainable for "
                        "gaussian data; realized class gives -1.3)")
    assert en.passed, (f"energy exponent {en.measured:.3f} vs target "
                       f"{en.target:g} +/- {en.tol:g}")


def test_criterion_6_horizon_cauchy_property(tlimit_run):
    items = items_of(tlimit_run)
    mono = items["difference_monotone_decreasing"]
    ratio = items["difference_ratio_per_doubling"]
    ok = mono.passed and ratio.passed
    report_line(6, ok, f"difference norms at t0 monotone ({mono.note}); "
                       f"shrink ratio {-ratio.measured:.2f} >= 1.5 per doubling")
    assert mono.passed
    assert ratio.passed


def test_criterion_7_weak_null(weaknull_run):
    items = items_of(weaknull_run)
    env = items["w_envelope_bounded"]
    box = items["interior_box_crosscheck"]
    ok = env.passed and box.passed
    report_line(7, ok, f"envelope max/min {env.measured:.2f} <= 5 over t in [4,40]; "
                       f"interior box residual {box.measured:.2e} <= 1e-2 at h=0.05")
    assert env.passed, env
    assert box.passed, box


def test_criterion_8_backscatter(backscatter_run):
    items = items_of(backscatter_run)
    oracle = items["phi2_vs_bruteforce"]
    envs = [items[f"envelope_k{k}"] for k in (2, 3, 4)]
    rem = items["phi2_asymptotic_remainder"]
    ok = oracle.measured <= 1e-4 and all(e.passed for e in envs) and rem.passed
    report_line(8, ok, f"quadrature vs brute force {oracle.measured:.2e} <= 1e-4; "
                       f"decay envelopes bounded (k=2,3,4); asymptotic remainder "
                       f"{rem.measured:.2f} bounded on t=r+5 sweep")
    assert oracle.measured <= 1e-4, oracle
    for e in envs:
        assert e.passed, e
    assert rem.passed, rem


def test_criterion_9_radial_null_model(nullradial_run):
    items = items_of(nullradial_run)
    alive = items["reaches_t0_without_blowup"]
    expo = items["energy_decay_exponent"]
    quad = items["quadratic_amplitude_scaling"]
    ok = alive.passed and expo.passed and quad.passed
    report_line(9, ok, f"run reaches t0=1 ({alive.note}); energy exponent "
                       f"{expo.measured:.2f} <= -0.3; amplitude scaling "
                       f"{quad.measured:.2f} ~ 4 within 20%")
    assert alive.passed
    assert expo.passed, expo
    assert quad.passed, quad


def test_criterion_10_hardy_and_pointwise(audit_run):
    items = items_of(audit_run)
    names = [n for n in items
             if n.startswith(("hardy_", "ks_")) or n in ("weighted_spacetime_ratio",
                                                         "origin_decay_ratio")]
    bad = [items[n] for n in names if not items[n].passed]
    ok = not bad
    drifts = [items[n].measured for n in names if "drift" in n]
    report_line(10, ok, f"{len(names)} ratio checks within budget; "
                        f"max refinement drift {max(drifts):.2f} < 2")
    assert not bad, bad
