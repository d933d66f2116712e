import json
import os

import pytest

from backwave.cli import main
from backwave.config import ConfigError, canonical_text, parse_config
from backwave.outputs import read_series_csv, write_bundle, write_series_csv
from backwave.scenarios import FunctionalReport, ReportItem, ScenarioReport

MINIMAL = """
[run]
scenario = homogeneous
T = 40
t0 = 2

[data.F0]
mode1 = l=2 m=0 kind=gaussian amplitude=1

[params]
gamma = 0.8
"""


def test_minimal_config_fills_defaults():
    spec = parse_config(MINIMAL)
    assert spec.scenario == "homogeneous"
    assert spec.T == 40.0 and spec.t0 == 2.0
    assert spec.gamma == 0.8
    assert spec.s == 1.2                 # documented default
    assert spec.h == 0.1
    assert spec.f0_modes == [(2, 0, {"kind": "gaussian", "amplitude": 1.0})]


def test_range_violation_cites_condition():
    bad = MINIMAL.replace("gamma = 0.8", "gamma = 0.8\ns = 1.4")
    with pytest.raises(ConfigError) as err:
        parse_config(bad)
    assert "1 <= s < gamma + 1/2" in str(err.value)


def test_duplicate_key_reports_both_lines():
    text = "[run]\nscenario = free_wave\nT = 10\nT = 12\n"
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    msg = str(err.value)
    assert "duplicate" in msg and "line 4" in msg and "line 3" in msg


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config("[run]\nscenario = free_wave\nwarp = 9\n")
    assert "unknown key" in str(err.value)
    with pytest.raises(ConfigError):
        parse_config("[mystery]\nx = 1\n")
    with pytest.raises(ConfigError):
        parse_config("[run]\nscenario free_wave\n")


def test_canonical_idempotent():
    spec = parse_config(MINIMAL)
    text1 = canonical_text(spec)
    spec2 = parse_config(text1)
    assert canonical_text(spec2) == text1


def make_report():
    rep = ScenarioReport(name="homogeneous", spec={})
    rep.items.append(ReportItem(name="x", kind="fit", measured=-1.3, target=-1.1,
                                tol=0.15, passed=False))
    for t, e in ((2.0, 0.5), (4.0, 0.25), (8.0, 1.0 / 3.0)):
        rep.series.append(FunctionalReport(t=t, values={
            "energy_w1": e, "sup_envelope": e * math_pi(), "flux_s1_R10": 0.125 + t}))
    return rep


def math_pi():
    return 3.141592653589793


def test_series_csv_round_trip_bit_exact(tmp_path):
    rep = make_report()
    path = os.path.join(tmp_path, "series.csv")
    cols = write_series_csv(rep, path)
    header, data = read_series_csv(path)
    assert header == cols
    assert header[0] == "t"
    assert "flux_s1_R10" in header
    for i, fr in enumerate(sorted(rep.series, key=lambda f: f.t)):
        for j, col in enumerate(header):
            want = fr.t if col == "t" else fr.values.get(col, float("nan"))
            got = data[i, j]
            if want != want:
                assert got != got
            else:
                assert got == want     # bit-exact via 17 significant digits


def test_empty_series_header_only(tmp_path):
    rep = ScenarioReport(name="x", spec={})
    path = os.path.join(tmp_path, "series.csv")
    write_series_csv(rep, path)
    with open(path) as fh:
        lines = fh.readlines()
    assert len(lines) == 1


def test_bundle_and_summary(tmp_path):
    rep = make_report()
    out = os.path.join(tmp_path, "bundle")
    payload = write_bundle(rep, out, config_text="[run]\nscenario = homogeneous\n")
    assert os.path.exists(os.path.join(out, "summary.json"))
    assert os.path.exists(os.path.join(out, "series.csv"))
    data = json.load(open(os.path.join(out, "summary.json")))
    assert data["status"] == "ok"
    assert data["passed"] is False
    item = data["items"][0]
    assert {"name", "measured", "target", "tol", "passed"} <= set(item)
    # plot script references only files inside the bundle
    gp = os.path.join(out, "plots", "homogeneous_decay.gp")
    assert os.path.exists(gp)
    text = open(gp).read()
    for token in text.split("'"):
        if token.endswith(".csv") or token.endswith(".png"):
            assert not token.startswith("/") and ".." not in token
    del payload


def test_summary_written_on_error(tmp_path):
    rep = ScenarioReport(name="weaknull", spec={}, status="error", error="boom at stage weaknull")
    out = os.path.join(tmp_path, "errbundle")
    os.makedirs(out)
    from backwave.outputs import write_summary_json
    payload = write_summary_json(rep, os.path.join(out, "summary.json"))
    assert payload["status"] == "error"
    assert payload["error"]["stage"] == "weaknull"


# ---------------------------------------------------------------------------
# CLI integration: exit code contract
# ---------------------------------------------------------------------------

def test_cli_validate_passes(tmp_path):
    assert main(["validate", "--out", str(tmp_path / "v"), "--quiet"]) == 0
    assert os.path.exists(tmp_path / "v" / "summary.json")


def test_cli_missing_config_is_config_error(tmp_path, capsys):
    assert main(["homogeneous", "--out", str(tmp_path / "x")]) == 2
    assert "usage" in capsys.readouterr().err


def test_cli_bad_config_is_config_error(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[run]\nscenario = homogeneous\nT = 40\nt0 = 2\n[params]\ngamma = 2.0\n")
    assert main(["homogeneous", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2


def test_cli_failing_run_exit_one(tmp_path):
    # gaussian data cannot meet the declared-gamma exponent targets: the run
    # completes but with failing items -> exit 1
    cfg = tmp_path / "h.cfg"
    cfg.write_text("""
[run]
scenario = homogeneous
T = 24
t0 = 2
records = 12
[data.F0]
mode1 = l=2 m=0 kind=gaussian amplitude=1
[grid]
h = 0.25
[params]
gamma = 0.8
s = 1.2
""")
    out = tmp_path / "run1"
    code = main(["homogeneous", "--config", str(cfg), "--out", str(out), "--quiet"])
    assert code == 1
    summary = json.load(open(out / "summary.json"))
    assert summary["status"] == "ok" and summary["passed"] is False


def test_cli_runtime_error_exit_three(tmp_path, monkeypatch):
    import backwave.scenarios as S

    def boom(spec):
        raise RuntimeError("deliberate failure")

    monkeypatch.setitem(S.RUNNERS, "free_wave", boom)
    out = tmp_path / "rt"
    code = main(["validate", "--out", str(out), "--quiet"])
    assert code == 3
    summary = json.load(open(out / "summary.json"))
    assert summary["status"] == "error"


def test_cli_unknown_command():
    assert main(["frobnicate"]) == 2


def test_cli_reference_homogeneous_passes(tmp_path):
    # the shipped reference run completes with every item passing: exit 0
    # and a full bundle
    cfg = os.path.join(os.path.dirname(__file__), "..", "configs", "homogeneous.cfg")
    out = tmp_path / "ref"
    assert main(["homogeneous", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    assert os.path.exists(out / "series.csv")
    assert os.path.exists(out / "summary.json")


def test_cli_thread_count_bit_identical(tmp_path):
    out1 = tmp_path / "t1"
    outn = tmp_path / "t4"
    assert main(["validate", "--out", str(out1), "--threads", "1", "--quiet"]) == 0
    assert main(["validate", "--out", str(outn), "--threads", "4", "--quiet"]) == 0
    a = json.load(open(out1 / "summary.json"))
    b = json.load(open(outn / "summary.json"))
    assert a["items"] == b["items"]     # measured values bit-identical
