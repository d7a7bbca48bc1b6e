import json

import pytest

from chsim.blowup import blowup_inputs, predict
from chsim.presets import (
    BLOWUP_MARGIN,
    PresetKind,
    evaluate_directory,
    preset_config,
    run_preset,
)
from chsim.runner import initial_state

FAST = [PresetKind.CONSERVATION_A, PresetKind.CONSERVATION_B, PresetKind.GLOBAL_SUPPORT_A,
        PresetKind.PULLBACK_A, PresetKind.PULLBACK_B, PresetKind.BESOV_SANITY]

# threshold margins Qx0 / threshold recorded when the blow-up presets were calibrated
MARGINS = {PresetKind.BLOWUP_A_L1: ("A_L1", 2.79), PresetKind.BLOWUP_A_SIGN: ("A_sign", 2.69),
           PresetKind.BLOWUP_B_SIGN: ("B_sign", 2.41)}


def test_parse():
    assert PresetKind.parse("conservationa") is PresetKind.CONSERVATION_A
    assert PresetKind.parse(PresetKind.BESOV_SANITY) is PresetKind.BESOV_SANITY
    with pytest.raises(ValueError):
        PresetKind.parse("ConservationC")


@pytest.mark.parametrize("kind", list(PresetKind))
def test_configs_are_valid(kind):
    cfg = preset_config(kind)
    assert cfg.outputs.name == kind.value


@pytest.mark.parametrize("kind", list(MARGINS))
def test_blowup_calibration(kind):
    family, margin = MARGINS[kind]
    inp, _ = blowup_inputs(initial_state(preset_config(kind)), family, x0=0.0)
    p = predict(inp)
    assert p.triggered and p.T0_upper > 0
    assert inp.Qx0 / p.threshold == pytest.approx(margin, abs=0.01)
    assert inp.Qx0 / p.threshold >= BLOWUP_MARGIN


@pytest.mark.parametrize("kind", FAST)
def test_fast_presets_pass_and_reevaluate(kind, tmp_path):
    report = run_preset(kind, root=tmp_path)
    assert report["pass"], report["measured"]
    d = tmp_path / kind.value
    on_disk = json.loads((d / "report.json").read_text())
    assert on_disk["pass"] and on_disk["artifacts"] == report["artifacts"]
    for a in report["artifacts"]:
        assert (d / a).exists()
    again = evaluate_directory(kind, d)
    assert again.passed and again.measured == on_disk["measured"]
    assert json.loads((d / "manifest.json").read_text())["preset_report"]["pass"]


def test_overrides_reach_the_run(tmp_path):
    report = run_preset("ConservationA", ["integrator.t_end=0.2"], root=tmp_path)
    manifest = json.loads((tmp_path / "ConservationA" / "manifest.json").read_text())
    assert manifest["config"]["integrator"]["t_end"] == 0.2 and report["pass"]


def test_failing_rule_reported(tmp_path):
    # a run stopped by the step-size floor is not a completed conservation run
    report = run_preset("ConservationA", ["integrator.dt_min=0.5"], root=tmp_path)
    assert not report["pass"] and report["measured"]["status"] == "dt_underflow"


def test_deterministic_output(tmp_path):
    a = run_preset("ConservationB", root=tmp_path / "a")
    b = run_preset("ConservationB", root=tmp_path / "b")
    da, db = tmp_path / "a" / "ConservationB", tmp_path / "b" / "ConservationB"
    assert (da / "diagnostics.csv").read_bytes() == (db / "diagnostics.csv").read_bytes()
    assert (da / "characteristics.csv").read_bytes() == (db / "characteristics.csv").read_bytes()
    ma, mb = (json.loads((d / "manifest.json").read_text()) for d in (da, db))
    ma.pop("wall_time_s"), mb.pop("wall_time_s")
    assert ma == mb and a["measured"] == b["measured"]
