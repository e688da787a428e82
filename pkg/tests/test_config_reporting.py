import json
import math

import numpy as np
import pytest

from kerrbin.config import OUT_ENV, RunConfig, apply_overrides, load_config, resolve_grid
from kerrbin.drives import SQRT6
from kerrbin.errors import ConfigError
from kerrbin.reporting import fmt, read_csv, write_csv, write_json


def test_defaults_are_the_reference_parameters():
    cfg = load_config()
    assert cfg.chi == 6.0 and cfg.gamma == 0.001 and cfg.cutoff == 16
    assert cfg.kerr.detuning_delta == -24.0
    assert cfg.calibrate.t_error is None
    assert cfg.rabi.samples == 2000
    g = cfg.qec_grid()
    assert len(g) == 20 and g[0] == pytest.approx(5) and g[-1] == pytest.approx(400)


def test_default_grids_contain_reference_optima():
    cfg = load_config()
    assert np.any(np.isclose(cfg.grid("s32"), 0.2875))
    assert np.any(np.isclose(cfg.grid("s204"), SQRT6 * 0.15))
    assert np.any(np.isclose(cfg.grid("s12"), 0.5))
    assert cfg.grid("s32")[-1] == pytest.approx(0.8)


def test_dotted_overrides_parse_json(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"gamma": 0.002, "rabi": {"p2_values": [0.02]}}))
    cfg = load_config(path, ["rabi.p2_values=[0.01, 0.03]", "chi=5", "qec.calibration=cal.json"])
    assert cfg.gamma == 0.002
    assert cfg.rabi.p2_values == [0.01, 0.03]
    assert cfg.chi == 5
    assert cfg.qec.calibration == "cal.json"


@pytest.mark.parametrize("override,field", [
    ("rabi.p2_values=[]", "rabi.p2_values"),
    ("cutoff=4", "cutoff"),
    ("gamma=-1", "gamma"),
    ("bogus=1", "bogus"),
    ("rabi.bogus=1", "rabi.bogus"),
    ("integrator.method=Euler", "integrator.method"),
    ('calibrate.lambda_32={"start":0.3,"stop":0.3,"step":0.01}', "calibrate.lambda_32"),
    ("calibrate.p2=[0.2,0.1]", "calibrate.p2"),
    ("convergence_cutoff=10", "convergence_cutoff"),
])
def test_invalid_config_names_field(override, field):
    with pytest.raises(ConfigError) as exc:
        load_config(overrides=[override])
    assert exc.value.field == field
    assert field in str(exc.value)


def test_override_syntax_errors():
    with pytest.raises(ConfigError):
        apply_overrides({}, ["no-equals-sign"])
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.json")


def test_grid_forms():
    np.testing.assert_allclose(resolve_grid({"start": 0.1, "stop": 0.3, "step": 0.1}, "g"), [0.1, 0.2, 0.3])
    np.testing.assert_allclose(resolve_grid([0.25], "g"), [0.25])


def test_out_dir_env(monkeypatch):
    monkeypatch.setenv(OUT_ENV, "/tmp/somewhere")
    assert RunConfig().out_dir == "/tmp/somewhere"


def test_config_dict_is_json_serializable():
    json.dumps(load_config().to_dict())


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, math.pi, 1e-300, -2.5e17, 0.0):
        assert float(fmt(x)) == x
    assert fmt(float("nan")) == "nan"
    assert fmt(None) == ""


def test_csv_format(tmp_path):
    path = write_csv(tmp_path / "x.csv", {"a": [0.1, 0.2], "status": ["ok", "no_support"]})
    raw = path.read_bytes()
    assert raw == b"a,status\n0.10000000000000001,ok\n0.20000000000000001,no_support\n"
    assert read_csv(path) == {"a": [0.1, 0.2], "status": ["ok", "no_support"]}
    with pytest.raises(ValueError):
        write_csv(tmp_path / "y.csv", {"a": [1, 2], "b": [1]})


def test_json_deterministic(tmp_path):
    a = write_json(tmp_path / "a.json", {"b": np.float64(1.5), "a": [np.int64(2), float("nan")]})
    b = write_json(tmp_path / "b.json", {"a": [2, None], "b": 1.5})
    assert a.read_bytes() == b.read_bytes()
