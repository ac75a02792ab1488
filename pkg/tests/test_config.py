import pytest

from unijunction.config import (PRESETS, base_config, load_circuit, parse_overrides,
                                reference_spectrum, resolve, write_config)
from unijunction.errors import ParseError
from unijunction.model import PAPER_CIRCUIT, PAPER_G, PAPER_PARAMS


def test_preset_contents():
    cfg = base_config("paper-2018")
    assert cfg.params == PAPER_PARAMS and cfg.g == PAPER_G and cfg.circuit == PAPER_CIRCUIT
    assert "paper-2018" in PRESETS


def test_unknown_preset():
    with pytest.raises(ParseError):
        base_config("nope")


def test_overrides_layer_on_file(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[params]\nm = 0.3\na0 = 20\n\n[integrator]\nrtol = 1e-6\n")
    cfg = resolve(config_path=path, overrides=["params.m=0.5", "lyapunov.total_time=10"])
    assert cfg.params.m == 0.5 and cfg.params.a0 == 20.0
    assert cfg.integrator.rtol == 1e-6 and cfg.lyapunov.total_time == 10.0
    assert cfg.params.mu == PAPER_PARAMS.mu


@pytest.mark.parametrize("item", ["params.m", "m=0.3", "params.=1", "params.nope=1",
                                  "bogus.m=1", "params.m=abc", "integrator.rtol=-1"])
def test_bad_overrides(item):
    with pytest.raises(ParseError):
        resolve(overrides=[item])


def test_malformed_file(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("m = 0.3\n")
    with pytest.raises(ParseError):
        resolve(config_path=path)


def test_snapshot_round_trip(tmp_path):
    cfg = resolve(overrides=["params.m=0.123456789012345678", "integrator.h_max=0.05",
                             "run.seed=7", "g.c=0.0131"])
    write_config(cfg, tmp_path / "r.ini", command="simulate")
    back = resolve(config_path=tmp_path / "r.ini")
    assert back.sections() == cfg.sections()
    assert back.seed == 7 and back.preset == cfg.preset


def test_parse_overrides_keeps_sections():
    assert parse_overrides(["a.b=1", "a.c = 2", "d.e=x"]) == {"a": {"b": "1", "c": "2"},
                                                             "d": {"e": "x"}}


def test_load_circuit(tmp_path):
    path = tmp_path / "paper.circuit"
    path.write_text("[circuit]\nv_s = 7\nv_bias = 4.67\nr = 12.6e3\nr2 = 677\nrb2 = 2.5e3\n"
                    "cap = 49.73e-9\nind = 0.2e-3\n")
    assert load_circuit(path) == PAPER_CIRCUIT
    path.write_text("[params]\nm = 1\n")
    with pytest.raises(ParseError):
        load_circuit(path)


def test_reference_spectrum_lookup():
    assert reference_spectrum("paper-2018", 0.3)[0] == 0.25
    assert reference_spectrum("paper-2018", 0.31) is None
    assert reference_spectrum("other", 0.3) is None
