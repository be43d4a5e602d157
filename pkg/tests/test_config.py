import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dacprecode import ConfigError, SystemConfig, preset
from dacprecode.config import preset_names, subcarrier_map


@given(st.integers(2, 2048).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n - 1))))
def test_subcarrier_map_layout(ns):
    N, S = ns
    occ = subcarrier_map(N, S)
    assert occ.size == S
    assert len(set(occ.tolist())) == S
    assert 0 not in occ
    assert occ.min() >= 1 and occ.max() <= N - 1


def test_subcarrier_map_halves():
    np.testing.assert_array_equal(subcarrier_map(8, 3), [1, 2, 7])
    np.testing.assert_array_equal(subcarrier_map(8, 4), [1, 2, 6, 7])


@pytest.mark.parametrize("N,S,field", [(8, 8, "S"), (8, 0, "S"), (1, 1, "N")])
def test_subcarrier_map_rejects(N, S, field):
    with pytest.raises(ConfigError) as exc:
        subcarrier_map(N, S)
    assert exc.value.field == field


@pytest.mark.parametrize(
    "changes,field",
    [
        (dict(U=40), "U"),
        (dict(B=0), "B"),
        (dict(L=1), "L"),
        (dict(P=0.0), "P"),
        (dict(N0=-1.0), "N0"),
        (dict(eps=1.5), "eps"),
        (dict(Pclip=0.0), "Pclip"),
        (dict(precoder="MMSE"), "precoder"),
        (dict(T=0), "T"),
        (dict(S=256), "S"),
        (dict(B=3.5), "B"),
    ],
)
def test_validation_names_field(changes, field):
    with pytest.raises(ConfigError) as exc:
        SystemConfig(**changes)
    assert exc.value.field == field
    assert field in str(exc.value)


def test_derived_quantities():
    cfg = SystemConfig(N=256, S=64, L=8, P=2.0, N0=0.5)
    assert cfg.osr == 4.0
    assert cfg.snr == 4.0
    assert cfg.bits == 3.0
    assert cfg.guard.size == 256 - 64
    assert cfg.with_snr_db(10.0).snr == pytest.approx(10.0)


def test_json_round_trip(tmp_path):
    cfg = preset("desk", eps=0.2, seed=7)
    path = tmp_path / "cfg.json"
    cfg.to_json(path)
    assert SystemConfig.from_json(path) == cfg


def test_json_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        SystemConfig.from_json(bad)
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"B": 8, "colour": "red"}))
    with pytest.raises(ConfigError) as exc:
        SystemConfig.from_json(unknown)
    assert exc.value.field == "colour"


def test_presets():
    lte = preset("lte5")
    assert (lte.B, lte.U, lte.N, lte.S, lte.T) == (128, 16, 1024, 300, 4)
    assert lte.osr == pytest.approx(3.4133, abs=1e-4)
    assert set(preset_names()) == {"desk", "lte5"}
    with pytest.raises(ConfigError):
        preset("huge")
