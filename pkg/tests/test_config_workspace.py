import json

import pytest

from climadapt.config import PipelineConfig, config_from_dict, load_config
from climadapt.errors import ConfigError, LookupFailure, ValidationError
from climadapt.workspace import Workspace, sha256_path

# -- configuration -------------------------------------------------------------------


def test_defaults():
    cfg = load_config(None)
    assert cfg == PipelineConfig()
    assert cfg.calibration.x_threshold == 0.8 and cfg.calibration.y_threshold == 0.2
    assert cfg.flow.ridge == 1e-8 and cfg.fusion.layers == (4, 2)


def test_partial_override_keeps_other_defaults():
    cfg = config_from_dict({"flow": {"n_u": 6, "wake": {"vortices": 3}}})
    assert cfg.flow.n_u == 6 and cfg.flow.wake.vortices == 3
    assert cfg.flow.wake.nx == PipelineConfig().flow.wake.nx
    assert cfg.forecast == PipelineConfig().forecast


def test_lists_become_tuples():
    cfg = config_from_dict({"fusion": {"layers": [8, 3]}, "flow": {"plane": ["horizontal", 5]}})
    assert cfg.fusion.layers == (8, 3) and cfg.flow.plane == ("horizontal", 5)


@pytest.mark.parametrize("data, fragment", [
    ({"bogus": 1}, "config.bogus"),
    ({"flow": {"wake": {"bogus": 1}}}, "config.flow.wake.bogus"),
    ({"flow": {"holdout": "random"}}, "holdout"),
    ({"fusion": {"layers": []}}, "layers"),
    ({"flow": {"wake": {"nx": 4}}}, "grid"),
    ({"forecast": {"lstm": {"learning_rate": -1}}}, "learning_rate"),
    ({"fusion": {"layers": 4}}, "expected a list"),
])
def test_invalid_config(data, fragment):
    with pytest.raises(ConfigError, match=fragment):
        config_from_dict(data)


def test_with_seed_reaches_every_stage():
    cfg = PipelineConfig().with_seed(42)
    assert cfg.forecast.lstm.seed == 42 and cfg.flow.wake.seed == 42 and cfg.fusion.seed == 42


def test_load_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    with pytest.raises(OSError):
        load_config(tmp_path / "missing.json")


def test_to_dict_round_trip():
    cfg = config_from_dict({"flow": {"n_p": 3}})
    assert config_from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


# -- workspace -------------------------------------------------------------------------


def test_uninitialized_workspace(tmp_path):
    with pytest.raises(ConfigError, match="init"):
        Workspace(tmp_path)


def test_register_is_content_addressed_and_idempotent(tmp_path):
    ws = Workspace.init(tmp_path / "ws")
    for _ in range(2):
        with ws.staging() as tmp:
            (tmp / "a.txt").write_text("hello")
            aid = ws.register("note", tmp / "a.txt", {"k": 1})
    assert aid.startswith("note-") and len(aid) == len("note-") + 12
    assert ws.ids() == [aid]
    assert ws.path(aid, "note").read_text() == "hello"
    assert ws.verify() == []


def test_directory_hash_depends_on_names_and_contents(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        (d / "sub").mkdir(parents=True)
        (d / "sub" / "x").write_text("1")
    assert sha256_path(a) == sha256_path(b)
    (b / "sub" / "x").rename(b / "sub" / "y")
    assert sha256_path(a) != sha256_path(b)


def test_lookup_and_kind_errors(tmp_path):
    ws = Workspace.init(tmp_path)
    with pytest.raises(LookupFailure):
        ws.entry("nope")
    with ws.staging() as tmp:
        (tmp / "a").write_text("x")
        aid = ws.register("note", tmp / "a")
    with pytest.raises(ValidationError):
        ws.path(aid, "raster")


def test_ids_keep_insertion_order(tmp_path):
    ws = Workspace.init(tmp_path)
    ids = []
    for text in ("z", "a", "m"):
        with ws.staging() as tmp:
            (tmp / "f").write_text(text)
            ids.append(ws.register("k2" if text == "a" else "k1", tmp / "f"))
    assert ws.ids() == ids and ws.ids("k1") == [ids[0], ids[2]]


def test_verify_reports_tampering(tmp_path):
    ws = Workspace.init(tmp_path)
    with ws.staging() as tmp:
        (tmp / "f").write_text("x")
        aid = ws.register("k", tmp / "f")
    ws.path(aid).write_text("y")
    assert ws.verify() == [f"{aid}: hash mismatch"]
    ws.path(aid).unlink()
    assert "missing" in ws.verify()[0]


def test_init_twice_keeps_manifest(tmp_path):
    ws = Workspace.init(tmp_path)
    with ws.staging() as tmp:
        (tmp / "f").write_text("x")
        aid = ws.register("k", tmp / "f")
    assert Workspace.init(tmp_path).ids() == [aid]
