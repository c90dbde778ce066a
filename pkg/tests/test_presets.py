import json

import pytest

from core.errors import InvalidSpecError
from core.presets import PresetManager


def test_builtins_are_listed(tmp_path):
    pm = PresetManager(str(tmp_path / "presets.json"))
    names = pm.list_presets()
    assert names[:3] == ["dimer", "dimer-symmetric", "dimer-closed"]
    assert pm.is_builtin("dimer")


def test_builtins_parse():
    pm = PresetManager()
    for name in pm.list_presets():
        cfg = pm.get_config(name)
        assert cfg.system.n_sites == pm.get_preset(name)["sites"]


def test_default_location_is_under_home(isolated_home):
    pm = PresetManager()
    assert pm.presets_file == str(isolated_home / "presets.json")


def test_save_and_reload(tmp_path):
    path = tmp_path / "presets.json"
    pm = PresetManager(str(path))
    pm.save_preset("mine", {"sites": 2, "epsilon": [50, 0], "J": [20], "lambda": 10})
    assert json.loads(path.read_text())["mine"]["J"] == [20]
    again = PresetManager(str(path))
    assert again.get_config("mine").bath.lambdas == (10.0, 10.0)
    assert not again.is_builtin("mine")


def test_invalid_preset_is_not_saved(tmp_path):
    pm = PresetManager(str(tmp_path / "presets.json"))
    with pytest.raises(InvalidSpecError):
        pm.save_preset("broken", {"sites": 2, "epsilon": [0, 0], "J": [20], "lambda": 0})
    with pytest.raises(InvalidSpecError):
        pm.save_preset("  ", {"sites": 2, "epsilon": [0, 0], "J": [20], "lambda": 5})
    assert "broken" not in pm.presets


def test_delete(tmp_path):
    pm = PresetManager(str(tmp_path / "presets.json"))
    pm.save_preset("mine", {"sites": 2, "epsilon": [0, 0], "J": [20], "lambda": 5})
    assert pm.delete_preset("mine")
    assert not pm.delete_preset("mine")
    assert not pm.delete_preset("dimer")
    with pytest.raises(KeyError):
        pm.get_preset("mine")


def test_unreadable_file_is_ignored(tmp_path):
    path = tmp_path / "presets.json"
    path.write_text("{not json")
    assert PresetManager(str(path)).list_presets()[0] == "dimer"


def test_saved_presets_are_stored_per_site(tmp_path):
    path = tmp_path / "presets.json"
    pm = PresetManager(str(path))
    pm.save_preset("mine", {"sites": 2, "epsilon": [50, 0], "J": [20], "lambda": 10, "rho0_site": 2})
    stored = json.loads(path.read_text())["mine"]
    assert stored == {"sites": 2, "epsilon": [50.0, 0.0], "J": [20.0], "lambda": [10.0, 10.0],
                      "gamma": [53.0, 53.0], "temperature_K": 300.0, "rho0_site": 2}
    assert pm.get_config("mine").rho0_site == 1
