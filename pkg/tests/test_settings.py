from __future__ import annotations

import argparse
import json

import pytest

from tapopf import settings as settings_module


def test_settings_round_trip(tmp_path):
    settings = settings_module.TapOpfSettings(
        max_iter=40,
        tol=1e-7,
        trials=3,
        seed=11,
        rtol=2e-6,
        output="json",
    )

    path = tmp_path / "settings.json"
    settings_module.save_settings(settings, path)

    loaded = settings_module.load_settings(path)
    assert loaded == settings


def test_merge_with_namespace_updates_fields():
    base = settings_module.TapOpfSettings()
    namespace = argparse.Namespace(seed=7, trials=2, max_iter=None, json=True)

    updated, touched = base.merge_with_namespace(namespace)
    assert touched == {"seed", "trials"}
    assert updated.seed == 7
    assert updated.trials == 2
    assert updated.max_iter == base.max_iter

    # Ensure the original instance remains unchanged
    assert base.seed == 0
    assert base.trials == 50


def test_merge_without_values_returns_same_instance():
    base = settings_module.TapOpfSettings()
    merged, touched = base.merge_with_namespace(argparse.Namespace(seed=None))
    assert merged is base
    assert touched == set()


def test_from_dict_ignores_unknown_keys_and_casts():
    settings = settings_module.TapOpfSettings.from_dict({"trials": "4", "tol": 1, "colour": "blue"})
    assert settings.trials == 4
    assert isinstance(settings.tol, float)
    assert settings.seed == 0


@pytest.mark.parametrize(
    "change",
    [
        {"trials": 0},
        {"max_iter": 0},
        {"tol": 0.0},
        {"fd_step": -1e-6},
        {"output": "xml"},
    ],
)
def test_validate_rejects_out_of_range(change):
    with pytest.raises(settings_module.SettingsError):
        settings_module.TapOpfSettings(**change).validate()


def test_load_missing_file_gives_defaults(tmp_path):
    assert settings_module.load_settings(tmp_path / "absent.json") == settings_module.TapOpfSettings()


def test_load_corrupt_file_warns_and_gives_defaults(tmp_path, caplog):
    path = tmp_path / "settings.json"
    path.write_text("[1, 2", encoding="utf-8")
    with caplog.at_level("WARNING", logger="tapopf.settings"):
        loaded = settings_module.load_settings(path)
    assert loaded == settings_module.TapOpfSettings()
    assert "ignoring settings file" in caplog.text


def test_load_non_object_payload(tmp_path):
    path = tmp_path / "settings.json"
    path.write_text(json.dumps([1, 2]), encoding="utf-8")
    assert settings_module.load_settings(path) == settings_module.TapOpfSettings()


def test_default_settings_path_uses_xdg(monkeypatch, tmp_path):
    monkeypatch.setattr(settings_module.sys, "platform", "linux")
    monkeypatch.setenv("XDG_CONFIG_HOME", str(tmp_path))
    assert settings_module.default_settings_path() == tmp_path / "tapopf" / "settings.json"


def test_default_settings_path_windows(monkeypatch, tmp_path):
    monkeypatch.setattr(settings_module.sys, "platform", "win32")
    monkeypatch.setenv("APPDATA", str(tmp_path))
    assert settings_module.default_settings_path() == tmp_path / "TapOpf" / "settings.json"
