"""Config files, flag overrides and logging setup"""
import json
import logging

import pytest

from diffprobe.config import ConfigFileError, LLMSettings, configure_logging, load_config_file, merge_overrides
from diffprobe.errors import InputError, InputFileError
from diffprobe.harness import RunConfig


def test_no_path_is_empty_config():
    assert load_config_file(None) == {}


def test_load_config_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"trials_per_challenge": 5, "llm": {"model_name": "m"}}))
    config = RunConfig.from_dict(load_config_file(path))
    assert config.trials_per_challenge == 5
    assert config.llm.model_name == "m"


@pytest.mark.parametrize("text", ["{not json", "[1, 2]", '"text"'])
def test_bad_config_files(tmp_path, text):
    path = tmp_path / "config.json"
    path.write_text(text)
    with pytest.raises(ConfigFileError):
        load_config_file(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(InputFileError):
        load_config_file(tmp_path / "absent.json")


@pytest.mark.parametrize("secret", ["api_key", "key", "token"])
def test_secrets_rejected_in_config(secret):
    with pytest.raises(ConfigFileError) as info:
        LLMSettings.from_dict({"model_name": "m", secret: "sk-123"})
    assert "sk-123" not in str(info.value)
    assert "DIFFPROBE_API_KEY" in str(info.value)
    assert isinstance(info.value, InputError)


def test_unknown_llm_settings():
    with pytest.raises(ConfigFileError):
        LLMSettings.from_dict({"modle_name": "m"})


def test_llm_settings_round_trip():
    settings = LLMSettings(endpoint_url="http://localhost:1/v1", model_name="m", temperature=0.2)
    assert LLMSettings.from_dict(settings.to_dict()) == settings
    assert LLMSettings.from_dict(None) == LLMSettings()


def test_overrides_win_and_none_is_ignored():
    base = {"guess_cap": 12, "trials_per_challenge": 20, "llm": {"model_name": "a", "temperature": 0.5}}
    merged = merge_overrides(base, {"guess_cap": 6, "trials_per_challenge": None, "llm.model_name": "b",
                                    "llm.endpoint_url": "http://x"})
    assert merged == {"guess_cap": 6, "trials_per_challenge": 20,
                      "llm": {"model_name": "b", "temperature": 0.5, "endpoint_url": "http://x"}}
    assert base["llm"]["model_name"] == "a"


def test_dotted_override_creates_section():
    assert merge_overrides({}, {"llm.model_name": "m"}) == {"llm": {"model_name": "m"}}


@pytest.mark.parametrize("verbosity,level", [(0, logging.WARNING), (1, logging.INFO), (2, logging.DEBUG)])
def test_configure_logging_levels(verbosity, level):
    root = logging.getLogger()
    saved = (list(root.handlers), root.level)
    try:
        configure_logging(verbosity)
        assert root.level == level
        assert len(root.handlers) == 1
        httpx_level = logging.getLogger("httpx").level
        assert httpx_level == (logging.DEBUG if verbosity >= 2 else logging.WARNING)
    finally:
        root.handlers[:] = saved[0]
        root.setLevel(saved[1])
