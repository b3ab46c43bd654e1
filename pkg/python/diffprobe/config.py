"""
Configuration: JSON config files, flag overrides and logging setup

A config file is one JSON object. Keys are the RunConfig fields plus an
"llm" section:

    {
      "trials_per_challenge": 20,
      "guess_cap": 12,
      "agents": ["solver", "scripted:expert"],
      "llm": {"endpoint_url": "http://localhost:8000/v1/chat/completions",
              "model_name": "gpt-4", "temperature": 1.0,
              "timeout_s": 60, "max_in_flight": 4}
    }

Command-line flags override file values. The API key is never part of a
config: it is read from the DIFFPROBE_API_KEY environment variable.
"""

import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

from .errors import InputError, InputFileError
from .transport import ChatTransport

FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class ConfigFileError(InputError):
    pass


@dataclass(frozen=True)
class LLMSettings:
    endpoint_url: str = ""
    model_name: str = ""
    temperature: float = 1.0
    timeout_s: float = 60.0
    max_in_flight: int = 4

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "LLMSettings":
        data = dict(data or {})
        for secret in ("api_key", "key", "token"):
            if secret in data:
                raise ConfigFileError("API keys do not belong in config files; set DIFFPROBE_API_KEY instead")
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigFileError(f"Unknown llm settings: {', '.join(unknown)}")
        return cls(**known)

    def make_transport(self) -> ChatTransport:
        return ChatTransport(self.endpoint_url, timeout_s=self.timeout_s, max_in_flight=self.max_in_flight)


@dataclass
class CliConfig:
    """
    What the CLI was asked to do

    effective is the file config with flag overrides applied; it is echoed
    into the run manifest.
    """
    subcommand: str
    run_dir: Optional[str] = None
    config_path: Optional[str] = None
    overrides: Dict[str, Any] = field(default_factory=dict)
    effective: Dict[str, Any] = field(default_factory=dict)


def load_config_file(path: Optional[Union[str, Path]]) -> Dict[str, Any]:
    """Read a JSON config object; no path gives an empty config"""
    if path is None:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputFileError(path, e) from e
    try:
        data = json.loads(text)
    except ValueError as e:
        raise ConfigFileError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigFileError(f"{path} must hold a JSON object")
    return data


def merge_overrides(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """
    Apply flag overrides; None means "flag not given"

    Dotted keys address nested sections: {"llm.model_name": "gpt-4"}.
    """
    merged = json.loads(json.dumps(base))
    for key, value in overrides.items():
        if value is None:
            continue
        target = merged
        *parents, leaf = key.split(".")
        for part in parents:
            target = target.setdefault(part, {})
        target[leaf] = value
    return merged


def configure_logging(verbosity: int = 0) -> None:
    """One stderr handler: WARNING by default, -v INFO, -vv DEBUG"""
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(FORMAT))
    root.addHandler(handler)
    root.setLevel(level)
    # request lines from httpx only at -vv
    logging.getLogger("httpx").setLevel(logging.DEBUG if verbosity >= 2 else logging.WARNING)
