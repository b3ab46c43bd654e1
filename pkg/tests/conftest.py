"""Shared test fixtures and configuration for diffprobe tests"""
import sys
from pathlib import Path

import pytest

from diffprobe.battle import load_fixture
from diffprobe.records import Observation
from diffprobe.wordle import WordList, default_word_list


SMALL_WORDS = [
    "APPLE", "AMPLE", "MAPLE", "ALERT", "CRANE", "SLATE", "TRACE", "CRATE",
    "LEMON", "MELON", "PLANT", "SPEED", "ERASE", "ABBEY", "HELLO", "LLAMA",
]
GUESS_ONLY = ["SOARE", "ROATE", "TARES"]


@pytest.fixture(scope="session")
def project_root():
    """Get the project root directory"""
    return Path(__file__).parent.parent


@pytest.fixture(scope="session")
def games_dir():
    """Reference protocol games used by the integration tests"""
    return Path(__file__).parent / "integration" / "games"


@pytest.fixture(scope="session")
def python_exe():
    return sys.executable


@pytest.fixture
def run_dir(tmp_path):
    """A fresh run directory"""
    path = tmp_path / "run"
    path.mkdir()
    return path


@pytest.fixture(scope="session")
def small_word_list():
    """Sixteen answers plus a few guess-only words"""
    return WordList.from_words(SMALL_WORDS + GUESS_ONLY, SMALL_WORDS)


@pytest.fixture(scope="session")
def word_list():
    return default_word_list()


@pytest.fixture(scope="session")
def battle_fixture():
    return load_fixture()


@pytest.fixture
def write_words(tmp_path):
    """Write a word file and return its path"""
    def _write(name, words):
        path = tmp_path / name
        path.write_text("\n".join(words) + "\n", encoding="utf-8")
        return path
    return _write


def make_obs(game_id="wordle", turn=0, text="state", structured=None, legal=None):
    return Observation(game_id=game_id, turn_index=turn, state_text=text,
                       structured_state=structured or {}, legal_actions=legal)
