import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make helpers importable

from daqsynth.gateway import designer_config, emulator_config
from daqsynth.flow import SessionConfigs

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def direct_configs() -> SessionConfigs:
    return SessionConfigs(designer=designer_config())


@pytest.fixture
def open_configs() -> SessionConfigs:
    return SessionConfigs(designer=designer_config(), emulator=emulator_config())


def write_script(path: Path, responses: list[str]) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        for text in responses:
            fh.write(json.dumps({"response": text}, ensure_ascii=False) + "\n")
    return path
