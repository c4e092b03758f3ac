"""Optional live smoke runs: non-gating, only with a real API key.

One session per testbench against the configured endpoint; results are logged
for inspection, output content is never asserted on. Enable with
DAQSYNTH_LIVE_SMOKE=1 and a populated OPENAI_API_KEY.
"""

import os

import pytest

from daqsynth.diagram import validate
from daqsynth.emulation import EmulationMode
from daqsynth.gateway import designer_config, emulator_config
from daqsynth.testbench import RunConfig, TESTBENCH_IDS, get_testbench, run_iteration

pytestmark = pytest.mark.skipif(
    os.environ.get("DAQSYNTH_LIVE_SMOKE") != "1" or not os.environ.get("OPENAI_API_KEY"),
    reason="live smoke disabled: set DAQSYNTH_LIVE_SMOKE=1 and OPENAI_API_KEY",
)


@pytest.mark.parametrize("tb_id", TESTBENCH_IDS)
def test_live_smoke(tb_id, tmp_path):
    cfg = RunConfig(
        testbench=tb_id,
        mode=EmulationMode.DIRECT,
        output_dir=tmp_path,
        iterations=1,
        designer=designer_config(os.environ.get("DAQSYNTH_MODEL", "gpt-4-1106-preview")),
        emulator=emulator_config(os.environ.get("DAQSYNTH_MODEL", "gpt-4-1106-preview")),
        backend="live",
    )
    artifact = run_iteration(cfg, get_testbench(tb_id), 0)
    print(f"live smoke {tb_id}: status={artifact.status} dir={artifact.out_dir}")
    assert artifact.status == "done"
    assert artifact.state.architecture is not None
    errors = [f for f in validate(artifact.state.architecture) if f.severity == "error"]
    assert errors == []
