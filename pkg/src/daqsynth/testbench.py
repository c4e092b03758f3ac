"""Testbench corpus and the batch experiment runner.

The corpus holds the four measurement projects, byte-pinned by checksums so
quiet edits cannot drift the experiment inputs. The runner executes N
iterations of one testbench in one emulation mode, each in its own artifact
directory, and aggregates per-iteration structural metrics into a CSV.
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .artifacts import Metrics, RunArtifact, run_session
from .emulation import (
    EmulationMode,
    RequirementList,
    StructuralVerdictPolicy,
    VerdictPolicy,
    compose_direct_description,
    direct_port,
    open_port,
)
from .errors import ConfigurationError, CorpusIntegrityError, UsageError
from .events import EventLog
from .flow import SessionConfigs
from .gateway import (
    Backend,
    LiveBackend,
    ModelConfig,
    designer_config,
    emulator_config,
    load_script,
    record_wrap,
)
from .prompts import PromptCatalog

CORPUS_DIR = Path(__file__).parent / "corpus"

TESTBENCH_IDS = (
    "angular_position",
    "thermometry",
    "accelerometry",
    "pressure_temperature",
)

AGGREGATE_COLUMNS = (
    "iteration",
    "status",
    "blocks",
    "questions",
    "retries",
    "feedback_rounds",
    "prompt_tokens",
    "completion_tokens",
    "wall_ms",
)


@dataclass(frozen=True)
class Testbench:
    id: str
    description: str
    requirements: RequirementList


def load_corpus(corpus_dir: str | Path | None = None) -> list[Testbench]:
    """Load the four testbenches, verifying every file against its pinned checksum."""
    root = Path(corpus_dir) if corpus_dir else CORPUS_DIR
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    testbenches: list[Testbench] = []
    for tb_id in TESTBENCH_IDS:
        entry = manifest["testbenches"][tb_id]
        parts: dict[str, str] = {}
        for part in ("description", "requirements"):
            path = root / entry[part]["file"]
            raw = path.read_bytes()
            digest = hashlib.sha256(raw).hexdigest()
            if digest != entry[part]["sha256"]:
                raise CorpusIntegrityError(
                    f"{path.name}: checksum {digest} does not match pinned "
                    f"{entry[part]['sha256']}"
                )
            parts[part] = raw.decode("utf-8")
        requirements = RequirementList(
            tuple(line for line in parts["requirements"].splitlines() if line.strip())
        )
        testbenches.append(
            Testbench(
                id=tb_id,
                description=parts["description"].rstrip("\n"),
                requirements=requirements,
            )
        )
    return testbenches


def get_testbench(tb_id: str, corpus_dir: str | Path | None = None) -> Testbench:
    for tb in load_corpus(corpus_dir):
        if tb.id == tb_id:
            return tb
    raise UsageError(f"unknown testbench {tb_id!r}; expected one of {TESTBENCH_IDS}")


@dataclass
class RunConfig:
    testbench: str
    mode: EmulationMode
    output_dir: Path
    iterations: int = 20
    designer: ModelConfig = field(default_factory=designer_config)
    emulator: ModelConfig = field(default_factory=emulator_config)
    backend: str = "scripted"  # "live" | "scripted" | "replay"
    script: Path | None = None
    replay_dir: Path | None = None
    workers: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise UsageError("iterations must be >= 1")
        if self.workers < 1:
            raise UsageError("workers must be >= 1")
        if self.backend not in ("live", "scripted", "replay"):
            raise UsageError(f"unknown backend {self.backend!r}")
        if self.backend == "scripted" and self.script is None:
            raise ConfigurationError("scripted backend requires a script file")
        if self.backend == "replay" and self.replay_dir is None:
            raise ConfigurationError("replay backend requires a replay directory")


def _iteration_backend(cfg: RunConfig, iteration: int) -> Backend:
    if cfg.backend == "scripted":
        return load_script(cfg.script)  # fresh cursor per iteration
    if cfg.backend == "replay":
        return load_script(Path(cfg.replay_dir) / f"run_{iteration:03d}" / "script.jsonl")
    return LiveBackend(max_inflight=cfg.workers)


def run_iteration(
    cfg: RunConfig,
    testbench: Testbench,
    iteration: int,
    *,
    catalog: PromptCatalog | None = None,
    policy: VerdictPolicy | None = None,
) -> RunArtifact:
    run_dir = Path(cfg.output_dir) / testbench.id / cfg.mode.value / f"run_{iteration:03d}"
    run_dir.mkdir(parents=True, exist_ok=True)
    inner = _iteration_backend(cfg, iteration)
    backend = record_wrap(inner, run_dir / "script.jsonl")
    log = EventLog()
    policy = policy or StructuralVerdictPolicy()
    if cfg.mode is EmulationMode.DIRECT:
        description = compose_direct_description(testbench)
        port = direct_port(policy)
        configs = SessionConfigs(designer=cfg.designer)
    else:
        description = testbench.description
        port = open_port(
            testbench.requirements,
            cfg.emulator,
            backend,
            policy=policy,
            log=log,
            catalog=catalog,
        )
        configs = SessionConfigs(designer=cfg.designer, emulator=cfg.emulator)
    return run_session(
        description,
        port,
        configs,
        backend,
        session_id=f"run_{iteration:03d}",
        catalog=catalog,
        log=log,
        out_dir=run_dir,
    )


def _metrics_row(iteration: int, metrics: Metrics) -> dict:
    return {
        "iteration": iteration,
        "status": metrics.status,
        "blocks": metrics.block_count,
        "questions": metrics.questions_architectural + metrics.questions_detailing,
        "retries": metrics.diagram_retries,
        "feedback_rounds": metrics.feedback_rounds,
        "prompt_tokens": metrics.prompt_tokens,
        "completion_tokens": metrics.completion_tokens,
        "wall_ms": metrics.wall_ms,
    }


def run_batch(cfg: RunConfig, *, catalog: PromptCatalog | None = None) -> dict:
    """Run cfg.iterations independent sessions and write the aggregate CSV.

    Per-iteration session failures become failed artifacts and never abort
    the batch; only I/O-level errors propagate.
    """
    testbench = get_testbench(cfg.testbench)
    mode_dir = Path(cfg.output_dir) / testbench.id / cfg.mode.value

    def one(iteration: int) -> RunArtifact:
        return run_iteration(cfg, testbench, iteration, catalog=catalog)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            artifacts = list(pool.map(one, range(cfg.iterations)))
    else:
        artifacts = [one(i) for i in range(cfg.iterations)]

    rows = [_metrics_row(i, artifact.metrics) for i, artifact in enumerate(artifacts)]
    totals = {
        "iteration": "total",
        "status": f"{sum(1 for a in artifacts if a.status == 'done')}/{len(artifacts)} done",
    }
    for column in AGGREGATE_COLUMNS[2:]:
        totals[column] = sum(row[column] for row in rows)

    aggregate_path = mode_dir / "aggregate.csv"
    with open(aggregate_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=AGGREGATE_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
        writer.writerow(totals)

    return {
        "testbench": testbench.id,
        "mode": cfg.mode.value,
        "iterations": cfg.iterations,
        "done": sum(1 for a in artifacts if a.status == "done"),
        "failed": sum(1 for a in artifacts if a.status == "failed"),
        "aggregate": str(aggregate_path),
        "run_dirs": [str(a.out_dir) for a in artifacts],
    }
