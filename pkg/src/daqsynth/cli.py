"""Command-line interface.

`design` is a thin client of the HTTP API: it either connects to a running
service (--server) or mounts the app in-process, then polls the session state,
relaying questions, answers and verdicts through the terminal. The remaining
subcommands run the batch harness and the diagram tools directly.
"""

from __future__ import annotations

import argparse
import asyncio
import sys
import time
from pathlib import Path

import httpx

from .diagram import DotSource, parse, render_svg, to_dot, validate
from .emulation import EmulationMode
from .errors import DaqSynthError
from .gateway import (
    DEFAULT_API_KEY_ENV,
    DEFAULT_BASE_URL,
    DEFAULT_MODEL,
    ModelConfig,
    designer_config,
    emulator_config,
)
from .service import ServiceSettings, create_app
from .testbench import TESTBENCH_IDS, RunConfig, run_batch, run_iteration, get_testbench


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", default=DEFAULT_MODEL, help="designer model name")
    parser.add_argument(
        "--emulator-model", default=DEFAULT_MODEL, help="user-emulator model name"
    )
    parser.add_argument("--base-url", default=DEFAULT_BASE_URL, help="API base URL")
    parser.add_argument(
        "--api-key-env",
        default=DEFAULT_API_KEY_ENV,
        help="environment variable holding the API key",
    )


def _designer(args: argparse.Namespace) -> ModelConfig:
    return designer_config(args.model, base_url=args.base_url, api_key_env=args.api_key_env)


def _emulator(args: argparse.Namespace) -> ModelConfig:
    return emulator_config(
        args.emulator_model, base_url=args.base_url, api_key_env=args.api_key_env
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="daqsynth",
        description="Conversational top-down synthesis of data acquisition systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_design = sub.add_parser("design", help="interactive terminal session")
    p_design.add_argument("--description", "-d", help="project description")
    p_design.add_argument("--description-file", type=Path, help="read the description from a file")
    p_design.add_argument("--server", help="URL of a running service; default runs in-process")
    p_design.add_argument(
        "--backend", choices=("scripted", "live"), default="scripted",
        help="model backend for the in-process service",
    )
    p_design.add_argument("--script", type=Path, help="response script for the scripted backend")
    p_design.add_argument("--store", type=Path, default=Path("sessions"), help="session store directory")
    p_design.add_argument("--out", type=Path, default=Path("."), help="where diagram files are written")
    _add_model_flags(p_design)

    p_batch = sub.add_parser("batch", help="run the testbench experiment protocol")
    p_batch.add_argument("--testbench", choices=TESTBENCH_IDS, required=True)
    p_batch.add_argument("--mode", choices=("direct", "open"), required=True)
    p_batch.add_argument("--iterations", type=int, default=20)
    p_batch.add_argument("--backend", choices=("scripted", "live", "replay"), default="scripted")
    p_batch.add_argument("--script", type=Path, help="response script (scripted backend)")
    p_batch.add_argument("--replay-dir", type=Path, help="previous mode directory (replay backend)")
    p_batch.add_argument("--out", type=Path, required=True, help="output directory")
    p_batch.add_argument("--workers", type=int, default=1)
    _add_model_flags(p_batch)

    p_serve = sub.add_parser("serve", help="run the web service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--store", type=Path, default=Path("sessions"))
    p_serve.add_argument("--backend", choices=("scripted", "live"), default="scripted")
    p_serve.add_argument("--script", type=Path, help="response script for the scripted backend")
    p_serve.add_argument("--frontend", type=Path, help="built web UI directory to serve at /")
    _add_model_flags(p_serve)

    p_replay = sub.add_parser("replay", help="re-run one session from a recorded script")
    p_replay.add_argument("--script", type=Path, required=True)
    p_replay.add_argument("--testbench", choices=TESTBENCH_IDS, required=True)
    p_replay.add_argument("--mode", choices=("direct", "open"), default="direct")
    p_replay.add_argument("--out", type=Path, required=True)
    _add_model_flags(p_replay)

    p_render = sub.add_parser("render", help="render a .dot file to SVG")
    p_render.add_argument("dotfile", type=Path)
    p_render.add_argument("--out", "-o", type=Path, help="output SVG path")

    p_validate = sub.add_parser("validate", help="lint a .dot architecture file")
    p_validate.add_argument("dotfile", type=Path)

    return parser


# --- design ------------------------------------------------------------------


def _read_description(args: argparse.Namespace) -> str:
    if args.description:
        return args.description
    if args.description_file:
        return args.description_file.read_text(encoding="utf-8").strip()
    print("Describe the project to design (end with an empty line):")
    lines: list[str] = []
    while True:
        try:
            line = input()
        except EOFError:
            break
        if not line.strip():
            break
        lines.append(line)
    return "\n".join(lines)


def _prompt(text: str) -> str:
    print(text, end="", flush=True)
    line = sys.stdin.readline()
    if not line:
        raise EOFError("stdin closed")
    return line.rstrip("\n")


async def _drive_design(client: httpx.AsyncClient, description: str, out_dir: Path) -> int:
    response = await client.post("/api/sessions", json={"description": description})
    if response.status_code != 201:
        print(f"error: could not create session: {response.text}", file=sys.stderr)
        return 1
    session_id = response.json()["id"]
    print(f"session {session_id}")
    seen_stage = None
    while True:
        state = (await client.get(f"/api/sessions/{session_id}")).json()
        if state["stage"] != seen_stage:
            seen_stage = state["stage"]
            print(f"[stage] {seen_stage}")
        if state.get("failed"):
            print(f"session failed: {state.get('failure_reason')}", file=sys.stderr)
            return 1
        if state["stage"] == "Done":
            summary = await client.get(f"/api/sessions/{session_id}/summary")
            print("\n=== Summary ===")
            print(summary.text)
            return 0
        waiting = state["waiting"]
        if waiting == "answers":
            questions = state["questions"] or []
            print("The designer asks:")
            for i, question in enumerate(questions, start=1):
                print(f"  {i}. {question}")
            answers = []
            for i in range(1, len(questions) + 1):
                answers.append(_prompt(f"answer {i} (empty to skip): "))
            await client.post(f"/api/sessions/{session_id}/answers", json={"answers": answers})
        elif waiting == "verdict":
            kind = state["artifact_kind"]
            ref = state.get("content_ref")
            content = (await client.get(ref)).text if ref else ""
            if kind == "architecture":
                dot_path = out_dir / f"{session_id}-architecture.dot"
                dot_path.write_text(content + "\n", encoding="utf-8")
                print(f"proposed architecture written to {dot_path}")
            else:
                print(f"\n--- proposed {kind} ---\n{content}\n")
            decision = _prompt("accept? [y = accept / feedback text = revise]: ")
            if decision.strip().lower() in ("y", "yes", "accept"):
                body = {"kind": "accept"}
            elif decision.strip():
                body = {"kind": "revise", "text": decision.strip()}
            else:
                print("empty feedback; accepting")
                body = {"kind": "accept"}
            await client.post(f"/api/sessions/{session_id}/feedback", json=body)
        else:
            await asyncio.sleep(0.05)


def cmd_design(args: argparse.Namespace) -> int:
    description = _read_description(args)
    if not description.strip():
        print("error: empty project description", file=sys.stderr)
        return 1
    out_dir = args.out
    out_dir.mkdir(parents=True, exist_ok=True)

    async def run() -> int:
        if args.server:
            async with httpx.AsyncClient(base_url=args.server, timeout=300.0) as client:
                return await _drive_design(client, description, out_dir)
        settings = ServiceSettings(
            store_dir=args.store,
            backend=args.backend,
            script_path=args.script,
            designer=_designer(args),
        )
        app = create_app(settings)
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://daqsynth.local", timeout=300.0
        ) as client:
            return await _drive_design(client, description, out_dir)

    return asyncio.run(run())


# --- batch / replay ------------------------------------------------------------


def cmd_batch(args: argparse.Namespace) -> int:
    cfg = RunConfig(
        testbench=args.testbench,
        mode=EmulationMode(args.mode),
        output_dir=args.out,
        iterations=args.iterations,
        designer=_designer(args),
        emulator=_emulator(args),
        backend=args.backend,
        script=args.script,
        replay_dir=args.replay_dir,
        workers=args.workers,
    )
    started = time.monotonic()
    summary = run_batch(cfg)
    elapsed = time.monotonic() - started
    print(
        f"{summary['testbench']}/{summary['mode']}: {summary['done']} done, "
        f"{summary['failed']} failed of {summary['iterations']} iterations "
        f"in {elapsed:.1f}s"
    )
    print(f"aggregate: {summary['aggregate']}")
    return 0 if summary["failed"] == 0 else 1


def cmd_replay(args: argparse.Namespace) -> int:
    cfg = RunConfig(
        testbench=args.testbench,
        mode=EmulationMode(args.mode),
        output_dir=args.out,
        iterations=1,
        designer=_designer(args),
        emulator=_emulator(args),
        backend="scripted",
        script=args.script,
    )
    testbench = get_testbench(args.testbench)
    artifact = run_iteration(cfg, testbench, 0)
    print(f"replayed session {artifact.session_id}: {artifact.status}")
    print(f"artifacts: {artifact.out_dir}")
    return 0 if artifact.status == "done" else 1


# --- serve ---------------------------------------------------------------------


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    settings = ServiceSettings(
        store_dir=args.store,
        backend=args.backend,
        script_path=args.script,
        designer=_designer(args),
    )
    app = create_app(settings)
    if args.frontend:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=args.frontend, html=True), name="ui")
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


# --- diagram tools ---------------------------------------------------------------


def cmd_render(args: argparse.Namespace) -> int:
    text = args.dotfile.read_text(encoding="utf-8")
    graph = parse(DotSource(text.strip()))
    out = args.out or args.dotfile.with_suffix(".svg")
    if render_svg(to_dot(graph).text, out):
        print(f"wrote {out}")
        return 0
    print("error: no DOT renderer available on PATH", file=sys.stderr)
    return 1


def cmd_validate(args: argparse.Namespace) -> int:
    text = args.dotfile.read_text(encoding="utf-8")
    graph = parse(DotSource(text.strip()))
    findings = validate(graph)
    for finding in findings:
        print(f"{finding.severity.upper()} [{finding.code}] {finding.message}")
    if not findings:
        print("no findings")
    return 1 if any(f.severity == "error" for f in findings) else 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "design": cmd_design,
        "batch": cmd_batch,
        "serve": cmd_serve,
        "replay": cmd_replay,
        "render": cmd_render,
        "validate": cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except DaqSynthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
