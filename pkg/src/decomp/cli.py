"""Command-line entry points: chat, plan, eval, serve.

One JSON config file describes backends, the worker registry, orchestrator
settings and directories; any top-level scalar can be overridden with a
DECOMP_-prefixed environment variable (DECOMP_DATA_DIR, DECOMP_PORT, ...).
Relative paths inside the config resolve against the config file's own
directory, so a config and its scripts can travel together.

Exit codes: 0 success, 1 domain failure (failed session, unusable plan,
validation violations), 2 usage or config errors (bad flags, missing files).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Sequence, TextIO

from .evalharness import (
    CONFIG_NAMES,
    DatasetError,
    EvalConfig,
    FileError,
    load_dataset,
    run_eval,
)
from .gateway import (
    Gateway,
    HttpBackend,
    HttpBackendConfig,
    ScriptedBackend,
    ScriptParseError,
    load_script,
)
from .model import (
    AgentSpec,
    ProblemStatement,
    Registry,
    ToolSpec,
    plan_from_json,
    plan_to_json,
    validate_plan,
)
from .orchestrator import (
    DecompositionFailed,
    Orchestrator,
    OrchestratorConfig,
)
from .scheduler import ConfigError, ExecutionConfig
from .session import Phase, SessionLog, SessionService
from .toolbox import Toolbox, UnknownTool

ENV_PREFIX = "DECOMP_"


class UsageError(Exception):
    """Anything that should exit 2: bad flags, unreadable config, missing files."""


def load_config(path: str) -> dict[str, Any]:
    config_path = Path(path)
    if not config_path.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        raw = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise UsageError("config must be a JSON object")
    raw["_config_dir"] = str(config_path.parent)
    for key, value in os.environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        name = key[len(ENV_PREFIX) :].lower()
        raw[name] = int(value) if value.isdigit() else value
    return raw


def _resolve(config: dict[str, Any], path_text: str) -> Path:
    path = Path(path_text)
    if path.is_absolute():
        return path
    return Path(config.get("_config_dir", ".")) / path


def build_gateway(config: dict[str, Any]) -> Gateway:
    gateway = Gateway()
    backends = config.get("backends", [])
    if not isinstance(backends, list) or not backends:
        raise UsageError("config needs a non-empty 'backends' list")
    for entry in backends:
        kind = entry.get("kind")
        backend_id = entry.get("id")
        if not backend_id:
            raise UsageError("every backend needs an 'id'")
        if kind == "scripted":
            script_path = _resolve(config, entry.get("script", ""))
            if not script_path.is_file():
                raise UsageError(f"backend '{backend_id}': script not found: {script_path}")
            try:
                gateway.register_backend(backend_id, ScriptedBackend(load_script(str(script_path))))
            except ScriptParseError as exc:
                raise UsageError(f"backend '{backend_id}': {exc}") from exc
        elif kind == "http":
            try:
                gateway.register_backend(
                    backend_id,
                    HttpBackend(
                        HttpBackendConfig(
                            id=backend_id,
                            base_url=entry.get("base_url", ""),
                            model=entry.get("model", ""),
                            auth_env_var=entry.get("auth_env_var", ""),
                        )
                    ),
                )
            except (TypeError, ValueError) as exc:
                raise UsageError(f"backend '{backend_id}': {exc}") from exc
        else:
            raise UsageError(f"backend '{backend_id}': unknown kind {kind!r}")
    return gateway


def build_registry(config: dict[str, Any]) -> Registry:
    try:
        return Registry(
            agents=[AgentSpec.from_dict(a) for a in config.get("agents", [])],
            tools=[ToolSpec.from_dict(t) for t in config.get("tools", [])],
        )
    except ValueError as exc:
        raise UsageError(f"registry: {exc}") from exc


def build_toolbox(config: dict[str, Any]) -> Toolbox:
    enabled = config.get("enabled_tools", ["calculator"])
    try:
        return Toolbox(enabled)
    except UnknownTool as exc:
        raise UsageError(str(exc)) from exc


def build_orchestrator(config: dict[str, Any], gateway: Gateway, backend_override: str | None) -> Orchestrator:
    section = config.get("orchestrator", {})
    backend_id = backend_override or section.get("backend_id") or config.get("backend")
    if not backend_id:
        raise UsageError("config needs orchestrator.backend_id (or pass --backend)")
    prompt_dir = section.get("prompt_dir")
    if prompt_dir:
        prompt_dir = str(_resolve(config, prompt_dir))
        if not Path(prompt_dir).is_dir():
            raise UsageError(f"prompt_dir not found: {prompt_dir}")
    try:
        return Orchestrator(
            gateway,
            OrchestratorConfig(
                backend_id=backend_id,
                temperature=float(section.get("temperature", 0.0)),
                max_rounds=int(section.get("max_rounds", 3)),
                max_reprompts=int(section.get("max_reprompts", 2)),
                default_agent_id=section.get("default_agent_id"),
                prompt_dir=prompt_dir,
            ),
        )
    except ValueError as exc:
        raise UsageError(f"orchestrator config: {exc}") from exc


def build_exec_config(config: dict[str, Any]) -> ExecutionConfig:
    section = config.get("scheduler", {})
    try:
        return ExecutionConfig(
            max_parallel=int(section.get("max_parallel", 4)),
            task_timeout_ms=int(section.get("task_timeout_ms", 120_000)),
        )
    except ConfigError as exc:
        raise UsageError(f"scheduler config: {exc}") from exc


def build_service(config: dict[str, Any], backend_override: str | None) -> SessionService:
    gateway = build_gateway(config)
    data_dir = _resolve(config, str(config.get("data_dir", "sessions")))
    return SessionService(
        store=SessionLog(data_dir),
        orchestrator=build_orchestrator(config, gateway, backend_override),
        registry=build_registry(config),
        gateway=gateway,
        toolbox=build_toolbox(config),
        exec_config=build_exec_config(config),
    )


# -- chat ------------------------------------------------------------------


def _render_plan(plan: dict[str, Any], out: TextIO) -> None:
    print(f"[plan] {plan['problem_id']}: {plan['rationale']}", file=out)
    for i, sub in enumerate(plan["subproblems"], start=1):
        assignee = sub.get("assignee") or {}
        deps = ", ".join(sub.get("depends_on", [])) or "none"
        print(
            f"  {i}. {sub['id']} -> {assignee.get('kind', '?')}:{assignee.get('id', '?')} (deps: {deps})",
            file=out,
        )
        print(f"     {sub['description']}", file=out)
    print("[plan] Reply to approve or request changes.", file=out)


def _print_events(service: SessionService, session_id: str, since: int, out: TextIO) -> int:
    """Render and consume events newer than since; returns the new cursor."""
    for event in service.get_events(session_id, since_seq=since):
        since = event.seq
        payload = event.payload
        if event.kind == "orchestrator_msg":
            print(f"[orchestrator] {payload.get('text', '')}", file=out)
        elif event.kind == "plan_proposed":
            _render_plan(payload["plan"], out)
        elif event.kind == "plan_approved":
            print("[orchestrator] Plan approved; executing.", file=out)
        elif event.kind == "task_event":
            print(f"[task] {payload.get('id')}: {payload.get('transition')}", file=out)
        elif event.kind == "final_answer":
            print(f"[answer] {payload.get('text', '')}", file=out)
            if not payload.get("complete"):
                print("[answer] (incomplete: some subproblems did not finish)", file=out)
    return since


def cmd_chat(args: argparse.Namespace, stdin: TextIO, stdout: TextIO) -> int:
    config = load_config(args.config)
    service = build_service(config, args.backend)
    first = stdin.readline()
    if not first.strip():
        print("nothing to do: no problem statement on stdin", file=sys.stderr)
        return 1
    problem = first.rstrip("\n")
    print(f"> {problem}", file=stdout)
    session_id = service.create_session(problem)
    service.start_clarification(session_id)
    cursor = _print_events(service, session_id, 0, stdout)
    while True:
        phase = service.phase_of(session_id)
        if phase in (Phase.GATHERING, Phase.AWAITING_APPROVAL):
            line = stdin.readline()
            if line == "":
                print("input ended before the session completed", file=sys.stderr)
                return 1
            text = line.rstrip("\n")
            print(f"> {text}", file=stdout)
            service.post_message(session_id, text)
            cursor = _print_events(service, session_id, cursor, stdout)
        elif phase in (Phase.EXECUTING, Phase.PLANNING):
            service.wait_until_settled(session_id)
            cursor = _print_events(service, session_id, cursor, stdout)
        elif phase is Phase.DONE:
            cursor = _print_events(service, session_id, cursor, stdout)
            return 0
        else:  # failed
            _print_events(service, session_id, cursor, stdout)
            return 1


# -- plan --------------------------------------------------------------------


def cmd_plan(args: argparse.Namespace, stdout: TextIO) -> int:
    config = load_config(args.config)
    registry = build_registry(config)
    if args.validate_only:
        plan_path = Path(args.validate_only)
        if not plan_path.is_file():
            raise UsageError(f"plan file not found: {plan_path}")
        try:
            plan = plan_from_json(plan_path.read_text(encoding="utf-8"))
        except ValueError as exc:
            print(f"invalid plan: {exc}", file=sys.stderr)
            return 1
        report = validate_plan(plan, registry)
        if report.ok:
            print("plan OK", file=stdout)
            return 0
        for violation in report.violations:
            print(f"violation: {violation.message}", file=stdout)
        return 1
    if not args.problem:
        raise UsageError("plan needs --problem TEXT or --validate-only PLAN.json")
    gateway = build_gateway(config)
    orchestrator = build_orchestrator(config, gateway, args.backend)
    problem = ProblemStatement(id="cli-problem", text=args.problem)
    try:
        plan = orchestrator.decompose(problem, registry)
    except DecompositionFailed as exc:
        print(f"decomposition failed: {exc.reason}", file=sys.stderr)
        print(f"raw model output:\n{exc.raw}", file=sys.stderr)
        return 1
    text = plan_to_json(plan)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text, file=stdout)
    return 0


# -- eval ----------------------------------------------------------------------


def _parse_sample(text: str | None) -> tuple[int, int] | None:
    if not text:
        return None
    try:
        if ":" in text:
            start_text, stop_text = text.split(":", 1)
            return int(start_text), int(stop_text)
        return 0, int(text)
    except ValueError as exc:
        raise UsageError(f"bad --sample value: {text!r} (use N or START:STOP)") from exc


def cmd_eval(args: argparse.Namespace, stdout: TextIO) -> int:
    config = load_config(args.config)
    dataset_path = Path(args.dataset) if args.dataset else None
    if dataset_path is None:
        raise UsageError("eval needs --dataset PATH")
    if not dataset_path.is_file():
        raise UsageError(f"dataset not found: {dataset_path}")
    try:
        dataset = load_dataset(dataset_path)
    except FileError as exc:
        raise UsageError(str(exc)) from exc
    except DatasetError as exc:
        print(f"bad dataset: {exc}", file=sys.stderr)
        return 1
    names = (
        list(CONFIG_NAMES)
        if args.configs in (None, "all")
        else [n.strip() for n in args.configs.split(",") if n.strip()]
    )
    eval_section = config.get("eval", {})
    role_map = eval_section.get("backends", {})
    sample = _parse_sample(args.sample)
    configs = []
    for name in names:
        if name not in CONFIG_NAMES:
            raise UsageError(f"unknown eval config: {name}")
        if name not in role_map:
            raise UsageError(f"config file has no eval.backends entry for '{name}'")
        try:
            configs.append(
                EvalConfig(
                    name=name,
                    backends=role_map[name],
                    sample=sample,
                    seed=args.seed,
                    default_agent_id=eval_section.get("default_agent_id"),
                    max_reprompts=int(eval_section.get("max_reprompts", 2)),
                )
            )
        except ValueError as exc:
            raise UsageError(f"eval config '{name}': {exc}") from exc
    out_dir = Path(args.out) if args.out else _resolve(config, str(config.get("output_dir", "eval_out")))
    report = run_eval(
        configs,
        dataset,
        build_gateway(config),
        build_registry(config),
        toolbox=build_toolbox(config),
        out_dir=out_dir,
        exec_config=build_exec_config(config),
        prompt_dir=config.get("orchestrator", {}).get("prompt_dir"),
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    print(report.format_table(), file=stdout)
    print(f"report written to {out_dir / 'report.json'}", file=stdout)
    return 0


# -- serve -----------------------------------------------------------------


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .api import create_app

    config = load_config(args.config)
    service = build_service(config, args.backend)
    app = create_app(service)
    port = args.port or int(config.get("port", 8765))
    try:
        uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
    except (OSError, SystemExit) as exc:
        print(f"server failed to start: {exc}", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decomp",
        description="Decomposition-driven multi-agent orchestration runtime",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    chat = sub.add_parser("chat", help="interactive session on stdin/stdout")
    chat.add_argument("--config", required=True, help="path to the runtime config JSON")
    chat.add_argument("--backend", help="override the orchestrator backend id")

    plan = sub.add_parser("plan", help="one-shot decomposition (no clarification)")
    plan.add_argument("--config", required=True)
    plan.add_argument("--backend")
    plan.add_argument("--problem", help="problem text to decompose")
    plan.add_argument("--out", help="write the plan JSON here as well as stdout")
    plan.add_argument("--validate-only", metavar="PLAN_JSON", help="validate an existing plan file")

    ev = sub.add_parser("eval", help="run the evaluation grid over a dataset")
    ev.add_argument("--config", required=True)
    ev.add_argument("--dataset", help="JSONL dataset of {question, answer} records")
    ev.add_argument("--configs", help="comma-separated config names, or 'all'")
    ev.add_argument("--sample", help="N (first N problems) or START:STOP")
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--out", help="directory for report.json and transcripts")

    serve = sub.add_parser("serve", help="serve the session HTTP API")
    serve.add_argument("--config", required=True)
    serve.add_argument("--backend")
    serve.add_argument("--port", type=int, default=0)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        if args.command == "chat":
            return cmd_chat(args, sys.stdin, sys.stdout)
        if args.command == "plan":
            return cmd_plan(args, sys.stdout)
        if args.command == "eval":
            return cmd_eval(args, sys.stdout)
        if args.command == "serve":
            return cmd_serve(args)
        parser.error(f"unknown command {args.command!r}")
        return 2
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
