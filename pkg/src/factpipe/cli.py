"""Command-line interface: serve, run, batch, audit, mock-adapter."""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Optional

import click

from .api import AppSettings, parse_strategy, serve
from .backends import build_backends
from .domain import PromptSpec, Session, SessionState
from .errors import FactpipeError
from .orchestrator import Orchestrator, PipelineConfig, StepCommand
from .store import Store


def _build_orchestrator(
    data_dir: Optional[str], profile: str, config_path: Optional[str]
) -> Orchestrator:
    store = Store(data_dir)
    backends = build_backends(
        profile,
        resolve_blob=lambda content_hash: store.get_blob(content_hash)[0],
        config_path=config_path,
    )
    return Orchestrator(store, backends)


@click.group()
def main() -> None:
    """Correct factually wrong text-to-image outputs using retrieved references."""


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None, help="Backend profile TOML.")
@click.option("--profile", type=click.Choice(["mock", "real"]), default="mock")
@click.option("--data-dir", default=None, help="Data directory (default: FACTPIPE_DATA_DIR).")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8765, type=int)
@click.option("--ui-dir", default=None, help="Directory with built web UI assets.")
def serve_cmd(config_path, profile, data_dir, host, port, ui_dir) -> None:
    """Run the HTTP service."""
    settings = AppSettings(
        data_dir=data_dir, profile=profile, config_path=config_path, ui_dir=ui_dir
    )
    serve(settings, host=host, port=port)


main.add_command(serve_cmd, name="serve")


def _print_candidates(session: Session, store: Store) -> None:
    click.echo("Retrieved candidates:")
    for candidate in session.candidates:
        if candidate.artifact is not None:
            preview = str(store.blob_path(candidate.artifact.content_hash))
        else:
            preview = f"({candidate.ingest_status.value}: {candidate.status_detail})"
        click.echo(f"  [{candidate.rank}] {candidate.origin_url}")
        click.echo(f"      {preview}")


def _run_one(
    orchestrator: Orchestrator,
    prompt: PromptSpec,
    config: PipelineConfig,
    interactive: bool,
    select: Optional[int],
) -> Session:
    session = orchestrator.create_session(prompt, config)
    for command in (
        StepCommand.GenerateInitial,
        StepCommand.Retrieve,
        StepCommand.Select,
        StepCommand.ClassifyAndRoute,
        StepCommand.GenerateGuidance,
        StepCommand.ApplyEdit,
        StepCommand.Complete,
    ):
        index = None
        if command is StepCommand.Select:
            if interactive:
                _print_candidates(session, orchestrator.store)
                index = click.prompt("Select candidate index", type=int)
            elif select is not None:
                index = select
            else:
                index = orchestrator.auto_select_index(session)
        session = orchestrator.run_step(session, command, select_index=index)
        if session.state is SessionState.Failed:
            break
    return session


@main.command()
@click.option("--prompt", "prompt_text", required=True)
@click.option("--n", "count_n", default=10, type=int, help="Candidates to retrieve.")
@click.option(
    "--strategy",
    default="auto",
    type=click.Choice(["auto", "instruction", "image-prompt"]),
    help="Override routing instead of classifying.",
)
@click.option("--select", "select_index", default=None, type=int, help="Candidate index to select.")
@click.option("--interactive", is_flag=True, help="Choose the candidate on stdin.")
@click.option("--profile", type=click.Choice(["mock", "real"]), default="mock")
@click.option("--seed", default=None, type=int)
@click.option("--subject-hint", default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--data-dir", default=None)
def run(
    prompt_text, count_n, strategy, select_index, interactive, profile, seed,
    subject_hint, config_path, data_dir,
) -> None:
    """Run one prompt end-to-end."""
    orchestrator = _build_orchestrator(data_dir, profile, config_path)
    prompt = PromptSpec(text=prompt_text, subject_hint=subject_hint)
    config = PipelineConfig(
        retrieval_count_n=count_n,
        auto_select=not interactive and select_index is None,
        strategy_override=parse_strategy(strategy),
        backend_profile=profile,
        seed=seed,
    )
    session = _run_one(orchestrator, prompt, config, interactive, select_index)
    click.echo(f"session:  {session.session_id}")
    click.echo(f"state:    {session.state.value}")
    if session.taxonomy:
        click.echo(f"taxonomy: {session.taxonomy.value} / {session.scope.value}")
    if session.strategy:
        click.echo(f"strategy: {session.strategy.value}")
    if session.guidance:
        click.echo(f"guidance: {session.guidance.text}")
    if session.edited_image:
        click.echo(f"edited:   {session.edited_image.content_hash}")
        click.echo(f"file:     {orchestrator.store.blob_path(session.edited_image.content_hash)}")
    sys.exit(0 if session.state is SessionState.Completed else 1)


@main.command()
@click.option("--file", "prompt_file", required=True, type=click.Path(exists=True))
@click.option("--profile", type=click.Choice(["mock", "real"]), default="mock")
@click.option("--n", "count_n", default=10, type=int)
@click.option("--seed", default=None, type=int)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--data-dir", default=None)
def batch(prompt_file, profile, count_n, seed, config_path, data_dir) -> None:
    """Run every prompt in a file non-interactively and print a report."""
    orchestrator = _build_orchestrator(data_dir, profile, config_path)
    prompts = [
        line.strip()
        for line in Path(prompt_file).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    rows = []
    for text in prompts:
        config = PipelineConfig(
            retrieval_count_n=count_n, auto_select=True, backend_profile=profile, seed=seed
        )
        try:
            session = orchestrator.run_pipeline(PromptSpec(text=text), config)
            rows.append(
                (
                    text,
                    session.taxonomy.value if session.taxonomy else "-",
                    session.scope.value if session.scope else "-",
                    session.strategy.value if session.strategy else "-",
                    session.edited_image.content_hash[:12] if session.edited_image else "-",
                    session.state.value,
                )
            )
        except FactpipeError as exc:
            rows.append((text, "-", "-", "-", "-", f"failed ({exc})"))
    header = ("prompt", "taxonomy", "scope", "strategy", "edited", "status")
    widths = [
        max(len(str(row[i])) for row in rows + [header]) if rows else len(header[i])
        for i in range(len(header))
    ]
    for row in [header] + rows:
        click.echo("  ".join(str(cell).ljust(width) for cell, width in zip(row, widths)))
    all_completed = bool(rows) and all(row[5] == SessionState.Completed.value for row in rows)
    sys.exit(0 if all_completed or not rows else 1)


@main.command()
@click.option("--data-dir", default=None)
def audit(data_dir) -> None:
    """Full-scan provenance audit: verify every provenance link and digest."""
    store = Store(data_dir)
    problems = store.audit(deep=True)
    records = sum(1 for _ in store.iter_provenance())
    if problems:
        for problem in problems:
            click.echo(f"violation: {problem}")
        sys.exit(1)
    click.echo(f"audit ok: {records} provenance record(s), 0 violations")


@main.command("mock-adapter")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8799, type=int)
def mock_adapter(host, port) -> None:
    """Serve the edit wire protocol backed by the deterministic mock editors."""
    import uvicorn

    from .backends.adapter_server import create_adapter_app

    uvicorn.run(create_adapter_app(), host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
