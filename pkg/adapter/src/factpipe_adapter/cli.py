"""Adapter CLI: serve the microservice or run the conformance suite."""

from __future__ import annotations

import sys

import click

from .config import AdapterConfig


@click.group()
def main() -> None:
    """Model-side edit service for the factual image-correction pipeline."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8790, type=int)
def serve(config_path, host, port) -> None:
    """Load whatever checkpoints resolve and serve the edit protocol."""
    import uvicorn

    from .engines import load_engines
    from .service import create_app

    config = AdapterConfig.from_file(config_path) if config_path else AdapterConfig()
    engines = load_engines(config)
    if not engines:
        click.echo("warning: no engines loaded; all edit requests will 409", err=True)
    uvicorn.run(create_app(engines), host=host, port=port, log_level="info")


@main.command()
@click.option("--url", required=True, help="Base URL of the server under test.")
def contract(url) -> None:
    """Replay the protocol conformance cases against a running server."""
    import httpx

    from .contract import contract_suite, format_report

    with httpx.Client(base_url=url, timeout=60.0) as client:
        results = contract_suite(client)
    click.echo(format_report(results))
    sys.exit(0 if all(r.passed for r in results) else 1)


if __name__ == "__main__":
    main()
