"""Command-line frontend for the pipeline.

Every command is a thin shell over the library modules. `-` means stdin;
stdin/stdout are UTF-8; there are no interactive prompts. Exit codes:
0 success, 1 usage, 2 data error, 3 upstream/backend error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import evalharness
from .config import AppConfig, ConfigError, load_config
from .detection import detect
from .errors import (
    BackendUnavailable,
    CorpusError,
    PrivgateError,
    UpstreamError,
)
from .gateway import create_app, span_dict
from .mapper import redact as redact_text
from .mapper import rehydrate as rehydrate_text
from .rules import RuleManager
from .smokescreen import make_surrogate_template
from .mapper import RedactionSession
from .store import SessionStore

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3


def _read_input(source: str) -> str:
    if source == "-":
        return sys.stdin.read()
    try:
        return Path(source).read_text(encoding="utf-8")
    except OSError as exc:
        raise click.ClickException(f"cannot read {source}: {exc}") from exc


def _store_from(config: AppConfig, store_dir: str | None) -> SessionStore:
    return SessionStore(
        root=store_dir or config.store_dir,
        memory_only=config.memory_sessions,
        purge_after_days=config.purge_after_days,
    )


def _rules_from(config: AppConfig, rules_path: str | None) -> RuleManager:
    return RuleManager(rules_path or config.rules_path)


pass_config = click.make_pass_decorator(AppConfig)


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None, help="Config file (INI).")
@click.pass_context
def cli(ctx: click.Context, config_path: str | None):
    """Local privacy gateway: detect, redact, rehydrate, smokescreen, serve, eval."""
    ctx.obj = load_config(config_path)


@cli.command("detect")
@click.argument("source")
@click.option("--rules", "rules_path", type=click.Path(), default=None)
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
@pass_config
def detect_cmd(config: AppConfig, source: str, rules_path: str | None, fmt: str):
    """Report PII spans found in SOURCE (a file, or - for stdin)."""
    text = _read_input(source)
    spans = detect(text, _rules_from(config, rules_path).current)
    if fmt == "json":
        click.echo(json.dumps({"spans": [span_dict(s) for s in spans]}, ensure_ascii=False))
        return
    if not spans:
        click.echo("no spans")
        return
    for s in spans:
        click.echo(f"{s.start}\t{s.end}\t{s.category.key}\t{s.confidence:.2f}\t{s.surface}")


@cli.command("redact")
@click.argument("source")
@click.option("--session", "session_id", required=True, help="Session id (see `session create`).")
@click.option("--rules", "rules_path", type=click.Path(), default=None)
@click.option("--store", "store_dir", type=click.Path(), default=None)
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
@pass_config
def redact_cmd(config, source, session_id, rules_path, store_dir, fmt):
    """Redact SOURCE against a session; prints the secured text."""
    text = _read_input(source)
    store = _store_from(config, store_dir)
    session = store.load(session_id)
    spans = detect(text, _rules_from(config, rules_path).current)
    secured = redact_text(text, spans, session)
    store.save(session)
    if fmt == "json":
        click.echo(
            json.dumps(
                {
                    "session_id": session.session_id,
                    "secured_text": secured.secured_text,
                    "replacements": [
                        {
                            "source_start": r.source_start,
                            "source_end": r.source_end,
                            "original": r.original,
                            "placeholder": r.placeholder,
                            "secured_start": r.secured_start,
                            "secured_end": r.secured_end,
                        }
                        for r in secured.replacements
                    ],
                },
                ensure_ascii=False,
            )
        )
    else:
        click.echo(secured.secured_text, nl=False)


@cli.command("rehydrate")
@click.argument("source")
@click.option("--session", "session_id", required=True)
@click.option("--store", "store_dir", type=click.Path(), default=None)
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
@pass_config
def rehydrate_cmd(config, source, session_id, store_dir, fmt):
    """Remap placeholders in SOURCE back to their originals."""
    text = _read_input(source)
    store = _store_from(config, store_dir)
    session = store.load(session_id)
    restored, hits = rehydrate_text(text, session)
    if fmt == "json":
        click.echo(
            json.dumps(
                {
                    "restored": restored,
                    "hits": [
                        {"start": h.start, "end": h.end, "placeholder": h.placeholder,
                         "original": h.original}
                        for h in hits
                    ],
                },
                ensure_ascii=False,
            )
        )
    else:
        click.echo(restored, nl=False)


@cli.command("smokescreen")
@click.argument("source")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
def smokescreen_cmd(source: str, fmt: str):
    """Reframe SOURCE as third-person advice about a fabricated persona."""
    text = _read_input(source)
    session = RedactionSession()
    surrogate = make_surrogate_template(text, session)
    if fmt == "json":
        click.echo(
            json.dumps(
                {
                    "persona": surrogate.persona,
                    "surrogate_text": surrogate.surrogate_text,
                    "instruction_suffix": surrogate.instruction_suffix,
                    "full_text": surrogate.full_text,
                },
                ensure_ascii=False,
            )
        )
    else:
        click.echo(surrogate.full_text)


@cli.group("session")
def session_group():
    """Create, inspect, and purge local sessions."""


@session_group.command("create")
@click.option("--store", "store_dir", type=click.Path(), default=None)
@pass_config
def session_create(config, store_dir):
    store = _store_from(config, store_dir)
    session = store.create()
    click.echo(session.session_id)


@session_group.command("show")
@click.argument("session_id")
@click.option("--store", "store_dir", type=click.Path(), default=None)
@pass_config
def session_show(config, session_id, store_dir):
    store = _store_from(config, store_dir)
    session = store.load(session_id)
    for e in session.entries:
        click.echo(f"{e.placeholder}\t{e.category.key}\t{e.origin}\t{e.original}")


@session_group.command("purge")
@click.argument("session_id", required=False)
@click.option("--all", "purge_all", is_flag=True, default=False)
@click.option("--store", "store_dir", type=click.Path(), default=None)
@pass_config
def session_purge(config, session_id, purge_all, store_dir):
    store = _store_from(config, store_dir)
    if purge_all:
        store.purge_all()
        click.echo("purged all sessions")
    elif session_id:
        store.purge(session_id)
        click.echo(f"purged {session_id}")
    else:
        raise click.UsageError("pass a session id or --all")


@cli.command("serve")
@click.option("--port", type=int, default=None)
@click.option("--host", default=None)
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Config file; same as the top-level --config.")
@pass_config
def serve_cmd(config, port, host, config_path):
    """Run the gateway service (loopback only unless configured otherwise)."""
    import uvicorn

    if config_path:
        config = load_config(config_path)
    app = create_app(config)
    uvicorn.run(app, host=host or config.host, port=port or config.port, log_level="info")


@cli.command("eval")
@click.option("--corpus", default=evalharness.BUNDLED_CORPUS, show_default=True,
              help="Corpus directory, or 'builtin' for the bundled one.")
@click.option("--rules", "rules_path", type=click.Path(), default=None)
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
@click.option("--audit", type=int, default=0, help="Also print N random cases for hand review.")
@pass_config
def eval_cmd(config, corpus, rules_path, fmt, audit):
    """Score the detector on an annotated corpus (default: the bundled one)."""
    cases = evalharness.load_corpus(corpus)
    rules = _rules_from(config, rules_path).current
    metrics = evalharness.evaluate(cases, rules)
    if fmt == "json":
        click.echo(
            json.dumps(
                {
                    key: {"tp": m.tp, "fp": m.fp, "fn": m.fn,
                          "precision": m.precision, "recall": m.recall, "f1": m.f1}
                    for key, m in sorted(metrics.items())
                },
                ensure_ascii=False,
            )
        )
    else:
        click.echo(f"{'category':<16}{'P':>8}{'R':>8}{'F1':>8}{'tp':>6}{'fp':>6}{'fn':>6}")
        for key in sorted(metrics):
            m = metrics[key]
            click.echo(
                f"{key:<16}{m.precision:>8.3f}{m.recall:>8.3f}{m.f1:>8.3f}"
                f"{m.tp:>6}{m.fp:>6}{m.fn:>6}"
            )
    if audit:
        for line in evalharness.audit_sample(cases, rules, audit):
            click.echo(line)


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return EXIT_OK
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_DATA
    except click.exceptions.Abort:
        return EXIT_USAGE
    except (UpstreamError, BackendUnavailable) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_BACKEND
    except (CorpusError, ConfigError, PrivgateError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
