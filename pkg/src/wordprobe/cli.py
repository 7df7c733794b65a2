"""Command-line front end: run experiments, print reports, manage word lists."""

from __future__ import annotations

import asyncio
import hashlib
import json
import signal
import sys
from datetime import datetime, timezone
from pathlib import Path

import click

from . import aggregate, lexicon
from .dispatch import ControlHandle, DispatchPolicy, ProviderError, run_experiment
from .prompts import builtin_battery, load_battery
from .providers import HttpChatProvider, MockProvider
from .store import (
    BUILTIN_BATTERY_ID,
    ProviderKind,
    Store,
    StoreError,
    UnknownExperiment,
    ValidationError,
    snapshot,
)

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2

CHAT_URL_ENV = "WORDPROBE_CHAT_URL"

# Mock runs use a frozen clock so exports are byte-reproducible.
_FIXED_CLOCK_EPOCH = datetime(2000, 1, 1, tzinfo=timezone.utc)


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_FATAL)


def _read_file(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        _fail(f"cannot read {path}: {e}")
        raise AssertionError("unreachable")


@click.group()
def main():
    """Probe an LLM's knowledge of a word list with yes/no prompts."""


@main.command()
@click.option("--words", "words_file", required=True, help="Word list file, one word per line.")
@click.option("--battery", "battery_file", default="builtin", show_default=True,
              help="Battery JSON file, or 'builtin' for the shipped four prompts.")
@click.option("--provider", "provider_kind", type=click.Choice(["mock", "http"]), default="mock",
              show_default=True)
@click.option("--model", default="mock-model", show_default=True)
@click.option("--temperature", type=float, default=0.0, show_default=True)
@click.option("--rate", type=float, default=20.0, show_default=True,
              help="Max provider requests per second.")
@click.option("--in-flight", type=int, default=8, show_default=True,
              help="Max concurrent provider calls.")
@click.option("--max-attempts", type=int, default=3, show_default=True)
@click.option("--max-output-tokens", type=int, default=10, show_default=True)
@click.option("--system", "system_message", default=None, help="Optional system message.")
@click.option("--out", "out_prefix", required=True,
              help="Output prefix; writes PREFIX.records.csv, PREFIX.histogram.json, PREFIX.summary.json.")
@click.option("--store", "store_file", default=None,
              help="Store database path (default PREFIX.db); reuse it to resume a stopped run.")
@click.option("--name", default="cli-run", show_default=True,
              help="Experiment name; reruns with the same name and store resume it.")
@click.option("--seed", type=int, default=0, show_default=True, help="Mock provider seed.")
@click.option("--unparseable-rate", type=float, default=0.0, show_default=True,
              help="Mock provider fraction of unparseable responses.")
@click.option("--chat-url", default=None,
              help=f"Chat-completions endpoint for --provider http (or ${CHAT_URL_ENV}).")
@click.option("--config", "config_file", default=None,
              help="JSON file of template-form values ({model, temperature}); overrides the flags.")
def run(words_file, battery_file, provider_kind, model, temperature, rate, in_flight,
        max_attempts, max_output_tokens, system_message, out_prefix, store_file, name,
        seed, unparseable_rate, chat_url, config_file):
    """Run (or resume) an experiment and export its reports.

    Exit code 0 when every pair is answered, 2 on a partial run
    (stopped or pairs still failing), 1 on fatal errors.
    """
    if config_file:
        try:
            values = json.loads(_read_file(config_file))
        except json.JSONDecodeError as e:
            _fail(f"bad config file: {e}")
        model = values.get("model", model)
        temperature = values.get("temperature", temperature)

    raw_words = _read_file(words_file)
    try:
        wordlist = lexicon.load_word_list(raw_words, name=Path(words_file).stem)
    except lexicon.IngestError as e:
        _fail(str(e))

    if battery_file == "builtin":
        battery, battery_id = builtin_battery(), BUILTIN_BATTERY_ID
    else:
        raw = _read_file(battery_file)
        try:
            battery = load_battery(raw)
        except Exception as e:
            _fail(f"bad battery file: {e}")
        battery_id = "battery-" + hashlib.sha256(raw).hexdigest()[:8]

    store = Store(store_file or f"{out_prefix}.db")
    if battery_id != BUILTIN_BATTERY_ID:
        store.add_battery(battery_id, battery)

    spec = store.find_experiment(name)
    if spec is None:
        stored = store.add_wordlist(
            wordlist.words, wordlist.name, source=wordlist.source, fold_case=wordlist.fold_case
        )
        # content-derived id: reruns and exports stay reproducible
        digest = hashlib.sha256(
            "\n".join([name, battery_id, model, str(seed), *wordlist.words]).encode("utf-8")
        ).hexdigest()[:12]
        try:
            policy = DispatchPolicy(
                max_requests_per_second=rate,
                max_in_flight=in_flight,
                max_attempts=max_attempts,
            )
            spec = store.create_experiment(
                {"model": model, "temperature": temperature},
                wordlist_id=stored.id,
                battery_id=battery_id,
                name=name,
                provider_kind=ProviderKind.HTTP_CHAT if provider_kind == "http" else ProviderKind.MOCK,
                dispatch=policy,
                max_output_tokens=max_output_tokens,
                system_message=system_message,
                schema=_cli_schema(model),
                experiment_id=digest,
            )
        except (ValidationError, ValueError) as e:
            _fail(str(e))
    else:
        existing = store.get_wordlist(spec.wordlist_id).words
        if existing != wordlist.words:
            _fail(
                f"experiment {name!r} in this store was created with a different word list; "
                "use a new --name or --store"
            )
        click.echo(f"resuming experiment {spec.id} ({name})", err=True)

    if provider_kind == "mock":
        provider = MockProvider(battery=battery, seed=seed, unparseable_rate=unparseable_rate)
        clock = lambda: _FIXED_CLOCK_EPOCH  # noqa: E731
    else:
        url = chat_url or _env_chat_url()
        provider = HttpChatProvider(url)
        clock = None

    control = ControlHandle()

    async def _run():
        loop = asyncio.get_running_loop()
        try:
            loop.add_signal_handler(signal.SIGINT, control.stop)
            loop.add_signal_handler(signal.SIGTERM, control.stop)
        except NotImplementedError:
            pass  # non-Unix event loops
        try:
            return await run_experiment(spec, provider, store, control, clock=clock)
        finally:
            if hasattr(provider, "aclose"):
                await provider.aclose()

    try:
        summary = asyncio.run(_run())
    except ProviderError as e:
        _fail(f"provider failure: {e}")
    except StoreError as e:
        _fail(str(e))

    prompt_ids = [t.id for t in battery]
    records = store.records(spec.id)
    hist = aggregate.histogram(records, prompt_ids)
    Path(f"{out_prefix}.records.csv").write_bytes(aggregate.export_records_csv(records))
    Path(f"{out_prefix}.histogram.json").write_bytes(aggregate.export_histogram_json(hist))
    summary_doc = {
        "experiment_id": spec.id,
        "name": spec.name,
        "model": spec.model,
        "temperature": spec.temperature,
        "provider": provider_kind,
        "seed": seed if provider_kind == "mock" else None,
        "words": len(wordlist.words),
        "prompts": len(battery),
        "answered": summary.answered,
        "yes": summary.yes,
        "no": summary.no,
        "unparseable": summary.unparseable,
        "failed": summary.failed,
        "skipped_existing": summary.skipped_existing,
        "remaining": summary.remaining,
        "stopped": summary.stopped,
    }
    Path(f"{out_prefix}.summary.json").write_text(
        json.dumps(summary_doc, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )

    click.echo(
        f"answered {summary.answered} (yes {summary.yes}, no {summary.no}, "
        f"unparseable {summary.unparseable}), skipped {summary.skipped_existing}, "
        f"failed {summary.failed}, remaining {summary.remaining}"
    )
    if summary.remaining > 0 or summary.stopped:
        click.echo("run is partial; rerun with the same --store and --name to resume", err=True)
        sys.exit(EXIT_PARTIAL)


def _env_chat_url() -> str:
    import os

    url = os.environ.get(CHAT_URL_ENV, "")
    if not url:
        _fail(f"--chat-url or ${CHAT_URL_ENV} required for --provider http")
    return url


def _cli_schema(model: str):
    """Template accepting the CLI's model string plus a [0,1] temperature."""
    from .store import ExperimentConfigSchema, FieldDescriptor

    return ExperimentConfigSchema(
        name="cli",
        description="one-shot command line run",
        configuration={
            "model": FieldDescriptor(type="select", options=((model, model),)),
            "temperature": FieldDescriptor(type="number", value=0, step=0.1, min=0, max=1),
        },
    )


@main.command()
@click.option("--store", "store_file", required=True)
@click.option("--experiment", "experiment_id", required=True)
@click.option("--histogram", "show_histogram", is_flag=True)
@click.option("--contradictions", "show_contradictions", is_flag=True)
@click.option("--rates", "show_rates", is_flag=True)
def report(store_file, experiment_id, show_histogram, show_contradictions, show_rates):
    """Print report tables for a stored experiment (default: rates)."""
    if not Path(store_file).exists():
        _fail(f"store not found: {store_file}")
    store = Store(store_file)
    try:
        snap = snapshot(store, experiment_id)
    except UnknownExperiment as e:
        _fail(str(e))

    if not (show_histogram or show_contradictions or show_rates):
        show_rates = True
    prompt_ids = list(snap.prompt_ids)
    hist = aggregate.histogram(snap.records, prompt_ids)

    if show_rates:
        click.echo("prompt  positive_rate")
        for i, pid in enumerate(prompt_ids, start=1):
            if hist.total_complete:
                rate = aggregate.positive_rate(hist, i)
                click.echo(f"{pid:<7} {100.0 * rate:6.2f}%")
            else:
                click.echo(f"{pid:<7}    n/a")
        click.echo(f"complete words: {hist.total_complete}, excluded: {hist.total_excluded}")
    if show_histogram:
        click.echo("code  count  percent")
        for code, count in sorted(hist.counts.items()):
            pct = 100.0 * count / hist.total_complete if hist.total_complete else 0.0
            click.echo(f"{code}  {count:5d}  {pct:6.2f}")
    if show_contradictions:
        words = aggregate.contradictions(snap.records, prompt_ids)
        codes = {
            o.word: aggregate.encode(o)
            for o in aggregate.build_outcomes(snap.records, prompt_ids)
            if o.complete and not any(b is None for b in o.bits)
            and all(b.value != "UNPARSEABLE" for b in o.bits)
        }
        click.echo("word  code")
        for w in words:
            click.echo(f"{w}  {codes[w]}")
        click.echo(f"contradictions: {len(words)}")
    click.echo(
        "note: yes/no probing can overestimate knowledge; a small share of "
        "claimed meanings may be wrong. Raw responses are kept for manual audit.",
        err=True,
    )


@main.group()
def words():
    """Word-list utilities."""


@words.command()
@click.option("--text", "text_file", required=True, help="Raw text file to tokenize.")
@click.option("--json", "json_out", default=None, help="Also write a JSON stats document.")
@click.option("--top", "top_n", type=int, default=20, show_default=True)
def stats(text_file, json_out, top_n):
    """Tokenize a text and print total/unique word counts."""
    data = _read_file(text_file)
    try:
        tokens = lexicon.tokenize_text(data)
    except lexicon.DecodeError as e:
        _fail(str(e))
    _, token_stats = lexicon.unique_words(tokens)
    click.echo(f"total_tokens   {token_stats.total_tokens}")
    click.echo(f"unique_words   {token_stats.unique_words}")
    if json_out:
        Path(json_out).write_bytes(lexicon.stats_json(token_stats, top_n))
        click.echo(f"stats written to {json_out}", err=True)


@words.command()
@click.option("--in", "in_file", required=True)
@click.option("--out", "out_file", required=True)
@click.option("--no-fold", is_flag=True, help="Keep case (for proper-noun lists).")
def normalize(in_file, out_file, no_fold):
    """Normalize and deduplicate a word list into canonical form."""
    data = _read_file(in_file)
    try:
        wl = lexicon.load_word_list(
            data, lexicon.IngestOptions(fold_case=not no_fold), name=Path(in_file).stem
        )
    except lexicon.IngestError as e:
        _fail(str(e))
    Path(out_file).write_bytes(lexicon.export_word_list(wl))
    r = wl.ingest_report
    click.echo(
        f"kept {r.kept}, dropped {r.dropped_duplicates} duplicates, "
        f"skipped {r.skipped} blank/comment lines"
    )


@main.command()
@click.option("--store", "store_file", required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--ui", "ui_dir", default=None,
              help="Directory with the built web UI (index.html + dist/).")
def serve(store_file, host, port, ui_dir):
    """Serve the HTTP API (and the web UI, if built) for interactive use."""
    import uvicorn

    from .service import create_app

    if ui_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend"
        if (candidate / "index.html").exists():
            ui_dir = candidate
    uvicorn.run(create_app(store_file, static_dir=ui_dir), host=host, port=port)


if __name__ == "__main__":
    main()
