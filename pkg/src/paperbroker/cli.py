"""Operator command line.

System registration and key issuance, the daily job chain, leaderboard
access, the reference recommender client, the simulation driver, and
the API server. Every command loads the platform config (JSON file;
all keys have defaults) and opens the store it names.
"""

from __future__ import annotations

import json
from datetime import date

import click

from . import jobs as jobs_ops
from .auth import hash_password
from .config import Config, load_config
from .digest import run_digest_job
from .evaluation import leaderboard
from .multileaver import JobAlreadyRan, run_daily_job
from .storage import Store, StorageError


class _Date(click.ParamType):
    name = "date"

    def convert(self, value, param, ctx):
        if isinstance(value, date):
            return value
        try:
            return date.fromisoformat(value)
        except ValueError:
            self.fail(f"expected YYYY-MM-DD, got {value!r}", param, ctx)


DATE = _Date()


def _open_store(config: Config) -> Store:
    return Store(config.db_path)


def _guard(fn, *args, **kwargs):
    """Run an operation, turning expected failures into clean CLI errors."""
    try:
        return fn(*args, **kwargs)
    except (StorageError, JobAlreadyRan, ValueError, OSError) as exc:
        raise click.ClickException(str(exc)) from exc


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Platform config JSON; built-in defaults apply when omitted.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Living-lab broker for scientific-literature recommendation."""
    ctx.obj = load_config(config_path)


# -- admin -------------------------------------------------------------------

@main.group()
def admin() -> None:
    """System registration and account maintenance."""


@admin.command("create-system")
@click.option("--name", required=True, help="Display name; the system id derives from it.")
@click.pass_obj
def admin_create_system(config: Config, name: str) -> None:
    """Register an experimental system and print its API key once."""
    result = _guard(jobs_ops.create_system, _open_store(config), name)
    click.echo(f"system_id: {result['system_id']}")
    click.echo(f"api_key: {result['api_key']}")
    click.echo("Store the key now; it is never shown again.")


@admin.command("deactivate-system")
@click.argument("system_id")
@click.pass_obj
def admin_deactivate_system(config: Config, system_id: str) -> None:
    """Block a system's key without deleting its history."""
    _guard(_open_store(config).set_system_active, system_id, False)
    click.echo(f"deactivated {system_id}")


@admin.command("activate-system")
@click.argument("system_id")
@click.pass_obj
def admin_activate_system(config: Config, system_id: str) -> None:
    """Re-enable a deactivated system."""
    _guard(_open_store(config).set_system_active, system_id, True)
    click.echo(f"activated {system_id}")


@admin.command("systems")
@click.pass_obj
def admin_systems(config: Config) -> None:
    """List registered systems with their impression counts."""
    rows = _open_store(config).all_systems()
    if not rows:
        click.echo("no systems registered")
        return
    for system in rows:
        state = "active" if system.active else "inactive"
        click.echo(f"{system.system_id}  {state:8s}  impressions={system.impression_count}"
                   f"  {system.name}")


@admin.command("reset-password")
@click.option("--email", required=True)
@click.option("--password", prompt=True, hide_input=True, confirmation_prompt=True,
              help="Omit to be prompted without echo.")
@click.pass_obj
def admin_reset_password(config: Config, email: str, password: str) -> None:
    """Set a new password for the active account under EMAIL."""
    salt, hashed = hash_password(password, config.pbkdf2_iterations)
    user_id = _guard(_open_store(config).set_password, email, salt, hashed)
    click.echo(f"password reset for {user_id}")


# -- jobs --------------------------------------------------------------------

@main.group()
def jobs() -> None:
    """The daily batch chain; each job runs at most once per date."""


@jobs.command("ingest")
@click.option("--date", "on_date", type=DATE, default=lambda: date.today().isoformat(),
              help="Ledger date for the run (default today).")
@click.option("--file", "path", type=click.Path(exists=True), default=None,
              help="Metadata file, one JSON article per line.")
@click.option("--remote", is_flag=True, help="Pull from the configured remote feed URL.")
@click.pass_obj
def jobs_ingest(config: Config, on_date: date, path: str | None, remote: bool) -> None:
    """Load article metadata into the candidate pool."""
    if remote and path:
        raise click.UsageError("--file and --remote are mutually exclusive")
    if remote:
        if not config.remote_feed_url:
            raise click.UsageError("no remote_feed_url configured")
        result = _guard(jobs_ops.run_ingest_job, _open_store(config), on_date, None,
                        remote_url=config.remote_feed_url)
    else:
        if path is None:
            path = config.ingest_file
        if path is None:
            raise click.UsageError("pass --file or --remote (or configure ingest_file)")
        result = _guard(jobs_ops.run_ingest_job, _open_store(config), on_date, path)
    click.echo(f"accepted={result['accepted']} updated={result['updated']}"
               f" rejected={len(result['rejected'])}")
    for entry in result["rejected"]:
        click.echo(f"  line {entry['line']}: {entry['reason']}")


@jobs.command("interleave")
@click.option("--date", "on_date", type=DATE, default=lambda: date.today().isoformat())
@click.option("--seed", type=int, default=None, help="Override the configured global seed.")
@click.pass_obj
def jobs_interleave(config: Config, on_date: date, seed: int | None) -> None:
    """Build every user's daily impression from the submitted stacks."""
    report = _guard(
        run_daily_job, _open_store(config), on_date,
        global_seed=config.seed if seed is None else seed,
        systems_per_impression=config.systems_per_impression, top_k=config.top_k)
    click.echo(f"impressions_created={report.impressions_created}"
               f" users_skipped={report.users_skipped}")


@jobs.command("digest")
@click.option("--date", "on_date", type=DATE, default=lambda: date.today().isoformat())
@click.pass_obj
def jobs_digest(config: Config, on_date: date) -> None:
    """Write due digest emails to the outbox with tracked links."""
    result = _guard(run_digest_job, _open_store(config), on_date,
                    base_url=config.base_url, from_addr=config.from_addr,
                    outbox_dir=config.outbox_dir)
    click.echo(f"sent={result['sent']} skipped={result['skipped']}")


@jobs.command("expire")
@click.option("--date", "on_date", type=DATE, default=lambda: date.today().isoformat())
@click.pass_obj
def jobs_expire(config: Config, on_date: date) -> None:
    """Purge out-of-window stack entries; expire stale topic suggestions."""
    result = _guard(jobs_ops.expire_sweep, _open_store(config), on_date, config.window_days)
    click.echo(f"stack_entries_purged={result['stack_entries_purged']}"
               f" topics_expired={result['topics_expired']}")


@jobs.command("run-all")
@click.option("--date", "on_date", type=DATE, default=lambda: date.today().isoformat())
@click.pass_obj
def jobs_run_all(config: Config, on_date: date) -> None:
    """Ingest (if configured), interleave, digest, expire, in order."""
    results = jobs_ops.run_all(_open_store(config), config, on_date)
    failed = False
    for entry in results:
        line = f"{entry['job']}: {entry['outcome']}"
        if "detail" in entry:
            line += f" {json.dumps(entry['detail'])}"
        click.echo(line)
        failed = failed or entry["outcome"].startswith("failed")
    if failed:
        raise click.exceptions.Exit(1)


# -- eval --------------------------------------------------------------------

@main.group("eval")
def eval_group() -> None:
    """Reward metrics over recorded impressions."""


@eval_group.command("leaderboard")
@click.option("--from", "start", type=DATE, required=True)
@click.option("--to", "end", type=DATE, required=True)
@click.option("--kind", type=click.Choice(["articles", "topics"]), default="articles")
@click.option("--format", "fmt", type=click.Choice(["table", "json"]), default="table")
@click.pass_obj
def eval_leaderboard(config: Config, start: date, end: date, kind: str, fmt: str) -> None:
    """Rank systems by mean normalized reward over a period."""
    cards = _guard(leaderboard, _open_store(config), (start, end),
                   config.reward_weights, kind.rstrip("s"))
    if fmt == "json":
        click.echo(json.dumps([
            {"system_id": c.system_id, "impressions": c.impressions,
             "mean_normalized_reward": c.mean_normalized_reward}
            for c in cards], indent=2))
        return
    if not cards:
        click.echo("no impressions in period")
        return
    width = max(6, max(len(c.system_id) for c in cards))
    click.echo(f"{'#':>3} {'system':<{width}} {'impressions':>12} {'MNR':>8}")
    for rank, card in enumerate(cards, start=1):
        click.echo(f"{rank:>3} {card.system_id:<{width}}"
                   f" {card.impressions:>12} {card.mean_normalized_reward:>8.4f}")


# -- baseline ----------------------------------------------------------------

@main.group()
def baseline() -> None:
    """The reference BM25 recommender."""


@baseline.command("run")
@click.option("--api", "api_base", required=True, help="Broker base URL.")
@click.option("--key", "api_key", required=True, help="System API key.")
def baseline_run(api_base: str, api_key: str) -> None:
    """Run one full submission cycle against a live broker."""
    import httpx

    from .baseline.client import ClientError, run_client_cycle

    with httpx.Client(base_url=api_base, timeout=30.0) as transport:
        try:
            report = run_client_cycle(transport, api_key)
        except ClientError as exc:
            raise click.ClickException(str(exc)) from exc
    click.echo(f"users_seen={report.users_seen} users_submitted={report.users_submitted}"
               f" recommendations_submitted={report.recommendations_submitted}"
               f" batches_posted={report.batches_posted} rejected={len(report.rejected)}")


@baseline.command("score")
@click.option("--user-topics", "topics_path", type=click.Path(exists=True), required=True,
              help="Text file, one topic per line.")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), required=True,
              help="Article metadata, one JSON object per line.")
@click.option("--k", type=int, default=10, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["table", "json"]), default="table")
def baseline_score(topics_path: str, corpus_path: str, k: int, fmt: str) -> None:
    """Score a corpus offline against a topic profile."""
    from .baseline.index import InvertedIndex
    from .baseline.recommender import explain, top_k_for_user
    from .ingestion import parse_article
    from .models import ValidationError

    with open(topics_path, encoding="utf-8") as fh:
        topics = [line.strip() for line in fh if line.strip()]
    if not topics:
        raise click.ClickException("topic file is empty")
    docs = {}
    with open(corpus_path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                article = parse_article(json.loads(line))
            except (ValidationError, json.JSONDecodeError) as exc:
                raise click.ClickException(f"corpus line {line_no}: {exc}") from exc
            docs[article.article_id] = article.title + " " + article.abstract
    index = InvertedIndex.build(docs)
    ranked = top_k_for_user(index, topics, sorted(docs), k)
    if fmt == "json":
        click.echo(json.dumps([
            {"article_id": s.article_id, "score": s.total_score, "explanation": explain(s)}
            for s in ranked], indent=2))
        return
    if not ranked:
        click.echo("no article matches any topic")
        return
    for rank, scored in enumerate(ranked, start=1):
        click.echo(f"{rank:>3} {scored.article_id}  {scored.total_score:8.4f}  {explain(scored)}")


# -- sim ---------------------------------------------------------------------

@main.group()
def sim() -> None:
    """Synthetic end-to-end experiments over the real APIs."""


@sim.command("run")
@click.option("--config", "sim_config_path", type=click.Path(exists=True), required=True,
              help="Simulation config JSON (distinct from the platform config).")
@click.option("--format", "fmt", type=click.Choice(["table", "json"]), default="table")
def sim_run(sim_config_path: str, fmt: str) -> None:
    """Run a seeded simulated deployment and report per-system MNR."""
    from .sim.experiment import load_sim_config, run_experiment

    try:
        sim_config = load_sim_config(sim_config_path)
    except (ValueError, json.JSONDecodeError, OSError) as exc:
        raise click.ClickException(str(exc)) from exc
    result = run_experiment(sim_config)
    start, end = result.period
    if fmt == "json":
        click.echo(json.dumps({
            "period": [start.isoformat(), end.isoformat()],
            "systems": [
                {"name": name, "impressions": card.impressions,
                 "mean_normalized_reward": card.mean_normalized_reward}
                for name, card in sorted(result.scorecards.items(),
                                         key=lambda kv: -kv[1].mean_normalized_reward)],
        }, indent=2))
        return
    click.echo(f"period {start.isoformat()} .. {end.isoformat()}")
    width = max(6, max(len(name) for name in result.scorecards))
    click.echo(f"{'system':<{width}} {'impressions':>12} {'MNR':>8}")
    for name, card in sorted(result.scorecards.items(),
                             key=lambda kv: -kv[1].mean_normalized_reward):
        click.echo(f"{name:<{width}} {card.impressions:>12}"
                   f" {card.mean_normalized_reward:>8.4f}")


# -- serve -------------------------------------------------------------------

@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--frontend-dir", type=click.Path(), default=None,
              help="Directory with the built web client; served at / and /static.")
@click.pass_obj
def serve(config: Config, host: str, port: int, frontend_dir: str | None) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .webapi.app import create_app

    app = create_app(_open_store(config), config, frontend_dir=frontend_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
