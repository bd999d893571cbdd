"""Run reports: delimited trace data plus rendered figures.

The figures summarize a finished trace -- scheme occupancy over time and
event-kind totals -- and are written next to the tab-separated trace and
metrics files so a single report directory tells the whole story of a run.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import trace_metrics
from .model import SystemModel
from .simulator import Trace, dump_trace

EVENT_ORDER = (
    "Created",
    "Moved",
    "Triggered",
    "CorruptionApplied",
    "ReturnedFromRelease",
    "Stored",
    "Destroyed",
    "Delivered",
)


def scheme_occupancy(trace: Trace, model: SystemModel) -> dict[str, list[int]]:
    """Live token count per scheme at the end of each step."""
    steps = trace.horizon
    series = {path: [0] * steps for path in sorted(model.scheme_index)}
    scheme_of: dict[int, str] = {}
    alive: dict[int, bool] = {}

    events_by_time: dict[int, list] = {}
    for event in trace.events:
        events_by_time.setdefault(event.time, []).append(event)

    for t in range(steps):
        for event in events_by_time.get(t, ()):
            if event.name == "Created":
                scheme_of[event.token] = event.location.rpartition(".")[0]
                alive[event.token] = True
            elif event.name in ("Moved", "ReturnedFromRelease"):
                scheme_of[event.token] = event.location.rpartition(".")[0]
            elif event.name == "Stored":
                scheme_of[event.token] = event.location.rpartition(".")[0]
            elif event.name in ("Destroyed", "Delivered"):
                alive[event.token] = False
        for token, is_alive in alive.items():
            if is_alive:
                scheme = scheme_of[token]
                if scheme in series:
                    series[scheme][t] += 1
    return series


def event_totals(trace: Trace) -> dict[str, int]:
    totals = {name: 0 for name in EVENT_ORDER}
    for event in trace.events:
        totals[event.name] = totals.get(event.name, 0) + 1
    return totals


def render_occupancy_figure(
    trace: Trace, model: SystemModel, out_path: Path
) -> None:
    series = scheme_occupancy(trace, model)
    fig, ax = plt.subplots(figsize=(7, 4))
    steps = range(trace.horizon)
    for scheme, counts in series.items():
        ax.plot(steps, counts, label=scheme, linewidth=1.4)
    ax.set_xlabel("step")
    ax.set_ylabel("tokens in scheme")
    ax.set_title("scheme occupancy over time")
    if series:
        ax.legend(fontsize=7, loc="upper left")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def render_event_figure(trace: Trace, out_path: Path) -> None:
    totals = event_totals(trace)
    names = [n for n in EVENT_ORDER if totals.get(n)]
    values = [totals[n] for n in names]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(range(len(names)), values, color="#4878a8")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("events")
    ax.set_title("event totals")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def write_report(trace: Trace, model: SystemModel, out_dir: Path | str) -> list[Path]:
    """Write trace.tsv, metrics.tsv and the two figures; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    trace_path = out_dir / "trace.tsv"
    trace_path.write_text(dump_trace(trace), encoding="utf-8")
    written.append(trace_path)

    metrics_path = out_dir / "metrics.tsv"
    metrics_path.write_text(
        "".join(f"{line}\n" for line in trace_metrics(trace).lines()),
        encoding="utf-8",
    )
    written.append(metrics_path)

    occupancy_path = out_dir / "occupancy.png"
    render_occupancy_figure(trace, model, occupancy_path)
    written.append(occupancy_path)

    events_path = out_dir / "events.png"
    render_event_figure(trace, events_path)
    written.append(events_path)

    return written
