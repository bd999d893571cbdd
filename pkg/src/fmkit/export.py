"""Render models and traces as DOT digraph text.

One cluster per scheme (the staged box of the diagrams), nested inside a
sphere cluster only where spheres actually nest, one node per stage, solid
edges for flows, dashed edges for triggers, shaded stages for schemes that
live in channel spheres. Output ordering is canonical, so equal inputs give
byte-identical documents; no rasterizer is invoked or embedded.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .model import Arc, ArcClass, Scheme, Sphere, Stage, SystemModel
from .simulator import FingerprintMismatch, Trace, model_fingerprint_part


@dataclass(frozen=True)
class StyleProfile:
    flow_style: str = "solid"
    trigger_style: str = "dashed"
    channel_fill: str = "gray75"
    node_shape: str = "box"
    rankdir: str = "LR"


DEFAULT_STYLE = StyleProfile()


def _node_id(scheme: str, stage: Stage) -> str:
    return f"{scheme}.{stage.keyword}"


@dataclass
class _Writer:
    lines: list[str] = field(default_factory=list)
    depth: int = 0

    def put(self, text: str) -> None:
        self.lines.append("  " * self.depth + text)

    def open(self, text: str) -> None:
        self.put(text)
        self.depth += 1

    def close(self) -> None:
        self.depth -= 1
        self.put("}")


def export_model(
    model: SystemModel,
    style: StyleProfile = DEFAULT_STYLE,
    *,
    edge_counts: dict[str, int] | None = None,
    node_peaks: dict[str, int] | None = None,
) -> str:
    """DOT text for a model; optional per-arc counts and per-stage peaks
    annotate the labels (used by the trace export)."""
    w = _Writer()
    w.open(f'digraph "{model.name or "fm-model"}" {{')
    w.put(f"rankdir={style.rankdir};")
    w.put(f'node [shape={style.node_shape}, fontsize=10, margin="0.06,0.03"];')
    for sphere in model.spheres:
        _emit_sphere(w, model, sphere, style, node_peaks)
    for arc in model.arcs:
        _emit_arc(w, arc, style, edge_counts)
    w.close()
    return "\n".join(w.lines) + "\n"


def _emit_sphere(
    w: _Writer,
    model: SystemModel,
    sphere: Sphere,
    style: StyleProfile,
    node_peaks: dict[str, int] | None,
) -> None:
    nested = bool(sphere.children)
    if nested:
        w.open(f'subgraph "cluster_{sphere.path}" {{')
        w.put(f'label="{sphere.name}";')
    shaded = model.sphere_is_channel(sphere.path)
    for scheme in sphere.schemes:
        _emit_scheme(w, scheme, shaded, style, node_peaks)
    for child in sphere.children:
        _emit_sphere(w, model, child, style, node_peaks)
    if nested:
        w.close()


def _emit_scheme(
    w: _Writer,
    scheme: Scheme,
    shaded: bool,
    style: StyleProfile,
    node_peaks: dict[str, int] | None,
) -> None:
    w.open(f'subgraph "cluster_{scheme.path}" {{')
    w.put(f'label="{scheme.path} : {scheme.kind}";')
    if shaded:
        w.put(f'node [style=filled, fillcolor={style.channel_fill}];')
    for stage in scheme.stages_sorted():
        node = _node_id(scheme.path, stage)
        label = stage.abbrev
        if node_peaks is not None:
            label += f" ({node_peaks.get(node, 0)})"
        w.put(f'"{node}" [label="{label}", tooltip="{node}"];')
    w.close()


def _emit_arc(
    w: _Writer, arc: Arc, style: StyleProfile, edge_counts: dict[str, int] | None
) -> None:
    attrs = [
        f"style={style.flow_style if arc.arc_class is ArcClass.FLOW else style.trigger_style}"
    ]
    label = arc.label
    if edge_counts is not None:
        count = edge_counts.get(arc.id, 0)
        label = f"{label} [{count}]".strip() if label else str(count)
    if label:
        attrs.append(f'label="{label}"')
    if arc.gateway:
        attrs.append("arrowhead=diamond")
    w.put(
        f'"{_node_id(arc.source.scheme, arc.source.stage)}" -> '
        f'"{_node_id(arc.target.scheme, arc.target.stage)}" '
        f'[{", ".join(attrs)}];'
    )


def traversal_counts(trace: Trace, model: SystemModel) -> dict[str, int]:
    """How many times each arc was taken, recounted from the event list."""
    counts = {arc.id: 0 for arc in model.arcs}
    flow_by_endpoints = {
        (str(arc.source), str(arc.target)): arc.id
        for arc in model.arcs
        if arc.arc_class is ArcClass.FLOW
    }
    for event in trace.events:
        if event.name == "Moved":
            detail = dict(event.detail)
            arc_id = flow_by_endpoints.get((detail["from"], event.location))
            if arc_id is not None:
                counts[arc_id] += 1
        elif event.name == "Triggered":
            arc_id = dict(event.detail)["arc"]
            if arc_id in counts:
                counts[arc_id] += 1
    return counts


def peak_occupancy(trace: Trace) -> dict[str, int]:
    """Highest simultaneous token count each stage node ever held."""
    occupancy: dict[str, int] = {}
    peaks: dict[str, int] = {}
    location: dict[int, str] = {}

    def enter(token: int, node: str) -> None:
        occupancy[node] = occupancy.get(node, 0) + 1
        peaks[node] = max(peaks.get(node, 0), occupancy[node])
        location[token] = node

    def leave(token: int) -> None:
        node = location.pop(token, None)
        if node is not None:
            occupancy[node] -= 1

    for event in trace.events:
        if event.name == "Created":
            enter(event.token, event.location)
        elif event.name in ("Moved", "ReturnedFromRelease"):
            leave(event.token)
            enter(event.token, event.location)
        elif event.name in ("Stored", "Destroyed", "Delivered"):
            leave(event.token)
    return peaks


def export_trace(
    trace: Trace, model: SystemModel, style: StyleProfile = DEFAULT_STYLE
) -> str:
    """Model graph annotated with traversal counts and peak occupancies."""
    if trace.model_part() != model_fingerprint_part(model):
        raise FingerprintMismatch(
            "trace was produced from a different model than the one being drawn"
        )
    return export_model(
        model,
        style,
        edge_counts=traversal_counts(trace, model),
        node_peaks=peak_occupancy(trace),
    )


def check_digraph(text: str) -> list[str]:
    """Minimal structural check of DOT output: brace balance, a digraph
    header, and edges drawn only between declared nodes."""
    problems: list[str] = []
    if not text.startswith("digraph "):
        problems.append("missing digraph header")
    depth = 0
    declared: set[str] = set()
    edges: list[tuple[str, str]] = []
    for line in text.splitlines():
        stripped = line.strip()
        depth += stripped.count("{") - stripped.count("}")
        if depth < 0:
            problems.append("unbalanced closing brace")
            break
        if stripped.startswith('"') and "->" in stripped:
            left, _, rest = stripped.partition(" -> ")
            right = rest.split(" [", 1)[0]
            edges.append((left.strip('"'), right.strip().strip('";')))
        elif stripped.startswith('"') and "[label=" in stripped:
            declared.add(stripped.split('"')[1])
    if depth != 0:
        problems.append("unbalanced braces")
    for left, right in edges:
        if left not in declared:
            problems.append(f"edge from undeclared node {left}")
        if right not in declared:
            problems.append(f"edge to undeclared node {right}")
    return problems
