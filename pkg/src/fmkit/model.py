"""Core ontology for multi-sphere flow systems.

A system is a tree of spheres (participants), each holding flow schemes --
one staged assembly per kind of thing that flows -- wired together by flow
arcs (same-kind movement) and trigger arcs (cross-kind causation). Models
are immutable once built and safe to share between readers.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator


class Stage(enum.IntEnum):
    """Lifecycle positions of a scheme, in canonical processing order."""

    RECEIVE = 0
    PROCESS = 1
    CREATE = 2
    RELEASE = 3
    TRANSFER = 4

    @property
    def keyword(self) -> str:
        """Lowercase spelling used in DSL text and reports."""
        return self.name.lower()

    @property
    def abbrev(self) -> str:
        return _STAGE_ABBREV[self]


_STAGE_ABBREV = {
    Stage.RECEIVE: "R",
    Stage.PROCESS: "P",
    Stage.CREATE: "C",
    Stage.RELEASE: "Rl",
    Stage.TRANSFER: "T",
}

STAGES: tuple[Stage, ...] = tuple(Stage)
STAGE_BY_KEYWORD: dict[str, Stage] = {s.keyword: s for s in Stage}


class Substate(enum.Enum):
    """Parking positions for stored tokens; storage attaches to R/P/C only."""

    STORED_AT_RECEIVE = "stored-at-receive"
    STORED_AT_PROCESS = "stored-at-process"
    STORED_AT_CREATE = "stored-at-create"

    @classmethod
    def for_stage(cls, stage: Stage) -> "Substate":
        try:
            return _SUBSTATE_BY_STAGE[stage]
        except KeyError:
            raise ValueError(f"no storage substate at stage {stage.keyword}") from None

    @property
    def stage(self) -> Stage:
        return {v: k for k, v in _SUBSTATE_BY_STAGE.items()}[self]


_SUBSTATE_BY_STAGE = {
    Stage.RECEIVE: Substate.STORED_AT_RECEIVE,
    Stage.PROCESS: Substate.STORED_AT_PROCESS,
    Stage.CREATE: Substate.STORED_AT_CREATE,
}

# Committed intra-scheme hop relation. Receive feeds Process; Process and
# Create feed each other one way (processing may generate new things, never
# the reverse); Receive/Process/Create all feed Release; Release feeds
# Transfer and may hand anything back to the stage that released it.
# Transfer->Receive is deliberately absent here: that hop exists only
# between schemes (see the inter-scheme arc shape rule).
LEGAL_TRANSITIONS: frozenset[tuple[Stage, Stage]] = frozenset(
    {
        (Stage.RECEIVE, Stage.PROCESS),
        (Stage.RECEIVE, Stage.RELEASE),
        (Stage.PROCESS, Stage.CREATE),
        (Stage.PROCESS, Stage.RELEASE),
        (Stage.CREATE, Stage.PROCESS),
        (Stage.CREATE, Stage.RELEASE),
        (Stage.RELEASE, Stage.TRANSFER),
        (Stage.RELEASE, Stage.RECEIVE),
        (Stage.RELEASE, Stage.PROCESS),
        (Stage.RELEASE, Stage.CREATE),
    }
)


def legal_transition(source: Stage, target: Stage) -> bool:
    """True when a token may hop source -> target inside a single scheme."""
    return (source, target) in LEGAL_TRANSITIONS


class UnknownScheme(KeyError):
    """Raised when a scheme path does not exist in the model."""


@dataclass(frozen=True)
class FlowthingKind:
    """A named ontology of things that flow (information, signal, ...)."""

    name: str
    description: str = ""


@dataclass(frozen=True)
class Endpoint:
    """Resolved arc endpoint: full scheme path plus stage."""

    scheme: str
    stage: Stage

    def __str__(self) -> str:
        return f"{self.scheme}.{self.stage.keyword}"

    @property
    def key(self) -> tuple[str, Stage]:
        return (self.scheme, self.stage)


class ArcClass(enum.Enum):
    FLOW = "flow"
    TRIGGER = "trigger"


@dataclass(frozen=True)
class Arc:
    """Typed edge between stage endpoints.

    Flow arcs move a token; trigger arcs cause a new token of the target
    scheme's kind to appear. The gateway flag marks triggers that represent
    use of a flowthing (diversion into another kind of flow).
    """

    arc_class: ArcClass
    source: Endpoint
    target: Endpoint
    gateway: bool = False
    label: str = ""

    @property
    def id(self) -> str:
        return f"{self.arc_class.value}:{self.source}->{self.target}"

    @property
    def intra_scheme(self) -> bool:
        return self.source.scheme == self.target.scheme


@dataclass(frozen=True)
class Scheme:
    """One staged flow assembly for one kind inside one sphere."""

    id: str
    sphere: str
    kind: str
    stages: frozenset[Stage]
    capacity: int | None = None

    @property
    def path(self) -> str:
        return f"{self.sphere}.{self.id}"

    def stages_sorted(self) -> tuple[Stage, ...]:
        return tuple(sorted(self.stages))


@dataclass(frozen=True)
class Sphere:
    """A participant or domain; may nest child spheres."""

    name: str
    path: str
    parent: str | None
    schemes: tuple[Scheme, ...] = ()
    children: tuple["Sphere", ...] = ()
    metadata: tuple[tuple[str, str], ...] = ()

    def meta(self, key: str) -> str | None:
        for k, v in self.metadata:
            if k == key:
                return v
        return None


@dataclass(frozen=True)
class SystemModel:
    """Immutable, referentially-closed description of a flow system."""

    name: str = ""
    kinds: tuple[FlowthingKind, ...] = ()
    spheres: tuple[Sphere, ...] = ()
    arcs: tuple[Arc, ...] = ()
    metadata: tuple[tuple[str, str], ...] = ()

    # -- derived lookups (cached, excluded from equality) ----------------

    @cached_property
    def kind_index(self) -> dict[str, FlowthingKind]:
        return {k.name: k for k in self.kinds}

    @cached_property
    def sphere_index(self) -> dict[str, Sphere]:
        index: dict[str, Sphere] = {}

        def visit(sphere: Sphere) -> None:
            index[sphere.path] = sphere
            for child in sphere.children:
                visit(child)

        for root in self.spheres:
            visit(root)
        return index

    @cached_property
    def scheme_index(self) -> dict[str, Scheme]:
        return {
            scheme.path: scheme
            for sphere in self.sphere_index.values()
            for scheme in sphere.schemes
        }

    @cached_property
    def arc_index(self) -> dict[str, Arc]:
        return {arc.id: arc for arc in self.arcs}

    @cached_property
    def _out_flow(self) -> dict[tuple[str, Stage], tuple[Arc, ...]]:
        return _group_by_source(a for a in self.arcs if a.arc_class is ArcClass.FLOW)

    @cached_property
    def _out_trigger(self) -> dict[tuple[str, Stage], tuple[Arc, ...]]:
        return _group_by_source(a for a in self.arcs if a.arc_class is ArcClass.TRIGGER)

    # -- accessors --------------------------------------------------------

    def scheme(self, path: str) -> Scheme:
        try:
            return self.scheme_index[path]
        except KeyError:
            raise UnknownScheme(path) from None

    def all_spheres(self) -> Iterator[Sphere]:
        yield from self.sphere_index.values()

    def all_schemes(self) -> Iterator[Scheme]:
        yield from self.scheme_index.values()

    def flows_from(self, scheme: str, stage: Stage) -> tuple[Arc, ...]:
        return self._out_flow.get((scheme, stage), ())

    def triggers_from(self, scheme: str, stage: Stage) -> tuple[Arc, ...]:
        return self._out_trigger.get((scheme, stage), ())

    def arcs_touching(self, scheme: str) -> tuple[Arc, ...]:
        return tuple(
            a for a in self.arcs if scheme in (a.source.scheme, a.target.scheme)
        )

    def meta(self, key: str) -> str | None:
        for k, v in self.metadata:
            if k == key:
                return v
        return None

    def sphere_is_channel(self, path: str) -> bool:
        """True when the sphere, or any ancestor, carries role=channel."""
        sphere: Sphere | None = self.sphere_index.get(path)
        while sphere is not None:
            if sphere.meta("role") == "channel":
                return True
            sphere = self.sphere_index.get(sphere.parent) if sphere.parent else None
        return False


def _group_by_source(arcs) -> dict[tuple[str, Stage], tuple[Arc, ...]]:
    grouped: dict[tuple[str, Stage], list[Arc]] = {}
    for arc in arcs:
        grouped.setdefault(arc.source.key, []).append(arc)
    return {key: tuple(sorted(group, key=lambda a: a.id)) for key, group in grouped.items()}


def reachable_schemes(model: SystemModel, origin: str) -> set[str]:
    """Scheme paths reachable from origin along arc direction, origin included."""
    if origin not in model.scheme_index:
        raise UnknownScheme(origin)
    adjacency: dict[str, set[str]] = {}
    for arc in model.arcs:
        adjacency.setdefault(arc.source.scheme, set()).add(arc.target.scheme)
    seen = {origin}
    frontier = [origin]
    while frontier:
        current = frontier.pop()
        for nxt in adjacency.get(current, ()):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen
