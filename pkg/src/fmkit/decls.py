"""Declaration records produced by the parser and consumed by the model builder.

Declarations are plain data: they carry names, not resolved references.
Programmatic construction (spans omitted) is supported so models can be
assembled without going through DSL text.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .model import Stage


@dataclass(frozen=True)
class Span:
    """Half-open byte range [start, end) into a source buffer."""

    start: int = 0
    end: int = 0


@dataclass(frozen=True)
class EndpointRef:
    """Unresolved arc endpoint: dotted sphere path, scheme id, stage."""

    sphere_path: str
    scheme: str
    stage: Stage
    span: Span = field(default_factory=Span, compare=False)

    @property
    def scheme_path(self) -> str:
        return f"{self.sphere_path}.{self.scheme}"

    def __str__(self) -> str:
        return f"{self.scheme_path}.{self.stage.keyword}"


@dataclass(frozen=True)
class KindDecl:
    name: str
    description: str = ""
    span: Span = field(default_factory=Span, compare=False)


@dataclass(frozen=True)
class SchemeDecl:
    id: str
    kind: str
    stages: tuple[Stage, ...]
    capacity: int | None = None
    span: Span = field(default_factory=Span, compare=False)


@dataclass(frozen=True)
class MetaDecl:
    key: str
    value: str
    span: Span = field(default_factory=Span, compare=False)


@dataclass(frozen=True)
class SphereDecl:
    name: str
    schemes: tuple[SchemeDecl, ...] = ()
    children: tuple["SphereDecl", ...] = ()
    metas: tuple[MetaDecl, ...] = ()
    span: Span = field(default_factory=Span, compare=False)


@dataclass(frozen=True)
class FlowDecl:
    source: EndpointRef
    target: EndpointRef
    label: str = ""
    span: Span = field(default_factory=Span, compare=False)


@dataclass(frozen=True)
class TriggerDecl:
    source: EndpointRef
    target: EndpointRef
    gateway: bool = False
    label: str = ""
    span: Span = field(default_factory=Span, compare=False)


Declaration = Union[KindDecl, SphereDecl, FlowDecl, TriggerDecl, MetaDecl]
