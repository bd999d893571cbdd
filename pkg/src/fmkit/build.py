"""Turns declaration sets into validated, immutable system models.

Building establishes referential integrity only (no dangling names, stages
declared where arcs attach). Semantic well-formedness -- ontology
separation, legal hop shapes -- is the validator's job, so that broken
models can still be constructed, inspected and reported on.
"""
from __future__ import annotations

from dataclasses import dataclass

from .decls import (
    Declaration,
    EndpointRef,
    FlowDecl,
    KindDecl,
    MetaDecl,
    SphereDecl,
    TriggerDecl,
    Span,
)
from .model import (
    Arc,
    ArcClass,
    Endpoint,
    FlowthingKind,
    Scheme,
    Sphere,
    SystemModel,
)

DANGLING_REFERENCE = "DanglingReference"
DUPLICATE_NAME = "DuplicateName"
STAGE_NOT_IN_SCHEME = "StageNotInScheme"


@dataclass(frozen=True)
class BuildIssue:
    code: str
    subject: str
    message: str
    span: Span | None = None

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


class ModelBuildError(Exception):
    """Aggregates every integrity problem found in a declaration set."""

    def __init__(self, issues: list[BuildIssue]):
        self.issues = tuple(issues)
        summary = "; ".join(str(i) for i in issues[:3])
        if len(issues) > 3:
            summary += f"; and {len(issues) - 3} more"
        super().__init__(f"cannot build model: {summary}")


def build_system(decls) -> SystemModel:
    """Assemble an immutable SystemModel from a declaration set.

    The result is canonical: kinds, spheres, schemes, arcs and metadata are
    sorted, so any ordering of the same declarations yields an equal model.
    Raises ModelBuildError listing every integrity violation found.
    """
    decls = list(decls)
    issues: list[BuildIssue] = []

    kinds: dict[str, FlowthingKind] = {}
    for decl in decls:
        if isinstance(decl, KindDecl):
            if decl.name in kinds:
                issues.append(
                    BuildIssue(
                        DUPLICATE_NAME,
                        decl.name,
                        f"kind '{decl.name}' declared more than once",
                        decl.span,
                    )
                )
            else:
                kinds[decl.name] = FlowthingKind(decl.name, decl.description)

    metadata: dict[str, str] = {}
    for decl in decls:
        if isinstance(decl, MetaDecl):
            if decl.key in metadata:
                issues.append(
                    BuildIssue(
                        DUPLICATE_NAME,
                        decl.key,
                        f"meta key '{decl.key}' declared more than once",
                        decl.span,
                    )
                )
            else:
                metadata[decl.key] = decl.value

    sphere_decls = [d for d in decls if isinstance(d, SphereDecl)]
    seen_roots: set[str] = set()
    roots: list[Sphere] = []
    for decl in sphere_decls:
        if decl.name in seen_roots:
            issues.append(
                BuildIssue(
                    DUPLICATE_NAME,
                    decl.name,
                    f"sphere '{decl.name}' declared more than once at top level",
                    decl.span,
                )
            )
            continue
        seen_roots.add(decl.name)
        roots.append(_build_sphere(decl, parent=None, kinds=kinds, issues=issues))
    roots.sort(key=lambda s: s.name)

    model_schemes: dict[str, Scheme] = {}

    def collect(sphere: Sphere) -> None:
        for scheme in sphere.schemes:
            model_schemes[scheme.path] = scheme
        for child in sphere.children:
            collect(child)

    for root in roots:
        collect(root)

    arcs: dict[str, Arc] = {}
    for decl in decls:
        if not isinstance(decl, (FlowDecl, TriggerDecl)):
            continue
        source = _resolve_endpoint(decl.source, model_schemes, issues)
        target = _resolve_endpoint(decl.target, model_schemes, issues)
        if source is None or target is None:
            continue
        if isinstance(decl, FlowDecl):
            arc = Arc(ArcClass.FLOW, source, target, label=decl.label)
        else:
            arc = Arc(
                ArcClass.TRIGGER, source, target, gateway=decl.gateway, label=decl.label
            )
        if arc.id in arcs:
            issues.append(
                BuildIssue(
                    DUPLICATE_NAME,
                    arc.id,
                    f"arc '{arc.id}' declared more than once",
                    decl.span,
                )
            )
        else:
            arcs[arc.id] = arc

    if issues:
        raise ModelBuildError(issues)

    name = metadata.pop("name", "")
    return SystemModel(
        name=name,
        kinds=tuple(sorted(kinds.values(), key=lambda k: k.name)),
        spheres=tuple(roots),
        arcs=tuple(sorted(arcs.values(), key=lambda a: a.id)),
        metadata=tuple(sorted(metadata.items())),
    )


def _build_sphere(
    decl: SphereDecl,
    parent: str | None,
    kinds: dict[str, FlowthingKind],
    issues: list[BuildIssue],
) -> Sphere:
    path = decl.name if parent is None else f"{parent}.{decl.name}"

    metas: dict[str, str] = {}
    for meta in decl.metas:
        if meta.key in metas:
            issues.append(
                BuildIssue(
                    DUPLICATE_NAME,
                    path,
                    f"meta key '{meta.key}' declared more than once in sphere '{path}'",
                    meta.span,
                )
            )
        else:
            metas[meta.key] = meta.value

    # Scheme ids and child sphere names share a namespace so dotted paths
    # stay unambiguous.
    names_in_scope: set[str] = set()
    schemes: list[Scheme] = []
    kinds_in_sphere: set[str] = set()
    for scheme_decl in decl.schemes:
        if scheme_decl.id in names_in_scope:
            issues.append(
                BuildIssue(
                    DUPLICATE_NAME,
                    f"{path}.{scheme_decl.id}",
                    f"name '{scheme_decl.id}' reused inside sphere '{path}'",
                    scheme_decl.span,
                )
            )
            continue
        names_in_scope.add(scheme_decl.id)
        if scheme_decl.kind not in kinds:
            issues.append(
                BuildIssue(
                    DANGLING_REFERENCE,
                    f"{path}.{scheme_decl.id}",
                    f"scheme '{path}.{scheme_decl.id}' names unknown kind "
                    f"'{scheme_decl.kind}'",
                    scheme_decl.span,
                )
            )
            continue
        if scheme_decl.kind in kinds_in_sphere:
            issues.append(
                BuildIssue(
                    DUPLICATE_NAME,
                    f"{path}.{scheme_decl.id}",
                    f"sphere '{path}' already holds a scheme of kind "
                    f"'{scheme_decl.kind}'",
                    scheme_decl.span,
                )
            )
            continue
        kinds_in_sphere.add(scheme_decl.kind)
        schemes.append(
            Scheme(
                id=scheme_decl.id,
                sphere=path,
                kind=scheme_decl.kind,
                stages=frozenset(scheme_decl.stages),
                capacity=scheme_decl.capacity,
            )
        )
    schemes.sort(key=lambda s: s.id)

    children: list[Sphere] = []
    for child_decl in decl.children:
        if child_decl.name in names_in_scope:
            issues.append(
                BuildIssue(
                    DUPLICATE_NAME,
                    f"{path}.{child_decl.name}",
                    f"name '{child_decl.name}' reused inside sphere '{path}'",
                    child_decl.span,
                )
            )
            continue
        names_in_scope.add(child_decl.name)
        children.append(_build_sphere(child_decl, path, kinds, issues))
    children.sort(key=lambda s: s.name)

    return Sphere(
        name=decl.name,
        path=path,
        parent=parent,
        schemes=tuple(schemes),
        children=tuple(children),
        metadata=tuple(sorted(metas.items())),
    )


def _resolve_endpoint(
    ref: EndpointRef,
    schemes: dict[str, Scheme],
    issues: list[BuildIssue],
) -> Endpoint | None:
    scheme = schemes.get(ref.scheme_path)
    if scheme is None:
        issues.append(
            BuildIssue(
                DANGLING_REFERENCE,
                ref.scheme_path,
                f"endpoint '{ref}' names unknown scheme '{ref.scheme_path}'",
                ref.span,
            )
        )
        return None
    if ref.stage not in scheme.stages:
        issues.append(
            BuildIssue(
                STAGE_NOT_IN_SCHEME,
                ref.scheme_path,
                f"endpoint '{ref}' uses stage '{ref.stage.keyword}' which scheme "
                f"'{ref.scheme_path}' does not declare",
                ref.span,
            )
        )
        return None
    return Endpoint(ref.scheme_path, ref.stage)
