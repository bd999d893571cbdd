"""Well-formedness rules for flow systems.

A built model is referentially sound but may still wire its flows in ways
the flow discipline forbids -- moving things across ontologies, hopping
stages out of order, or flattening the channel. Each rule below checks one
such discipline; Error rules reject a model, Warning rules only advise.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

from .model import (
    Arc,
    ArcClass,
    Scheme,
    Stage,
    SystemModel,
    legal_transition,
)
from .dsl import Severity


class RuleId(enum.Enum):
    R1_CROSS_KIND_FLOW = "R1"
    R2_ILLEGAL_STAGE_TRANSITION = "R2"
    R3_INTER_SCHEME_FLOW_SHAPE = "R3"
    R4_TRIGGER_SELF_SCHEME = "R4"
    R5_CHANNEL_COMPLETENESS = "R5"
    R6_ORPHAN_SCHEME = "R6"
    R7_MISSING_RELEASE_BEFORE_TRANSFER = "R7"
    R8_GATEWAY_NOT_TRIGGER = "R8"

    @property
    def code(self) -> str:
        return self.value


ERROR_RULES = frozenset(
    {
        RuleId.R1_CROSS_KIND_FLOW,
        RuleId.R2_ILLEGAL_STAGE_TRANSITION,
        RuleId.R3_INTER_SCHEME_FLOW_SHAPE,
        RuleId.R4_TRIGGER_SELF_SCHEME,
        RuleId.R8_GATEWAY_NOT_TRIGGER,
    }
)


class StrictnessProfile(enum.Enum):
    """Which rules run: strict is everything; legacy drops the two warnings
    (R5, R7) that flat, channel-less legacy diagrams cannot satisfy."""

    STRICT = "strict"
    LEGACY = "legacy"

    def rules(self) -> frozenset[RuleId]:
        if self is StrictnessProfile.LEGACY:
            return frozenset(
                r
                for r in RuleId
                if r
                not in (
                    RuleId.R5_CHANNEL_COMPLETENESS,
                    RuleId.R7_MISSING_RELEASE_BEFORE_TRANSFER,
                )
            )
        return frozenset(RuleId)


@dataclass(frozen=True)
class Violation:
    rule: RuleId
    severity: Severity
    subject: str
    explanation: str

    def record(self) -> str:
        """One tab-separated machine line: rule, severity, subject, message."""
        return "\t".join(
            (self.rule.code, self.severity.value, self.subject, self.explanation)
        )

    def __str__(self) -> str:
        return (
            f"{self.rule.code} {self.severity.value.lower()}: "
            f"{self.subject}: {self.explanation}"
        )


def _violation(rule: RuleId, subject: str, explanation: str) -> Violation:
    severity = Severity.ERROR if rule in ERROR_RULES else Severity.WARNING
    return Violation(rule, severity, subject, explanation)


def validate(
    model: SystemModel, profile: StrictnessProfile = StrictnessProfile.STRICT
) -> list[Violation]:
    """Check every rule in the profile; returns violations sorted by
    (rule, subject). An empty list means the model is clean under the
    profile; Warning entries never block."""
    active = profile.rules()
    out: list[Violation] = []

    for arc in model.arcs:
        out.extend(_check_arc(model, arc, active))

    for scheme in model.scheme_index.values():
        out.extend(_check_scheme(model, scheme, active))

    out.sort(key=lambda v: (v.rule.code, v.subject, v.explanation))
    return out


def _check_arc(model: SystemModel, arc: Arc, active: frozenset[RuleId]) -> list[Violation]:
    out: list[Violation] = []
    source_kind = model.scheme(arc.source.scheme).kind
    target_kind = model.scheme(arc.target.scheme).kind

    if arc.arc_class is ArcClass.FLOW:
        if RuleId.R1_CROSS_KIND_FLOW in active and source_kind != target_kind:
            out.append(
                _violation(
                    RuleId.R1_CROSS_KIND_FLOW,
                    arc.id,
                    f"flow arc joins kind '{source_kind}' to kind '{target_kind}'; "
                    "only a trigger may cross ontologies",
                )
            )
        if arc.intra_scheme:
            if RuleId.R2_ILLEGAL_STAGE_TRANSITION in active and not legal_transition(
                arc.source.stage, arc.target.stage
            ):
                out.append(
                    _violation(
                        RuleId.R2_ILLEGAL_STAGE_TRANSITION,
                        arc.id,
                        f"stage hop {arc.source.stage.keyword} -> "
                        f"{arc.target.stage.keyword} is not a legal in-scheme "
                        "transition",
                    )
                )
        else:
            if RuleId.R3_INTER_SCHEME_FLOW_SHAPE in active and (
                arc.source.stage is not Stage.TRANSFER
                or arc.target.stage is not Stage.RECEIVE
            ):
                out.append(
                    _violation(
                        RuleId.R3_INTER_SCHEME_FLOW_SHAPE,
                        arc.id,
                        "flow between schemes must leave from transfer and land "
                        f"on receive, not {arc.source.stage.keyword} -> "
                        f"{arc.target.stage.keyword}",
                    )
                )
        if RuleId.R8_GATEWAY_NOT_TRIGGER in active and arc.gateway:
            out.append(
                _violation(
                    RuleId.R8_GATEWAY_NOT_TRIGGER,
                    arc.id,
                    "gateway flag is only meaningful on trigger arcs",
                )
            )
    else:
        if RuleId.R4_TRIGGER_SELF_SCHEME in active and arc.intra_scheme:
            out.append(
                _violation(
                    RuleId.R4_TRIGGER_SELF_SCHEME,
                    arc.id,
                    "trigger arc starts and ends in the same scheme; in-scheme "
                    "generation is the process -> create flow edge",
                )
            )
    return out


def _check_scheme(
    model: SystemModel, scheme: Scheme, active: frozenset[RuleId]
) -> list[Violation]:
    out: list[Violation] = []
    incident = model.arcs_touching(scheme.path)

    if RuleId.R5_CHANNEL_COMPLETENESS in active and model.sphere_is_channel(
        scheme.sphere
    ):
        missing = [s.keyword for s in Stage if s not in scheme.stages]
        if missing:
            out.append(
                _violation(
                    RuleId.R5_CHANNEL_COMPLETENESS,
                    scheme.path,
                    f"channel scheme lacks stage(s) {', '.join(missing)}; a channel "
                    "is a full participant, not a flat pipe",
                )
            )

    if RuleId.R6_ORPHAN_SCHEME in active and not incident:
        out.append(
            _violation(
                RuleId.R6_ORPHAN_SCHEME,
                scheme.path,
                "scheme has no incident arcs and can never exchange tokens",
            )
        )

    if RuleId.R7_MISSING_RELEASE_BEFORE_TRANSFER in active and Stage.TRANSFER in scheme.stages:
        inbound_possible = Stage.CREATE in scheme.stages or any(
            arc.target.scheme == scheme.path for arc in incident
        )
        has_release_feed = any(
            arc.arc_class is ArcClass.FLOW
            and arc.intra_scheme
            and arc.source.key == (scheme.path, Stage.RELEASE)
            and arc.target.key == (scheme.path, Stage.TRANSFER)
            for arc in incident
        )
        if inbound_possible and not has_release_feed:
            out.append(
                _violation(
                    RuleId.R7_MISSING_RELEASE_BEFORE_TRANSFER,
                    scheme.path,
                    "transfer stage is declared but nothing feeds it from release; "
                    "tokens must be released before they transfer",
                )
            )
    return out


_EXPLANATIONS = {
    RuleId.R1_CROSS_KIND_FLOW: (
        "Flow arcs move one thing between stages, so both endpoints must hold "
        "the same kind of flowthing. Information flow is ontologically distinct "
        "from physical signal flow: information cannot pour into a signal "
        "scheme, it can only trigger events there. Use a trigger arc (~>) to "
        "cross ontologies."
    ),
    RuleId.R2_ILLEGAL_STAGE_TRANSITION: (
        "Inside a scheme, tokens follow the committed stage diagram: receive "
        "feeds process; process and create exchange one way (processing may "
        "generate new things); receive, process and create feed release; "
        "release feeds transfer and may hand tokens back to the stage that "
        "released them. Any other in-scheme hop is illegal."
    ),
    RuleId.R3_INTER_SCHEME_FLOW_SHAPE: (
        "Between schemes, the only flow shape is transfer -> receive: a thing "
        "leaves one sphere through transfer and arrives at the next through "
        "receive, the way travellers depart one station and arrive at another."
    ),
    RuleId.R4_TRIGGER_SELF_SCHEME: (
        "A trigger represents causation across schemes. Generation of new "
        "items within a scheme is already expressed by the process -> create "
        "flow edge, so a self-targeted trigger is redundant and ambiguous."
    ),
    RuleId.R5_CHANNEL_COMPLETENESS: (
        "A channel is a full flow participant: it receives, communicates, "
        "releases, processes, and creates physical signals (noise originates "
        "at its create stage). A channel scheme missing stages is the flat, "
        "structureless pipe of legacy diagrams."
    ),
    RuleId.R6_ORPHAN_SCHEME: (
        "The scheme is connected to nothing: no flow or trigger arc touches "
        "it, so no token can ever enter or leave. Usually a leftover or a "
        "misspelled arc endpoint."
    ),
    RuleId.R7_MISSING_RELEASE_BEFORE_TRANSFER: (
        "Transfer is the act of leaving a sphere and release is the decision "
        "to let go; a transfer stage that is never fed from release lets "
        "tokens exit without having been released first."
    ),
    RuleId.R8_GATEWAY_NOT_TRIGGER: (
        "A gateway marks the point where a flow is used, diverting it into "
        "another kind of flow -- which is trigger semantics. A flow arc moves "
        "a token within one ontology and cannot be a gateway."
    ),
}


def explain(rule: RuleId) -> str:
    """Human-readable rationale for a rule."""
    return _EXPLANATIONS[rule]


def render_text(violations: list[Violation]) -> str:
    """Line-oriented human report, one violation per line."""
    return "".join(f"{v}\n" for v in violations)


def render_records(violations: list[Violation]) -> str:
    """Machine-readable report: one tab-separated record per violation."""
    return "".join(f"{v.record()}\n" for v in violations)
