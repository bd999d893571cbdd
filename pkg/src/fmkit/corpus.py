"""Built-in model library: classic communication set-ups as flow systems.

Each entry is a validated `.fm` model with a runnable `.fms` default
scenario, shipped as package data. The mutation twins are the same models
with one curated defect each, used to pin down exactly which rule catches
which mistake.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from importlib import resources
from typing import Callable

from .model import SystemModel
from .simulator import Scenario, parse_scenario
from .validator import RuleId


class UnknownSlug(KeyError):
    """Raised when a corpus slug does not exist."""


@dataclass(frozen=True)
class CorpusEntry:
    slug: str
    figure: int
    dsl_file: str
    scenario_file: str
    commentary: str


_ENTRIES: tuple[CorpusEntry, ...] = (
    CorpusEntry(
        "org-departments",
        6,
        "org-departments.fm",
        "org-departments.fms",
        "Information flow inside one organization: a headquarters scheme and "
        "two department schemes, all of one kind, linked transfer-to-receive. "
        "The default run keeps a single report circulating internally, so "
        "nothing is ever delivered out of the system.",
    ),
    CorpusEntry(
        "shannon-fm",
        8,
        "shannon-fm.fm",
        "shannon-fm.fms",
        "The classic source/channel/destination pipeline as five schemes. "
        "Information never leaves its own participant: it triggers signals, "
        "signals trigger carrier activity, and the channel is a full "
        "five-stage participant whose create stage is where noise originates.",
    ),
    CorpusEntry(
        "channelless",
        9,
        "channelless.fm",
        "channelless.fms",
        "Two coupled systems exchanging the same kind of flowthing directly. "
        "When like flows to like, no channel and no triggers are needed: a "
        "single transfer-to-receive flow joins the spheres.",
    ),
    CorpusEntry(
        "two-person",
        10,
        "two-person.fm",
        "two-person.fms",
        "Spoken communication between two people. A thought triggers nerve "
        "impulses, impulses trigger sound waves in the shared air, the air "
        "triggers impulses in the listener, and those trigger the received "
        "idea. Stage sets on the inner schemes are inferred, not prescribed.",
    ),
    CorpusEntry(
        "osi-fm",
        11,
        "osi-fm.fm",
        "osi-fm.fms",
        "Layered network communication collapsed into three five-stage "
        "participants (sender, channel, receiver). Per-layer work such as "
        "encoding and reassembly rides along as trigger labels, which become "
        "payload tags on the tokens they create.",
    ),
    CorpusEntry(
        "hci-extension",
        12,
        "hci-extension.fm",
        "hci-extension.fms",
        "Human-computer interaction as a chain of ontologies: a need triggers "
        "cognitive information, information triggers nerve signals, signals "
        "trigger physical actions, and actions flow into the keyboard, which "
        "signals the computer. Stage sets on the human schemes are inferred.",
    ),
    CorpusEntry(
        "tcpip-fm",
        13,
        "tcpip-fm.fm",
        "tcpip-fm.fms",
        "Internet-style sender/channel/recipient stack as three participants. "
        "Segmentation, framing and bit transmission appear as trigger labels "
        "rather than separate layer schemes.",
    ),
)

_BY_SLUG = {entry.slug: entry for entry in _ENTRIES}


def _data_text(name: str) -> str:
    return (resources.files("fmkit") / "corpus" / name).read_text(encoding="utf-8")


def corpus_list() -> list[CorpusEntry]:
    """All corpus entries, ordered by figure number."""
    return list(_ENTRIES)


def _entry(slug: str) -> CorpusEntry:
    try:
        return _BY_SLUG[slug]
    except KeyError:
        raise UnknownSlug(slug) from None


def corpus_source(slug: str) -> str:
    """DSL text of a corpus model."""
    return _data_text(_entry(slug).dsl_file)


def corpus_scenario_source(slug: str) -> str:
    """Scenario sidecar text of a corpus model."""
    return _data_text(_entry(slug).scenario_file)


def corpus_get(slug: str) -> tuple[SystemModel, Scenario]:
    """Built model plus its runnable default scenario."""
    from .dsl import load_model

    entry = _entry(slug)
    model = load_model(corpus_source(slug), path=entry.dsl_file)
    scenario = parse_scenario(
        corpus_scenario_source(slug), model, path=entry.scenario_file
    )
    return model, scenario


# ---------------------------------------------------------------------------
# Mutation twins


@dataclass(frozen=True)
class MutationFixture:
    """One curated defect on one corpus model, caught by exactly one rule."""

    slug: str
    rule: RuleId
    dsl_file: str | None
    build: Callable[[], SystemModel]

    @property
    def name(self) -> str:
        return f"{self.slug}--{self.rule.code.lower()}"


def _file_fixture(slug: str, rule: RuleId) -> MutationFixture:
    filename = f"mutations/{slug}--{rule.code.lower()}.fm"

    def build() -> SystemModel:
        from .dsl import load_model

        return load_model(_data_text(filename), path=filename)

    return MutationFixture(slug, rule, filename, build)


def _gateway_on_flow_fixture() -> MutationFixture:
    """Gateway flag forced onto a flow arc; not expressible in DSL text, so
    the broken model is assembled directly."""

    def build() -> SystemModel:
        from .dsl import load_model

        model = load_model(corpus_source("osi-fm"), path="osi-fm.fm")
        arcs = list(model.arcs)
        idx = next(
            i for i, arc in enumerate(arcs) if arc.arc_class.value == "flow"
        )
        arcs[idx] = replace(arcs[idx], gateway=True)
        return replace(model, arcs=tuple(arcs))

    return MutationFixture("osi-fm", RuleId.R8_GATEWAY_NOT_TRIGGER, None, build)


def corpus_mutations() -> tuple[MutationFixture, ...]:
    """Fourteen mutation twins, two per corpus entry."""
    return (
        _file_fixture("org-departments", RuleId.R2_ILLEGAL_STAGE_TRANSITION),
        _file_fixture("org-departments", RuleId.R6_ORPHAN_SCHEME),
        _file_fixture("shannon-fm", RuleId.R1_CROSS_KIND_FLOW),
        _file_fixture("shannon-fm", RuleId.R5_CHANNEL_COMPLETENESS),
        _file_fixture("channelless", RuleId.R1_CROSS_KIND_FLOW),
        _file_fixture("channelless", RuleId.R3_INTER_SCHEME_FLOW_SHAPE),
        _file_fixture("two-person", RuleId.R4_TRIGGER_SELF_SCHEME),
        _file_fixture("two-person", RuleId.R7_MISSING_RELEASE_BEFORE_TRANSFER),
        _file_fixture("osi-fm", RuleId.R1_CROSS_KIND_FLOW),
        _gateway_on_flow_fixture(),
        _file_fixture("hci-extension", RuleId.R2_ILLEGAL_STAGE_TRANSITION),
        _file_fixture("hci-extension", RuleId.R4_TRIGGER_SELF_SCHEME),
        _file_fixture("tcpip-fm", RuleId.R3_INTER_SCHEME_FLOW_SHAPE),
        _file_fixture("tcpip-fm", RuleId.R7_MISSING_RELEASE_BEFORE_TRANSFER),
    )
