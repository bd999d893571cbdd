"""Deterministic token execution over a validated system model.

Time is discrete unit steps. Each step runs six sub-phases in a fixed
order: (1) scheduled injections, (2) noise creation draws, (3) token
movement along routed flow arcs, (4) release policy for tokens blocked on a
broken route, (5) trigger firing for every position entered this step,
(6) delivery of tokens that entered a terminal transfer. Tokens created by
a trigger make their first hop on the following step, and their own
entry-triggers fire on the following step, so cascades advance one link per
step and every run terminates at its horizon.

All iteration orders are fixed (scheme path, stage order, token id), and
the only randomness is the seeded splitmix64 stream, so the same scenario
always reproduces the identical event list.
"""
from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field, replace
from typing import Iterable

from ._rng import ALGORITHM, SplitMix64
from .dsl import Severity, serialize
from .model import Endpoint, Stage, Substate, SystemModel
from .validator import StrictnessProfile, validate


class InvalidScenario(Exception):
    """The scenario contradicts its model or its own invariants."""

    def __init__(self, problems: Iterable[str]):
        self.problems = tuple(problems)
        super().__init__("; ".join(self.problems))


class HorizonZero(InvalidScenario):
    """Raised for a negative horizon. A horizon of 0 is a valid empty run."""


class FingerprintMismatch(Exception):
    """A trace is being replayed or annotated against the wrong inputs."""


class ScenarioParseError(Exception):
    """A `.fms` scenario file is syntactically malformed."""

    def __init__(self, problems: Iterable[str]):
        self.problems = tuple(problems)
        super().__init__("; ".join(self.problems))


# ---------------------------------------------------------------------------
# Scenario


@dataclass(frozen=True)
class Injection:
    time: int
    scheme: str
    stage: Stage
    payload: str = ""


@dataclass(frozen=True)
class NoiseSpec:
    """Noise source: per-step creation probability at the scheme's create
    stage, doubling as the corruption threshold at its process stage."""

    scheme: str
    rate: float


@dataclass(frozen=True)
class ReleasePolicy:
    """What a blocked token does at release when its way out is broken:
    return to the stage that released it, park in storage there, or be
    destroyed after waiting ttl steps."""

    kind: str = "return"  # return | store | destroy
    ttl: int | None = None

    def __post_init__(self):
        if self.kind not in ("return", "store", "destroy"):
            raise ValueError(f"unknown release policy '{self.kind}'")
        if self.kind == "destroy" and (self.ttl is None or self.ttl < 0):
            raise ValueError("destroy policy needs a non-negative ttl")

    @classmethod
    def return_to_releaser(cls) -> "ReleasePolicy":
        return cls("return")

    @classmethod
    def store_indefinitely(cls) -> "ReleasePolicy":
        return cls("store")

    @classmethod
    def destroy_after(cls, ttl: int) -> "ReleasePolicy":
        return cls("destroy", ttl)

    def canonical(self) -> str:
        return f"destroy {self.ttl}" if self.kind == "destroy" else self.kind


@dataclass(frozen=True)
class RouteRule:
    """Ordered arc preference for a stage with several outgoing flows."""

    scheme: str
    stage: Stage
    arc_ids: tuple[str, ...]


@dataclass(frozen=True)
class Scenario:
    model: SystemModel
    seed: int = 0
    horizon: int = 0
    injections: tuple[Injection, ...] = ()
    noise: tuple[NoiseSpec, ...] = ()
    broken_arcs: frozenset[str] = frozenset()
    release_policy: ReleasePolicy = field(default_factory=ReleasePolicy)
    routing: tuple[RouteRule, ...] = ()
    noise_delivery: bool = False
    gateway_consumes: bool = False

    def canonical(self) -> str:
        """Stable text form of every parameter, for fingerprinting."""
        lines = [
            f"seed: {self.seed}",
            f"horizon: {self.horizon}",
            f"release_policy: {self.release_policy.canonical()}",
            f"noise_delivery: {str(self.noise_delivery).lower()}",
            f"gateway_consumes: {str(self.gateway_consumes).lower()}",
        ]
        for inj in self.injections:
            lines.append(
                f"inject: {inj.time} {inj.scheme}.{inj.stage.keyword} {inj.payload}"
            )
        for spec in sorted(self.noise, key=lambda s: s.scheme):
            lines.append(f"noise: {spec.scheme} {spec.rate!r}")
        for arc_id in sorted(self.broken_arcs):
            lines.append(f"link: {arc_id} broken")
        for rule in sorted(self.routing, key=lambda r: (r.scheme, r.stage)):
            lines.append(
                f"route: {rule.scheme}.{rule.stage.keyword} {' '.join(rule.arc_ids)}"
            )
        return "\n".join(lines) + "\n"


def fingerprint(scenario: Scenario) -> str:
    """`<algorithm>:<model hash>:<parameter hash>`, stable across runs."""
    model_hash = hashlib.sha256(serialize(scenario.model).encode()).hexdigest()[:16]
    param_hash = hashlib.sha256(scenario.canonical().encode()).hexdigest()[:16]
    return f"{ALGORITHM}:{model_hash}:{param_hash}"


def model_fingerprint_part(model: SystemModel) -> str:
    return hashlib.sha256(serialize(model).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Events, tokens, traces


@dataclass(frozen=True)
class Event:
    time: int
    seq: int
    token: int
    token_kind: str
    name: str
    location: str
    detail: tuple[tuple[str, str], ...] = ()

    def line(self) -> str:
        detail = " ".join(f"{k}={v}" for k, v in self.detail) or "-"
        return "\t".join(
            (
                str(self.time),
                str(self.seq),
                str(self.token),
                self.token_kind,
                self.name,
                self.location,
                detail,
            )
        )

    @classmethod
    def from_line(cls, line: str) -> "Event":
        parts = line.split("\t")
        if len(parts) != 7:
            raise ValueError(f"malformed event line: {line!r}")
        detail: tuple[tuple[str, str], ...] = ()
        if parts[6] != "-":
            detail = tuple(
                (kv.split("=", 1)[0], kv.split("=", 1)[1]) for kv in parts[6].split(" ")
            )
        return cls(
            time=int(parts[0]),
            seq=int(parts[1]),
            token=int(parts[2]),
            token_kind=parts[3],
            name=parts[4],
            location=parts[5],
            detail=detail,
        )


@dataclass(frozen=True)
class Token:
    """Public snapshot of a flowthing instance."""

    id: int
    kind: str
    scheme: str
    stage: Stage | None
    substate: Substate | None = None
    payload: str = ""
    corrupted: bool = False
    lineage: int | None = None


@dataclass(frozen=True)
class Trace:
    """Complete, replayable record of one run."""

    fingerprint: str
    algorithm: str
    horizon: int
    events: tuple[Event, ...]
    final_census: tuple[tuple[str, str, int], ...]

    def model_part(self) -> str:
        return self.fingerprint.split(":")[1]


TERMINAL_EVENTS = frozenset({"Delivered", "Destroyed", "Stored"})


class _Status(enum.Enum):
    ACTIVE = "active"
    STORED = "stored"
    DESTROYED = "destroyed"
    DELIVERED = "delivered"


@dataclass
class _TokenState:
    id: int
    kind: str
    scheme: str
    stage: Stage
    payload: str
    corrupted: bool
    lineage: int | None
    origin: str  # injected | noise | trigger
    noise_descent: bool
    created_at: int
    substate: Substate | None = None
    status: _Status = _Status.ACTIVE
    entered_release_from: Stage | None = None
    release_entry_time: int = -1


def interfere(
    token: Token, noise_present: bool, draw: float, threshold: float
) -> Token:
    """Corruption decision for a token transiting a noisy process stage.

    Returns the token corrupted when noise is present and the draw falls
    under the threshold; otherwise returns it unchanged. Corruption is
    sticky: descendants of a corrupted token are created corrupted.
    """
    if noise_present and draw < threshold and not token.corrupted:
        return replace(token, corrupted=True)
    return token


# ---------------------------------------------------------------------------
# Scenario validation


def validate_scenario(
    scenario: Scenario, profile: StrictnessProfile = StrictnessProfile.STRICT
) -> None:
    """Raise InvalidScenario (or HorizonZero) when the scenario cannot run."""
    if scenario.horizon < 0:
        raise HorizonZero([f"horizon must be >= 0, got {scenario.horizon}"])

    problems: list[str] = []
    model = scenario.model

    errors = [
        v for v in validate(model, profile) if v.severity is Severity.ERROR
    ]
    for violation in errors:
        problems.append(f"model fails {violation.rule.code}: {violation.subject}")

    for inj in scenario.injections:
        if inj.time < 0:
            problems.append(f"injection time {inj.time} is negative")
        scheme = model.scheme_index.get(inj.scheme)
        if scheme is None:
            problems.append(f"injection targets unknown scheme '{inj.scheme}'")
        elif inj.stage not in scheme.stages:
            problems.append(
                f"injection targets stage '{inj.stage.keyword}' not declared by "
                f"'{inj.scheme}'"
            )

    for spec in scenario.noise:
        scheme = model.scheme_index.get(spec.scheme)
        if scheme is None:
            problems.append(f"noise names unknown scheme '{spec.scheme}'")
        elif Stage.CREATE not in scheme.stages:
            problems.append(
                f"noise scheme '{spec.scheme}' has no create stage to originate noise"
            )
        if not 0.0 <= spec.rate <= 1.0:
            problems.append(f"noise rate {spec.rate} outside [0, 1]")

    for arc_id in scenario.broken_arcs:
        if arc_id not in model.arc_index:
            problems.append(f"link state names unknown arc '{arc_id}'")

    routed: set[tuple[str, Stage]] = set()
    for rule in scenario.routing:
        key = (rule.scheme, rule.stage)
        if key in routed:
            problems.append(f"duplicate route for {rule.scheme}.{rule.stage.keyword}")
        routed.add(key)
        if rule.scheme not in model.scheme_index:
            problems.append(f"route names unknown scheme '{rule.scheme}'")
            continue
        outgoing = {a.id for a in model.flows_from(rule.scheme, rule.stage)}
        for arc_id in rule.arc_ids:
            if arc_id not in outgoing:
                problems.append(
                    f"route arc '{arc_id}' is not a flow arc out of "
                    f"{rule.scheme}.{rule.stage.keyword}"
                )

    # A stage with several outgoing flows needs an explicit preference;
    # silently picking one would hide a modeling decision.
    for scheme in model.scheme_index.values():
        for stage in scheme.stages:
            flows = model.flows_from(scheme.path, stage)
            if len(flows) > 1 and (scheme.path, stage) not in routed:
                problems.append(
                    f"{scheme.path}.{stage.keyword} has {len(flows)} outgoing flow "
                    "arcs but no route preference"
                )

    if problems:
        raise InvalidScenario(problems)


# ---------------------------------------------------------------------------
# Engine


class _Engine:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.model = scenario.model
        self.rng = SplitMix64(scenario.seed)
        self.tokens: dict[int, _TokenState] = {}
        self.next_id = 0
        self.events: list[Event] = []
        self.seq = 0
        self.noise_by_scheme = {spec.scheme: spec.rate for spec in scenario.noise}
        self.routing = {
            (rule.scheme, rule.stage): rule.arc_ids for rule in scenario.routing
        }
        # Entries whose trigger phase is deferred to the next step
        # (children created by this step's trigger phase).
        self.deferred_entries: list[tuple[int, str, Stage]] = []

    # -- event plumbing ----------------------------------------------------

    def emit(
        self,
        time: int,
        token: _TokenState,
        name: str,
        location: str,
        detail: tuple[tuple[str, str], ...] = (),
    ) -> None:
        self.events.append(
            Event(time, self.seq, token.id, token.kind, name, location, detail)
        )
        self.seq += 1

    @staticmethod
    def loc(scheme: str, stage: Stage) -> str:
        return f"{scheme}.{stage.keyword}"

    # -- token lifecycle ---------------------------------------------------

    def create_token(
        self,
        time: int,
        scheme: str,
        stage: Stage,
        payload: str,
        origin: str,
        lineage: int | None = None,
        corrupted: bool = False,
        noise_descent: bool = False,
    ) -> _TokenState:
        token = _TokenState(
            id=self.next_id,
            kind=self.model.scheme(scheme).kind,
            scheme=scheme,
            stage=stage,
            payload=payload,
            corrupted=corrupted,
            lineage=lineage,
            origin=origin,
            noise_descent=noise_descent,
            created_at=time,
        )
        self.next_id += 1
        self.tokens[token.id] = token
        detail: list[tuple[str, str]] = [("origin", origin)]
        if lineage is not None:
            detail.append(("parent", str(lineage)))
        if payload:
            detail.append(("payload", payload))
        if corrupted:
            detail.append(("corrupted", "true"))
        self.emit(time, token, "Created", self.loc(scheme, stage), tuple(detail))
        return token

    def on_entry(self, time: int, token: _TokenState) -> None:
        """Bookkeeping common to every way of arriving at a stage."""
        if token.stage is Stage.RELEASE:
            token.release_entry_time = time
        if token.stage is Stage.PROCESS and not token.noise_descent:
            threshold = self.noise_by_scheme.get(token.scheme)
            if threshold is not None and not token.corrupted:
                noise_present = any(
                    t.status is _Status.ACTIVE
                    and t.noise_descent
                    and t.scheme == token.scheme
                    for t in self.tokens.values()
                )
                if noise_present:
                    draw = self.rng.random()
                    if draw < threshold:
                        token.corrupted = True
                        self.emit(
                            time,
                            token,
                            "CorruptionApplied",
                            self.loc(token.scheme, token.stage),
                        )

    # -- movement ----------------------------------------------------------

    def flow_candidates(self, scheme: str, stage: Stage):
        preferred = self.routing.get((scheme, stage))
        if preferred is not None:
            return [self.model.arc_index[arc_id] for arc_id in preferred]
        return list(self.model.flows_from(scheme, stage))

    def transfer_onward_viable(self, endpoint: Endpoint) -> bool:
        """Can a token keep going (or complete) once it reaches this
        transfer stage? Used as lookahead from release: a broken way out of
        transfer means the channel is unavailable and the releaser holds on."""
        flows = self.flow_candidates(endpoint.scheme, endpoint.stage)
        if flows:
            return any(a.id not in self.scenario.broken_arcs for a in flows)
        triggers = self.model.triggers_from(endpoint.scheme, endpoint.stage)
        if triggers:
            return any(a.id not in self.scenario.broken_arcs for a in triggers)
        return True  # terminal transfer: delivery point

    def occupancy(self, scheme: str, stage: Stage) -> int:
        return sum(
            1
            for t in self.tokens.values()
            if t.status is _Status.ACTIVE and t.scheme == scheme and t.stage == stage
        )

    def try_move(self, time: int, token: _TokenState) -> tuple[bool, bool]:
        """Returns (moved, blocked_by_breakage)."""
        candidates = self.flow_candidates(token.scheme, token.stage)
        blocked_broken = False
        for arc in candidates:
            if arc.id in self.scenario.broken_arcs:
                blocked_broken = True
                continue
            if (
                token.stage is Stage.RELEASE
                and arc.target.stage is Stage.TRANSFER
                and not self.transfer_onward_viable(arc.target)
            ):
                blocked_broken = True
                continue
            target_scheme = self.model.scheme(arc.target.scheme)
            if target_scheme.capacity is not None:
                if self.occupancy(arc.target.scheme, arc.target.stage) >= target_scheme.capacity:
                    continue
            origin = self.loc(token.scheme, token.stage)
            previous_stage = token.stage
            token.scheme = arc.target.scheme
            token.stage = arc.target.stage
            if token.stage is Stage.RELEASE:
                token.entered_release_from = (
                    previous_stage if arc.intra_scheme else None
                )
            self.emit(
                time,
                token,
                "Moved",
                self.loc(token.scheme, token.stage),
                (("from", origin),),
            )
            self.on_entry(time, token)
            return True, False
        return False, blocked_broken

    # -- release policy ------------------------------------------------------

    def return_target(self, token: _TokenState) -> Stage | None:
        scheme = self.model.scheme(token.scheme)
        if (
            token.entered_release_from is not None
            and token.entered_release_from in scheme.stages
        ):
            return token.entered_release_from
        for stage in (Stage.PROCESS, Stage.RECEIVE, Stage.CREATE):
            if stage in scheme.stages:
                return stage
        return None

    def apply_release_policy(self, time: int, token: _TokenState) -> bool:
        """Returns True when the token re-entered the flow (new entry)."""
        policy = self.scenario.release_policy
        if policy.kind == "return":
            target = self.return_target(token)
            if target is None:
                return False
            token.stage = target
            self.emit(
                time,
                token,
                "ReturnedFromRelease",
                self.loc(token.scheme, token.stage),
                (("to", target.keyword),),
            )
            self.on_entry(time, token)
            return True
        if policy.kind == "store":
            target = self.return_target(token)
            if target is None:
                return False
            token.substate = Substate.for_stage(target)
            token.status = _Status.STORED
            self.emit(
                time,
                token,
                "Stored",
                f"{token.scheme}.{token.substate.value}",
            )
            return False
        # destroy after ttl steps of blockage, counted from release entry
        if time - token.release_entry_time >= (policy.ttl or 0):
            token.status = _Status.DESTROYED
            self.emit(
                time,
                token,
                "Destroyed",
                self.loc(token.scheme, token.stage),
                (("reason", "release-timeout"),),
            )
        return False

    # -- triggers and delivery ----------------------------------------------

    def fire_triggers(
        self, time: int, entry: tuple[int, str, Stage]
    ) -> list[tuple[int, str, Stage]]:
        token_id, scheme, stage = entry
        token = self.tokens[token_id]
        if token.status is not _Status.ACTIVE:
            return []
        if token.noise_descent and not self.scenario.noise_delivery:
            return []
        children: list[tuple[int, str, Stage]] = []
        for arc in self.model.triggers_from(scheme, stage):
            if arc.id in self.scenario.broken_arcs:
                continue
            self.emit(
                time,
                token,
                "Triggered",
                str(arc.target),
                (("arc", arc.id), ("child", str(self.next_id))),
            )
            child = self.create_token(
                time,
                arc.target.scheme,
                arc.target.stage,
                payload=arc.label or token.payload,
                origin="trigger",
                lineage=token.id,
                corrupted=token.corrupted,
                noise_descent=token.noise_descent,
            )
            self.on_entry(time, child)
            children.append((child.id, child.scheme, child.stage))
            if arc.gateway and self.scenario.gateway_consumes:
                token.status = _Status.DESTROYED
                self.emit(
                    time,
                    token,
                    "Destroyed",
                    self.loc(token.scheme, token.stage),
                    (("reason", "used"),),
                )
                break
        return children

    def check_delivery(self, time: int, entry: tuple[int, str, Stage]) -> None:
        token_id, scheme, stage = entry
        token = self.tokens[token_id]
        if token.status is not _Status.ACTIVE or stage is not Stage.TRANSFER:
            return
        if (token.scheme, token.stage) != (scheme, stage):
            return
        if self.model.flows_from(scheme, stage):
            return
        if token.noise_descent and not self.scenario.noise_delivery:
            token.status = _Status.DESTROYED
            self.emit(
                time,
                token,
                "Destroyed",
                self.loc(scheme, stage),
                (("reason", "boundary"),),
            )
            return
        if not self.model.triggers_from(scheme, stage):
            token.status = _Status.DELIVERED
            self.emit(time, token, "Delivered", self.loc(scheme, stage))

    # -- main loop -----------------------------------------------------------

    def run(self) -> Trace:
        scenario = self.scenario
        injections = sorted(
            enumerate(scenario.injections), key=lambda p: (p[1].time, p[0])
        )
        inj_idx = 0
        noise_specs = sorted(scenario.noise, key=lambda s: s.scheme)

        for t in range(scenario.horizon):
            entries: list[tuple[int, str, Stage]] = []

            # (1) injections scheduled for this step
            while inj_idx < len(injections) and injections[inj_idx][1].time == t:
                inj = injections[inj_idx][1]
                token = self.create_token(
                    t, inj.scheme, inj.stage, inj.payload, origin="injected"
                )
                self.on_entry(t, token)
                entries.append((token.id, token.scheme, token.stage))
                inj_idx += 1

            # (2) noise creation draws
            for spec in noise_specs:
                draw = self.rng.random()
                if draw < spec.rate:
                    token = self.create_token(
                        t,
                        spec.scheme,
                        Stage.CREATE,
                        payload="",
                        origin="noise",
                        noise_descent=True,
                    )
                    self.on_entry(t, token)
                    entries.append((token.id, token.scheme, token.stage))

            # (3) movement, oldest tokens first within a fixed position order
            movers = sorted(
                (
                    tok
                    for tok in self.tokens.values()
                    if tok.status is _Status.ACTIVE and tok.created_at < t
                ),
                key=lambda tok: (tok.scheme, tok.stage, tok.id),
            )
            blocked_at_release: list[_TokenState] = []
            for token in movers:
                moved, blocked_broken = self.try_move(t, token)
                if moved:
                    entries.append((token.id, token.scheme, token.stage))
                elif blocked_broken and token.stage is Stage.RELEASE:
                    blocked_at_release.append(token)

            # (4) release policy for tokens blocked on a broken route
            for token in blocked_at_release:
                if self.apply_release_policy(t, token):
                    entries.append((token.id, token.scheme, token.stage))

            # (5) triggers: deferred child entries first, then this step's
            trigger_input = self.deferred_entries + entries
            child_entries: list[tuple[int, str, Stage]] = []
            for entry in trigger_input:
                child_entries.extend(self.fire_triggers(t, entry))
            self.deferred_entries = child_entries

            # (6) delivery for every position entered this step
            for entry in entries + child_entries:
                self.check_delivery(t, entry)

        return Trace(
            fingerprint=fingerprint(scenario),
            algorithm=ALGORITHM,
            horizon=scenario.horizon,
            events=tuple(self.events),
            final_census=self.final_census(),
        )

    def final_census(self) -> tuple[tuple[str, str, int], ...]:
        counts: dict[tuple[str, str], int] = {}
        for token in self.tokens.values():
            if token.status is _Status.ACTIVE:
                key = (token.scheme, token.stage.keyword)
            elif token.status is _Status.STORED:
                key = (token.scheme, token.substate.value)
            else:
                continue
            counts[key] = counts.get(key, 0) + 1
        return tuple(
            (scheme, position, count)
            for (scheme, position), count in sorted(counts.items())
        )


def run(
    scenario: Scenario, profile: StrictnessProfile = StrictnessProfile.STRICT
) -> Trace:
    """Execute a scenario to its horizon and return the replayable trace."""
    validate_scenario(scenario, profile)
    return _Engine(scenario).run()


# ---------------------------------------------------------------------------
# Census


@dataclass(frozen=True)
class CensusReport:
    created: int
    delivered: int
    destroyed: int
    stored: int
    in_flight: int
    problems: tuple[str, ...] = ()

    @property
    def balanced(self) -> bool:
        return (
            not self.problems
            and self.created
            == self.delivered + self.destroyed + self.stored + self.in_flight
        )


def census(trace: Trace) -> CensusReport:
    """Recount token conservation from the event list alone.

    Positions are replayed independently of the engine's bookkeeping and
    compared against the census frozen into the trace, so a tampered or
    truncated event list shows up as a problem.
    """
    problems: list[str] = []
    first_event: dict[int, str] = {}
    terminal: dict[int, str] = {}
    position: dict[int, tuple[str, str]] = {}

    for event in trace.events:
        if event.token not in first_event:
            first_event[event.token] = event.name
            if event.name != "Created":
                problems.append(
                    f"token {event.token} appears first as {event.name}, not Created"
                )
        if event.name in ("Created", "Moved", "Stored", "ReturnedFromRelease"):
            # Stage keywords and substate names are dot-free, so the last
            # dot always separates the scheme path from the position.
            scheme, _, pos = event.location.rpartition(".")
            position[event.token] = (scheme, pos)
        if event.name in TERMINAL_EVENTS:
            if event.token in terminal:
                problems.append(f"token {event.token} terminates twice")
            terminal[event.token] = event.name
        elif event.token in terminal:
            problems.append(f"token {event.token} active after terminal event")

    created = sum(1 for name in first_event.values() if name == "Created")
    delivered = sum(1 for name in terminal.values() if name == "Delivered")
    destroyed = sum(1 for name in terminal.values() if name == "Destroyed")
    stored = sum(1 for name in terminal.values() if name == "Stored")
    in_flight = created - delivered - destroyed - stored

    recount: dict[tuple[str, str], int] = {}
    for token_id, name in first_event.items():
        if name != "Created":
            continue
        status = terminal.get(token_id)
        if status in ("Delivered", "Destroyed"):
            continue
        key = position[token_id]
        recount[key] = recount.get(key, 0) + 1
    recounted = tuple(
        (scheme, pos, count) for (scheme, pos), count in sorted(recount.items())
    )
    if recounted != trace.final_census:
        problems.append("final census does not match event-list recount")

    return CensusReport(
        created=created,
        delivered=delivered,
        destroyed=destroyed,
        stored=stored,
        in_flight=in_flight,
        problems=tuple(problems),
    )


def replay_check(scenario: Scenario, trace: Trace) -> bool:
    """True when re-running the scenario reproduces the identical trace."""
    expected = fingerprint(scenario)
    if expected != trace.fingerprint:
        raise FingerprintMismatch(
            f"trace fingerprint {trace.fingerprint} does not match scenario "
            f"fingerprint {expected}"
        )
    return dump_trace(run(scenario)) == dump_trace(trace)


# ---------------------------------------------------------------------------
# Trace files


def dump_trace(trace: Trace) -> str:
    """Line-oriented trace file: header, one event per line, final census."""
    lines = [
        "# fm trace",
        f"fingerprint: {trace.fingerprint}",
        f"algorithm: {trace.algorithm}",
        f"horizon: {trace.horizon}",
        f"events: {len(trace.events)}",
    ]
    lines.extend(event.line() for event in trace.events)
    lines.append(f"census: {len(trace.final_census)}")
    lines.extend(
        f"{scheme}\t{position}\t{count}"
        for scheme, position, count in trace.final_census
    )
    return "\n".join(lines) + "\n"


def load_trace(text: str) -> Trace:
    """Parse a trace file produced by dump_trace."""
    lines = text.splitlines()
    try:
        if not lines or lines[0] != "# fm trace":
            raise ValueError("missing trace header")
        header: dict[str, str] = {}
        idx = 1
        for key in ("fingerprint", "algorithm", "horizon", "events"):
            name, _, value = lines[idx].partition(": ")
            if name != key:
                raise ValueError(f"expected '{key}:' line, got {lines[idx]!r}")
            header[key] = value
            idx += 1
        n_events = int(header["events"])
        events = tuple(Event.from_line(line) for line in lines[idx : idx + n_events])
        idx += n_events
        name, _, value = lines[idx].partition(": ")
        if name != "census":
            raise ValueError("missing census section")
        n_census = int(value)
        idx += 1
        census_rows = []
        for line in lines[idx : idx + n_census]:
            scheme, position, count = line.split("\t")
            census_rows.append((scheme, position, int(count)))
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed trace file: {exc}") from exc
    return Trace(
        fingerprint=header["fingerprint"],
        algorithm=header["algorithm"],
        horizon=int(header["horizon"]),
        events=events,
        final_census=tuple(census_rows),
    )


# ---------------------------------------------------------------------------
# Scenario files (`.fms`)

_BOOL_WORDS = {"true": True, "false": False}


def parse_scenario(
    text: str, model: SystemModel, path: str = "<buffer>"
) -> Scenario:
    """Parse a `.fms` sidecar file against its model.

    Only syntax is checked here; semantic problems (unknown schemes, rates
    out of range) surface as InvalidScenario when the scenario runs.
    """
    problems: list[str] = []
    seed = 0
    horizon = 0
    injections: list[Injection] = []
    noise: list[NoiseSpec] = []
    broken: set[str] = set()
    policy = ReleasePolicy()
    routing: list[RouteRule] = []
    noise_delivery = False
    gateway_consumes = False

    def fail(lineno: int, message: str) -> None:
        problems.append(f"{path}:{lineno}: {message}")

    def parse_position(lineno: int, word: str) -> tuple[str, Stage] | None:
        scheme, _, stage_word = word.rpartition(".")
        stage = _stage_from_word(stage_word)
        if not scheme or stage is None:
            fail(lineno, f"expected scheme-path.stage, got '{word}'")
            return None
        return scheme, stage

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition(":")
        key = key.strip()
        value = value.strip()
        if not sep:
            fail(lineno, f"expected 'key: value', got '{line}'")
            continue
        if key == "model":
            continue  # informational
        if key == "seed":
            seed = _parse_int(value, lineno, "seed", fail)
        elif key == "horizon":
            horizon = _parse_int(value, lineno, "horizon", fail)
        elif key == "inject":
            parts = value.split()
            if len(parts) not in (2, 3):
                fail(lineno, "inject needs: <time> <scheme-path.stage> [payload]")
                continue
            time = _parse_int(parts[0], lineno, "injection time", fail)
            pos = parse_position(lineno, parts[1])
            if pos is None:
                continue
            payload = parts[2] if len(parts) == 3 else ""
            injections.append(Injection(time, pos[0], pos[1], payload))
        elif key == "noise":
            parts = value.split()
            if len(parts) != 2:
                fail(lineno, "noise needs: <scheme-path> <rate>")
                continue
            try:
                rate = float(parts[1])
            except ValueError:
                fail(lineno, f"noise rate '{parts[1]}' is not a number")
                continue
            noise.append(NoiseSpec(parts[0], rate))
        elif key == "link":
            parts = value.split()
            if len(parts) != 2 or parts[1] not in ("up", "broken"):
                fail(lineno, "link needs: <arc-id> up|broken")
                continue
            if parts[1] == "broken":
                broken.add(parts[0])
        elif key == "release_policy":
            parts = value.split()
            try:
                if parts == ["return"]:
                    policy = ReleasePolicy.return_to_releaser()
                elif parts == ["store"]:
                    policy = ReleasePolicy.store_indefinitely()
                elif len(parts) == 2 and parts[0] == "destroy":
                    policy = ReleasePolicy.destroy_after(
                        _parse_int(parts[1], lineno, "destroy ttl", fail)
                    )
                else:
                    fail(lineno, "release_policy needs: return | store | destroy <k>")
            except ValueError as exc:
                fail(lineno, str(exc))
        elif key == "route":
            parts = value.split()
            if len(parts) < 2:
                fail(lineno, "route needs: <scheme-path.stage> <arc-id> [...]")
                continue
            pos = parse_position(lineno, parts[0])
            if pos is None:
                continue
            routing.append(RouteRule(pos[0], pos[1], tuple(parts[1:])))
        elif key == "noise_delivery":
            if value not in _BOOL_WORDS:
                fail(lineno, "noise_delivery needs true or false")
            else:
                noise_delivery = _BOOL_WORDS[value]
        elif key == "gateway_consumes":
            if value not in _BOOL_WORDS:
                fail(lineno, "gateway_consumes needs true or false")
            else:
                gateway_consumes = _BOOL_WORDS[value]
        else:
            fail(lineno, f"unknown scenario key '{key}'")

    if problems:
        raise ScenarioParseError(problems)

    return Scenario(
        model=model,
        seed=seed,
        horizon=horizon,
        injections=tuple(injections),
        noise=tuple(noise),
        broken_arcs=frozenset(broken),
        release_policy=policy,
        routing=tuple(routing),
        noise_delivery=noise_delivery,
        gateway_consumes=gateway_consumes,
    )


def _stage_from_word(word: str) -> Stage | None:
    from .model import STAGE_BY_KEYWORD

    return STAGE_BY_KEYWORD.get(word)


def _parse_int(word: str, lineno: int, what: str, fail) -> int:
    try:
        return int(word)
    except ValueError:
        fail(lineno, f"{what} '{word}' is not an integer")
        return 0
