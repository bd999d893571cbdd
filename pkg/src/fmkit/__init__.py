"""fmkit: multi-sphere flow systems as data, text, and executable runs.

Participants (spheres) hold flow schemes -- staged assemblies through which
typed flowthings move: receive, process, create, release, transfer. Flow
arcs move tokens between stages of same-kind schemes; trigger arcs cause
new tokens of another kind. The package covers the `.fm` declaration
language, well-formedness checking, deterministic simulation with `.fms`
scenarios, a corpus of classic communication models, information measures,
and DOT export.
"""
from .build import BuildIssue, ModelBuildError, build_system
from .corpus import (
    CorpusEntry,
    MutationFixture,
    UnknownSlug,
    corpus_get,
    corpus_list,
    corpus_mutations,
    corpus_scenario_source,
    corpus_source,
)
from .decls import (
    Declaration,
    EndpointRef,
    FlowDecl,
    KindDecl,
    MetaDecl,
    SchemeDecl,
    Span,
    SphereDecl,
    TriggerDecl,
)
from .dsl import (
    Diagnostic,
    RefusesMalformed,
    Severity,
    SourceFile,
    format_source,
    load_model,
    parse,
    serialize,
)
from .export import (
    DEFAULT_STYLE,
    StyleProfile,
    check_digraph,
    export_model,
    export_trace,
    peak_occupancy,
    traversal_counts,
)
from .metrics import DomainError, TraceMetrics, hartley, shannon_choices, trace_metrics
from .model import (
    Arc,
    ArcClass,
    Endpoint,
    FlowthingKind,
    LEGAL_TRANSITIONS,
    Scheme,
    Sphere,
    Stage,
    Substate,
    SystemModel,
    UnknownScheme,
    legal_transition,
    reachable_schemes,
)
from .simulator import (
    CensusReport,
    Event,
    FingerprintMismatch,
    HorizonZero,
    Injection,
    InvalidScenario,
    NoiseSpec,
    ReleasePolicy,
    RouteRule,
    Scenario,
    ScenarioParseError,
    Token,
    Trace,
    census,
    dump_trace,
    fingerprint,
    interfere,
    load_trace,
    parse_scenario,
    replay_check,
    run,
)
from .validator import (
    RuleId,
    StrictnessProfile,
    Violation,
    explain,
    render_records,
    render_text,
    validate,
)

__version__ = "0.1.0"
