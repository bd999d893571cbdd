"""Textual declaration language for flow systems.

Grammar (`.fm` files)::

    file      := decl*
    decl      := kind | sphere | flow | trigger | meta
    kind      := "kind" IDENT [STRING]
    sphere    := "sphere" IDENT "{" (scheme | sphere | meta)* "}"
    scheme    := "scheme" IDENT ":" IDENT "{" "stages" ":" STAGE+
                 ["capacity" ":" INT] "}"
    flow      := "flow" endpoint "->" endpoint [STRING]
    trigger   := ("trigger" | "gateway") endpoint "~>" endpoint [STRING]
    endpoint  := IDENT ("." IDENT)+ "." STAGE      # sphere path . scheme . stage
    meta      := "meta" IDENT "=" STRING

Stage names are lowercase singular: receive, process, create, release,
transfer. Comments run from ``#`` to end of line. Flows use a solid arrow
``->``, triggers a dotted arrow ``~>``. The optional trailing string on
kind/flow/trigger lines carries a description or edge label. A meta line
inside a sphere block attaches to that sphere; at top level it attaches to
the model (the key ``name`` names the model).

Parsing is total: malformed input produces Error diagnostics and the parser
resumes at the next declaration. Serialization is canonical -- declarations
sorted, 2-space indentation, LF line endings -- so equal models produce
byte-identical text.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .build import build_system
from .decls import (
    Declaration,
    EndpointRef,
    FlowDecl,
    KindDecl,
    MetaDecl,
    SchemeDecl,
    SphereDecl,
    Span,
    TriggerDecl,
)
from .model import STAGE_BY_KEYWORD, Stage, SystemModel

HEADER_COMMENT = "# fm model"
MAX_SPHERE_DEPTH = 64

TOP_KEYWORDS = frozenset({"kind", "sphere", "flow", "trigger", "gateway", "meta"})
BODY_KEYWORDS = frozenset({"scheme", "sphere", "meta"})


@dataclass(frozen=True)
class SourceFile:
    """A UTF-8 source buffer with an optional path for diagnostics."""

    text: str
    path: str = "<buffer>"

    @classmethod
    def from_bytes(cls, data: bytes, path: str = "<buffer>") -> "SourceFile":
        return cls(data.decode("utf-8", errors="replace"), path)

    def line_col(self, offset: int) -> tuple[int, int]:
        """1-based line and column for a byte offset (clamped to the text)."""
        offset = max(0, min(offset, len(self.text)))
        line = self.text.count("\n", 0, offset) + 1
        last_nl = self.text.rfind("\n", 0, offset)
        return line, offset - last_nl


class Severity(enum.Enum):
    ERROR = "Error"
    WARNING = "Warning"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: str
    message: str
    span: Span

    def render(self, src: SourceFile) -> str:
        line, col = src.line_col(self.span.start)
        return (
            f"{src.path}:{line}:{col}: {self.severity.value.lower()}: "
            f"{self.message} [{self.code}]"
        )


class RefusesMalformed(Exception):
    """Raised by the formatter when the input has Error diagnostics."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = tuple(diagnostics)
        super().__init__(f"input has {len(diagnostics)} error diagnostic(s)")


# ---------------------------------------------------------------------------
# Lexer


class _Tok(enum.Enum):
    IDENT = "identifier"
    INT = "integer"
    STRING = "string"
    LBRACE = "'{'"
    RBRACE = "'}'"
    COLON = "':'"
    EQUALS = "'='"
    DOT = "'.'"
    ARROW = "'->'"
    TARROW = "'~>'"
    ERROR = "unexpected character"
    EOF = "end of file"


@dataclass(frozen=True)
class _Token:
    kind: _Tok
    text: str
    span: Span


def _is_ident_start(ch: str) -> bool:
    return ch.isascii() and (ch.isalpha() or ch == "_")


def _is_ident_part(ch: str) -> bool:
    return ch.isascii() and (ch.isalnum() or ch == "_")


def _lex(text: str) -> tuple[list[_Token], list[Diagnostic]]:
    tokens: list[_Token] = []
    diags: list[Diagnostic] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if ch == "#":
            nl = text.find("\n", i)
            i = n if nl < 0 else nl + 1
            continue
        start = i
        if _is_ident_start(ch):
            i += 1
            while i < n:
                if _is_ident_part(text[i]):
                    i += 1
                elif text[i] == "-" and i + 1 < n and _is_ident_part(text[i + 1]):
                    i += 2
                else:
                    break
            tokens.append(_Token(_Tok.IDENT, text[start:i], Span(start, i)))
            continue
        if ch.isdigit():
            i += 1
            while i < n and text[i].isdigit():
                i += 1
            tokens.append(_Token(_Tok.INT, text[start:i], Span(start, i)))
            continue
        if ch == '"':
            i += 1
            while i < n and text[i] not in '"\n':
                i += 1
            if i < n and text[i] == '"':
                i += 1
                tokens.append(_Token(_Tok.STRING, text[start + 1 : i - 1], Span(start, i)))
            else:
                diags.append(
                    Diagnostic(
                        Severity.ERROR,
                        "UnterminatedString",
                        "string literal is missing its closing quote",
                        Span(start, min(i, n)),
                    )
                )
                tokens.append(_Token(_Tok.ERROR, text[start:i], Span(start, i)))
            continue
        if ch == "-" and text[i : i + 2] == "->":
            tokens.append(_Token(_Tok.ARROW, "->", Span(i, i + 2)))
            i += 2
            continue
        if ch == "~" and text[i : i + 2] == "~>":
            tokens.append(_Token(_Tok.TARROW, "~>", Span(i, i + 2)))
            i += 2
            continue
        simple = {"{": _Tok.LBRACE, "}": _Tok.RBRACE, ":": _Tok.COLON, "=": _Tok.EQUALS, ".": _Tok.DOT}
        if ch in simple:
            tokens.append(_Token(simple[ch], ch, Span(i, i + 1)))
            i += 1
            continue
        tokens.append(_Token(_Tok.ERROR, ch, Span(i, i + 1)))
        i += 1
    tokens.append(_Token(_Tok.EOF, "", Span(n, n)))
    return tokens, diags


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, src: SourceFile):
        self.src = src
        self.tokens, self.diags = _lex(src.text)
        self.pos = 0

    # -- token plumbing ---------------------------------------------------

    @property
    def cur(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.cur
        if tok.kind is not _Tok.EOF:
            self.pos += 1
        return tok

    def at_keyword(self, *words: str) -> bool:
        return self.cur.kind is _Tok.IDENT and self.cur.text in words

    def error(self, code: str, message: str, span: Span | None = None) -> None:
        self.diags.append(
            Diagnostic(Severity.ERROR, code, message, span or self.cur.span)
        )

    def expect(self, kind: _Tok, what: str) -> _Token | None:
        if self.cur.kind is kind:
            return self.advance()
        self.error(
            "UnexpectedToken",
            f"expected {what}, found {self.cur.kind.value}"
            + (f" '{self.cur.text}'" if self.cur.text else ""),
        )
        return None

    def skip_to_top_decl(self) -> None:
        """Recover: drop tokens until a top-level keyword at brace depth 0."""
        depth = 0
        while self.cur.kind is not _Tok.EOF:
            if self.cur.kind is _Tok.LBRACE:
                depth += 1
            elif self.cur.kind is _Tok.RBRACE:
                if depth == 0:
                    self.advance()
                    continue
                depth -= 1
            elif depth == 0 and self.cur.kind is _Tok.IDENT and self.cur.text in TOP_KEYWORDS:
                return
            self.advance()

    def skip_in_block(self, keywords: frozenset[str]) -> None:
        """Recover inside a braced body: stop at a body keyword or '}'."""
        depth = 0
        while self.cur.kind is not _Tok.EOF:
            if self.cur.kind is _Tok.LBRACE:
                depth += 1
            elif self.cur.kind is _Tok.RBRACE:
                if depth == 0:
                    return
                depth -= 1
            elif depth == 0 and self.cur.kind is _Tok.IDENT and self.cur.text in keywords:
                return
            self.advance()

    # -- productions --------------------------------------------------------

    def parse_file(self) -> list[Declaration]:
        decls: list[Declaration] = []
        while self.cur.kind is not _Tok.EOF:
            if self.at_keyword("kind"):
                decl = self.parse_kind()
            elif self.at_keyword("sphere"):
                decl = self.parse_sphere(depth=0)
            elif self.at_keyword("flow"):
                decl = self.parse_arrow(trigger=False)
            elif self.at_keyword("trigger"):
                decl = self.parse_arrow(trigger=True, gateway=False)
            elif self.at_keyword("gateway"):
                decl = self.parse_arrow(trigger=True, gateway=True)
            elif self.at_keyword("meta"):
                decl = self.parse_meta()
            else:
                if self.cur.kind is _Tok.IDENT:
                    self.error(
                        "UnknownKeyword",
                        f"unknown declaration keyword '{self.cur.text}'",
                    )
                else:
                    self.error(
                        "UnexpectedToken",
                        f"expected a declaration, found {self.cur.kind.value}"
                        + (f" '{self.cur.text}'" if self.cur.text else ""),
                    )
                self.advance()
                self.skip_to_top_decl()
                continue
            if decl is None:
                self.skip_to_top_decl()
            else:
                decls.append(decl)
        return decls

    def parse_kind(self) -> KindDecl | None:
        start = self.advance().span.start
        name = self.expect(_Tok.IDENT, "kind name")
        if name is None:
            return None
        description = ""
        end = name.span.end
        if self.cur.kind is _Tok.STRING:
            tok = self.advance()
            description = tok.text
            end = tok.span.end
        return KindDecl(name.text, description, Span(start, end))

    def parse_meta(self) -> MetaDecl | None:
        start = self.advance().span.start
        key = self.expect(_Tok.IDENT, "meta key")
        if key is None:
            return None
        if self.expect(_Tok.EQUALS, "'='") is None:
            return None
        value = self.expect(_Tok.STRING, "quoted string value")
        if value is None:
            return None
        return MetaDecl(key.text, value.text, Span(start, value.span.end))

    def parse_sphere(self, depth: int) -> SphereDecl | None:
        start = self.advance().span.start
        if depth >= MAX_SPHERE_DEPTH:
            self.error("UnexpectedToken", "sphere nesting is too deep")
            return None
        name = self.expect(_Tok.IDENT, "sphere name")
        if name is None:
            return None
        open_brace = self.expect(_Tok.LBRACE, "'{'")
        if open_brace is None:
            return None
        schemes: list[SchemeDecl] = []
        children: list[SphereDecl] = []
        metas: list[MetaDecl] = []
        while True:
            if self.cur.kind is _Tok.RBRACE:
                end = self.advance().span.end
                return SphereDecl(
                    name.text,
                    tuple(schemes),
                    tuple(children),
                    tuple(metas),
                    Span(start, end),
                )
            if self.cur.kind is _Tok.EOF:
                self.error(
                    "UnterminatedBlock",
                    f"sphere '{name.text}' is missing its closing '}}'",
                    Span(open_brace.span.start, len(self.src.text)),
                )
                return SphereDecl(
                    name.text,
                    tuple(schemes),
                    tuple(children),
                    tuple(metas),
                    Span(start, len(self.src.text)),
                )
            if self.at_keyword("scheme"):
                scheme = self.parse_scheme()
                if scheme is None:
                    self.skip_in_block(BODY_KEYWORDS)
                else:
                    schemes.append(scheme)
            elif self.at_keyword("sphere"):
                child = self.parse_sphere(depth + 1)
                if child is None:
                    self.skip_in_block(BODY_KEYWORDS)
                else:
                    children.append(child)
            elif self.at_keyword("meta"):
                meta = self.parse_meta()
                if meta is None:
                    self.skip_in_block(BODY_KEYWORDS)
                else:
                    metas.append(meta)
            else:
                if self.cur.kind is _Tok.IDENT:
                    self.error(
                        "UnknownKeyword",
                        f"unknown keyword '{self.cur.text}' inside sphere "
                        f"'{name.text}' (expected scheme, sphere or meta)",
                    )
                else:
                    self.error(
                        "UnexpectedToken",
                        f"expected scheme, sphere, meta or '}}', found "
                        f"{self.cur.kind.value}"
                        + (f" '{self.cur.text}'" if self.cur.text else ""),
                    )
                self.advance()
                self.skip_in_block(BODY_KEYWORDS)

    def parse_scheme(self) -> SchemeDecl | None:
        start = self.advance().span.start
        ident = self.expect(_Tok.IDENT, "scheme id")
        if ident is None:
            return None
        if self.expect(_Tok.COLON, "':'") is None:
            return None
        kind = self.expect(_Tok.IDENT, "kind name")
        if kind is None:
            return None
        if self.expect(_Tok.LBRACE, "'{'") is None:
            return None
        if not self.at_keyword("stages"):
            self.error("UnexpectedToken", "expected 'stages'")
            return None
        self.advance()
        if self.expect(_Tok.COLON, "':'") is None:
            return None
        stages: list[Stage] = []
        while self.cur.kind is _Tok.IDENT and self.cur.text not in ("capacity",):
            tok = self.advance()
            stage = STAGE_BY_KEYWORD.get(tok.text)
            if stage is None:
                self.error(
                    "UnknownStageName",
                    f"'{tok.text}' is not a stage name "
                    "(receive, process, create, release, transfer)",
                    tok.span,
                )
                return None
            if stage not in stages:
                stages.append(stage)
        if not stages:
            self.error("UnexpectedToken", "expected at least one stage name")
            return None
        capacity: int | None = None
        if self.at_keyword("capacity"):
            self.advance()
            if self.expect(_Tok.COLON, "':'") is None:
                return None
            num = self.expect(_Tok.INT, "positive integer")
            if num is None:
                return None
            capacity = int(num.text)
            if capacity < 1:
                self.error(
                    "UnexpectedToken", "capacity must be a positive integer", num.span
                )
                return None
        close = self.expect(_Tok.RBRACE, "'}'")
        if close is None:
            return None
        return SchemeDecl(
            ident.text, kind.text, tuple(stages), capacity, Span(start, close.span.end)
        )

    def parse_endpoint(self) -> EndpointRef | None:
        parts: list[_Token] = []
        first = self.expect(_Tok.IDENT, "endpoint (sphere path . scheme . stage)")
        if first is None:
            return None
        parts.append(first)
        while self.cur.kind is _Tok.DOT:
            self.advance()
            nxt = self.expect(_Tok.IDENT, "endpoint component")
            if nxt is None:
                return None
            parts.append(nxt)
        if len(parts) < 3:
            self.error(
                "UnexpectedToken",
                "endpoint needs at least sphere, scheme and stage components",
                Span(parts[0].span.start, parts[-1].span.end),
            )
            return None
        stage_tok = parts[-1]
        stage = STAGE_BY_KEYWORD.get(stage_tok.text)
        if stage is None:
            self.error(
                "UnknownStageName",
                f"'{stage_tok.text}' is not a stage name "
                "(receive, process, create, release, transfer)",
                stage_tok.span,
            )
            return None
        return EndpointRef(
            sphere_path=".".join(p.text for p in parts[:-2]),
            scheme=parts[-2].text,
            stage=stage,
            span=Span(parts[0].span.start, parts[-1].span.end),
        )

    def parse_arrow(self, trigger: bool, gateway: bool = False):
        start = self.advance().span.start
        source = self.parse_endpoint()
        if source is None:
            return None
        arrow_kind = _Tok.TARROW if trigger else _Tok.ARROW
        if self.expect(arrow_kind, arrow_kind.value) is None:
            return None
        target = self.parse_endpoint()
        if target is None:
            return None
        label = ""
        end = target.span.end
        if self.cur.kind is _Tok.STRING:
            tok = self.advance()
            label = tok.text
            end = tok.span.end
        span = Span(start, end)
        if trigger:
            return TriggerDecl(source, target, gateway=gateway, label=label, span=span)
        return FlowDecl(source, target, label=label, span=span)


def parse(src: SourceFile | str) -> tuple[list[Declaration], list[Diagnostic]]:
    """Parse DSL text into declarations plus diagnostics. Never raises."""
    if isinstance(src, str):
        src = SourceFile(src)
    parser = _Parser(src)
    decls = parser.parse_file()
    return decls, parser.diags


# ---------------------------------------------------------------------------
# Canonical emission


def _arc_sort_key(decl: FlowDecl | TriggerDecl) -> tuple:
    cls = "flow" if isinstance(decl, FlowDecl) else "trigger"
    gw = isinstance(decl, TriggerDecl) and decl.gateway
    return (cls, str(decl.source), str(decl.target), gw)


def _canonical_sphere(decl: SphereDecl) -> SphereDecl:
    return SphereDecl(
        name=decl.name,
        schemes=tuple(sorted(decl.schemes, key=lambda s: s.id)),
        children=tuple(
            sorted(
                (_canonical_sphere(c) for c in decl.children), key=lambda c: c.name
            )
        ),
        metas=tuple(sorted(decl.metas, key=lambda m: m.key)),
    )


def _emit_decls(decls: list[Declaration]) -> str:
    kinds = sorted((d for d in decls if isinstance(d, KindDecl)), key=lambda d: d.name)
    metas = sorted((d for d in decls if isinstance(d, MetaDecl)), key=lambda d: d.key)
    spheres = sorted(
        (_canonical_sphere(d) for d in decls if isinstance(d, SphereDecl)),
        key=lambda d: d.name,
    )
    arcs = sorted(
        (d for d in decls if isinstance(d, (FlowDecl, TriggerDecl))),
        key=_arc_sort_key,
    )

    lines = [HEADER_COMMENT]
    for kind in kinds:
        suffix = f' "{kind.description}"' if kind.description else ""
        lines.append(f"kind {kind.name}{suffix}")
    for meta in metas:
        lines.append(f'meta {meta.key} = "{meta.value}"')
    for sphere in spheres:
        _emit_sphere(sphere, 0, lines)
    for arc in arcs:
        suffix = f' "{arc.label}"' if arc.label else ""
        if isinstance(arc, FlowDecl):
            lines.append(f"flow {arc.source} -> {arc.target}{suffix}")
        else:
            word = "gateway" if arc.gateway else "trigger"
            lines.append(f"{word} {arc.source} ~> {arc.target}{suffix}")
    return "\n".join(lines) + "\n"


def _emit_sphere(decl: SphereDecl, depth: int, lines: list[str]) -> None:
    pad = "  " * depth
    lines.append(f"{pad}sphere {decl.name} {{")
    inner = "  " * (depth + 1)
    for meta in decl.metas:
        lines.append(f'{inner}meta {meta.key} = "{meta.value}"')
    for scheme in decl.schemes:
        stage_words = " ".join(s.keyword for s in sorted(scheme.stages))
        cap = f" capacity: {scheme.capacity}" if scheme.capacity is not None else ""
        lines.append(
            f"{inner}scheme {scheme.id}: {scheme.kind} "
            f"{{ stages: {stage_words}{cap} }}"
        )
    for child in decl.children:
        _emit_sphere(child, depth + 1, lines)
    lines.append(f"{pad}}}")


def serialize(model: SystemModel) -> str:
    """Render a model as canonical DSL text; parsing it back rebuilds the model."""
    return _emit_decls(model_to_decls(model))


def model_to_decls(model: SystemModel) -> list[Declaration]:
    decls: list[Declaration] = [
        KindDecl(k.name, k.description) for k in model.kinds
    ]
    metas = dict(model.metadata)
    if model.name:
        metas["name"] = model.name
    decls.extend(MetaDecl(k, v) for k, v in sorted(metas.items()))
    for sphere in model.spheres:
        decls.append(_sphere_to_decl(sphere))
    for arc in model.arcs:
        source = EndpointRef(
            _sphere_of(arc.source.scheme), _scheme_id(arc.source.scheme), arc.source.stage
        )
        target = EndpointRef(
            _sphere_of(arc.target.scheme), _scheme_id(arc.target.scheme), arc.target.stage
        )
        if arc.arc_class.value == "flow":
            decls.append(FlowDecl(source, target, label=arc.label))
        else:
            decls.append(
                TriggerDecl(source, target, gateway=arc.gateway, label=arc.label)
            )
    return decls


def _sphere_of(scheme_path: str) -> str:
    return scheme_path.rsplit(".", 1)[0]


def _scheme_id(scheme_path: str) -> str:
    return scheme_path.rsplit(".", 1)[1]


def _sphere_to_decl(sphere) -> SphereDecl:
    return SphereDecl(
        name=sphere.name,
        schemes=tuple(
            SchemeDecl(s.id, s.kind, s.stages_sorted(), s.capacity)
            for s in sphere.schemes
        ),
        children=tuple(_sphere_to_decl(c) for c in sphere.children),
        metas=tuple(MetaDecl(k, v) for k, v in sphere.metadata),
    )


def format_source(src: SourceFile | str) -> str:
    """Pretty-print DSL text into canonical form. Idempotent.

    Raises RefusesMalformed when the input has Error diagnostics; the
    declaration set is otherwise preserved exactly.
    """
    decls, diags = parse(src)
    errors = [d for d in diags if d.severity is Severity.ERROR]
    if errors:
        raise RefusesMalformed(errors)
    return _emit_decls(decls)


def load_model(text: str, path: str = "<buffer>") -> SystemModel:
    """Parse and build in one step; raises ValueError on parse errors."""
    src = SourceFile(text, path)
    decls, diags = parse(src)
    errors = [d for d in diags if d.severity is Severity.ERROR]
    if errors:
        rendered = "\n".join(d.render(src) for d in errors)
        raise ValueError(f"cannot load model:\n{rendered}")
    return build_system(decls)
