"""
Diagnostics for syntax, compatibility and compliance problems, plus the two
renderers used by the command line and the check service.

Compatibility diagnostics are underlined with ``~`` (the wavy underline of
an editor), compliance diagnostics with ``^``.
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import click

from objcheck.span import Span

logger = logging.getLogger(__name__)

JSON_VERSION = 1


class DiagnosticClass(Enum):
    SYNTAX = 'syntax'
    COMPATIBILITY = 'compatibility'
    COMPLIANCE = 'compliance'


class Polarity(Enum):
    SEND = 'send'
    RECEIVE = 'receive'
    NONE = 'none'


class Severity(Enum):
    ERROR = 'error'
    WARNING = 'warning'
    INFO = 'info'


class DiagnosticKind(Enum):
    """Every kind of problem the checker reports.

    The value is ``(name, class, polarity)``; class and polarity are fixed
    by the kind.
    """
    # lang-syntax
    UNEXPECTED_TOKEN = ('UnexpectedToken', DiagnosticClass.SYNTAX, Polarity.NONE)
    UNTERMINATED_STRING = ('UnterminatedString', DiagnosticClass.SYNTAX, Polarity.NONE)
    DUPLICATE_LABEL = ('DuplicateLabel', DiagnosticClass.SYNTAX, Polarity.NONE)
    UNTERMINATED_PROCESS = ('UnterminatedProcess', DiagnosticClass.SYNTAX, Polarity.NONE)
    UNDECLARED_BEHAVIOUR = ('UndeclaredBehaviour', DiagnosticClass.SYNTAX, Polarity.NONE)
    BEHAVIOUR_ARITY = ('BehaviourArity', DiagnosticClass.SYNTAX, Polarity.NONE)
    UNBOUND_VARIABLE = ('UnboundVariable', DiagnosticClass.SYNTAX, Polarity.NONE)
    DUPLICATE_BEHAVIOUR = ('DuplicateBehaviour', DiagnosticClass.SYNTAX, Polarity.NONE)
    SELF_MESSAGE = ('SelfMessage', DiagnosticClass.SYNTAX, Polarity.NONE)
    SELF_PARENT = ('SelfParent', DiagnosticClass.SYNTAX, Polarity.NONE)
    DUPLICATE_OBJECT = ('DuplicateObject', DiagnosticClass.SYNTAX, Polarity.NONE)
    DUPLICATE_SYSTEM = ('DuplicateSystem', DiagnosticClass.SYNTAX, Polarity.NONE)
    UNKNOWN_SYSTEM = ('UnknownSystem', DiagnosticClass.SYNTAX, Polarity.NONE)
    IMPORT_CYCLE = ('ImportCycle', DiagnosticClass.SYNTAX, Polarity.NONE)
    # compat-check
    UNDELIVERABLE_SEND = ('UndeliverableSend', DiagnosticClass.COMPATIBILITY, Polarity.SEND)
    STUCK_RECEIVE = ('StuckReceive', DiagnosticClass.COMPATIBILITY, Polarity.RECEIVE)
    DEADLOCK = ('Deadlock', DiagnosticClass.COMPATIBILITY, Polarity.NONE)
    QUEUE_OVERFLOW = ('QueueOverflow', DiagnosticClass.COMPATIBILITY, Polarity.SEND)
    STATE_LIMIT = ('StateLimit', DiagnosticClass.COMPATIBILITY, Polarity.NONE)
    INVOKE_DEPTH = ('InvokeDepth', DiagnosticClass.COMPATIBILITY, Polarity.NONE)
    ARITY_MISMATCH = ('ArityMismatch', DiagnosticClass.COMPATIBILITY, Polarity.RECEIVE)
    # refinement-check
    MISSING_OFFER = ('MissingOffer', DiagnosticClass.COMPLIANCE, Polarity.RECEIVE)
    EXCESS_DEMAND = ('ExcessDemand', DiagnosticClass.COMPLIANCE, Polarity.SEND)
    DIVERGENCE = ('Divergence', DiagnosticClass.COMPLIANCE, Polarity.NONE)

    @property
    def label(self) -> str:
        return self.value[0]

    @property
    def diagnostic_class(self) -> DiagnosticClass:
        return self.value[1]

    @property
    def polarity(self) -> Polarity:
        return self.value[2]


@dataclass(frozen=True)
class Diagnostic:
    kind: DiagnosticKind
    span: Span
    message: str
    system: Optional[str] = None
    severity: Severity = Severity.ERROR
    witness: Tuple = ()
    related: Tuple[Span, ...] = ()

    @property
    def diagnostic_class(self) -> DiagnosticClass:
        return self.kind.diagnostic_class

    @property
    def polarity(self) -> Polarity:
        return self.kind.polarity

    @property
    def is_informational(self) -> bool:
        return self.severity is Severity.INFO

    def sort_key(self):
        s = self.span
        return (s.file, s.start_line, s.start_col, s.end_line, s.end_col,
                self.kind.label, self.system or '', self.message)

    def to_dict(self) -> Dict:
        entry = {
            'kind': self.kind.label,
            'class': self.diagnostic_class.value,
            'severity': self.severity.value,
            'polarity': self.polarity.value,
            'system': self.system,
            'file': self.span.file,
            'range': {
                'start': {'line': self.span.start_line, 'col': self.span.start_col},
                'end': {'line': self.span.end_line, 'col': self.span.end_col},
            },
            'message': self.message,
            'witness': [step.to_dict() for step in self.witness],
        }
        if self.related:
            entry['related'] = [
                {'file': r.file, 'line': r.start_line, 'col': r.start_col}
                for r in self.related
            ]
        return entry


def sort_diagnostics(diags: Iterable[Diagnostic]) -> List[Diagnostic]:
    """Order by file, then span, then kind."""
    return sorted(diags, key=Diagnostic.sort_key)


def visible(diags: Iterable[Diagnostic], show_info: bool = False) -> List[Diagnostic]:
    return [d for d in diags if show_info or not d.is_informational]


class CheckError(Exception):
    """Base class of every checker failure that carries diagnostics."""

    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = list(diagnostics)
        first = self.diagnostics[0].message if self.diagnostics else 'unknown failure'
        super().__init__(first)


class ParseError(CheckError):
    pass


class ResolveError(CheckError):
    pass


class InvokeDepthExceeded(CheckError):
    pass


class CompositionError(CheckError):
    pass


class StateLimitExceeded(CheckError):
    pass


class ExplorationIncomplete(CheckError):
    """Raised when a state space needed in full was cut short."""


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

_SEVERITY_COLOURS = {
    Severity.ERROR: 'red',
    Severity.WARNING: 'yellow',
    Severity.INFO: 'blue',
}

_POLARITY_TAGS = {
    Polarity.SEND: '[send]',
    Polarity.RECEIVE: '[recv]',
    Polarity.NONE: '',
}


def _underline_glyph(diag: Diagnostic) -> str:
    if diag.diagnostic_class is DiagnosticClass.COMPATIBILITY:
        return '~'
    return '^'


def _excerpt(diag: Diagnostic, sources: Dict[str, str], color: bool) -> List[str]:
    text = sources.get(diag.span.file)
    if text is None:
        return []
    lines = text.splitlines()
    if not 0 < diag.span.start_line <= len(lines):
        return []
    line = lines[diag.span.start_line - 1]
    if diag.span.end_line == diag.span.start_line:
        end_col = diag.span.end_col
    else:
        end_col = len(line) + 1
    width = max(1, end_col - diag.span.start_col)
    gutter = f'{diag.span.start_line:>5} | '
    marks = _underline_glyph(diag) * width
    if color:
        marks = click.style(marks, fg=_SEVERITY_COLOURS[diag.severity], bold=True)
    pad = ' ' * (diag.span.start_col - 1)
    return [gutter + line, ' ' * 6 + '| ' + pad + marks]


def render_human(diags: Sequence[Diagnostic], sources: Dict[str, str],
                 systems_verified: int = 0, color: bool = False) -> str:
    """Render diagnostics as underlined source excerpts.

    Parameters
    ----------
    diags : Sequence[Diagnostic]
        Diagnostics to show; they are sorted before rendering
    sources : Dict[str, str]
        Source text by file identifier, used for the excerpts
    systems_verified : int, optional
        Number of systems checked, reported when there is nothing to show
    color : bool, optional
        Emit ANSI colours, by default False

    Returns
    -------
    str
        The rendered report, ending in a newline
    """
    if not diags:
        return f'ok: {systems_verified} system(s) verified\n'

    out: List[str] = []
    for diag in sort_diagnostics(diags):
        severity = diag.severity.value
        if color:
            severity = click.style(severity, fg=_SEVERITY_COLOURS[diag.severity], bold=True)
        tag = _POLARITY_TAGS[diag.polarity]
        where = f' in {diag.system}' if diag.system else ''
        header = f'{diag.span}: {severity}: {diag.kind.label}'
        if tag:
            header += f' {tag}'
        out.append(f'{header}{where}: {diag.message}')
        out.extend(_excerpt(diag, sources, color))
        for rel in diag.related:
            out.append(f'  note: also defined at {rel}')
        if diag.witness:
            out.append('  witness:')
            for n, step in enumerate(diag.witness, start=1):
                out.append(f'    {n:>3}. {step.describe()}')
        out.append('')

    counts = {s: sum(1 for d in diags if d.severity is s) for s in Severity}
    summary = ', '.join(f'{counts[s]} {s.value}(s)' for s in Severity if counts[s])
    out.append(f'{summary} in {systems_verified} system(s)')
    return '\n'.join(out) + '\n'


def to_document(diags: Sequence[Diagnostic]) -> Dict:
    return {
        'version': JSON_VERSION,
        'diagnostics': [d.to_dict() for d in sort_diagnostics(diags)],
    }


def render_json(diags: Sequence[Diagnostic]) -> str:
    """Render diagnostics as one compact JSON document with stable key order."""
    return dump_document(to_document(diags))


def dump_document(document: Dict) -> str:
    return json.dumps(document, separators=(',', ':'), ensure_ascii=False)
