"""
Parser for the object language.

    system dev-refactored: dev
    obj teamLead
    behaviour ReleaseCycle
       devTeam ? releaseCandidate
       business ! evaluate
       business ? {
          accept(tag)
             repository ! tagRC(tag)
             devTeam ! stop.
       }
    ReleaseCycle

`!` sends, `?` receives, `.` stops. Participants and message labels start
with a lowercase letter, behaviours with an uppercase one. Continuations
live inside choice branches; a single `p ! m P` is a one-branch choice.
"""

import logging
import re
from dataclasses import dataclass, field
from enum import Enum, auto
from typing import Dict, Iterator, List, Optional, Set, Tuple, Union

from objcheck.diagnostics import Diagnostic, DiagnosticKind, ParseError
from objcheck.span import Span

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Abstract syntax
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str
    span: Span = field(compare=False, default=None)


@dataclass(frozen=True)
class IntLit:
    value: int
    span: Span = field(compare=False, default=None)


@dataclass(frozen=True)
class StrLit:
    value: str
    span: Span = field(compare=False, default=None)


Expr = Union[Var, IntLit, StrLit]


@dataclass(frozen=True)
class SendBranch:
    label: str
    args: Tuple[Expr, ...]
    body: 'Proc'
    label_span: Span = field(compare=False, default=None)


@dataclass(frozen=True)
class RecvBranch:
    label: str
    binders: Tuple[str, ...]
    body: 'Proc'
    label_span: Span = field(compare=False, default=None)


@dataclass(frozen=True)
class SendChoice:
    target: str
    branches: Tuple[SendBranch, ...]
    span: Span = field(compare=False, default=None)
    head_span: Span = field(compare=False, default=None)


@dataclass(frozen=True)
class RecvChoice:
    source: str
    branches: Tuple[RecvBranch, ...]
    span: Span = field(compare=False, default=None)
    head_span: Span = field(compare=False, default=None)


@dataclass(frozen=True)
class Invoke:
    name: str
    args: Tuple[Expr, ...]
    span: Span = field(compare=False, default=None)


@dataclass(frozen=True)
class Stop:
    span: Span = field(compare=False, default=None)


Proc = Union[SendChoice, RecvChoice, Invoke, Stop]


@dataclass(frozen=True)
class Behaviour:
    name: str
    params: Tuple[str, ...]
    body: Proc
    span: Span = field(compare=False, default=None)


@dataclass(frozen=True)
class ObjectDecl:
    name: str
    behaviours: Tuple[Behaviour, ...]
    main: Proc
    span: Span = field(compare=False, default=None)

    def behaviour(self, name: str) -> Optional[Behaviour]:
        for b in self.behaviours:
            if b.name == name:
                return b
        return None

    def peers(self) -> Set[str]:
        """Every participant this object sends to or receives from."""
        found = set()
        for proc in self.procs():
            if isinstance(proc, SendChoice):
                found.add(proc.target)
            elif isinstance(proc, RecvChoice):
                found.add(proc.source)
        return found

    def procs(self) -> Iterator[Proc]:
        for b in self.behaviours:
            yield from walk(b.body)
        yield from walk(self.main)


@dataclass(frozen=True)
class SystemDecl:
    name: str
    parent: Optional[str]
    usings: Tuple[str, ...]
    objects: Tuple[ObjectDecl, ...]
    span: Span = field(compare=False, default=None)
    parent_span: Optional[Span] = field(compare=False, default=None)
    using_spans: Tuple[Span, ...] = field(compare=False, default=())

    @property
    def file(self) -> str:
        return self.span.file if self.span else ''


def walk(proc: Proc) -> Iterator[Proc]:
    """Yield every process node reachable by syntax from ``proc``."""
    stack = [proc]
    while stack:
        p = stack.pop()
        yield p
        if isinstance(p, (SendChoice, RecvChoice)):
            stack.extend(reversed([br.body for br in p.branches]))


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

class TokenKind(Enum):
    IDENT = auto()
    INT = auto()
    STRING = auto()
    BANG = auto()
    QUERY = auto()
    LBRACE = auto()
    RBRACE = auto()
    LPAREN = auto()
    RPAREN = auto()
    COMMA = auto()
    DOT = auto()
    COLON = auto()
    SYSTEM = auto()
    USING = auto()
    OBJ = auto()
    BEHAVIOUR = auto()
    EOF = auto()


_SYMBOLS = {
    '!': TokenKind.BANG,
    '?': TokenKind.QUERY,
    '{': TokenKind.LBRACE,
    '}': TokenKind.RBRACE,
    '(': TokenKind.LPAREN,
    ')': TokenKind.RPAREN,
    ',': TokenKind.COMMA,
    '.': TokenKind.DOT,
    ':': TokenKind.COLON,
}

_KEYWORDS = {
    'system': TokenKind.SYSTEM,
    'using': TokenKind.USING,
    'obj': TokenKind.OBJ,
    'behaviour': TokenKind.BEHAVIOUR,
}

_TOKEN_RE = re.compile(r'''
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<int>-?[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*(?:-[A-Za-z0-9_]+)*)
  | (?P<quote>")
  | (?P<sym>[!?{}(),.:])
''', re.VERBOSE)

_ESCAPES = {'"': '"', '\\': '\\', 'n': '\n', 't': '\t'}


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    span: Span
    value: object = None

    @property
    def is_lower(self) -> bool:
        return self.kind is TokenKind.IDENT and not self.text[0].isupper()

    @property
    def is_upper(self) -> bool:
        return self.kind is TokenKind.IDENT and self.text[0].isupper()

    def describe(self) -> str:
        if self.kind is TokenKind.EOF:
            return 'end of file'
        if self.kind is TokenKind.IDENT:
            return f'identifier {self.text!r}'
        if self.kind in _KEYWORDS.values():
            return f'keyword {self.text!r}'
        return repr(self.text)


class _Cursor:
    """Position bookkeeping for the lexer: offset to (line, col)."""

    def __init__(self, text: str, file_id: str):
        self.text = text
        self.file_id = file_id
        self.line = 1
        self.col = 1

    def advance_over(self, chunk: str) -> None:
        newlines = chunk.count('\n')
        if newlines:
            self.line += newlines
            self.col = len(chunk) - chunk.rfind('\n')
        else:
            self.col += len(chunk)

    def span_of(self, chunk: str) -> Span:
        start_line, start_col = self.line, self.col
        self.advance_over(chunk)
        return Span(self.file_id, start_line, start_col, self.line, self.col)


def tokenize(source: str, file_id: str) -> List[Token]:
    """Split ``source`` into tokens; raises ParseError on bad input."""
    tokens: List[Token] = []
    cur = _Cursor(source, file_id)
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if not m:
            span = Span(file_id, cur.line, cur.col, cur.line, cur.col + 1)
            raise ParseError([Diagnostic(
                DiagnosticKind.UNEXPECTED_TOKEN, span,
                f'unexpected character {source[pos]!r}')])
        kind = m.lastgroup
        if kind == 'quote':
            end, value = _scan_string(source, pos, cur)
            chunk = source[pos:end]
            tokens.append(Token(TokenKind.STRING, chunk, cur.span_of(chunk), value))
            pos = end
            continue
        chunk = m.group()
        if kind in ('ws', 'comment'):
            cur.advance_over(chunk)
        elif kind == 'int':
            tokens.append(Token(TokenKind.INT, chunk, cur.span_of(chunk), int(chunk)))
        elif kind == 'ident':
            tokens.append(Token(_KEYWORDS.get(chunk, TokenKind.IDENT), chunk, cur.span_of(chunk)))
        else:
            tokens.append(Token(_SYMBOLS[chunk], chunk, cur.span_of(chunk)))
        pos = m.end()
    tokens.append(Token(TokenKind.EOF, '', Span(file_id, cur.line, cur.col, cur.line, cur.col)))
    return tokens


def _scan_string(source: str, start: int, cur: _Cursor) -> Tuple[int, str]:
    chars = []
    i = start + 1
    while i < len(source):
        c = source[i]
        if c == '"':
            return i + 1, ''.join(chars)
        if c == '\n':
            break
        if c == '\\' and i + 1 < len(source) and source[i + 1] in _ESCAPES:
            chars.append(_ESCAPES[source[i + 1]])
            i += 2
            continue
        chars.append(c)
        i += 1
    span = Span(cur.file_id, cur.line, cur.col, cur.line, cur.col + 1)
    raise ParseError([Diagnostic(DiagnosticKind.UNTERMINATED_STRING, span,
                                 'string literal is not terminated')])


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

@dataclass
class _Action:
    """A single send or receive statement whose continuation is not yet known."""
    peer: str
    polarity: TokenKind
    label: str
    items: tuple
    span: Span
    head_span: Span
    label_span: Span


_Stmt = Union[_Action, SendChoice, RecvChoice, Invoke, Stop]


class _Parser:

    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.i = 0

    # -- token plumbing ----------------------------------------------------

    def peek(self, n: int = 0) -> Token:
        return self.tokens[min(self.i + n, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.peek()
        if self.i < len(self.tokens) - 1:
            self.i += 1
        return tok

    @property
    def last(self) -> Token:
        return self.tokens[max(self.i - 1, 0)]

    def fail(self, message: str, tok: Optional[Token] = None,
             kind: DiagnosticKind = DiagnosticKind.UNEXPECTED_TOKEN):
        tok = tok or self.peek()
        raise ParseError([Diagnostic(kind, tok.span, f'{message}, got {tok.describe()}')])

    def expect(self, kind: TokenKind, what: str) -> Token:
        if self.peek().kind is not kind:
            self.fail(f'expected {what}')
        return self.advance()

    def expect_lower(self, what: str) -> Token:
        if not self.peek().is_lower:
            self.fail(f'expected {what} (lowercase identifier)')
        return self.advance()

    def expect_upper(self, what: str) -> Token:
        if not self.peek().is_upper:
            self.fail(f'expected {what} (uppercase identifier)')
        return self.advance()

    def at_statement(self) -> bool:
        tok = self.peek()
        if tok.is_lower:
            return self.peek(1).kind in (TokenKind.BANG, TokenKind.QUERY)
        return tok.is_upper or tok.kind is TokenKind.DOT

    # -- grammar -------------------------------------------------------------

    def parse_file(self) -> List[SystemDecl]:
        systems = [self.parse_system()]
        while self.peek().kind is TokenKind.SYSTEM:
            systems.append(self.parse_system())
        if self.peek().kind is not TokenKind.EOF:
            self.fail("expected 'system', 'obj' or end of file")
        return systems

    def parse_system(self) -> SystemDecl:
        start = self.expect(TokenKind.SYSTEM, "'system'")
        name = self.expect_lower('a system name')
        parent = None
        if self.peek().kind is TokenKind.COLON:
            self.advance()
            parent = self.expect_lower('the name of the abstract system')
        usings = []
        while self.peek().kind is TokenKind.USING:
            self.advance()
            usings.append(self.expect_lower('a system name'))
        objects = []
        while self.peek().kind is TokenKind.OBJ:
            objects.append(self.parse_object())
        return SystemDecl(name.text, parent.text if parent else None,
                          tuple(u.text for u in usings), tuple(objects),
                          start.span.to(name.span),
                          parent.span if parent else None,
                          tuple(u.span for u in usings))

    def parse_object(self) -> ObjectDecl:
        start = self.expect(TokenKind.OBJ, "'obj'")
        name = self.expect_lower('an object name')
        behaviours = []
        stmts: List[_Stmt] = []
        while self.peek().kind not in (TokenKind.OBJ, TokenKind.SYSTEM, TokenKind.EOF):
            if self.peek().kind is TokenKind.BEHAVIOUR:
                behaviours.append(self.parse_behaviour())
            else:
                stmts.append(self.parse_statement())
        main = self.assemble(stmts, name)
        return ObjectDecl(name.text, tuple(behaviours), main, start.span.to(name.span))

    def parse_behaviour(self) -> Behaviour:
        start = self.expect(TokenKind.BEHAVIOUR, "'behaviour'")
        name = self.expect_upper('a behaviour name')
        params: Tuple[str, ...] = ()
        if self.peek().kind is TokenKind.LPAREN:
            params = tuple(t.text for t in self.parse_list(lambda: self.expect_lower('a parameter')))
        body = self.parse_proc()
        return Behaviour(name.text, params, body, start.span.to(name.span))

    def assemble(self, stmts: List[_Stmt], owner: Token) -> Proc:
        """Fold an object's top-level statements into its main process."""
        if not stmts:
            raise ParseError([Diagnostic(
                DiagnosticKind.UNTERMINATED_PROCESS, owner.span,
                f'object {owner.text} has no main process; end it with ".", '
                'a behaviour invocation or a choice')])
        for n, stmt in enumerate(stmts[:-1]):
            if not isinstance(stmt, _Action):
                following = stmts[n + 1]
                raise ParseError([Diagnostic(
                    DiagnosticKind.UNEXPECTED_TOKEN, following.span,
                    'statement follows the end of the process')])
        last = stmts[-1]
        if isinstance(last, _Action):
            raise ParseError([Diagnostic(
                DiagnosticKind.UNTERMINATED_PROCESS, last.span,
                'process does not end in ".", a behaviour invocation or a choice')])
        proc: Proc = last
        for stmt in reversed(stmts[:-1]):
            proc = _close(stmt, proc)
        return proc

    def parse_proc(self) -> Proc:
        stmt = self.parse_statement()
        if isinstance(stmt, _Action):
            return _close(stmt, self.parse_proc())
        return stmt

    def parse_statement(self) -> _Stmt:
        tok = self.peek()
        if tok.is_lower and self.peek(1).kind in (TokenKind.BANG, TokenKind.QUERY):
            if self.peek(2).kind is TokenKind.LBRACE:
                return self.parse_choice()
            return self.parse_action()
        if tok.is_upper:
            return self.parse_invoke()
        if tok.kind is TokenKind.DOT:
            self.advance()
            return Stop(tok.span)
        if tok.kind in (TokenKind.RBRACE, TokenKind.EOF, TokenKind.OBJ, TokenKind.SYSTEM,
                        TokenKind.BEHAVIOUR) or tok.is_lower:
            self.fail('process does not end in ".", a behaviour invocation or a choice',
                      tok, DiagnosticKind.UNTERMINATED_PROCESS)
        self.fail('expected a send, a receive, a behaviour invocation or "."')

    def parse_action(self) -> _Action:
        peer = self.advance()
        op = self.advance()
        label = self.expect_lower('a message label')
        items = self.parse_message_items(op.kind)
        return _Action(peer.text, op.kind, label.text, items,
                       peer.span.to(self.last.span), peer.span.to(op.span), label.span)

    def parse_choice(self) -> Union[SendChoice, RecvChoice]:
        peer = self.advance()
        op = self.advance()
        self.expect(TokenKind.LBRACE, "'{'")
        branches = []
        while self.peek().kind is not TokenKind.RBRACE:
            if not self.peek().is_lower or self.peek(1).kind in (TokenKind.BANG, TokenKind.QUERY):
                self.fail("expected a branch label or '}'")
            label = self.advance()
            items = self.parse_message_items(op.kind)
            body = self.parse_proc()
            if op.kind is TokenKind.BANG:
                branches.append(SendBranch(label.text, items, body, label.span))
            else:
                branches.append(RecvBranch(label.text, items, body, label.span))
        if not branches:
            self.fail('a choice needs at least one branch')
        close = self.advance()
        span = peer.span.to(close.span)
        head = peer.span.to(op.span)
        if op.kind is TokenKind.BANG:
            return SendChoice(peer.text, tuple(branches), span, head)
        return RecvChoice(peer.text, tuple(branches), span, head)

    def parse_message_items(self, op: TokenKind) -> tuple:
        if self.peek().kind is not TokenKind.LPAREN:
            return ()
        if op is TokenKind.BANG:
            return tuple(self.parse_list(self.parse_expr))
        return tuple(t.text for t in self.parse_list(lambda: self.expect_lower('a binder')))

    def parse_invoke(self) -> Invoke:
        name = self.advance()
        args: Tuple[Expr, ...] = ()
        if self.peek().kind is TokenKind.LPAREN:
            args = tuple(self.parse_list(self.parse_expr))
        return Invoke(name.text, args, name.span.to(self.last.span))

    def parse_expr(self) -> Expr:
        tok = self.peek()
        if tok.is_lower:
            self.advance()
            return Var(tok.text, tok.span)
        if tok.kind is TokenKind.INT:
            self.advance()
            return IntLit(tok.value, tok.span)
        if tok.kind is TokenKind.STRING:
            self.advance()
            return StrLit(tok.value, tok.span)
        self.fail('expected a variable, an integer or a string')

    def parse_list(self, item):
        self.expect(TokenKind.LPAREN, "'('")
        items = [item()]
        while self.peek().kind is TokenKind.COMMA:
            self.advance()
            items.append(item())
        self.expect(TokenKind.RPAREN, "')'")
        return items


def _close(action: _Action, body: Proc) -> Proc:
    """Turn a pending single-label action into a one-branch choice."""
    if action.polarity is TokenKind.BANG:
        branch = SendBranch(action.label, action.items, body, action.label_span)
        return SendChoice(action.peer, (branch,), action.span, action.head_span)
    branch = RecvBranch(action.label, action.items, body, action.label_span)
    return RecvChoice(action.peer, (branch,), action.span, action.head_span)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _validate_system(decl: SystemDecl) -> List[Diagnostic]:
    diags = []
    if decl.parent == decl.name:
        diags.append(Diagnostic(DiagnosticKind.SELF_PARENT, decl.span,
                                f'system {decl.name} cannot refine itself', decl.name))
    seen: Dict[str, ObjectDecl] = {}
    for obj in decl.objects:
        if obj.name in seen:
            diags.append(Diagnostic(
                DiagnosticKind.DUPLICATE_OBJECT, obj.span,
                f'object {obj.name} is defined twice in system {decl.name}',
                decl.name, related=(seen[obj.name].span,)))
        else:
            seen[obj.name] = obj
        diags.extend(_validate_object(obj, decl.name))
    return diags


def _validate_object(obj: ObjectDecl, system: str) -> List[Diagnostic]:
    diags = []
    declared: Dict[str, Behaviour] = {}
    for b in obj.behaviours:
        if b.name in declared:
            diags.append(Diagnostic(
                DiagnosticKind.DUPLICATE_BEHAVIOUR, b.span,
                f'behaviour {b.name} is declared twice in object {obj.name}',
                system, related=(declared[b.name].span,)))
        else:
            declared[b.name] = b
    for b in obj.behaviours:
        diags.extend(_validate_proc(b.body, set(b.params), obj, declared, system))
    diags.extend(_validate_proc(obj.main, set(), obj, declared, system))
    return diags


def _validate_proc(proc: Proc, scope: Set[str], obj: ObjectDecl,
                   declared: Dict[str, Behaviour], system: str) -> List[Diagnostic]:
    diags = []
    stack = [(proc, frozenset(scope))]
    while stack:
        p, bound = stack.pop()
        if isinstance(p, (SendChoice, RecvChoice)):
            peer = p.target if isinstance(p, SendChoice) else p.source
            if peer == obj.name:
                diags.append(Diagnostic(DiagnosticKind.SELF_MESSAGE, p.head_span,
                                        f'object {obj.name} cannot message itself', system))
            labels: Set[str] = set()
            for br in p.branches:
                if br.label in labels:
                    diags.append(Diagnostic(
                        DiagnosticKind.DUPLICATE_LABEL, br.label_span,
                        f'label {br.label} appears twice in one choice', system))
                labels.add(br.label)
                if isinstance(br, SendBranch):
                    diags.extend(_check_exprs(br.args, bound, system))
                    stack.append((br.body, bound))
                else:
                    stack.append((br.body, bound | set(br.binders)))
        elif isinstance(p, Invoke):
            diags.extend(_check_exprs(p.args, bound, system))
            target = declared.get(p.name)
            if target is None:
                diags.append(Diagnostic(
                    DiagnosticKind.UNDECLARED_BEHAVIOUR, p.span,
                    f'object {obj.name} has no behaviour {p.name}', system))
            elif len(target.params) != len(p.args):
                diags.append(Diagnostic(
                    DiagnosticKind.BEHAVIOUR_ARITY, p.span,
                    f'behaviour {p.name} takes {len(target.params)} argument(s), '
                    f'{len(p.args)} given', system, related=(target.span,)))
    return diags


def _check_exprs(exprs, bound, system) -> List[Diagnostic]:
    return [
        Diagnostic(DiagnosticKind.UNBOUND_VARIABLE, e.span,
                   f'variable {e.name} is not bound here', system)
        for e in exprs if isinstance(e, Var) and e.name not in bound
    ]


def parse(source: str, file_id: str) -> List[SystemDecl]:
    """Parse one source file into its system declarations

    Parameters
    ----------
    source : str
        Program text
    file_id : str
        Identifier recorded in every span

    Returns
    -------
    List[SystemDecl]
        One declaration per `system` in the file

    Raises
    ------
    ParseError
        Carrying every diagnostic found; nothing is returned on failure
    """
    systems = _Parser(tokenize(source, file_id)).parse_file()
    diags = [d for decl in systems for d in _validate_system(decl)]
    if diags:
        raise ParseError(diags)
    logger.debug('parsed %s: %s', file_id, ', '.join(s.name for s in systems))
    return systems


# ---------------------------------------------------------------------------
# Pretty printer
# ---------------------------------------------------------------------------

INDENT = '   '


def render_expr(e: Expr) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, IntLit):
        return str(e.value)
    escaped = e.value.replace('\\', '\\\\').replace('"', '\\"').replace('\n', '\\n').replace('\t', '\\t')
    return f'"{escaped}"'


def _items(items) -> str:
    if not items:
        return ''
    return '(' + ', '.join(i if isinstance(i, str) else render_expr(i) for i in items) + ')'


def _pretty_proc(proc: Proc, depth: int, out: List[str]) -> None:
    pad = INDENT * depth
    if isinstance(proc, Stop):
        out.append(pad + '.')
    elif isinstance(proc, Invoke):
        out.append(pad + proc.name + _items(proc.args))
    else:
        peer, op = ((proc.target, '!') if isinstance(proc, SendChoice) else (proc.source, '?'))
        items = [br.args if isinstance(br, SendBranch) else br.binders for br in proc.branches]
        if len(proc.branches) == 1:
            br = proc.branches[0]
            head = f'{pad}{peer} {op} {br.label}{_items(items[0])}'
            _pretty_continuation(head, br.body, depth, out)
            return
        out.append(f'{pad}{peer} {op} {{')
        for br, its in zip(proc.branches, items):
            _pretty_continuation(f'{pad}{INDENT}{br.label}{_items(its)}', br.body, depth + 2, out)
        out.append(pad + '}')


def _pretty_continuation(head: str, body: Proc, depth: int, out: List[str]) -> None:
    if isinstance(body, Stop):
        out.append(head + '.')
    else:
        out.append(head)
        _pretty_proc(body, depth, out)


def pretty(decl: SystemDecl) -> str:
    """Render a system declaration as canonical source text."""
    out = ['system ' + decl.name + (f': {decl.parent}' if decl.parent else '')]
    out.extend(f'using {u}' for u in decl.usings)
    for obj in decl.objects:
        out.append('')
        out.append(f'obj {obj.name}')
        for b in obj.behaviours:
            out.append(f'behaviour {b.name}{_items(b.params)}')
            _pretty_proc(b.body, 1, out)
        _pretty_proc(obj.main, 0, out)
    return '\n'.join(out) + '\n'
