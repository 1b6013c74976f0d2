"""
Per-object labelled transition systems.

A local state is a syntactic point of an object's process together with
the values of the variables in scope there. Behaviour invocations are
unfolded on the way into a state, so no state ever rests on an Invoke.
Values received from outside the system are not known to the checker and
are represented by ``UNKNOWN``.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple, Union

from objcheck.diagnostics import Diagnostic, DiagnosticKind, InvokeDepthExceeded, Polarity
from objcheck.span import Span
from objcheck.syntax import (Expr, IntLit, Invoke, ObjectDecl, Proc, RecvChoice, SendChoice,
                             Stop, StrLit, Var)

logger = logging.getLogger(__name__)


class Opaque(Enum):
    UNKNOWN = '?'

    def __repr__(self) -> str:
        return 'UNKNOWN'


UNKNOWN = Opaque.UNKNOWN

Value = Union[int, str, Opaque]
Env = Tuple[Tuple[str, Value], ...]


def render_value(value: Value) -> str:
    if value is UNKNOWN:
        return '?'
    if isinstance(value, str):
        return '"' + value.replace('\\', '\\\\').replace('"', '\\"') + '"'
    return str(value)


def values_compatible(left: Sequence[Value], right: Sequence[Value]) -> bool:
    """Equal length, and equal wherever neither side is unknown."""
    if len(left) != len(right):
        return False
    return all(a is UNKNOWN or b is UNKNOWN or a == b for a, b in zip(left, right))


def eval_expr(env: Mapping[str, Value], expr: Expr) -> Value:
    if isinstance(expr, IntLit):
        return expr.value
    if isinstance(expr, StrLit):
        return expr.value
    if isinstance(expr, Var):
        # validation guarantees every variable is bound
        return env[expr.name]
    raise TypeError(f'not an expression: {expr!r}')


@dataclass(frozen=True)
class Action:
    """One send or receive of an object.

    ``payload`` holds the evaluated arguments of a send and is empty for a
    receive, whose ``arity`` is the number of binders.
    """
    subject: str
    peer: str
    polarity: Polarity
    label: str
    payload: Tuple[Value, ...] = ()
    arity: int = 0
    span: Span = None

    @property
    def is_send(self) -> bool:
        return self.polarity is Polarity.SEND

    def describe(self, payload: Optional[Sequence[Value]] = None) -> str:
        shown = self.payload if payload is None else payload
        args = f'({", ".join(render_value(v) for v in shown)})' if shown else ''
        op = '!' if self.is_send else '?'
        return f'{self.subject}: {self.peer} {op} {self.label}{args}'


@dataclass(frozen=True)
class LocalState:
    obj: str
    site: Span
    env: Env = ()
    point: Proc = field(default=None, compare=False, repr=False)

    @property
    def stopped(self) -> bool:
        return isinstance(self.point, Stop)

    def bindings(self) -> Dict[str, Value]:
        return dict(self.env)


def _freeze(env: Mapping[str, Value]) -> Env:
    return tuple(sorted(env.items()))


@dataclass(frozen=True)
class ObjectAutomaton:
    """The transition system of one object."""
    decl: ObjectDecl
    invoke_depth: int = 1000
    system: Optional[str] = None

    @property
    def name(self) -> str:
        return self.decl.name

    @property
    def initial(self) -> LocalState:
        return self.settle(self.decl.main, {})

    def settle(self, proc: Proc, env: Mapping[str, Value]) -> LocalState:
        """Unfold invocations until ``proc`` is a choice or a stop."""
        depth = 0
        first = proc
        while isinstance(proc, Invoke):
            depth += 1
            if depth > self.invoke_depth:
                raise InvokeDepthExceeded([Diagnostic(
                    DiagnosticKind.INVOKE_DEPTH, first.span,
                    f'{self.name} invokes behaviours {self.invoke_depth} times '
                    f'without acting', self.system)])
            behaviour = self.decl.behaviour(proc.name)
            env = {p: eval_expr(env, a) for p, a in zip(behaviour.params, proc.args)}
            proc = behaviour.body
        return LocalState(self.name, _site(proc), _freeze(env), proc)

    def successors(self, state: LocalState) -> List[Tuple[Action, LocalState]]:
        """Every action the object can take from ``state``, in branch order.

        Receives bind ``UNKNOWN``; use :meth:`receive` to bind the values
        actually delivered.
        """
        point = state.point
        if isinstance(point, Invoke):
            state = self.settle(point, state.bindings())
            point = state.point
        env = state.bindings()
        found = []
        if isinstance(point, SendChoice):
            for br in point.branches:
                payload = tuple(eval_expr(env, e) for e in br.args)
                action = Action(self.name, point.target, Polarity.SEND, br.label,
                                payload, len(payload), br.label_span)
                found.append((action, self.settle(br.body, env)))
        elif isinstance(point, RecvChoice):
            for br in point.branches:
                action = Action(self.name, point.source, Polarity.RECEIVE, br.label,
                                (), len(br.binders), br.label_span)
                found.append((action, self.receive(state, br.label, (UNKNOWN,) * len(br.binders))))
        return found

    def receive(self, state: LocalState, label: str, values: Sequence[Value]) -> LocalState:
        """Take the receive branch ``label`` of ``state``, binding ``values``."""
        point = state.point
        if not isinstance(point, RecvChoice):
            raise ValueError(f'{self.name} is not receiving at {state.site}')
        for br in point.branches:
            if br.label == label:
                if len(values) != len(br.binders):
                    raise ValueError(f'{label} binds {len(br.binders)} values, got {len(values)}')
                env = state.bindings()
                env.update(zip(br.binders, values))
                return self.settle(br.body, env)
        raise ValueError(f'{self.name} has no branch {label} at {state.site}')

    def blocked_choice(self, state: LocalState) -> Optional[RecvChoice]:
        return state.point if isinstance(state.point, RecvChoice) else None


def _site(proc: Proc) -> Span:
    if isinstance(proc, (SendChoice, RecvChoice)):
        return proc.head_span
    return proc.span


def build_automaton(obj: ObjectDecl, invoke_depth: int = 1000,
                    system: Optional[str] = None) -> ObjectAutomaton:
    return ObjectAutomaton(obj, invoke_depth, system)


def local_successors(automaton: ObjectAutomaton,
                     state: LocalState) -> List[Tuple[Action, LocalState]]:
    return automaton.successors(state)


def local_state_space(automaton: ObjectAutomaton, limit: int = 10000) -> Set[LocalState]:
    """Every local state reachable from the initial one, receives binding UNKNOWN."""
    start = automaton.initial
    seen = {start}
    todo = deque([start])
    while todo:
        state = todo.popleft()
        for _, nxt in automaton.successors(state):
            if nxt not in seen:
                if len(seen) >= limit:
                    logger.warning('local state space of %s exceeds %d states',
                                   automaton.name, limit)
                    return seen
                seen.add(nxt)
                todo.append(nxt)
    return seen
