"""
Synchronous product of object automata.

Sends and receives between two members meet in a single rendezvous step;
actions towards a non-member stay visible as external steps. A member's
internal send or receive with no matching partner is not a transition of
the product.
"""

import logging
from collections import deque
from dataclasses import dataclass
from typing import (Callable, Container, Dict, Hashable, Iterable, Iterator, List, Tuple, Type,
                    Union)

import networkx as nx

from objcheck.automata import Action, LocalState, ObjectAutomaton, Value, build_automaton
from objcheck.diagnostics import (CompositionError, Diagnostic, DiagnosticKind, Polarity,
                                  StateLimitExceeded)
from objcheck.resolve import ResolvedSystem

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Internal:
    """A rendezvous between two members."""
    send: Action
    receive: Action

    @property
    def sender(self) -> str:
        return self.send.subject

    @property
    def receiver(self) -> str:
        return self.receive.subject

    @property
    def label(self) -> str:
        return self.send.label

    @property
    def payload(self) -> Tuple[Value, ...]:
        return self.send.payload


@dataclass(frozen=True)
class External:
    action: Action


ClassifiedAction = Union[Internal, External]


def classify(action: Action, members: Container[str]) -> Type[ClassifiedAction]:
    """:class:`Internal` when both ends of ``action`` are members, :class:`External` otherwise."""
    return Internal if action.subject in members and action.peer in members else External


def rendezvous_match(send: Action, receive: Action) -> bool:
    return (send.is_send and not receive.is_send
            and send.subject == receive.peer and send.peer == receive.subject
            and send.label == receive.label and len(send.payload) == receive.arity)


class CompositeSpec:
    """Disjoint union of object automata.

    Merging two specs flattens them; a member named twice is a
    :class:`CompositionError`.
    """

    def __init__(self, automata: Iterable[ObjectAutomaton]):
        members: Dict[str, ObjectAutomaton] = {}
        for a in automata:
            if a.name in members:
                first = members[a.name]
                raise CompositionError([Diagnostic(
                    DiagnosticKind.DUPLICATE_OBJECT, a.decl.span,
                    f'{a.name} is a member of both operands of the composition',
                    related=(first.decl.span,))])
            members[a.name] = a
        self.members = dict(sorted(members.items()))

    @classmethod
    def of_system(cls, system: ResolvedSystem, invoke_depth: int = 1000) -> 'CompositeSpec':
        return cls(build_automaton(o, invoke_depth, system.name) for o in system.objects.values())

    def merge(self, *others: 'CompositeSpec') -> 'CompositeSpec':
        automata = list(self.members.values())
        for other in others:
            automata.extend(other.members.values())
        return CompositeSpec(automata)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(self.members)

    def __contains__(self, name: str) -> bool:
        return name in self.members


@dataclass(frozen=True)
class CompositeState:
    """Local states of every member, ordered by member name."""
    locals: Tuple[LocalState, ...]

    def __getitem__(self, name: str) -> LocalState:
        for s in self.locals:
            if s.obj == name:
                return s
        raise KeyError(name)

    def replace(self, state: LocalState) -> 'CompositeState':
        return CompositeState(tuple(state if s.obj == state.obj else s for s in self.locals))


class CompositeAutomaton:
    """The product transition system of a :class:`CompositeSpec`."""

    def __init__(self, spec: CompositeSpec, max_states: int = 100000):
        self.spec = spec
        self.max_states = max_states

    @property
    def initial(self) -> CompositeState:
        return CompositeState(tuple(a.initial for a in self.spec.members.values()))

    def transitions(self, state: CompositeState) -> List[Tuple[ClassifiedAction, CompositeState]]:
        moves = {name: a.successors(state[name]) for name, a in self.spec.members.items()}
        found: List[Tuple[ClassifiedAction, CompositeState]] = []
        for name, a in self.spec.members.items():
            for action, nxt in moves[name]:
                if classify(action, self.spec) is External:
                    found.append((External(action), state.replace(nxt)))
                elif action.is_send:
                    receiver = self.spec.members[action.peer]
                    for answer, _ in moves[action.peer]:
                        if rendezvous_match(action, answer):
                            delivered = receiver.receive(state[action.peer], answer.label,
                                                         action.payload)
                            found.append((Internal(action, answer),
                                          state.replace(nxt).replace(delivered)))
        return found

    def explore(self) -> nx.MultiDiGraph:
        """Breadth-first reachable product, edges carrying their ``action``.

        Raises
        ------
        StateLimitExceeded
            When more than ``max_states`` states are reachable
        """
        start = self.initial
        graph = nx.MultiDiGraph()
        graph.add_node(start)
        todo = deque([start])
        while todo:
            state = todo.popleft()
            for action, nxt in self.transitions(state):
                if nxt not in graph:
                    if graph.number_of_nodes() >= self.max_states:
                        first = next(iter(self.spec.members.values()))
                        raise StateLimitExceeded([Diagnostic(
                            DiagnosticKind.STATE_LIMIT, first.decl.span,
                            f'composition of {", ".join(self.spec.names)} exceeds '
                            f'{self.max_states} states', first.system)])
                    graph.add_node(nxt)
                    todo.append(nxt)
                graph.add_edge(state, nxt, action=action)
        logger.debug('composition of %s: %d states, %d transitions',
                     ', '.join(self.spec.names), graph.number_of_nodes(),
                     graph.number_of_edges())
        return graph


def compose(spec: CompositeSpec, max_states: int = 100000) -> CompositeAutomaton:
    return CompositeAutomaton(spec, max_states)


def action_label(action: ClassifiedAction) -> str:
    if isinstance(action, Internal):
        return f'τ: {action.sender}→{action.receiver}:{action.label}'
    a = action.action
    op = '!' if a.polarity is Polarity.SEND else '?'
    return f'{a.subject}{a.peer}{op}{a.label}'


def to_dot(graph: nx.MultiDiGraph, initial: Hashable, name: str = 'lts',
           edge_label: Callable[[Dict], str] = lambda data: action_label(data['action']),
           ) -> Iterator[str]:
    """Yield a DOT rendering of ``graph`` line by line.

    States are numbered in breadth-first order from ``initial``.
    """
    order = [initial] + [v for _, v in nx.bfs_edges(graph, initial)]
    numbers = {state: n for n, state in enumerate(order)}
    yield f'digraph "{_quote(name)}" {{'
    yield '  rankdir=LR;'
    yield '  node [shape=circle];'
    yield '  start [shape=point];'
    for state, n in numbers.items():
        yield f'  s{n} [label="s{n}"];'
    yield f'  start -> s{numbers[initial]};'
    edges = sorted(((numbers[u], numbers[v], edge_label(d))
                    for u, v, d in graph.edges(data=True)
                    if u in numbers and v in numbers))
    for u, v, label in edges:
        yield f'  s{u} -> s{v} [label="{_quote(label)}"];'
    yield '}'


def _quote(text: str) -> str:
    return text.replace('\\', '\\\\').replace('"', '\\"')


def system_graph(system: ResolvedSystem, max_states: int = 100000,
                 invoke_depth: int = 1000) -> Tuple[nx.MultiDiGraph, CompositeState]:
    automaton = compose(CompositeSpec.of_system(system, invoke_depth), max_states)
    return automaton.explore(), automaton.initial
