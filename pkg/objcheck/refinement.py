"""
Compliance of a system with the system it declares to refine.

``S' ≲ S`` holds when S' promises no less than S (every service S offers,
S' still offers) and requires no more (every service S' consumes, S
consumed too). Both systems are compared through their observable
transition systems, where rendezvous between members are silent.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

import networkx as nx

from objcheck.automata import Value, render_value, values_compatible
from objcheck.compat import Configuration, ReachGraph, Step, explore
from objcheck.diagnostics import (Diagnostic, DiagnosticKind, ExplorationIncomplete,
                                  InvokeDepthExceeded, Polarity, Severity, StateLimitExceeded,
                                  sort_diagnostics)
from objcheck.options import Options
from objcheck.resolve import ResolvedSystem

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObsLabel:
    peer: str
    polarity: Polarity
    label: str
    arity: int
    payload: Tuple[Value, ...] = ()

    @classmethod
    def of(cls, step: Step) -> 'ObsLabel':
        a = step.action
        return cls(a.peer, a.polarity, a.label, a.arity, a.payload if a.is_send else ())

    @property
    def signature(self) -> Tuple[str, str, str, int]:
        return self.peer, self.polarity.value, self.label, self.arity

    def matches(self, other: 'ObsLabel') -> bool:
        return (self.signature == other.signature
                and values_compatible(self.payload, other.payload))

    def __str__(self) -> str:
        op = '!' if self.polarity is Polarity.SEND else '?'
        args = f'({", ".join(render_value(v) for v in self.payload)})' if self.payload else ''
        if not self.payload and self.arity:
            args = '(' + ', '.join(['_'] * self.arity) + ')'
        return f'{self.peer} {op} {self.label}{args}'


Path = Tuple[Step, ...]


class ObservableLTS:
    """A configuration graph read with internal steps as silent moves."""

    def __init__(self, reach: ReachGraph):
        self.reach = reach
        self.graph = reach.graph
        self.initial = reach.initial
        self._closures: Dict[Configuration, Dict[Configuration, Path]] = {}

    @property
    def name(self) -> str:
        return self.reach.system.name

    def edges(self, state: Configuration) -> List[Tuple[Step, Configuration]]:
        return [(d['step'], v) for _, v, d in self.graph.out_edges(state, data=True)]

    def silent_closure(self, state: Configuration) -> Dict[Configuration, Path]:
        """States reachable by silent moves, each with a shortest silent path."""
        found = self._closures.get(state)
        if found is None:
            found = {state: ()}
            todo = deque([state])
            while todo:
                u = todo.popleft()
                for step, v in self.edges(u):
                    if step.internal and v not in found:
                        found[v] = found[u] + (step,)
                        todo.append(v)
            self._closures[state] = found
        return found

    def weak_moves(self, state: Configuration,
                   polarity: Polarity) -> List[Tuple[ObsLabel, Configuration, Path]]:
        """Observable moves of one polarity after any silent prefix."""
        moves = []
        for mid, prefix in self.silent_closure(state).items():
            for step, v in self.edges(mid):
                if not step.internal and step.action.polarity is polarity:
                    moves.append((ObsLabel.of(step), v, prefix + (step,)))
        return moves

    def alphabet(self, polarity: Optional[Polarity] = None) -> FrozenSet[Tuple[str, str, str, int]]:
        return frozenset(ObsLabel.of(d['step']).signature
                         for _, _, d in self.graph.edges(data=True)
                         if not d['step'].internal
                         and (polarity is None or d['step'].action.polarity is polarity))

    def silent_cycles(self) -> List[List[Configuration]]:
        silent = nx.DiGraph()
        silent.add_nodes_from(self.graph.nodes)
        silent.add_edges_from((u, v) for u, v, d in self.graph.edges(data=True)
                              if d['step'].internal)
        cycles = []
        for component in nx.strongly_connected_components(silent):
            nodes = list(component)
            if len(nodes) > 1 or silent.has_edge(nodes[0], nodes[0]):
                cycles.append(nodes)
        return cycles


def observable_lts(system: ResolvedSystem, options: Options = None) -> ObservableLTS:
    """Explore ``system`` and view the result as an observable LTS

    Raises
    ------
    ExplorationIncomplete
        When the configuration graph was cut short by a limit
    InvokeDepthExceeded
        When a behaviour chain never reaches an action
    """
    options = options or Options()
    reach = explore(system, options.queue_bound, options.max_configs, options.invoke_depth)
    if not reach.complete:
        raise ExplorationIncomplete(reach.limit_diagnostics)
    return ObservableLTS(reach)


OFFERS = 'offers'
DEMANDS = 'demands'
SILENT = 'silent'

Pair = Tuple[Configuration, Configuration]


@dataclass(frozen=True)
class _Challenge:
    kind: str
    label: Optional[ObsLabel]
    path: Path
    responses: Tuple[Tuple[Pair, Path], ...]


@dataclass(frozen=True)
class Counterexample:
    """A transfer condition that fails at a reachable pair.

    ``refined_path`` and ``abstract_path`` replay in the respective LTS
    from its initial state; the last step of one of them is the move
    the other side cannot answer.
    """
    kind: str
    label: ObsLabel
    step: Step
    refined_path: Path
    abstract_path: Path


@dataclass
class SimulationRelation:
    holds: bool
    pairs: Set[Pair] = field(default_factory=set)
    counterexamples: List[Counterexample] = field(default_factory=list)


def _challenges(refined: ObservableLTS, abstract: ObservableLTS, pair: Pair) -> List[_Challenge]:
    r, a = pair
    found = []
    for step, r2 in refined.edges(r):
        if step.internal:
            responses = tuple(((r2, a2), path) for a2, path in abstract.silent_closure(a).items())
            found.append(_Challenge(SILENT, None, (step,), responses))
        elif step.action.is_send:
            label = ObsLabel.of(step)
            responses = tuple(((r2, a2), path)
                              for other, a2, path in abstract.weak_moves(a, Polarity.SEND)
                              if label.matches(other))
            found.append(_Challenge(DEMANDS, label, (step,), responses))
    for label, a2, path in abstract.weak_moves(a, Polarity.RECEIVE):
        responses = tuple(((r2, a2), rpath)
                          for other, r2, rpath in refined.weak_moves(r, Polarity.RECEIVE)
                          if label.matches(other))
        found.append(_Challenge(OFFERS, label, path, responses))
    return found


def weak_alt_sim(refined: ObservableLTS, abstract: ObservableLTS,
                 max_pairs: int = 100000) -> SimulationRelation:
    """Decide whether ``abstract`` weakly alternating-simulates ``refined``

    Refined silent moves and sends are answered by the abstract side;
    abstract receives are answered by the refined side. The relation is
    the greatest fixpoint over the pairs reachable from the two initial
    states.

    Parameters
    ----------
    refined : ObservableLTS
        The implementation
    abstract : ObservableLTS
        The system it claims to refine
    max_pairs : int, optional
        Cap on explored state pairs, by default 100000

    Returns
    -------
    SimulationRelation
        The relation, and on failure the leaves of the challenger's
        winning strategy as counterexamples

    Raises
    ------
    StateLimitExceeded
        When more than ``max_pairs`` pairs are reachable
    """
    start = (refined.initial, abstract.initial)
    challenges: Dict[Pair, List[_Challenge]] = {}
    todo = deque([start])
    while todo:
        pair = todo.popleft()
        if pair in challenges:
            continue
        if len(challenges) >= max_pairs:
            raise StateLimitExceeded([Diagnostic(
                DiagnosticKind.STATE_LIMIT, refined.reach.system.decl.span,
                f'more than {max_pairs} state pairs comparing {refined.name} '
                f'with {abstract.name}', refined.name)])
        challenges[pair] = _challenges(refined, abstract, pair)
        for ch in challenges[pair]:
            todo.extend(p for p, _ in ch.responses if p not in challenges)

    related = set(challenges)
    while True:
        failing = [p for p in related
                   if any(all(q not in related for q, _ in ch.responses)
                          for ch in challenges[p])]
        if not failing:
            break
        related.difference_update(failing)
    logger.debug('%s vs %s: %d of %d pairs related', refined.name, abstract.name,
                 len(related), len(challenges))

    if start in related:
        return SimulationRelation(True, related)
    return SimulationRelation(False, related, _counterexamples(challenges, related, start))


def _counterexamples(challenges: Dict[Pair, List[_Challenge]], related: Set[Pair],
                     start: Pair) -> List[Counterexample]:
    """Leaves of the challenger's strategy, breadth first, one per move site."""
    found: Dict[Tuple[str, object], Counterexample] = {}
    seen = {start}
    todo = deque([(start, (), ())])
    while todo:
        pair, rpath, apath = todo.popleft()
        for ch in challenges[pair]:
            if any(q in related for q, _ in ch.responses):
                continue
            step = ch.path[-1]
            if not ch.responses:
                if ch.kind == OFFERS:
                    cx = Counterexample(ch.kind, ch.label, step, rpath, apath + ch.path)
                else:
                    cx = Counterexample(ch.kind, ch.label, step, rpath + ch.path, apath)
                found.setdefault((ch.kind, step.action.span), cx)
                continue
            for q, answer in ch.responses:
                if q in seen:
                    continue
                seen.add(q)
                if ch.kind == OFFERS:
                    todo.append((q, rpath + answer, apath + ch.path))
                else:
                    todo.append((q, rpath + ch.path, apath + answer))
    return list(found.values())


def _divergence(lts: ObservableLTS) -> List[Diagnostic]:
    diags = []
    order = lts.reach.order()
    for cycle in lts.silent_cycles():
        members = set(cycle)
        steps = [d['step'] for u, v, d in lts.graph.edges(cycle, data=True)
                 if v in members and d['step'].internal]
        first = min(steps, key=lambda s: s.action.span)
        entry = min(cycle, key=order.__getitem__)
        diags.append(Diagnostic(
            DiagnosticKind.DIVERGENCE, first.action.span,
            f'{lts.name} can loop on internal messages without ever interacting '
            'with its environment', lts.name, Severity.WARNING,
            lts.reach.witness(entry)))
    return diags


def check_compliance(refined: ResolvedSystem, abstract: ResolvedSystem,
                     options: Options = None) -> List[Diagnostic]:
    """Compliance diagnostics of ``refined`` against ``abstract``.

    Unmet offers are reported in the abstract source, excess demands in
    the refined one; both name the refined system.
    """
    options = options or Options()
    try:
        lts_refined = observable_lts(refined, options)
        lts_abstract = observable_lts(abstract, options)
        result = weak_alt_sim(lts_refined, lts_abstract, options.max_configs)
    except (ExplorationIncomplete, InvokeDepthExceeded, StateLimitExceeded) as e:
        return sort_diagnostics(
            Diagnostic(d.kind, d.span, d.message, refined.name, d.severity, d.witness, d.related)
            for d in e.diagnostics)

    diags = _divergence(lts_refined)
    for cx in result.counterexamples:
        if cx.kind == OFFERS:
            diags.append(Diagnostic(
                DiagnosticKind.MISSING_OFFER, cx.step.action.span,
                f'unmet obligation of {abstract.name} required by {refined.name}: '
                f'{refined.name} no longer accepts {cx.label}',
                refined.name, Severity.ERROR, cx.abstract_path))
        else:
            diags.append(Diagnostic(
                DiagnosticKind.EXCESS_DEMAND, cx.step.action.span,
                f'{refined.name} sends {cx.label}, which {abstract.name} never sends here',
                refined.name, Severity.ERROR, cx.refined_path))
    return sort_diagnostics(diags)
