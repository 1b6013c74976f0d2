"""
Compatibility of the objects of one system under asynchronous messaging.

Every ordered pair of members has a FIFO channel of capacity ``k``. A
configuration pairs the local state of each member with the content of
every channel. The reachable configurations are explored breadth first,
and three kinds of problem are read off the resulting graph:

* a message that some run can never deliver (``UndeliverableSend``),
* a receive branch whose message some run never provides (``StuckReceive``),
* a configuration where nobody can move but not everybody has stopped
  (``Deadlock``).

A problem that is only the consequence of another one is reported as
information: a message or a starved receive whose object is bound to end up
waiting, through empty channels, on a refused message or a deadlocked
cycle, and a deadlock on a receive already flagged as stuck. Anything else
is an error.
"""

import logging
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import networkx as nx

from objcheck.automata import (UNKNOWN, Action, LocalState, ObjectAutomaton, Value,
                               build_automaton, render_value)
from objcheck.composition import Internal, classify
from objcheck.diagnostics import (Diagnostic, DiagnosticKind, InvokeDepthExceeded, Severity,
                                  sort_diagnostics)
from objcheck.options import Options
from objcheck.resolve import ResolvedSystem
from objcheck.span import Span
from objcheck.syntax import RecvChoice

logger = logging.getLogger(__name__)

Channel = Tuple[str, str]


@dataclass(frozen=True)
class Message:
    label: str
    payload: Tuple[Value, ...]
    origin: Span


@dataclass(frozen=True)
class Configuration:
    """Local states ordered by member name, and the non-empty channels."""
    locals: Tuple[LocalState, ...]
    queues: Tuple[Tuple[Channel, Tuple[Message, ...]], ...] = ()

    def local(self, name: str) -> LocalState:
        for s in self.locals:
            if s.obj == name:
                return s
        raise KeyError(name)

    def queue(self, channel: Channel) -> Tuple[Message, ...]:
        for ch, msgs in self.queues:
            if ch == channel:
                return msgs
        return ()

    def with_local(self, state: LocalState) -> 'Configuration':
        return Configuration(tuple(state if s.obj == state.obj else s for s in self.locals),
                             self.queues)

    def with_queue(self, channel: Channel, msgs: Tuple[Message, ...]) -> 'Configuration':
        queues = dict(self.queues)
        if msgs:
            queues[channel] = msgs
        else:
            queues.pop(channel, None)
        return Configuration(self.locals, tuple(sorted(queues.items())))

    @property
    def all_stopped(self) -> bool:
        return all(s.stopped for s in self.locals)

    def to_dict(self) -> Dict:
        return {
            'objects': {s.obj: 'stopped' if s.stopped else str(s.site) for s in self.locals},
            'queues': {f'{a}->{b}': [m.label for m in msgs] for (a, b), msgs in self.queues},
        }


@dataclass(frozen=True)
class Step:
    """One transition of the asynchronous system.

    ``values`` are the arguments of a send, or what a receive bound.
    """
    action: Action
    internal: bool
    values: Tuple[Value, ...] = ()

    def describe(self) -> str:
        scope = 'internal' if self.internal else 'external'
        return f'{self.action.describe(self.values)} [{scope}] at {self.action.span}'

    def to_dict(self) -> Dict:
        a = self.action
        return {
            'object': a.subject,
            'peer': a.peer,
            'polarity': a.polarity.value,
            'label': a.label,
            'values': [render_value(v) for v in self.values],
            'internal': self.internal,
            'file': a.span.file,
            'line': a.span.start_line,
            'col': a.span.start_col,
        }


def step_label(step: Step) -> str:
    """DOT edge label: ``pq!m`` or ``pq?m``, prefixed with ``τ:`` when internal."""
    a = step.action
    core = f'{a.subject}{a.peer}{"!" if a.is_send else "?"}{a.label}'
    return f'τ: {core}' if step.internal else core


@dataclass
class _Moves:
    steps: List[Tuple[Step, Configuration]] = field(default_factory=list)
    overflows: List[Action] = field(default_factory=list)
    mismatches: List[Tuple[Action, Message]] = field(default_factory=list)


class AsyncModel:
    """Successor function of a system with bounded FIFO channels."""

    def __init__(self, system: ResolvedSystem, queue_bound: int = 2, invoke_depth: int = 1000):
        self.system = system
        self.queue_bound = queue_bound
        self.automata: Dict[str, ObjectAutomaton] = {
            name: build_automaton(system.objects[name], invoke_depth, system.name)
            for name in system.members
        }

    def initial(self) -> Configuration:
        return Configuration(tuple(a.initial for a in self.automata.values()))

    def moves(self, config: Configuration) -> _Moves:
        found = _Moves()
        for name, automaton in self.automata.items():
            state = config.local(name)
            for action, nxt in automaton.successors(state):
                internal = classify(action, self.automata) is Internal
                if not internal:
                    values = action.payload if action.is_send else (UNKNOWN,) * action.arity
                    found.steps.append((Step(action, False, values), config.with_local(nxt)))
                elif action.is_send:
                    channel = (name, action.peer)
                    msgs = config.queue(channel)
                    if len(msgs) >= self.queue_bound:
                        found.overflows.append(action)
                        continue
                    msg = Message(action.label, action.payload, action.span)
                    target = config.with_local(nxt).with_queue(channel, msgs + (msg,))
                    found.steps.append((Step(action, True, action.payload), target))
                else:
                    channel = (action.peer, name)
                    msgs = config.queue(channel)
                    if not msgs or msgs[0].label != action.label:
                        continue
                    head = msgs[0]
                    if len(head.payload) != action.arity:
                        found.mismatches.append((action, head))
                        continue
                    received = automaton.receive(state, action.label, head.payload)
                    target = config.with_local(received).with_queue(channel, msgs[1:])
                    found.steps.append((Step(action, True, head.payload), target))
        return found


@dataclass
class ReachGraph:
    """Reachable configurations of a system, edges carrying their ``step``."""
    system: ResolvedSystem
    graph: nx.MultiDiGraph
    initial: Configuration
    parents: Dict[Configuration, Tuple[Configuration, Step]]
    limit_diagnostics: List[Diagnostic] = field(default_factory=list)
    arity_diagnostics: List[Diagnostic] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.limit_diagnostics

    @property
    def members(self) -> Tuple[str, ...]:
        return self.system.members

    def witness(self, config: Configuration) -> Tuple[Step, ...]:
        """Shortest run from the initial configuration to ``config``."""
        steps = []
        while config in self.parents:
            config, step = self.parents[config]
            steps.append(step)
        return tuple(reversed(steps))

    def order(self) -> Dict[Configuration, int]:
        return {c: n for n, c in enumerate(self.graph.nodes)}


def explore(system: ResolvedSystem, queue_bound: int = 2, max_configs: int = 100000,
            invoke_depth: int = 1000) -> ReachGraph:
    """Build the reachable configuration graph of ``system``

    Parameters
    ----------
    system : ResolvedSystem
        The system to explore
    queue_bound : int, optional
        Capacity of each internal channel, by default 2
    max_configs : int, optional
        Exploration stops once this many configurations are known

    Returns
    -------
    ReachGraph
        With ``limit_diagnostics`` set when a channel overflowed or the
        configuration cap was hit; the graph is then incomplete

    Raises
    ------
    InvokeDepthExceeded
        When a behaviour chain never reaches an action
    """
    model = AsyncModel(system, queue_bound, invoke_depth)
    start = model.initial()
    graph = nx.MultiDiGraph()
    graph.add_node(start)
    parents: Dict[Configuration, Tuple[Configuration, Step]] = {}
    overflows: Dict[Span, Tuple[Action, Configuration]] = {}
    mismatches: Dict[Tuple[Span, Span], Tuple[Action, Message, Configuration]] = {}
    truncated = False

    todo = deque([start])
    while todo and not truncated:
        config = todo.popleft()
        moves = model.moves(config)
        for action in moves.overflows:
            overflows.setdefault(action.span, (action, config))
        for action, msg in moves.mismatches:
            mismatches.setdefault((action.span, msg.origin), (action, msg, config))
        for step, nxt in moves.steps:
            if nxt not in graph:
                if graph.number_of_nodes() >= max_configs:
                    truncated = True
                    break
                graph.add_node(nxt)
                parents[nxt] = (config, step)
                todo.append(nxt)
            graph.add_edge(config, nxt, step=step)

    g = ReachGraph(system, graph, start, parents)
    if truncated:
        logger.warning('%s: stopped after %d configurations', system.name, max_configs)
        g.limit_diagnostics.append(Diagnostic(
            DiagnosticKind.STATE_LIMIT, system.decl.span,
            f'more than {max_configs} reachable configurations; '
            'raise --max-configs to explore further', system.name))
    for span, (action, config) in overflows.items():
        g.limit_diagnostics.append(Diagnostic(
            DiagnosticKind.QUEUE_OVERFLOW, span,
            f'{action.subject} sends {action.label} to {action.peer} while the channel '
            f'already holds {queue_bound} message(s)', system.name,
            witness=g.witness(config)))
    for (span, origin), (action, msg, config) in mismatches.items():
        g.arity_diagnostics.append(Diagnostic(
            DiagnosticKind.ARITY_MISMATCH, span,
            f'{action.subject} binds {action.arity} value(s) for {action.label}, '
            f'but {action.peer} sends {len(msg.payload)}', system.name,
            witness=g.witness(config), related=(origin,)))
    logger.debug('%s: %d configurations, %d steps, complete=%s', system.name,
                 graph.number_of_nodes(), graph.number_of_edges(), g.complete)
    return g


def _dequeues(step: Step, channel: Channel) -> bool:
    a = step.action
    return step.internal and not a.is_send and (a.peer, a.subject) == channel


def _accepts(choice: RecvChoice, head: Message) -> bool:
    return any(br.label == head.label and len(br.binders) == len(head.payload)
               for br in choice.branches)


def _pick(configs: Sequence[Configuration], order: Dict[Configuration, int]) -> Configuration:
    return min(configs, key=order.__getitem__)


def find_undeliverable(g: ReachGraph) -> List[Diagnostic]:
    """Messages that some run leaves in their channel for ever.

    An instance of a message is identified by its configuration, channel
    and position; it is delivered if some path dequeues it. Instances
    that are never delivered are grouped by the send that produced them.
    """
    graph = g.graph
    delivered: Set[Tuple[Configuration, Channel, int]] = set()
    todo = deque()
    for u, _, data in graph.edges(data=True):
        step = data['step']
        if step.internal and not step.action.is_send:
            fact = (u, (step.action.peer, step.action.subject), 0)
            if fact not in delivered:
                delivered.add(fact)
                todo.append(fact)
    while todo:
        config, channel, pos = todo.popleft()
        for pred, _, data in graph.in_edges(config, data=True):
            before = pos + 1 if _dequeues(data['step'], channel) else pos
            fact = (pred, channel, before)
            if before < len(pred.queue(channel)) and fact not in delivered:
                delivered.add(fact)
                todo.append(fact)

    orphans: Dict[Span, List[Tuple[Configuration, Channel, int]]] = {}
    for config in graph.nodes:
        for channel, msgs in config.queues:
            for pos, msg in enumerate(msgs):
                if (config, channel, pos) not in delivered:
                    orphans.setdefault(msg.origin, []).append((config, channel, pos))

    order = g.order()
    diags = []
    for origin, found in orphans.items():
        first, (sender, receiver), pos = found[0]
        configs = [c for c, _, _ in found]
        refused = [c for c, ch, p in found if p == 0 and _refuses(c, ch)]
        if refused:
            severity, config = Severity.ERROR, _pick(refused, order)
        else:
            behind = {c for c, ch, p in found
                      if p > 0 and (c, ch, 0) not in delivered and _refuses(c, ch)}
            severity, config = _root_cause(g, configs, receiver, frozenset(), order, behind)
        label = first.queue((sender, receiver))[pos].label
        diags.append(Diagnostic(
            DiagnosticKind.UNDELIVERABLE_SEND, origin,
            f'{label} sent by {sender} is never received by {receiver}', g.system.name,
            severity, g.witness(config)))
    return diags


def _blocked_by_failure(g: ReachGraph, config: Configuration, obj: str,
                        seen: frozenset) -> bool:
    """``obj`` waits, through empty channels, on a refused message or a deadlocked cycle."""
    members = set(g.members)
    seen = set(seen)
    while obj not in seen:
        seen.add(obj)
        state = config.local(obj)
        choice = state.point
        if not isinstance(choice, RecvChoice) or choice.source not in members:
            return False
        head = config.queue((choice.source, obj))
        if head:
            return not _accepts(choice, head[0])
        obj = choice.source
    return g.graph.out_degree(config) == 0


def _inevitable(graph: nx.MultiDiGraph, targets: Set[Configuration]) -> Set[Configuration]:
    """Configurations from which every run reaches ``targets``."""
    reached = set(targets)
    pending = {n: len(graph.succ[n]) for n in graph.nodes if n not in reached}
    todo = deque(reached)
    while todo:
        for pred in graph.predecessors(todo.popleft()):
            if pred in reached:
                continue
            pending[pred] -= 1
            if not pending[pred]:
                reached.add(pred)
                todo.append(pred)
    return reached


def _root_cause(g: ReachGraph, configs: List[Configuration], obj: str, seen: frozenset,
                order: Dict[Configuration, int],
                blamed: Set[Configuration] = frozenset()) -> Tuple[Severity, Configuration]:
    """Info when every one of ``configs`` is bound to end with ``obj`` blocked by a failure.

    Otherwise error, witnessed by a configuration where nothing else explains it.
    """
    blamed = set(blamed) | {c for c in g.graph.nodes if _blocked_by_failure(g, c, obj, seen)}
    explained = _inevitable(g.graph, blamed)
    unexplained = [c for c in configs if c not in explained]
    if unexplained:
        return Severity.ERROR, _pick(unexplained, order)
    return Severity.INFO, _pick(configs, order)


def _refuses(config: Configuration, channel: Channel) -> bool:
    """The receiver has stopped, or waits on this channel but not for its head."""
    sender, receiver = channel
    state = config.local(receiver)
    if state.stopped:
        return True
    choice = state.point
    return isinstance(choice, RecvChoice) and choice.source == sender


@dataclass(frozen=True)
class StuckChoice:
    obj: str
    choice: RecvChoice
    severity: Severity
    witness: Configuration

    @property
    def site(self) -> Span:
        return self.choice.head_span


def stuck_choices(g: ReachGraph) -> List[StuckChoice]:
    """Receive choices that some reachable configuration waits on for ever."""
    graph = g.graph
    members = set(g.members)
    waiting: Dict[Tuple[str, Span], List[Configuration]] = {}
    for config in graph.nodes:
        for state in config.locals:
            choice = state.point
            if not isinstance(choice, RecvChoice) or choice.source not in members:
                continue
            head = config.queue((choice.source, state.obj))
            if head and _accepts(choice, head[0]):
                continue
            waiting.setdefault((state.obj, state.site), []).append(config)

    fired: Dict[Tuple[str, Span], Set[Configuration]] = {}
    for u, _, data in graph.edges(data=True):
        a = data['step'].action
        if not a.is_send:
            fired.setdefault((a.subject, u.local(a.subject).site), set()).add(u)

    order = g.order()
    found = []
    for (obj, site), configs in waiting.items():
        can_fire = _ancestors(graph, fired.get((obj, site), set()))
        stuck = [c for c in configs if c not in can_fire]
        if not stuck:
            continue
        choice = stuck[0].local(obj).point
        refused = [c for c in stuck if c.queue((choice.source, obj))]
        if refused:
            severity, config = Severity.ERROR, _pick(refused, order)
        else:
            severity, config = _root_cause(g, stuck, choice.source, frozenset([obj]), order)
        found.append(StuckChoice(obj, choice, severity, config))
    return found


def _ancestors(graph: nx.MultiDiGraph, sources: Set[Configuration]) -> Set[Configuration]:
    seen = set(sources)
    todo = deque(sources)
    while todo:
        for pred in graph.predecessors(todo.popleft()):
            if pred not in seen:
                seen.add(pred)
                todo.append(pred)
    return seen


def find_stuck_receives(g: ReachGraph,
                        stuck: Optional[List[StuckChoice]] = None) -> List[Diagnostic]:
    if stuck is None:
        stuck = stuck_choices(g)
    diags = []
    for s in stuck:
        witness = g.witness(s.witness)
        for br in s.choice.branches:
            diags.append(Diagnostic(
                DiagnosticKind.STUCK_RECEIVE, br.label_span,
                f'{s.obj} waits for {br.label} from {s.choice.source}, which never arrives',
                g.system.name, s.severity, witness))
    return diags


def find_deadlocks(g: ReachGraph,
                   stuck: Optional[List[StuckChoice]] = None) -> List[Diagnostic]:
    """Configurations with no step where some member has not stopped.

    One diagnostic per blocked receive, with the shortest witness. A
    deadlock on a choice already reported as a stuck receive is
    informational.
    """
    if stuck is None:
        stuck = stuck_choices(g)
    flagged = {(s.obj, s.site) for s in stuck if s.severity is Severity.ERROR}
    found: Dict[Span, Diagnostic] = {}
    for config in g.graph.nodes:
        if g.graph.out_degree(config) or config.all_stopped:
            continue
        blocked = [s for s in config.locals if not s.stopped]
        subsumed = [s for s in blocked if (s.obj, s.site) in flagged]
        chosen = (subsumed or blocked)[0]
        if chosen.site in found:
            continue
        source = getattr(chosen.point, 'source', None)
        waits = f'{chosen.obj} waits on {source}' if source else f'{chosen.obj} cannot move'
        found[chosen.site] = Diagnostic(
            DiagnosticKind.DEADLOCK, chosen.site,
            f'deadlock: {waits}; not stopped: {", ".join(s.obj for s in blocked)}',
            g.system.name, Severity.INFO if subsumed else Severity.ERROR,
            g.witness(config))
    return list(found.values())


def check_compatibility(system: ResolvedSystem, options: Options = None) -> List[Diagnostic]:
    """Every compatibility diagnostic of ``system``, informational ones included."""
    options = options or Options()
    try:
        g = explore(system, options.queue_bound, options.max_configs, options.invoke_depth)
    except InvokeDepthExceeded as e:
        return sort_diagnostics(e.diagnostics)
    diags = g.limit_diagnostics + g.arity_diagnostics
    if g.complete:
        stuck = stuck_choices(g)
        diags = (diags + find_undeliverable(g) + find_stuck_receives(g, stuck)
                 + find_deadlocks(g, stuck))
    return sort_diagnostics(diags)


@dataclass(frozen=True)
class Trace:
    system: str
    seed: int
    steps: Tuple[Step, ...]
    final: Configuration

    def to_dict(self) -> Dict:
        return {
            'system': self.system,
            'seed': self.seed,
            'steps': [s.to_dict() for s in self.steps],
            'final': self.final.to_dict(),
        }


def simulate(system: ResolvedSystem, seed: int = 0, max_steps: int = 100,
             options: Options = None) -> Trace:
    """Run ``system`` under a seeded random scheduler.

    The same seed always produces the same trace.
    """
    options = options or Options()
    model = AsyncModel(system, options.queue_bound, options.invoke_depth)
    rng = random.Random(seed)
    config = model.initial()
    steps = []
    for _ in range(max_steps):
        choices = model.moves(config).steps
        if not choices:
            break
        step, config = rng.choice(choices)
        steps.append(step)
    return Trace(system.name, seed, tuple(steps), config)


def replay(system: ResolvedSystem, witness: Sequence[Step], options: Options = None) -> Configuration:
    """Re-execute ``witness`` from the initial configuration.

    Raises
    ------
    ValueError
        When a step is not enabled where the witness takes it
    """
    options = options or Options()
    model = AsyncModel(system, options.queue_bound, options.invoke_depth)
    config = model.initial()
    for n, step in enumerate(witness, start=1):
        for candidate, nxt in model.moves(config).steps:
            if candidate == step:
                config = nxt
                break
        else:
            raise ValueError(f'step {n} is not enabled: {step.describe()}')
    return config
