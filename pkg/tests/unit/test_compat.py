from pathlib import Path

import pytest

from objcheck.compat import (AsyncModel, Configuration, check_compatibility, explore,
                             find_undeliverable, replay, simulate)
from objcheck.diagnostics import DiagnosticKind, Severity, visible
from objcheck.objcheck import load_sources
from objcheck.options import Options
from objcheck.resolve import resolve
from tests.helpers import source_of, system_of

DISCARD_IN_CONTEXT = ('repo-discard-test', 'repo.obj', 'discard.obj')

BUSY_BYSTANDER = '''system busy
obj a
b ! m.
obj b
c ? x.
obj c
behaviour Tick
   env ! tick
   Tick
Tick
'''

CYCLIC_WAIT = '''system cyclic
obj a
b ? m
b ! n.
obj b
a ? n
a ! m.
'''


def located(diags):
    '''(kind, file name, line, covered text) of each diagnostic'''
    found = set()
    for d in diags:
        name = Path(d.span.file).name
        found.add((d.kind, name, d.span.start_line, d.span.slice(source_of(name))))
    return found


def errors(diags):
    return [d for d in diags if d.severity is Severity.ERROR]


def test_release_cycle():
    '''Test the two root causes of the release cycle's incompatibility'''
    dev = system_of('dev', 'dev.obj')
    diags = check_compatibility(dev)
    assert located(errors(diags)) == {
        (DiagnosticKind.UNDELIVERABLE_SEND, 'dev.obj', 14, 'stop'),
        (DiagnosticKind.STUCK_RECEIVE, 'dev.obj', 24, 'continue'),
    }
    deadlocks = [d for d in diags if d.kind is DiagnosticKind.DEADLOCK]
    assert deadlocks and all(d.severity is Severity.INFO for d in deadlocks)
    assert all(d.system == 'dev' for d in diags)


def test_release_cycle_fixed():
    system = system_of('dev-fixed', 'dev-fixed.obj')
    assert visible(check_compatibility(system)) == []


def test_discard_in_context():
    '''Test that revert is never received and blocks the tagging receives'''
    system = system_of(*DISCARD_IN_CONTEXT)
    diags = check_compatibility(system)
    assert located(errors(diags)) == {
        (DiagnosticKind.UNDELIVERABLE_SEND, 'discard.obj', 16, 'revert'),
        (DiagnosticKind.STUCK_RECEIVE, 'repo.obj', 8, 'tagRC'),
        (DiagnosticKind.STUCK_RECEIVE, 'repo.obj', 12, 'tagRelease'),
    }
    assert all(d.system == 'repo-discard-test' for d in diags)


def test_repository_in_context():
    system = system_of('repo-test', 'repo.obj', 'dev-fixed.obj', 'repo-test.obj')
    assert visible(check_compatibility(system)) == []


def test_basic_automata():
    system = system_of('two-party', 'two-party.obj')
    assert check_compatibility(system) == []


def test_three_objects():
    system = system_of('three-party', 'three-party.obj')
    diags = check_compatibility(system)
    assert located(errors(diags)) == {
        (DiagnosticKind.UNDELIVERABLE_SEND, 'three-party.obj', 16, 'k'),
        (DiagnosticKind.STUCK_RECEIVE, 'three-party.obj', 24, 'm'),
    }


def test_bystander_changes_nothing():
    '''Test that an object that only talks to the outside does not change the verdict'''
    alone = check_compatibility(system_of('three-party', 'three-party.obj'))
    joined = check_compatibility(system_of('three-party-bystander', 'three-party.obj'))

    def key(diags):
        return {(d.kind, d.span, d.severity) for d in diags}

    assert key(alone) == key(joined)


def test_cyclic_wait():
    workspace = load_sources({'cyclic.obj': CYCLIC_WAIT})
    system = resolve(workspace.decls, 'cyclic')
    diags = errors(check_compatibility(system))
    assert [d.kind for d in diags] == [DiagnosticKind.DEADLOCK]
    assert diags[0].witness == ()
    assert diags[0].span.start_line == 3


def test_failures_next_to_a_running_object_are_errors():
    '''Test that an orphan and a starved receive stay errors while another member keeps moving'''
    system = resolve(load_sources({'busy.obj': BUSY_BYSTANDER}).decls, 'busy')
    diags = check_compatibility(system)
    found = {(d.kind, d.severity, d.span.start_line, d.span.slice(BUSY_BYSTANDER)) for d in diags}
    assert found == {
        (DiagnosticKind.UNDELIVERABLE_SEND, Severity.ERROR, 3, 'm'),
        (DiagnosticKind.STUCK_RECEIVE, Severity.ERROR, 5, 'x'),
    }
    for diag in diags:
        assert isinstance(replay(system, diag.witness), Configuration)


def test_consequences_of_a_refused_message_are_info():
    '''Test that the commit and revision left behind by revert are reported as info'''
    diags = check_compatibility(system_of(*DISCARD_IN_CONTEXT))
    infos = {(d.kind, d.span.start_line) for d in diags
             if d.severity is Severity.INFO and Path(d.span.file).name == 'discard.obj'}
    assert (DiagnosticKind.UNDELIVERABLE_SEND, 29) in infos
    assert (DiagnosticKind.STUCK_RECEIVE, 30) in infos


def test_endless_exchange_is_compatible():
    system = system_of('pingpong', 'pingpong.obj')
    assert check_compatibility(system) == []
    assert explore(system).graph.number_of_nodes() == 4


@pytest.mark.parametrize(
    "name, files", [
        ('dev', ['dev.obj']),
        ('repo-discard-test', ['repo.obj', 'discard.obj']),
        ('three-party', ['three-party.obj']),
        ('repo-test', ['repo.obj', 'dev-fixed.obj', 'repo-test.obj']),
    ]
)
def test_queue_bound_does_not_change_verdict(name, files):
    system = system_of(name, *files)
    verdicts = [
        {(d.kind, d.span, d.severity) for d in check_compatibility(system, Options(queue_bound=k))}
        for k in (1, 2, 3)
    ]
    assert verdicts[0] == verdicts[1] == verdicts[2]


def test_queue_overflow():
    source = 'system burst\nobj a\nb ! x\nb ! y\nb ! z.\nobj b\na ? x\na ? y\na ? z.\n'
    system = resolve(load_sources({'burst.obj': source}).decls, 'burst')
    diags = check_compatibility(system, Options(queue_bound=2))
    assert [d.kind for d in diags] == [DiagnosticKind.QUEUE_OVERFLOW]
    assert diags[0].span.slice(source) == 'z'
    assert check_compatibility(system, Options(queue_bound=3)) == []


def test_arity_mismatch():
    source = 'system arity\nobj a\nb ! x(1).\nobj b\na ? x.\n'
    system = resolve(load_sources({'arity.obj': source}).decls, 'arity')
    kinds = {d.kind for d in errors(check_compatibility(system))}
    assert DiagnosticKind.ARITY_MISMATCH in kinds


def test_state_limit():
    system = system_of('repo-test', 'repo.obj', 'dev-fixed.obj', 'repo-test.obj')
    diags = check_compatibility(system, Options(max_configs=3))
    assert [d.kind for d in diags] == [DiagnosticKind.STATE_LIMIT]


@pytest.mark.parametrize(
    "name, files", [
        ('dev', ['dev.obj']),
        ('repo-discard-test', ['repo.obj', 'discard.obj']),
        ('three-party', ['three-party.obj']),
    ]
)
def test_witnesses_replay(name, files):
    '''Test that every witness is a run of the system'''
    system = system_of(name, *files)
    for diag in check_compatibility(system):
        final = replay(system, diag.witness)
        assert isinstance(final, Configuration)


def test_undeliverable_witness_ends_with_message_at_head():
    system = system_of('dev', 'dev.obj')
    g = explore(system)
    diag, = [d for d in find_undeliverable(g) if d.severity is Severity.ERROR]
    final = replay(system, diag.witness)
    assert final.queue(('teamLead', 'devTeam'))[0].label == 'stop'


def test_replay_rejects_impossible_steps():
    system = system_of('two-party', 'two-party.obj')
    model = AsyncModel(system)
    (step, _), *_ = model.moves(model.initial()).steps
    with pytest.raises(ValueError):
        replay(system, [step, step])


def test_simulate_is_deterministic():
    system = system_of('repo-test', 'repo.obj', 'dev-fixed.obj', 'repo-test.obj')
    first = simulate(system, seed=7, max_steps=40)
    second = simulate(system, seed=7, max_steps=40)
    assert first == second
    assert replay(system, first.steps) == first.final


def test_simulate_zero_steps():
    system = system_of('dev', 'dev.obj')
    trace = simulate(system, seed=3, max_steps=0)
    assert trace.steps == ()
    assert trace.final == AsyncModel(system).initial()


def test_single_schedule():
    '''Test that a system with one enabled step at a time ignores the seed'''
    system = system_of('pingpong', 'pingpong.obj')
    traces = {simulate(system, seed=seed, max_steps=12).steps for seed in range(5)}
    assert len(traces) == 1


def test_trace_document():
    system = system_of('two-party', 'two-party.obj')
    document = simulate(system, seed=1, max_steps=10).to_dict()
    assert document['system'] == 'two-party'
    assert set(document['final']['objects']) == {'p', 'q'}
    assert all(step['internal'] in (True, False) for step in document['steps'])
