import pytest

from objcheck.automata import (UNKNOWN, build_automaton, local_state_space, render_value,
                               values_compatible)
from objcheck.diagnostics import DiagnosticKind, InvokeDepthExceeded, Polarity
from objcheck.objcheck import load_sources
from tests.helpers import system_of


def automaton_of(system, name, **kwargs):
    return build_automaton(system.objects[name], system=system.name, **kwargs)


def test_initial_state_unfolds_main():
    '''Test that the main invocation is unfolded into the first receive'''
    dev = system_of('dev', 'dev.obj')
    team_lead = automaton_of(dev, 'teamLead')
    state = team_lead.initial
    assert state.site.start_line == 5
    assert not state.stopped

    moves = team_lead.successors(state)
    assert len(moves) == 1
    action, nxt = moves[0]
    assert (action.peer, action.polarity, action.label) == ('devTeam', Polarity.RECEIVE,
                                                             'releaseCandidate')
    assert nxt.site.start_line == 6


def test_receive_choice_offers_every_branch():
    dev = system_of('dev', 'dev.obj')
    team_lead = automaton_of(dev, 'teamLead')
    state = team_lead.initial
    for _ in range(2):
        (_, state), = team_lead.successors(state)
    labels = [(a.label, a.arity) for a, _ in team_lead.successors(state)]
    assert labels == [('iterate', 1), ('accept', 1)]


def test_external_receive_binds_unknown():
    dev = system_of('dev', 'dev.obj')
    team_lead = automaton_of(dev, 'teamLead')
    state = team_lead.initial
    for _ in range(2):
        (_, state), = team_lead.successors(state)
    _, after_iterate = team_lead.successors(state)[0]
    assert after_iterate.bindings() == {'tag': UNKNOWN}
    (tag_rc, _), = team_lead.successors(after_iterate)
    assert tag_rc.label == 'tagRC'
    assert tag_rc.payload == (UNKNOWN,)


def test_behaviour_arguments_are_evaluated():
    repo = system_of('repo', 'repo.obj')
    repository = automaton_of(repo, 'repository')
    assert repository.initial.bindings() == {'n': 0}
    (_, state), = repository.successors(repository.initial)
    (revision, _), = repository.successors(state)
    assert revision.label == 'revision'
    assert revision.payload == (0,)


def test_receive_binds_delivered_values():
    repo = system_of('repo', 'repo.obj')
    repository = automaton_of(repo, 'repository')
    state = repository.initial
    for _ in range(2):
        (_, state), = repository.successors(state)
    after = repository.receive(state, 'tagRC', ('1.0RC',))
    assert after.bindings() == {'n': 0, 'tag': '1.0RC'}
    with pytest.raises(ValueError):
        repository.receive(state, 'unknownLabel', ())
    with pytest.raises(ValueError):
        repository.receive(state, 'tagRC', ())


def test_literal_payloads():
    system = system_of('repo-test', 'repo.obj', 'dev-fixed.obj', 'repo-test.obj')
    business = automaton_of(system, 'business')
    (_, state), = business.successors(business.initial)
    payloads = [(a.label, a.payload) for a, _ in business.successors(state)]
    assert payloads == [('accept', ('1.0',)), ('iterate', ('1.0RC',))]


def test_stop_has_no_successors():
    two_party = system_of('two-party', 'two-party.obj')
    p = automaton_of(two_party, 'p')
    states = local_state_space(p)
    stopped = [s for s in states if s.stopped]
    assert len(stopped) == 2
    assert all(p.successors(s) == [] for s in stopped)


def test_local_state_space_is_finite_for_recursion():
    pingpong = system_of('pingpong', 'pingpong.obj')
    ping = automaton_of(pingpong, 'ping')
    assert len(local_state_space(ping)) == 2


def test_invoke_depth():
    '''Test that a behaviour that only invokes behaviours is cut off'''
    workspace = load_sources({'loop.obj': 'system loop\nobj a\nbehaviour A\n   A\nA\n'})
    decl = workspace.decls[0].objects[0]
    automaton = build_automaton(decl, invoke_depth=10, system='loop')
    with pytest.raises(InvokeDepthExceeded) as info:
        automaton.initial
    assert [d.kind for d in info.value.diagnostics] == [DiagnosticKind.INVOKE_DEPTH]
    assert info.value.diagnostics[0].system == 'loop'


@pytest.mark.parametrize(
    "left, right, expect", [
        ((1, 'a'), (1, 'a'), True),
        ((1,), (2,), False),
        ((UNKNOWN,), ('x',), True),
        (('x',), (UNKNOWN,), True),
        ((1,), (), False),
    ]
)
def test_values_compatible(left, right, expect):
    assert values_compatible(left, right) is expect


@pytest.mark.parametrize(
    "value, expect", [
        (3, '3'),
        ('1.0', '"1.0"'),
        ('a"b', '"a\\"b"'),
        (UNKNOWN, '?'),
    ]
)
def test_render_value(value, expect):
    assert render_value(value) == expect
