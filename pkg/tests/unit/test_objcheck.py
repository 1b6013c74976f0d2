import json
from pathlib import Path

import pytest

from objcheck.objcheck import check_workspace, run
from objcheck.options import Options
from tests.helpers import fixture_path, workspace_of


@pytest.fixture(autouse=True)
def reset_debug(monkeypatch):
    monkeypatch.setattr('objcheck.objcheck.debug', False)


def kinds_of(output):
    return sorted(d['kind'] for d in json.loads(output)['diagnostics'])


@pytest.mark.parametrize(
    "files, expect", [
        (['two-party.obj'], 0),
        (['dev-fixed.obj'], 0),
        (['repo.obj', 'dev-fixed.obj', 'repo-test.obj'], 0),
        (['dev.obj'], 1),
        (['three-party.obj'], 1),
        (['dev.obj', 'dev-refactored.obj'], 1),
    ]
)
def test_check_exit_code(files, expect, capsys):
    assert run(['check', '--color', 'never'] + [fixture_path(f) for f in files]) == expect


def test_check_ok_message(capsys):
    assert run(['check', '--color', 'never', fixture_path('two-party.obj')]) == 0
    assert capsys.readouterr().out == 'ok: 1 system(s) verified\n'


def test_check_human_output(capsys):
    assert run(['check', '--color', 'never', fixture_path('dev.obj')]) == 1
    out = capsys.readouterr().out
    assert 'UndeliverableSend [send] in dev' in out
    assert 'StuckReceive [recv] in dev' in out
    assert 'Deadlock' not in out


def test_check_show_info(capsys):
    assert run(['check', '--color', 'never', '--show-info', fixture_path('dev.obj')]) == 1
    assert 'Deadlock' in capsys.readouterr().out


def test_check_json(capsys):
    assert run(['check', '--format', 'json', fixture_path('dev.obj')]) == 1
    assert kinds_of(capsys.readouterr().out) == ['StuckReceive', 'UndeliverableSend']


def test_check_json_clean(capsys):
    assert run(['check', '--format', 'json', fixture_path('dev-fixed.obj')]) == 0
    assert capsys.readouterr().out == '{"version":1,"diagnostics":[]}\n'


def test_compliance_only(capsys):
    args = ['check', '--format', 'json', '--compliance-only', '--system', 'dev-refactored',
            fixture_path('dev.obj'), fixture_path('dev-refactored.obj')]
    assert run(args) == 1
    assert kinds_of(capsys.readouterr().out) == ['ExcessDemand', 'MissingOffer']


def test_compat_only(capsys):
    args = ['check', '--format', 'json', '--compat-only', '--system', 'two-party',
            fixture_path('two-party.obj')]
    assert run(args) == 0


def test_conflicting_flags(capsys):
    args = ['check', '--compat-only', '--compliance-only', fixture_path('two-party.obj')]
    assert run(args) == 2
    assert 'mutually exclusive' in capsys.readouterr().err


@pytest.mark.parametrize(
    "args", [
        ['check', '--system', 'nowhere', fixture_path('two-party.obj')],
        ['check', fixture_path('missing.obj')],
        ['check', '--queue-bound', '0', fixture_path('two-party.obj')],
        ['simulate', '--system', 'nowhere', fixture_path('two-party.obj')],
        ['lts', fixture_path('two-party.obj')],
    ]
)
def test_usage_errors(args, capsys):
    assert run(args) == 2


def test_syntax_errors_are_diagnostics(tmpdir, capsys):
    broken = Path(tmpdir) / 'broken.obj'
    broken.write_text('system broken\nobj a\nb ? {\n   m.\n   m.\n}\n', encoding='utf-8')
    assert run(['check', '--format', 'json', str(broken)]) == 1
    assert kinds_of(capsys.readouterr().out) == ['DuplicateLabel']


def test_failures_beside_a_running_object_fail_the_check(tmpdir, capsys):
    busy = Path(tmpdir) / 'busy.obj'
    busy.write_text('system busy\nobj a\nb ! m.\nobj b\nc ? x.\n'
                    'obj c\nbehaviour Tick\n   env ! tick\n   Tick\nTick\n', encoding='utf-8')
    assert run(['check', '--format', 'json', str(busy)]) == 1
    assert kinds_of(capsys.readouterr().out) == ['StuckReceive', 'UndeliverableSend']


@pytest.mark.parametrize("fmt", ['human', 'json'])
def test_output_is_byte_identical(fmt, capsys):
    args = ['check', '--color', 'never', '--format', fmt, '--show-info',
            fixture_path('dev.obj'), fixture_path('dev-refactored.obj'),
            fixture_path('repo.obj'), fixture_path('discard.obj')]
    outputs = []
    for _ in range(5):
        assert run(args) == 1
        outputs.append(capsys.readouterr().out)
    assert outputs[0]
    assert outputs.count(outputs[0]) == 5


def test_internal_error(monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise RuntimeError('exploded')

    monkeypatch.setattr('objcheck.objcheck.check_workspace', boom)
    assert run(['check', fixture_path('two-party.obj')]) == 2
    assert 'internal error: exploded' in capsys.readouterr().err


def test_parallel_check_matches_sequential():
    workspace = workspace_of('dev.obj', 'dev-refactored.obj', 'three-party.obj')
    sequential = check_workspace(workspace, Options(jobs=1))
    parallel = check_workspace(workspace, Options(jobs=2))
    assert sequential.diagnostics == parallel.diagnostics
    assert sequential.systems_checked == parallel.systems_checked == 4


def test_lts_to_file(tmpdir, capsys):
    target = Path(tmpdir) / 'two-party.dot'
    args = ['lts', '--system', 'two-party', '--dot', str(target), fixture_path('two-party.obj')]
    assert run(args) == 0
    text = target.read_text(encoding='utf-8')
    assert text.startswith('digraph "two-party" {')
    assert 'τ: p→q:i' in text


def test_lts_observable(capsys):
    args = ['lts', '--system', 'two-party', '--observable', fixture_path('two-party.obj')]
    assert run(args) == 0
    out = capsys.readouterr().out
    assert 'τ: pq!i' in out
    assert 'ps!i' in out


def test_simulate_json(capsys):
    args = ['simulate', '--system', 'repo-test', '--seed', '7', '--format', 'json',
            fixture_path('repo.obj'), fixture_path('dev-fixed.obj'),
            fixture_path('repo-test.obj')]
    assert run(args) == 0
    first = json.loads(capsys.readouterr().out)
    assert run(args) == 0
    assert json.loads(capsys.readouterr().out) == first
    assert first['system'] == 'repo-test'
    assert first['seed'] == 7


def test_simulate_human(capsys):
    args = ['simulate', '--system', 'pingpong', '--steps', '4', fixture_path('pingpong.obj')]
    assert run(args) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith('   1. ping: pong ! ball [internal]')
    assert 'final:' in lines


def test_refactoring_adds_compliance_diagnostics(capsys):
    args = ['check', '--format', 'json', fixture_path('dev.obj'),
            fixture_path('dev-refactored.obj')]
    assert run(args) == 1
    document = json.loads(capsys.readouterr().out)
    compliance = [d for d in document['diagnostics'] if d['class'] == 'compliance']
    assert sorted(d['kind'] for d in compliance) == ['ExcessDemand', 'MissingOffer']
    assert all(d['system'] == 'dev-refactored' for d in compliance)
