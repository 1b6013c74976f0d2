import pytest

from app import app
from tests.helpers import source_of


@pytest.fixture
def client():
    app.config['TESTING'] = True
    with app.test_client() as client:
        yield client


def sources_of(*names):
    return {name: source_of(name) for name in names}


def test_home(client):
    response = client.get('/')
    assert response.status_code == 200
    assert set(response.get_json()['endpoints']) == {'/check', '/simulate', '/lts'}


def test_check(client):
    response = client.post('/check', json={'sources': sources_of('dev.obj')})
    assert response.status_code == 200
    kinds = sorted(d['kind'] for d in response.get_json()['diagnostics'])
    assert kinds == ['StuckReceive', 'UndeliverableSend']


def test_check_with_options(client):
    body = {'sources': sources_of('dev.obj'), 'options': {'show_info': True, 'queue_bound': 1}}
    response = client.post('/check', json=body)
    kinds = {d['kind'] for d in response.get_json()['diagnostics']}
    assert 'Deadlock' in kinds


def test_check_clean(client):
    response = client.post('/check', json={'sources': sources_of('two-party.obj')})
    assert response.get_json() == {'version': 1, 'diagnostics': []}


@pytest.mark.parametrize(
    "body, expect", [
        (None, 'Request body is required'),
        ({'sources': {}}, 'sources parameter is required'),
        ({'sources': {'a.obj': 3}}, 'sources must map file names to source text'),
    ]
)
def test_check_bad_requests(client, body, expect):
    response = client.post('/check', json=body)
    assert response.status_code == 400
    assert response.get_json()['error'] == expect


@pytest.mark.parametrize("options", [{'queue_bound': 0}, {'root_systems': 'two-party'}])
def test_check_bad_options(client, options):
    body = {'sources': sources_of('two-party.obj'), 'options': options}
    response = client.post('/check', json=body)
    assert response.status_code == 400
    assert response.get_json()['error'].startswith('invalid options')


def test_simulate(client):
    body = {'sources': sources_of('pingpong.obj'), 'system': 'pingpong', 'seed': 3, 'steps': 4}
    response = client.post('/simulate', json=body)
    assert response.status_code == 200
    trace = response.get_json()
    assert trace['system'] == 'pingpong'
    assert len(trace['steps']) == 4


@pytest.mark.parametrize(
    "body, expect", [
        ({'sources': {'two-party.obj': 'system two-party'}}, 'system parameter is required'),
        ({'sources': {'two-party.obj': 'system two-party'}, 'system': 'other'},
         'no system named other in the sources'),
    ]
)
def test_simulate_bad_requests(client, body, expect):
    response = client.post('/simulate', json=body)
    assert response.status_code == 400
    assert response.get_json()['error'] == expect


def test_unresolvable_system(client):
    body = {'sources': {'a.obj': 'system a\nusing b\nobj x\ny ! m.\n'}, 'system': 'a'}
    response = client.post('/lts', json=body)
    assert response.status_code == 422
    assert response.get_json()['diagnostics'][0]['kind'] == 'UnknownSystem'


def test_lts(client):
    response = client.post('/lts', json={'sources': sources_of('two-party.obj'), 'system': 'two-party'})
    assert response.status_code == 200
    assert response.mimetype == 'text/vnd.graphviz'
    assert response.get_data(as_text=True).startswith('digraph "two-party" {')


def test_unknown_endpoint(client):
    assert client.get('/nowhere').status_code == 404
    assert client.get('/check').status_code == 405
