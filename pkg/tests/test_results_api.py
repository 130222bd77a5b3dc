from ubirec.harness import sweep


def test_no_runs_yet(client):
    response = client.get('/api/runs')
    assert response.status_code == 200
    assert response.get_json()['runs'] == []
    assert client.get('/api/comparison').status_code == 404


def test_browse_sweep(app, client, make_scenario):
    sweep(make_scenario(), [0, 1], app.config['RESULTS_DIR'])

    runs = client.get('/api/runs').get_json()['runs']
    assert len(runs) == 6
    assert {(r['algorithm'], r['seed']) for r in runs} == {(a, s) for a in ('cf', 'ql', 'cfql') for s in (0, 1)}
    assert all(r['scenario'] == 'tiny' for r in runs)

    detail = client.get('/api/runs/cfql/1').get_json()
    assert detail['seed'] == 1
    assert [(i['interval_start'], i['interval_end']) for i in detail['intervals']] == [(1, 10), (11, 20)]

    comparison = client.get('/api/comparison').get_json()
    assert comparison['seeds'] == [0, 1]
    assert len(comparison['rows']) == 2
    assert comparison['verdict'] in ('tie', 'cfql-dominates', 'cfql-dominated', 'mixed')
    assert set(comparison['cold_start']) >= {'first_trial', 'last_trial', 'ok', 'p_value'}


def test_unknown_run(app, client, make_scenario):
    sweep(make_scenario(), [0], app.config['RESULTS_DIR'], algorithms=('ql',))
    response = client.get('/api/runs/ql/7')
    assert response.status_code == 404
    assert response.get_json() == {'error': 'not found'}

    response = client.get('/api/runs/sarsa/0')
    assert response.status_code == 400
    assert 'sarsa' in response.get_json()['error']
