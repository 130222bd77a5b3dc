import pandas as pd
import pytest

from ubirec.rl import load_qtable


def test_simulate_writes_run(runner, scenario_file, tmp_path):
    out = tmp_path / 'run'
    result = runner.invoke(args=['simulate', '--scenario', str(scenario_file), '--algo', 'cfql',
                                 '--trials', '20', '--seed', '3', '--out', str(out)])
    assert result.exit_code == 0, result.output
    assert 'tiny cfql seed 3' in result.output
    frame = pd.read_csv(out / 'precision_cfql_seed3.csv')
    assert list(frame.columns) == ['algorithm', 'seed', 'interval_start', 'interval_end', 'precision']
    assert frame['interval_end'].tolist() == [10, 20]
    assert (out / 'events_cfql_seed3.jsonl').exists()


@pytest.mark.parametrize('algorithm', ['cf', 'ql', 'cfql'])
def test_simulate_output_is_byte_identical(runner, scenario_file, tmp_path, algorithm):
    runs = [tmp_path / 'first', tmp_path / 'second']
    for out in runs:
        result = runner.invoke(args=['simulate', '--scenario', str(scenario_file), '--algo', algorithm,
                                     '--trials', '20', '--seed', '5', '--out', str(out)])
        assert result.exit_code == 0, result.output
    for name in (f'precision_{algorithm}_seed5.csv', f'events_{algorithm}_seed5.jsonl',
                 f'transactions_{algorithm}_seed5.jsonl'):
        assert (runs[0] / name).read_bytes() == (runs[1] / name).read_bytes()


def test_simulate_defaults_to_results_dir(app, runner, scenario_file):
    result = runner.invoke(args=['simulate', '--scenario', str(scenario_file), '--algo', 'QL',
                                 '--trials', '10', '--seed', '0', '--n', '1'])
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(f"{app.config['RESULTS_DIR']}/precision_ql_seed0.csv")
    assert len(frame) == 1


def test_simulate_qtable_round_trip(runner, scenario_file, tmp_path):
    saved = tmp_path / 'q.jsonl'
    result = runner.invoke(args=['simulate', '--scenario', str(scenario_file), '--algo', 'ql', '--trials', '20',
                                 '--seed', '1', '--out', str(tmp_path), '--save-qtable', str(saved)])
    assert result.exit_code == 0, result.output
    assert len(load_qtable(saved)) > 0

    result = runner.invoke(args=['simulate', '--scenario', str(scenario_file), '--algo', 'ql', '--trials', '20',
                                 '--seed', '2', '--out', str(tmp_path), '--load-qtable', str(saved)])
    assert result.exit_code == 0, result.output


def test_simulate_rejects_bad_input(runner, scenario_file, tmp_path):
    result = runner.invoke(args=['simulate', '--scenario', str(scenario_file), '--algo', 'cfql',
                                 '--trials', '500', '--seed', '0', '--out', str(tmp_path)])
    assert result.exit_code == 1
    assert 'event_sequence' in result.output

    result = runner.invoke(args=['simulate', '--scenario', str(scenario_file), '--algo', 'sarsa',
                                 '--trials', '10', '--seed', '0'])
    assert result.exit_code == 2

    result = runner.invoke(args=['simulate', '--scenario', 'missing.json', '--algo', 'cf',
                                 '--trials', '10', '--seed', '0'])
    assert result.exit_code == 1
    assert 'not found' in result.output


def test_sweep_and_report(runner, scenario_file, tmp_path):
    out = tmp_path / 'sweep'
    result = runner.invoke(args=['sweep', '--scenario', str(scenario_file), '--seeds', '3', '--out', str(out)])
    assert result.exit_code == 0, result.output
    assert sorted(p.name for p in out.glob('precision_cfql_*.csv')) == [
        'precision_cfql_seed0.csv', 'precision_cfql_seed1.csv', 'precision_cfql_seed2.csv']

    csv_path = tmp_path / 'comparison.csv'
    result = runner.invoke(args=['report', '--in', str(out), '--out', str(csv_path)])
    assert result.exit_code == 0, result.output
    assert 'Verdict:' in result.output
    frame = pd.read_csv(csv_path)
    assert frame['interval_start'].iloc[-1] == 'verdict'
    assert frame['verdict'].iloc[-1] in ('tie', 'cfql-dominates', 'cfql-dominated', 'mixed')


def test_sweep_seed_count_defaults_to_config(app, runner, scenario_file, tmp_path):
    app.config['DEFAULT_SWEEP_SEEDS'] = 3
    out = tmp_path / 'sweep'
    result = runner.invoke(args=['sweep', '--scenario', str(scenario_file), '--out', str(out)])
    assert result.exit_code == 0, result.output
    assert sorted(p.name for p in out.glob('precision_ql_*.csv')) == [
        'precision_ql_seed0.csv', 'precision_ql_seed1.csv', 'precision_ql_seed2.csv']


def test_report_on_empty_dir(runner, tmp_path):
    result = runner.invoke(args=['report', '--in', str(tmp_path), '--out', str(tmp_path / 'c.csv')])
    assert result.exit_code == 1
    assert 'No precision CSV' in result.output
