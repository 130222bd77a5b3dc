# ubirec/cli.py
# CLI commands (simulate, sweep, report) for the ubirec application

import logging
import os
from functools import wraps

import click
from flask import Blueprint, current_app

from .config import ALGORITHMS
from .errors import UbirecError
from .harness import (compare, read_precision_reports, run_experiment, sweep as run_sweep,
                      sweep_seeds, write_comparison, write_run_outputs)
from .rl import load_qtable, save_qtable
from .simulator import load_scenario

logger = logging.getLogger(__name__)

# cli_group=None puts the commands at top level: `python run.py simulate ...`
sim_cli_bp = Blueprint('sim_cli', __name__, cli_group=None)


# --- Decorator ---
def reports_errors(f):
    """Turns ubirec errors into a clean CLI failure (exit status 1)."""
    @wraps(f)
    def decorated_function(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except UbirecError as e:
            raise click.ClickException(str(e)) from e
    return decorated_function


def _default_out_dir(out_dir):
    return out_dir or current_app.config['RESULTS_DIR']


@sim_cli_bp.cli.command('simulate')
@click.option('--scenario', 'scenario_path', required=True, help='Scenario file or bundled scenario name.')
@click.option('--algo', 'algorithm', required=True, type=click.Choice(ALGORITHMS, case_sensitive=False))
@click.option('--trials', type=int, required=True, help='Number of trials to run.')
@click.option('--seed', type=int, required=True)
@click.option('--n', 'n_recommend', type=int, default=None, help='Items recommended per trial.')
@click.option('--save-qtable', 'save_qtable_path', type=click.Path(dir_okay=False), default=None)
@click.option('--load-qtable', 'load_qtable_path', type=click.Path(exists=True, dir_okay=False), default=None)
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None)
@reports_errors
def simulate_command(scenario_path, algorithm, trials, seed, n_recommend, save_qtable_path, load_qtable_path,
                     out_dir):
    """Runs one algorithm on a scenario for one seed."""
    scenario = load_scenario(scenario_path).with_overrides(trials=trials, n_recommend=n_recommend)
    qtable = None
    if load_qtable_path:
        qtable = load_qtable_for(scenario, load_qtable_path)
    result = run_experiment(scenario, algorithm, seed, qtable=qtable)
    out_dir = _default_out_dir(out_dir)
    paths = write_run_outputs(scenario, result, out_dir, seed)
    if save_qtable_path:
        save_qtable_to(result.qtable, save_qtable_path)
    click.echo(f"{scenario.name} {algorithm} seed {seed}: overall precision {result.report.overall:.3f}")
    for row in result.report.intervals:
        click.echo(f"  trials {row.interval_start:>3}-{row.interval_end:<3} precision {row.precision:.2f}")
    click.echo(f"Wrote {paths['precision']}")


def load_qtable_for(scenario, path):
    return load_qtable(path, scenario.rl_config, alphabets=scenario.alphabets, item_ids=scenario.item_ids())


def save_qtable_to(table, path):
    count = save_qtable(table, path)
    click.echo(f"Saved {count} Q-table entries to {path}")


@sim_cli_bp.cli.command('sweep')
@click.option('--scenario', 'scenario_path', required=True, help='Scenario file or bundled scenario name.')
@click.option('--seeds', 'seed_count', type=int, default=None,
              help='Number of seeds per algorithm (default: DEFAULT_SWEEP_SEEDS).')
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), required=True)
@reports_errors
def sweep_command(scenario_path, seed_count, out_dir):
    """Runs CF, QL and CFQL across seeds."""
    if seed_count is None:
        seed_count = current_app.config['DEFAULT_SWEEP_SEEDS']
    scenario = load_scenario(scenario_path)
    seeds = sweep_seeds(scenario, seed_count)
    logger.info("Sweeping '%s' over seeds %s into %s", scenario.name, seeds, out_dir)
    reports = run_sweep(scenario, seeds, out_dir)
    for algorithm, algorithm_reports in reports.items():
        mean = sum(r.overall for r in algorithm_reports) / len(algorithm_reports)
        click.echo(f"{algorithm.value:>5}: mean overall precision {mean:.3f} over {len(algorithm_reports)} seeds")
    click.echo(f"Wrote {sum(len(r) for r in reports.values())} runs to {out_dir}")


@sim_cli_bp.cli.command('report')
@click.option('--in', 'in_dir', type=click.Path(exists=True, file_okay=False), required=True)
@click.option('--out', 'out_csv', type=click.Path(dir_okay=False), required=True)
@reports_errors
def report_command(in_dir, out_csv):
    """Aggregates a sweep directory and compares the three algorithms."""
    comparison = compare(read_precision_reports(in_dir))
    write_comparison(comparison, out_csv)
    click.echo(f"Scenario {comparison.scenario}, {len(comparison.seeds)} seeds")
    for row in comparison.rows:
        click.echo(f"  trials {row.interval_start:>3}-{row.interval_end:<3} "
                   f"cf {row.cf_mean:.3f}  ql {row.ql_mean:.3f}  cfql {row.cfql_mean:.3f}")
    cold, late = comparison.cold_start, comparison.late_window
    click.echo(f"Verdict: {comparison.verdict}")
    click.echo(f"Cold start (trials {cold.first_trial}-{cold.last_trial}): cfql {cold.cfql_mean:.3f} "
               f"vs ql {cold.other_mean:.3f}, p={cold.p_value:.4f} -> {'pass' if cold.ok else 'fail'}")
    click.echo(f"Late window (trials {late.first_trial}-{late.last_trial}): cfql {late.cfql_mean:.3f} "
               f"vs {late.other} {late.other_mean:.3f}, margin {late.margin:+.3f} "
               f"(se {late.standard_error:.3f}) -> {'pass' if late.ok else 'fail'}")
    click.echo(f"Wrote {os.path.abspath(out_csv)}")
