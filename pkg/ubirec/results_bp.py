# ubirec/results_bp.py
# Blueprint for the read-only results browser API

import os
from dataclasses import asdict

from flask import Blueprint, abort, current_app, jsonify

from .harness import compare, read_precision_reports
from .policy import Algorithm

# Create Blueprint
results_bp = Blueprint('results_bp', __name__)


def _reports():
    """Precision reports found in RESULTS_DIR, or {} when there are none yet."""
    results_dir = current_app.config['RESULTS_DIR']
    if not os.path.isdir(results_dir) or not any(
            name.startswith('precision_') for name in os.listdir(results_dir)):
        return {}
    return read_precision_reports(results_dir)


@results_bp.route('/runs')
def list_runs():
    """Lists every run in the results directory."""
    runs = [
        {'algorithm': report.algorithm.value, 'seed': report.seed,
         'scenario': report.scenario, 'overall_precision': report.overall}
        for reports in _reports().values() for report in reports
    ]
    return jsonify({'results_dir': current_app.config['RESULTS_DIR'], 'runs': runs})


@results_bp.route('/runs/<algorithm>/<int:seed>')
def run_detail(algorithm, seed):
    """Precision per interval for one run."""
    algorithm = Algorithm.parse(algorithm)
    for report in _reports().get(algorithm, []):
        if report.seed == seed:
            return jsonify({
                'scenario': report.scenario,
                'algorithm': algorithm.value,
                'seed': seed,
                'overall_precision': report.overall,
                'intervals': [asdict(row) for row in report.intervals],
            })
    abort(404)


@results_bp.route('/comparison')
def comparison():
    """Comparison table and verdicts over the whole results directory."""
    reports = _reports()
    if not reports:
        abort(404)
    result = compare(reports)
    return jsonify({
        'scenario': result.scenario,
        'seeds': list(result.seeds),
        'rows': [asdict(row) for row in result.rows],
        'verdict': result.verdict,
        'cold_start': asdict(result.cold_start),
        'late_window': asdict(result.late_window),
    })
