# ubirec/harness.py
# Experiment runner: trials, precision per interval, aggregation and comparison

import glob
import json
import logging
import math
import os
import re
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from scipy import stats

from .cf import CfModel
from .config import PRECISION_INTERVAL_WIDTH
from .context import Transaction, build_profile, write_transaction_log
from .errors import InvalidInputError
from .policy import Algorithm, epsilon_at, select_list
from .rl import QTable
from .simulator import generate_colleague_history, next_event, target_user, user_choice
from .utils import run_file_stem, write_jsonl

logger = logging.getLogger(__name__)

PRECISION_COLUMNS = ['algorithm', 'seed', 'interval_start', 'interval_end', 'precision']
CSV_FLOAT_FORMAT = '%.6f'
# Per-seed streams, in SeedSequence.spawn order
RNG_STREAMS = ('history', 'target', 'policy', 'choice')


@dataclass(frozen=True)
class TrialRecord:
    """Everything that happened in one trial."""
    trial_index: int
    state: object
    algorithm: Algorithm
    recommended: tuple
    branches: tuple
    chosen: object
    rewards: tuple
    epsilon_used: float

    @property
    def hit(self):
        return self.chosen is not None

    def as_event(self):
        record = {'trial_index': self.trial_index}
        record.update(self.state.as_dict())
        record['algorithm'] = self.algorithm.value
        record['recommended'] = [{'item_id': item_id, 'branch': branch.value}
                                 for item_id, branch in zip(self.recommended, self.branches)]
        record['chosen'] = self.chosen
        record['rewards'] = list(self.rewards)
        record['epsilon'] = self.epsilon_used
        return record


@dataclass(frozen=True)
class IntervalPrecision:
    interval_start: int
    interval_end: int
    precision: float


@dataclass(frozen=True)
class PrecisionReport:
    """Precision per interval of trials (1-based, inclusive) for one run."""
    scenario: str
    algorithm: Algorithm
    seed: int
    intervals: tuple
    overall: float

    def to_frame(self):
        return pd.DataFrame(
            [(self.algorithm.value, self.seed, row.interval_start, row.interval_end, row.precision)
             for row in self.intervals],
            columns=PRECISION_COLUMNS)

    def window_mean(self, first_trial, last_trial):
        """Mean precision over the intervals lying inside [first_trial, last_trial]."""
        inside = [row for row in self.intervals
                  if row.interval_start >= first_trial and row.interval_end <= last_trial]
        if not inside:
            raise InvalidInputError(f"No interval inside trials {first_trial}-{last_trial}")
        widths = [row.interval_end - row.interval_start + 1 for row in inside]
        return sum(w * row.precision for w, row in zip(widths, inside)) / sum(widths)

    def trial_count(self):
        return self.intervals[-1].interval_end if self.intervals else 0


@dataclass
class RunResult:
    """Outcome of run_experiment."""
    records: list
    report: PrecisionReport
    qtable: QTable
    transactions: list
    history: list = field(default_factory=list)


def precision_report(records, scenario_name, algorithm, seed, width=PRECISION_INTERVAL_WIDTH):
    """Recounts precision per interval from trial records."""
    algorithm = Algorithm.parse(algorithm)
    intervals = []
    for start in range(0, len(records), width):
        chunk = records[start:start + width]
        hits = sum(1 for record in chunk if record.hit)
        intervals.append(IntervalPrecision(start + 1, start + len(chunk), hits / len(chunk)))
    overall = sum(1 for record in records if record.hit) / len(records) if records else 0.0
    return PrecisionReport(scenario_name, algorithm, int(seed), tuple(intervals), overall)


def spawn_streams(seed):
    """Independent generators for history, target, policy and choice randomness."""
    children = np.random.SeedSequence(int(seed)).spawn(len(RNG_STREAMS))
    return {name: np.random.default_rng(child) for name, child in zip(RNG_STREAMS, children)}


def run_experiment(scenario, algorithm, seed, qtable=None):
    """Runs every trial of a scenario under one algorithm and seed."""
    algorithm = Algorithm.parse(algorithm)
    rngs = spawn_streams(seed)
    user = target_user(scenario, rngs['target'])
    actions = list(scenario.item_set)
    table = qtable if qtable is not None else QTable(scenario.rl_config)
    policy_config = scenario.policy_config(algorithm)
    uses_cf = algorithm in (Algorithm.CF, Algorithm.CFQL)
    uses_ql = algorithm in (Algorithm.QL, Algorithm.CFQL)

    history = generate_colleague_history(scenario, rngs['history']) if uses_cf else []
    model = profile = None
    if uses_cf:
        model = CfModel.from_transactions(
            history, scenario.members(), scenario.item_set,
            neighborhood_size_k=scenario.neighborhood_size_k,
            group_restriction=scenario.group_restriction)
        profile = model.profile(scenario.target_user)

    logger.info("Running '%s' with %s, seed %d, %d trials",
                scenario.name, algorithm.value, seed, scenario.trials)
    records = []
    transactions = []
    for t in range(scenario.trials):
        s, s_next = next_event(scenario, t)
        epsilon = epsilon_at(policy_config, t) if uses_ql else 0.0
        trace = select_list(algorithm, actions, scenario.n_recommend, table=table, model=model,
                            target=profile, s=s, epsilon=epsilon, rng=rngs['policy'])
        chosen = user_choice(user, s, trace.chosen, rngs['choice'], scenario.position_discount)
        chosen_id = chosen.item_id if chosen is not None else None
        rewards = tuple(1 if action.item_id == chosen_id else 0 for action in trace.chosen)

        if chosen is not None:
            transactions.append(Transaction(scenario.target_user, chosen_id, 1))
        if uses_ql:
            for action, reward in zip(trace.chosen, rewards):
                table.update(s, action, reward, s_next, actions)
        if uses_cf and chosen is not None:
            # Next trial sees a fresh snapshot; this one stays consistent
            profile = build_profile(transactions, scenario.target_user, scenario.item_set,
                                    social_group=scenario.target_group)
            model = model.with_profile(profile)

        records.append(TrialRecord(t, s, algorithm, tuple(trace.item_ids()), trace.branches,
                                   chosen_id, rewards, trace.epsilon_used))

    report = precision_report(records, scenario.name, algorithm, seed)
    logger.info("Finished %s seed %d: overall precision %.3f", algorithm.value, seed, report.overall)
    return RunResult(records, report, table, transactions, history)


# --- Aggregation and comparison ---
@dataclass(frozen=True)
class IntervalSummary:
    interval_start: int
    interval_end: int
    mean: float
    std: float
    n: int


@dataclass(frozen=True)
class AggregateReport:
    """Per-interval mean and sample standard deviation across seeds."""
    scenario: str
    algorithm: Algorithm
    seeds: tuple
    intervals: tuple


def aggregate(reports):
    """Mean and standard deviation per interval across per-seed reports."""
    reports = list(reports)
    if not reports:
        raise InvalidInputError("Nothing to aggregate")
    first = reports[0]
    for report in reports[1:]:
        if report.scenario != first.scenario or report.algorithm != first.algorithm:
            raise InvalidInputError(
                f"Cannot aggregate {report.scenario}/{report.algorithm.value} "
                f"with {first.scenario}/{first.algorithm.value}")
        if [(r.interval_start, r.interval_end) for r in report.intervals] != \
                [(r.interval_start, r.interval_end) for r in first.intervals]:
            raise InvalidInputError(f"Seed {report.seed} has different intervals than seed {first.seed}")

    frame = pd.concat([report.to_frame() for report in reports], ignore_index=True)
    grouped = frame.groupby(['interval_start', 'interval_end'], sort=True)['precision']
    summary = grouped.agg(['mean', 'std', 'count']).reset_index()
    # A single seed has no spread
    summary['std'] = summary['std'].fillna(0.0)
    intervals = tuple(
        IntervalSummary(int(row.interval_start), int(row.interval_end),
                        float(row.mean), float(row.std), int(row.count))
        for row in summary.itertuples(index=False))
    return AggregateReport(first.scenario, first.algorithm, tuple(r.seed for r in reports), intervals)


@dataclass(frozen=True)
class WindowTest:
    """A paired CFQL-vs-other check over a window of trials."""
    first_trial: int
    last_trial: int
    cfql_mean: float
    other_mean: float
    other: str
    ok: bool
    p_value: float = None
    margin: float = None
    standard_error: float = None


@dataclass(frozen=True)
class Comparison:
    scenario: str
    seeds: tuple
    rows: tuple
    verdict: str
    cold_start: WindowTest
    late_window: WindowTest

    def to_frame(self):
        frame = pd.DataFrame([asdict(row) for row in self.rows])
        summary = {
            'interval_start': 'verdict',
            'interval_end': '',
            'verdict': self.verdict,
            'cold_start_ok': self.cold_start.ok,
            'cold_start_p_value': self.cold_start.p_value,
            'late_window_ok': self.late_window.ok,
            'late_window_margin': self.late_window.margin,
        }
        frame = pd.concat([frame, pd.DataFrame([summary])], ignore_index=True)
        return frame


@dataclass(frozen=True)
class ComparisonRow:
    interval_start: int
    interval_end: int
    cf_mean: float
    cf_std: float
    ql_mean: float
    ql_std: float
    cfql_mean: float
    cfql_std: float
    delta_cfql_cf: float
    delta_cfql_ql: float


def dominance_verdict(deltas, tolerance=1e-12):
    """'tie', 'cfql-dominates', 'cfql-dominated' or 'mixed' from CFQL-minus-other deltas."""
    deltas = [0.0 if abs(d) <= tolerance else d for d in deltas]
    if all(d == 0.0 for d in deltas):
        return 'tie'
    if all(d >= 0.0 for d in deltas):
        return 'cfql-dominates'
    if all(d <= 0.0 for d in deltas):
        return 'cfql-dominated'
    return 'mixed'


def _paired_means(reports_by_algorithm, algorithm, seeds, window):
    by_seed = {report.seed: report for report in reports_by_algorithm[algorithm]}
    return np.array([by_seed[seed].window_mean(*window) for seed in seeds])


def _cold_start_test(reports_by_algorithm, seeds, window, significance):
    cfql = _paired_means(reports_by_algorithm, Algorithm.CFQL, seeds, window)
    ql = _paired_means(reports_by_algorithm, Algorithm.QL, seeds, window)
    differences = cfql - ql
    if len(seeds) > 1 and np.ptp(differences) > 0.0:
        p_value = float(stats.ttest_rel(cfql, ql, alternative='greater').pvalue)
    else:
        # No spread to test against: the sign decides
        p_value = 0.0 if differences.mean() > 0.0 else 1.0
    ok = bool(differences.mean() > 0.0 and p_value < significance)
    return WindowTest(window[0], window[1], float(cfql.mean()), float(ql.mean()), 'ql', ok, p_value=p_value)


def _late_window_test(reports_by_algorithm, seeds, window):
    cfql = _paired_means(reports_by_algorithm, Algorithm.CFQL, seeds, window)
    others = {algorithm: _paired_means(reports_by_algorithm, algorithm, seeds, window)
              for algorithm in (Algorithm.CF, Algorithm.QL)}
    best = max(others, key=lambda algorithm: (others[algorithm].mean(), algorithm.value))
    differences = cfql - others[best]
    standard_error = float(np.std(differences, ddof=1) / math.sqrt(len(seeds))) if len(seeds) > 1 else 0.0
    margin = float(differences.mean())
    return WindowTest(window[0], window[1], float(cfql.mean()), float(others[best].mean()),
                      best.value, margin >= -standard_error, margin=margin, standard_error=standard_error)


def default_windows(trials):
    """Early and late comparison windows: trials 1-20 and the last 40 trials."""
    return (1, min(20, trials)), (max(1, trials - 39), trials)


def compare(reports_by_algorithm, early_window=None, late_window=None, significance=0.05):
    """Per-interval deltas CFQL-CF and CFQL-QL plus the verdict flags."""
    reports_by_algorithm = {Algorithm.parse(k): list(v) for k, v in reports_by_algorithm.items()}
    missing = [a.value for a in Algorithm if not reports_by_algorithm.get(a)]
    if missing:
        raise InvalidInputError(f"Missing reports for: {', '.join(missing)}")
    scenarios = {r.scenario for reports in reports_by_algorithm.values() for r in reports}
    if len(scenarios) != 1:
        raise InvalidInputError(f"Reports come from different scenarios: {', '.join(sorted(scenarios))}")
    seed_sets = {a: sorted(r.seed for r in reports) for a, reports in reports_by_algorithm.items()}
    seeds = seed_sets[Algorithm.CFQL]
    if any(s != seeds for s in seed_sets.values()):
        raise InvalidInputError("Every algorithm needs reports for the same seeds")

    aggregates = {a: aggregate(reports) for a, reports in reports_by_algorithm.items()}
    bounds = [(i.interval_start, i.interval_end) for i in aggregates[Algorithm.CFQL].intervals]
    if any([(i.interval_start, i.interval_end) for i in agg.intervals] != bounds for agg in aggregates.values()):
        raise InvalidInputError("Algorithms were run over different trial counts")

    rows = []
    for cf, ql, cfql in zip(*(aggregates[a].intervals for a in (Algorithm.CF, Algorithm.QL, Algorithm.CFQL))):
        rows.append(ComparisonRow(cfql.interval_start, cfql.interval_end,
                                  cf.mean, cf.std, ql.mean, ql.std, cfql.mean, cfql.std,
                                  cfql.mean - cf.mean, cfql.mean - ql.mean))
    verdict = dominance_verdict([row.delta_cfql_cf for row in rows] + [row.delta_cfql_ql for row in rows])

    trials = bounds[-1][1]
    default_early, default_late = default_windows(trials)
    cold_start = _cold_start_test(reports_by_algorithm, seeds, early_window or default_early, significance)
    late = _late_window_test(reports_by_algorithm, seeds, late_window or default_late)
    logger.info("Comparison verdict %s (cold start ok=%s, late window ok=%s)", verdict, cold_start.ok, late.ok)
    return Comparison(scenarios.pop(), tuple(seeds), tuple(rows), verdict, cold_start, late)


# --- Run artifacts ---
def write_run_outputs(scenario, result, out_dir, seed):
    """Writes the precision CSV, event log, transaction log and run metadata of one run."""
    os.makedirs(out_dir, exist_ok=True)
    algorithm = result.report.algorithm.value
    paths = {
        'precision': os.path.join(out_dir, run_file_stem('precision', algorithm, seed) + '.csv'),
        'events': os.path.join(out_dir, run_file_stem('events', algorithm, seed) + '.jsonl'),
        'transactions': os.path.join(out_dir, run_file_stem('transactions', algorithm, seed) + '.jsonl'),
        'meta': os.path.join(out_dir, run_file_stem('meta', algorithm, seed) + '.json'),
    }
    result.report.to_frame().to_csv(paths['precision'], index=False, lineterminator='\n',
                                    float_format=CSV_FLOAT_FORMAT)
    write_jsonl(paths['events'], (record.as_event() for record in result.records))
    write_transaction_log(paths['transactions'], result.transactions)
    meta = {
        'scenario': scenario.name,
        'algorithm': algorithm,
        'seed': int(seed),
        'trials': scenario.trials,
        'n_recommend': scenario.n_recommend,
    }
    with open(paths['meta'], 'w', encoding='utf-8', newline='\n') as fh:
        json.dump(meta, fh, indent=2)
        fh.write('\n')
    return paths


def read_precision_reports(in_dir):
    """Loads every precision_<algo>_seed<seed>.csv in a directory, grouped by algorithm."""
    pattern = re.compile(r'^precision_(?P<algorithm>[a-z]+)_seed(?P<seed>-?\d+)\.csv$')
    found = []
    for path in glob.glob(os.path.join(in_dir, 'precision_*.csv')):
        match = pattern.match(os.path.basename(path))
        if match:
            found.append((Algorithm.parse(match['algorithm']), int(match['seed']), path))
    if not found:
        raise InvalidInputError(f"No precision CSV files in {in_dir}")

    reports = {}
    for algorithm, seed, path in sorted(found, key=lambda entry: (entry[0].value, entry[1])):
        frame = pd.read_csv(path)
        if list(frame.columns) != PRECISION_COLUMNS:
            raise InvalidInputError(f"{os.path.basename(path)} has columns {list(frame.columns)}")
        meta_path = os.path.join(in_dir, run_file_stem('meta', algorithm.value, seed) + '.json')
        scenario_name = 'unknown'
        if os.path.isfile(meta_path):
            with open(meta_path, 'r', encoding='utf-8') as fh:
                scenario_name = json.load(fh).get('scenario', scenario_name)
        intervals = tuple(IntervalPrecision(int(row.interval_start), int(row.interval_end), float(row.precision))
                          for row in frame.itertuples(index=False))
        widths = [r.interval_end - r.interval_start + 1 for r in intervals]
        overall = sum(w * r.precision for w, r in zip(widths, intervals)) / sum(widths) if widths else 0.0
        reports.setdefault(algorithm, []).append(
            PrecisionReport(scenario_name, algorithm, seed, intervals, overall))
    return reports


def write_comparison(comparison, out_csv):
    out_dir = os.path.dirname(os.path.abspath(out_csv))
    os.makedirs(out_dir, exist_ok=True)
    comparison.to_frame().to_csv(out_csv, index=False, lineterminator='\n', float_format=CSV_FLOAT_FORMAT)
    return out_csv


def sweep_seeds(scenario, count):
    """The scenario's declared seeds, extended with consecutive integers up to ``count``."""
    if count < 1:
        raise InvalidInputError(f"Seed count must be >= 1, got {count}")
    seeds = list(scenario.seeds[:count])
    next_seed = max(scenario.seeds) + 1
    while len(seeds) < count:
        seeds.append(next_seed)
        next_seed += 1
    return seeds


def sweep(scenario, seeds, out_dir, algorithms=tuple(Algorithm)):
    """Runs every algorithm for every seed and writes each run's artifacts.

    Output order is by (algorithm, seed), never by completion order.
    """
    reports = {}
    for algorithm in algorithms:
        algorithm = Algorithm.parse(algorithm)
        for seed in seeds:
            result = run_experiment(scenario, algorithm, seed)
            write_run_outputs(scenario, result, out_dir, seed)
            reports.setdefault(algorithm, []).append(result.report)
    return reports
