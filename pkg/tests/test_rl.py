import math

import numpy as np
import pytest
from pytest import approx, mark

from ubirec.context import Alphabets, ContextState
from ubirec.errors import InvalidInputError, UnknownSymbolError
from ubirec.policy import Branch, select_ql
from ubirec.rl import QTable, RlConfig, load_qtable, save_qtable

from conftest import OTHER_STATE, STATE, make_actions

ACTIONS = make_actions('a1', 'a2', 'a3')


@pytest.mark.parametrize('kwargs', [
    {'learning_rate_alpha': 1.5},
    {'learning_rate_alpha': -0.1},
    {'discount_gamma': 1.0},
    {'initial_q': math.inf},
])
def test_config_rejects(kwargs):
    with pytest.raises(InvalidInputError):
        RlConfig(**kwargs)


def test_fresh_table_reads_initial_q():
    table = QTable(RlConfig(initial_q=0.25))
    assert table.q_value(STATE, ACTIONS[0]) == 0.25
    assert len(table) == 0
    assert table.is_pristine()


def test_update_examples():
    config = RlConfig(learning_rate_alpha=0.5, discount_gamma=0.9)
    table = QTable(config)
    table.update(STATE, ACTIONS[0], 0, OTHER_STATE, ACTIONS)
    assert table.q_value(STATE, ACTIONS[0]) == 0.0

    table.update(STATE, ACTIONS[0], 1, OTHER_STATE, ACTIONS)
    assert table.q_value(STATE, ACTIONS[0]) == 0.5
    assert table.q_value(STATE, ACTIONS[1]) == 0.0

    table = QTable(config, {(STATE, 'a1'): 0.5, (OTHER_STATE, 'a2'): 0.5})
    table.update(STATE, ACTIONS[0], 1, OTHER_STATE, ACTIONS)
    assert table.q_value(STATE, ACTIONS[0]) == approx(0.975, abs=1e-12)


def test_alpha_zero_is_identity():
    table = QTable(RlConfig(learning_rate_alpha=0.0), {(STATE, 'a2'): 0.4})
    before = table.snapshot()
    for reward in (1, 0, 1):
        table.update(STATE, ACTIONS[1], reward, OTHER_STATE, ACTIONS)
    assert table.snapshot() == before


def test_randomized_updates_match_formula():
    rng = np.random.default_rng(11)
    states = [ContextState(t, 'g', c) for t in ('am', 'pm') for c in ('work', 'rest')]
    config = RlConfig(learning_rate_alpha=0.37, discount_gamma=0.81)
    table = QTable(config)
    oracle = {}
    for _ in range(1000):
        s = states[int(rng.integers(len(states)))]
        s_next = states[int(rng.integers(len(states)))]
        a = ACTIONS[int(rng.integers(len(ACTIONS)))]
        reward = float(rng.integers(0, 2))
        before = table.snapshot()

        q = oracle.get((s, a.item_id), 0.0)
        best_next = max(oracle.get((s_next, b.item_id), 0.0) for b in ACTIONS)
        oracle[(s, a.item_id)] = q + 0.37 * (reward + 0.81 * best_next - q)
        table.update(s, a, reward, s_next, ACTIONS)

        assert table.q_value(s, a) == approx(oracle[(s, a.item_id)], abs=1e-12)
        changed = {key for key in set(before) | set(table.values) if before.get(key) != table.values.get(key)}
        assert changed <= {(s, a.item_id)}


def test_update_errors():
    table = QTable()
    with pytest.raises(InvalidInputError):
        table.update(STATE, ACTIONS[0], 1, OTHER_STATE, [])
    with pytest.raises(InvalidInputError):
        table.update(STATE, ACTIONS[0], math.nan, OTHER_STATE, ACTIONS)


def test_greedy_action():
    table = QTable(values={(STATE, 'a1'): 0.1, (STATE, 'a2'): 0.7, (STATE, 'a3'): 0.3})
    assert table.greedy_action(STATE, ACTIONS).item_id == 'a2'
    assert QTable().greedy_action(STATE, list(reversed(ACTIONS))).item_id == 'a1'
    tied = QTable(values={(STATE, 'a3'): 0.5, (STATE, 'a2'): 0.5})
    assert tied.greedy_action(STATE, ACTIONS).item_id == 'a2'
    with pytest.raises(InvalidInputError):
        table.greedy_action(STATE, [])


def test_greedy_invariant_under_shift():
    rng = np.random.default_rng(3)
    for _ in range(50):
        values = {(STATE, a.item_id): float(rng.random()) for a in ACTIONS}
        shifted = {key: value + 2.5 for key, value in values.items()}
        assert QTable(values=values).greedy_action(STATE, ACTIONS) == \
            QTable(values=shifted).greedy_action(STATE, ACTIONS)


def test_ranked_skips_excluded():
    table = QTable(values={(STATE, 'a3'): 0.9, (STATE, 'a1'): 0.2})
    assert [a.item_id for a in table.ranked(STATE, ACTIONS)] == ['a3', 'a1', 'a2']
    assert [a.item_id for a in table.ranked(STATE, ACTIONS, exclude=[ACTIONS[2]])] == ['a1', 'a2']


def test_snapshot_persistence(tmp_path):
    rng = np.random.default_rng(5)
    table = QTable(RlConfig(learning_rate_alpha=0.3))
    for _ in range(50):
        table.update(STATE if rng.random() < 0.5 else OTHER_STATE, ACTIONS[int(rng.integers(3))],
                     float(rng.random()), OTHER_STATE, ACTIONS)
    path = tmp_path / 'q.jsonl'
    assert save_qtable(table, path) == len(table)
    loaded = load_qtable(path, table.config)
    assert loaded == table

    again = tmp_path / 'q2.jsonl'
    save_qtable(loaded, again)
    assert path.read_bytes() == again.read_bytes()


def test_snapshot_validation(tmp_path):
    path = tmp_path / 'q.jsonl'
    save_qtable(QTable(values={(STATE, 'a1'): 1.0}), path)
    alphabets = Alphabets(('am', 'pm'), ('work', 'rest'), ('g',))
    assert len(load_qtable(path, alphabets=alphabets, item_ids=('a1',))) == 1
    with pytest.raises(InvalidInputError):
        load_qtable(path, item_ids=('zz',))
    with pytest.raises(UnknownSymbolError):
        load_qtable(path, alphabets=Alphabets(('night',), ('work',), ('g',)))

    bad = tmp_path / 'bad.jsonl'
    bad.write_text('{"time_slot": "am"}\n')
    with pytest.raises(InvalidInputError):
        load_qtable(bad)


def _run_bandit(seed, steps=20000, epsilon=0.1):
    """Single-state, three-armed Bernoulli bandit under epsilon-greedy Q-learning.

    Returns the final table and the mean Q-value of every arm over the second half.
    """
    means = {'a1': 0.2, 'a2': 0.5, 'a3': 0.8}
    rng = np.random.default_rng(seed)
    table = QTable(RlConfig(learning_rate_alpha=0.1, discount_gamma=0.0))
    totals = dict.fromkeys(means, 0.0)
    for step in range(steps):
        action, _ = select_ql(table, STATE, ACTIONS, epsilon, rng)
        reward = float(rng.random() < means[action.item_id])
        table.update(STATE, action, reward, STATE, ACTIONS)
        if step >= steps // 2:
            for item_id in totals:
                totals[item_id] += table.values.get((STATE, item_id), 0.0)
    averaged = {item_id: total / (steps - steps // 2) for item_id, total in totals.items()}
    return table, averaged


def _converged(averaged):
    best = max(averaged, key=averaged.get)
    return best == 'a3' and abs(averaged['a3'] - 0.8) <= 0.05


@pytest.mark.parametrize('seed', [0, 1, 2])
def test_bandit_converges(seed):
    _, averaged = _run_bandit(seed)
    assert _converged(averaged)


@mark.slow
def test_bandit_converges_over_seeds():
    converged = sum(_converged(_run_bandit(seed)[1]) for seed in range(100))
    assert converged >= 95


def test_select_ql_marks_exploration():
    rng = np.random.default_rng(0)
    _, branch = select_ql(QTable(), STATE, ACTIONS, 1.0, rng)
    assert branch is Branch.EXPLORE_RANDOM
