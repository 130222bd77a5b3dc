# ubirec/rl.py
# Tabular Q-learning: Q-table, one-step update, greedy selection and snapshots

import logging
import math
from dataclasses import dataclass

from .config import DEFAULT_ALPHA, DEFAULT_GAMMA, DEFAULT_INITIAL_Q
from .context import ContextState
from .errors import InvalidInputError
from .utils import read_jsonl, write_jsonl

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RlConfig:
    """Learning rate, discount and the value unseen entries read as."""
    learning_rate_alpha: float = DEFAULT_ALPHA
    discount_gamma: float = DEFAULT_GAMMA
    initial_q: float = DEFAULT_INITIAL_Q

    def __post_init__(self):
        # alpha = 0 turns update into the identity
        if not 0.0 <= self.learning_rate_alpha <= 1.0:
            raise InvalidInputError(f"learning_rate_alpha must be in [0, 1], got {self.learning_rate_alpha}")
        if not 0.0 <= self.discount_gamma < 1.0:
            raise InvalidInputError(f"discount_gamma must be in [0, 1), got {self.discount_gamma}")
        if not math.isfinite(self.initial_q):
            raise InvalidInputError(f"initial_q must be finite, got {self.initial_q}")


def _require_actions(action_set):
    if not action_set:
        raise InvalidInputError("Action set is empty")


class QTable:
    """Map from (ContextState, item_id) to Q(s, a); missing entries read as initial_q.

    A table is owned by one simulation run and updated in place.
    """

    def __init__(self, config=None, values=None):
        self.config = config or RlConfig()
        self.values = dict(values or {})

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, QTable):
            return NotImplemented
        return self.config == other.config and self.values == other.values

    def __repr__(self):
        return f'<QTable {len(self.values)} entries alpha={self.config.learning_rate_alpha} gamma={self.config.discount_gamma}>'

    def snapshot(self):
        """Copy of the stored entries, for frame-property checks."""
        return dict(self.values)

    def is_pristine(self):
        """True when every entry still reads as initial_q."""
        return all(value == self.config.initial_q for value in self.values.values())

    def q_value(self, s, a):
        return self.values.get((s, a.item_id), self.config.initial_q)

    def max_q(self, s, action_set):
        _require_actions(action_set)
        return max(self.q_value(s, a) for a in action_set)

    def update(self, s, a, reward, s_next, action_set):
        """Watkins one-step update of the (s, a) entry; returns the table."""
        _require_actions(action_set)
        if not math.isfinite(reward):
            raise InvalidInputError(f"Reward must be finite, got {reward}")
        alpha = self.config.learning_rate_alpha
        gamma = self.config.discount_gamma
        current = self.q_value(s, a)
        target = reward + gamma * self.max_q(s_next, action_set)
        self.values[(s, a.item_id)] = current + alpha * (target - current)
        return self

    def greedy_action(self, s, action_set):
        """argmax_a Q(s, a), ties broken by ascending item_id."""
        _require_actions(action_set)
        best = None
        best_value = -math.inf
        for action in sorted(action_set, key=lambda a: a.item_id):
            value = self.q_value(s, action)
            if value > best_value:
                best, best_value = action, value
        return best

    def ranked(self, s, action_set, exclude=()):
        """Actions by descending Q(s, .), ties by item_id, skipping ``exclude``."""
        skipped = {a.item_id for a in exclude}
        remaining = [a for a in action_set if a.item_id not in skipped]
        return sorted(remaining, key=lambda a: (-self.q_value(s, a), a.item_id))


# --- Snapshot persistence ---
def save_qtable(table, path):
    """Writes one record per stored entry, sorted by state then item_id.

    Floats go through json's repr, so reloading gives back the identical table.
    """
    records = []
    for (state, item_id), value in sorted(table.values.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        record = state.as_dict()
        record['item_id'] = item_id
        record['value'] = value
        records.append(record)
    count = write_jsonl(path, records)
    logger.info("Saved Q-table snapshot with %d entries to %s", count, path)
    return count


def load_qtable(path, config=None, alphabets=None, item_ids=None):
    """Reads a snapshot written by save_qtable.

    When ``alphabets``/``item_ids`` are given, every stored key is validated against them.
    """
    values = {}
    for record in read_jsonl(path):
        try:
            state = ContextState(record['time_slot'], record['social_group'], record['cognitive_tag'])
            item_id = record['item_id']
            value = float(record['value'])
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidInputError(f"Malformed Q-table record {record}: {e}") from e
        if alphabets is not None:
            alphabets.validate(state)
        if item_ids is not None and item_id not in item_ids:
            raise InvalidInputError(f"Q-table entry for unknown item '{item_id}'")
        values[(state, item_id)] = value
    logger.info("Loaded Q-table snapshot with %d entries from %s", len(values), path)
    return QTable(config, values)
