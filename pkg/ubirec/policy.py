# ubirec/policy.py
# Action selection: greedy, epsilon-greedy, pure CF and the CF-QL hybrid

import logging
from dataclasses import dataclass
from enum import Enum

from .cf import RecommendationList, top_n
from .config import DEFAULT_EPSILON_END, DEFAULT_EPSILON_START
from .errors import InvalidInputError

logger = logging.getLogger(__name__)


class Algorithm(str, Enum):
    """Policy controlling the recommender during a run."""
    CF = "cf"
    QL = "ql"
    CFQL = "cfql"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            choices = ', '.join(a.value for a in cls)
            raise InvalidInputError(f"Unknown algorithm '{value}' (expected one of: {choices})") from None


class Branch(str, Enum):
    """How one list position was filled."""
    EXPLOIT = "exploit"
    EXPLORE_RANDOM = "explore_random"
    EXPLORE_CF = "explore_cf"
    CF_ONLY = "cf_only"

    @property
    def is_exploration(self):
        return self in (Branch.EXPLORE_RANDOM, Branch.EXPLORE_CF)


@dataclass(frozen=True)
class PolicyConfig:
    """Linear epsilon decay from epsilon_start to epsilon_end over decay_trials."""
    epsilon_start: float = DEFAULT_EPSILON_START
    epsilon_end: float = DEFAULT_EPSILON_END
    decay_trials: int = 100
    algorithm: Algorithm = Algorithm.CFQL

    def __post_init__(self):
        for name in ('epsilon_start', 'epsilon_end'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidInputError(f"{name} must be in [0, 1], got {value}")
        if self.epsilon_end > self.epsilon_start:
            raise InvalidInputError(
                f"epsilon_end ({self.epsilon_end}) must not exceed epsilon_start ({self.epsilon_start})")
        if int(self.decay_trials) < 1:
            raise InvalidInputError(f"decay_trials must be a positive integer, got {self.decay_trials}")
        object.__setattr__(self, 'algorithm', Algorithm.parse(self.algorithm))


@dataclass(frozen=True)
class SelectionTrace:
    """A recommended list with the branch that produced each position."""
    chosen: tuple
    branches: tuple
    epsilon_used: float

    def __post_init__(self):
        if len(self.chosen) != len(self.branches):
            raise InvalidInputError("SelectionTrace needs one branch per chosen action")

    def item_ids(self):
        return [action.item_id for action in self.chosen]


def epsilon_at(config, trial_index):
    """Exploration rate at a trial: start - (start - end) * min(t, horizon) / horizon."""
    t = max(0, int(trial_index))
    if t == 0:
        return config.epsilon_start
    if t >= config.decay_trials:
        return config.epsilon_end
    return config.epsilon_start - (config.epsilon_start - config.epsilon_end) * (t / config.decay_trials)


def _check_selection_inputs(actions, epsilon):
    if not actions:
        raise InvalidInputError("Action set is empty")
    if not 0.0 <= epsilon <= 1.0:
        raise InvalidInputError(f"epsilon must be in [0, 1], got {epsilon}")


def _random_action(actions, rng):
    return actions[int(rng.integers(len(actions)))]


def select_ql(table, s, actions, epsilon, rng):
    """Epsilon-greedy: explore uniformly with probability epsilon, else exploit."""
    actions = list(actions)
    _check_selection_inputs(actions, epsilon)
    if rng.random() < epsilon:
        return _random_action(actions, rng), Branch.EXPLORE_RANDOM
    return table.greedy_action(s, actions), Branch.EXPLOIT


def select_cf(model, target, actions, n):
    """Top-n CF ranking for the target over the given actions.

    A model holding nobody from the target's group has no neighbors to offer:
    the ranking is the first n actions by item_id, without evidence.
    """
    allowed = {action.item_id for action in actions}
    if model.group_restriction and target.social_group not in model.groups():
        logger.debug("No profile from group '%s' in the CF model", target.social_group)
        return RecommendationList(tuple((item_id, 0.0) for item_id in sorted(allowed)[:n]), False)
    exclude = frozenset(item_id for item_id in model.item_ids if item_id not in allowed)
    return top_n(model, target, n, exclude=exclude)


def select_cfql(table, model, target, s, actions, epsilon, rng):
    """Epsilon-greedy whose exploratory action comes from CF instead of chance.

    The exploratory pick is the CF top-1, or the CF top-2 when the top-1 is the
    greedy action. Without CF evidence it falls back to a uniform random action,
    drawing from ``rng`` exactly as select_ql does.
    """
    actions = list(actions)
    _check_selection_inputs(actions, epsilon)
    if rng.random() >= epsilon:
        return table.greedy_action(s, actions), Branch.EXPLOIT
    greedy = table.greedy_action(s, actions)
    ranking = select_cf(model, target, actions, 2)
    if ranking.evidence:
        by_id = {action.item_id: action for action in actions}
        for item_id, _ in ranking:
            if item_id != greedy.item_id:
                return by_id[item_id], Branch.EXPLORE_CF
    logger.debug("No CF evidence for '%s' in %s, exploring at random", target.user_id, s)
    return _random_action(actions, rng), Branch.EXPLORE_RANDOM


def select_list(algorithm, actions, n, table=None, model=None, target=None, s=None, epsilon=0.0, rng=None):
    """Builds an n-item recommendation list for one trial.

    Position 1 follows the algorithm's single-action rule; the remaining
    positions are filled by descending Q-value (QL, CFQL) or by descending CF
    prediction (CF), never repeating an item.
    """
    algorithm = Algorithm.parse(algorithm)
    actions = list(actions)
    if n < 1 or n > len(actions):
        raise InvalidInputError(f"Cannot recommend {n} items from {len(actions)} actions")

    if algorithm is Algorithm.CF:
        ranking = select_cf(model, target, actions, n)
        by_id = {action.item_id: action for action in actions}
        chosen = tuple(by_id[item_id] for item_id in ranking.item_ids())
        return SelectionTrace(chosen, (Branch.CF_ONLY,) * len(chosen), 0.0)

    if algorithm is Algorithm.QL:
        first, branch = select_ql(table, s, actions, epsilon, rng)
    else:
        first, branch = select_cfql(table, model, target, s, actions, epsilon, rng)
    fill = table.ranked(s, actions, exclude=[first])[:n - 1]
    return SelectionTrace((first,) + tuple(fill), (branch,) + (Branch.EXPLOIT,) * len(fill), epsilon)
