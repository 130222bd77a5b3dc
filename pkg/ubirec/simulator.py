# ubirec/simulator.py
# Context simulator: scenario loading, scripted events and simulated users

import json
import logging
import os
from dataclasses import dataclass, field, replace
from numbers import Real

import numpy as np

from .config import Config, DEFAULT_SCENARIO_SETTINGS
from .context import Action, Alphabets, Transaction
from .errors import InvalidInputError, ScenarioError, UnknownItemError, UnknownSymbolError
from .policy import PolicyConfig
from .rl import RlConfig
from .utils import line_of_key

logger = logging.getLogger(__name__)

REQUIRED_KEYS = (
    'name', 'item_set', 'alphabets', 'groups', 'target_user',
    'preference_model', 'event_sequence', 'trials',
)
OPTIONAL_KEYS = ('description', 'history_contexts') + tuple(DEFAULT_SCENARIO_SETTINGS)
GROUP_RULE_PREFIX = 'group:'


@dataclass(frozen=True, eq=False)
class AcceptTable:
    """P_accept(item | time_slot, cognitive_tag) for one user, shape (time, cognitive, item)."""
    alphabets: Alphabets
    item_ids: tuple
    probabilities: np.ndarray = field(repr=False)

    def __post_init__(self):
        probabilities = np.asarray(self.probabilities, dtype=float)
        expected = (len(self.alphabets.time_slot), len(self.alphabets.cognitive_tag), len(self.item_ids))
        if probabilities.shape != expected:
            raise InvalidInputError(f"Accept table has shape {probabilities.shape}, expected {expected}")
        if probabilities.size and (probabilities.min() < 0.0 or probabilities.max() > 1.0):
            raise InvalidInputError("Accept probabilities must lie in [0, 1]")
        probabilities.setflags(write=False)
        object.__setattr__(self, 'probabilities', probabilities)

    def row(self, s):
        """Acceptance probability of every item in state s."""
        t = self.alphabets.time_slot.index(s.time_slot)
        c = self.alphabets.cognitive_tag.index(s.cognitive_tag)
        return self.probabilities[t, c]

    def p_accept(self, item_id, s):
        try:
            position = self.item_ids.index(item_id)
        except ValueError:
            raise UnknownItemError(item_id) from None
        return float(self.row(s)[position])


@dataclass(frozen=True)
class SimulatedUser:
    """A user answering recommendations from a ground-truth accept table."""
    user_id: str
    accept_table: AcceptTable


@dataclass(frozen=True, eq=False)
class Scenario:
    """A validated, immutable experiment script."""
    name: str
    item_set: tuple
    alphabets: Alphabets
    groups: tuple
    target_user: str
    target_group: str
    preference_model: dict
    group_coherence_rho: float
    event_sequence: tuple
    trials: int
    n_recommend: int
    seeds: tuple
    history_trials_per_colleague: int
    history_contexts: tuple = ()
    position_discount: float = DEFAULT_SCENARIO_SETTINGS['position_discount']
    neighborhood_size_k: int = DEFAULT_SCENARIO_SETTINGS['neighborhood_size_k']
    group_restriction: bool = DEFAULT_SCENARIO_SETTINGS['group_restriction']
    rl_config: RlConfig = field(default_factory=RlConfig)
    epsilon_start: float = DEFAULT_SCENARIO_SETTINGS['epsilon_start']
    epsilon_end: float = DEFAULT_SCENARIO_SETTINGS['epsilon_end']
    decay_trials: int = None
    description: str = ''

    def item_ids(self):
        return tuple(action.item_id for action in self.item_set)

    def members(self):
        """user_id -> social_group for every user, target included."""
        members = {}
        for group_id, member_ids in self.groups:
            for user_id in member_ids:
                members[user_id] = group_id
        members[self.target_user] = self.target_group
        return members

    def colleagues(self):
        """(user_id, group_id) of every non-target user, in declaration order."""
        return [(user_id, group_id)
                for group_id, member_ids in self.groups
                for user_id in member_ids
                if user_id != self.target_user]

    def accept_table(self, user_id):
        return self.preference_model[user_id]

    def policy_config(self, algorithm):
        return PolicyConfig(self.epsilon_start, self.epsilon_end,
                            self.trials if self.decay_trials is None else self.decay_trials, algorithm)

    def history_pool(self):
        """Events colleague histories are sampled from."""
        if not self.history_contexts:
            return list(self.event_sequence)
        cells = set(self.history_contexts)
        return [s for s in self.event_sequence if s.cell() in cells]

    def with_overrides(self, trials=None, n_recommend=None):
        """Copy with CLI overrides applied and re-checked."""
        updated = replace(
            self,
            trials=self.trials if trials is None else int(trials),
            n_recommend=self.n_recommend if n_recommend is None else int(n_recommend),
        )
        _check_run_shape(updated)
        return updated


def _check_run_shape(scenario, text=None):
    def fail(message, field):
        raise ScenarioError(message, field=field, line=line_of_key(text, field))

    if scenario.trials < 1:
        fail("trials must be a positive integer", "trials")
    if len(scenario.event_sequence) < scenario.trials:
        fail(f"event_sequence has {len(scenario.event_sequence)} events for {scenario.trials} trials",
             "event_sequence")
    if not 1 <= scenario.n_recommend <= len(scenario.item_set):
        fail(f"n_recommend must be between 1 and {len(scenario.item_set)}, got {scenario.n_recommend}",
             "n_recommend")


# --- Scenario loading ---
def bundled_scenario_path(name):
    """Path of a scenario shipped with the package, e.g. 'nomalys'."""
    return os.path.join(Config.SCENARIO_DIR, f"{name}.json")


def load_scenario(source):
    """Loads and validates a scenario from a file path or a bundled scenario name."""
    path = source
    if not os.path.isfile(path):
        bundled = bundled_scenario_path(source)
        if os.path.isfile(bundled):
            path = bundled
        else:
            raise ScenarioError(f"Scenario file not found: {source}")
    with open(path, 'r', encoding='utf-8') as fh:
        text = fh.read()
    scenario = parse_scenario(text, source=path)
    logger.info("Loaded scenario '%s' from %s", scenario.name, path)
    return scenario


def parse_scenario(text, source='<string>'):
    """Validates a scenario document (JSON text) into a Scenario."""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"Malformed scenario document {source}: {e.msg}", line=e.lineno) from e
    return _ScenarioParser(document, text).parse()


class _ScenarioParser:
    """Walks a decoded scenario document, raising ScenarioError with field and line."""

    def __init__(self, document, text):
        self.document = document
        self.text = text

    def fail(self, message, field, key=None):
        key = key or field.split('.')[0].split('[')[0]
        raise ScenarioError(message, field=field, line=line_of_key(self.text, key))

    def require(self, key, kinds, field=None, container=None):
        container = self.document if container is None else container
        field = field or key
        if key not in container:
            self.fail("Missing required key", field, key)
        value = container[key]
        if isinstance(value, bool) and bool not in kinds:
            self.fail(f"Expected {'/'.join(k.__name__ for k in kinds)}, got bool", field, key)
        if not isinstance(value, kinds):
            self.fail(f"Expected {'/'.join(k.__name__ for k in kinds)}, got {type(value).__name__}", field, key)
        return value

    def setting(self, key, kinds):
        if key in self.document:
            if self.document[key] is None:
                return None
            return self.require(key, kinds)
        return DEFAULT_SCENARIO_SETTINGS[key]

    def parse(self):
        if not isinstance(self.document, dict):
            raise ScenarioError("Scenario document must be a JSON object", line=1)
        for key in self.document:
            if key not in REQUIRED_KEYS and key not in OPTIONAL_KEYS:
                self.fail("Unknown top-level key", key)

        name = self.require('name', (str,))
        item_set = self.parse_items()
        groups, target_user, target_group = self.parse_groups()
        alphabets = self.parse_alphabets(groups, target_group)
        events = self.parse_events(alphabets, target_group)
        item_ids = tuple(action.item_id for action in item_set)
        preference_model = self.parse_preferences(alphabets, item_ids, groups, target_user)

        trials = self.require('trials', (int,))
        rho = self.probability('group_coherence_rho')
        discount = self.probability('position_discount')
        if discount <= 0.0:
            self.fail("position_discount must be in (0, 1]", 'position_discount')
        history_trials = self.setting('history_trials_per_colleague', (int,))
        if history_trials < 0:
            self.fail("history_trials_per_colleague must be >= 0", 'history_trials_per_colleague')
        seeds = self.setting('seeds', (list,))
        if not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
            self.fail("seeds must be a non-empty list of integers", 'seeds')
        k = self.setting('neighborhood_size_k', (int,))
        if k < 1:
            self.fail("neighborhood_size_k must be >= 1", 'neighborhood_size_k')

        try:
            rl_config = RlConfig(
                float(self.setting('learning_rate_alpha', (int, float))),
                float(self.setting('discount_gamma', (int, float))),
                float(self.setting('initial_q', (int, float))),
            )
            epsilon_start = float(self.setting('epsilon_start', (int, float)))
            epsilon_end = float(self.setting('epsilon_end', (int, float)))
            decay_trials = self.setting('decay_trials', (int,))
            if decay_trials is not None and decay_trials < 1:
                self.fail("decay_trials must be a positive integer", 'decay_trials')
            PolicyConfig(epsilon_start, epsilon_end, max(trials, 1) if decay_trials is None else decay_trials)
        except ScenarioError:
            raise
        except InvalidInputError as e:
            raise ScenarioError(str(e)) from e

        scenario = Scenario(
            name=name,
            item_set=item_set,
            alphabets=alphabets,
            groups=groups,
            target_user=target_user,
            target_group=target_group,
            preference_model=preference_model,
            group_coherence_rho=rho,
            event_sequence=events,
            trials=trials,
            n_recommend=self.setting('n_recommend', (int,)),
            seeds=tuple(seeds),
            history_trials_per_colleague=history_trials,
            history_contexts=self.parse_history_contexts(alphabets),
            position_discount=discount,
            neighborhood_size_k=k,
            group_restriction=self.setting('group_restriction', (bool,)),
            rl_config=rl_config,
            epsilon_start=epsilon_start,
            epsilon_end=epsilon_end,
            decay_trials=decay_trials,
            description=self.document.get('description', ''),
        )
        _check_run_shape(scenario, self.text)
        return scenario

    def probability(self, key):
        value = float(self.setting(key, (int, float)))
        if not 0.0 <= value <= 1.0:
            self.fail(f"{key} must be in [0, 1], got {value}", key)
        return value

    def parse_items(self):
        entries = self.require('item_set', (list,))
        if not entries:
            self.fail("item_set must not be empty", 'item_set')
        items = []
        seen = set()
        for i, entry in enumerate(entries):
            field = f'item_set[{i}]'
            if isinstance(entry, str):
                entry = {'item_id': entry}
            if not isinstance(entry, dict):
                self.fail("Expected an item object", field, 'item_set')
            item_id = self.require('item_id', (str,), field=f'{field}.item_id', container=entry)
            if item_id in seen:
                self.fail(f"Duplicate item_id '{item_id}'", f'{field}.item_id', 'item_set')
            seen.add(item_id)
            items.append(Action(item_id, str(entry.get('label', ''))))
        return tuple(items)

    def parse_groups(self):
        entries = self.require('groups', (list,))
        groups = []
        seen = set()
        for i, entry in enumerate(entries):
            field = f'groups[{i}]'
            if not isinstance(entry, dict):
                self.fail("Expected a group object", field, 'groups')
            group_id = self.require('group_id', (str,), field=f'{field}.group_id', container=entry)
            members = self.require('members', (list,), field=f'{field}.members', container=entry)
            for user_id in members:
                if not isinstance(user_id, str):
                    self.fail("Member ids must be strings", f'{field}.members', 'groups')
                if user_id in seen:
                    self.fail(f"User '{user_id}' belongs to more than one group", f'{field}.members', 'groups')
                seen.add(user_id)
            groups.append((group_id, tuple(members)))
        target = self.require('target_user', (dict,))
        target_user = self.require('user_id', (str,), field='target_user.user_id', container=target)
        target_group = self.require('group_id', (str,), field='target_user.group_id', container=target)
        if target_group not in {group_id for group_id, _ in groups}:
            raise UnknownSymbolError(target_group, 'social_group', field='target_user.group_id',
                                     line=line_of_key(self.text, 'target_user'))
        for group_id, members in groups:
            if target_user in members and group_id != target_group:
                self.fail(f"Target '{target_user}' is listed in group '{group_id}'", 'target_user')
        return tuple(groups), target_user, target_group

    def parse_alphabets(self, groups, target_group):
        declared = self.require('alphabets', (dict,))
        symbols = {}
        for dimension in ('time_slot', 'cognitive_tag'):
            values = self.require(dimension, (list,), field=f'alphabets.{dimension}', container=declared)
            if not values or not all(isinstance(v, str) for v in values) or len(set(values)) != len(values):
                self.fail("Alphabet must be a non-empty list of distinct strings", f'alphabets.{dimension}', 'alphabets')
            symbols[dimension] = tuple(values)
        social = tuple(group_id for group_id, _ in groups)
        if 'social_group' in declared and tuple(declared['social_group']) != social:
            self.fail("social_group alphabet must list the declared groups", 'alphabets.social_group', 'alphabets')
        return Alphabets(symbols['time_slot'], symbols['cognitive_tag'], social)

    def state_from(self, entry, alphabets, default_group, field):
        if isinstance(entry, list) and len(entry) == 2:
            time_slot, cognitive_tag = entry
            social_group = default_group
        elif isinstance(entry, dict):
            time_slot = entry.get('time_slot')
            cognitive_tag = entry.get('cognitive_tag')
            social_group = entry.get('social_group', default_group)
        else:
            self.fail("Expected [time_slot, cognitive_tag] or a state object", field)
        try:
            return alphabets.state(time_slot, social_group, cognitive_tag)
        except UnknownSymbolError as e:
            raise UnknownSymbolError(e.symbol, e.dimension, field=field,
                                     line=line_of_key(self.text, field.split('[')[0])) from None

    def parse_events(self, alphabets, target_group):
        raw = self.document.get('event_sequence')
        if isinstance(raw, dict):
            repeat = self.require('repeat', (int,), field='event_sequence.repeat', container=raw)
            pattern = self.require('pattern', (list,), field='event_sequence.pattern', container=raw)
            if repeat < 1:
                self.fail("repeat must be >= 1", 'event_sequence.repeat', 'event_sequence')
            raw = pattern * repeat
        elif not isinstance(raw, list):
            self.fail("event_sequence must be a list or a {repeat, pattern} object", 'event_sequence')
        return tuple(self.state_from(entry, alphabets, target_group, f'event_sequence[{i}]')
                     for i, entry in enumerate(raw))

    def parse_history_contexts(self, alphabets):
        raw = self.document.get('history_contexts') or []
        cells = []
        for i, entry in enumerate(raw):
            field = f'history_contexts[{i}]'
            if not (isinstance(entry, list) and len(entry) == 2):
                self.fail("Expected [time_slot, cognitive_tag]", field, 'history_contexts')
            time_slot, cognitive_tag = entry
            if time_slot not in alphabets.time_slot:
                raise UnknownSymbolError(time_slot, 'time_slot', field=field,
                                         line=line_of_key(self.text, 'history_contexts'))
            if cognitive_tag not in alphabets.cognitive_tag:
                raise UnknownSymbolError(cognitive_tag, 'cognitive_tag', field=field,
                                         line=line_of_key(self.text, 'history_contexts'))
            cells.append((time_slot, cognitive_tag))
        return tuple(cells)

    def compile_rules(self, rules, base, alphabets, item_ids, field, key):
        """Applies accept rules in order on top of ``base``; later rules win."""
        table = base.copy()
        if not isinstance(rules, list):
            self.fail("Expected a list of rules", field, key)
        for i, rule in enumerate(rules):
            rule_field = f'{field}[{i}]'
            if not isinstance(rule, dict) or not isinstance(rule.get('accept'), dict):
                self.fail("Rule needs an 'accept' object", rule_field, key)
            when = rule.get('when') or {}
            unknown = set(when) - {'time_slot', 'cognitive_tag'}
            if unknown:
                self.fail(f"Unsupported condition(s): {', '.join(sorted(unknown))}", f'{rule_field}.when', key)
            rows = range(len(alphabets.time_slot))
            cols = range(len(alphabets.cognitive_tag))
            if 'time_slot' in when:
                if when['time_slot'] not in alphabets.time_slot:
                    raise UnknownSymbolError(when['time_slot'], 'time_slot', field=f'{rule_field}.when',
                                             line=line_of_key(self.text, key))
                rows = [alphabets.time_slot.index(when['time_slot'])]
            if 'cognitive_tag' in when:
                if when['cognitive_tag'] not in alphabets.cognitive_tag:
                    raise UnknownSymbolError(when['cognitive_tag'], 'cognitive_tag', field=f'{rule_field}.when',
                                             line=line_of_key(self.text, key))
                cols = [alphabets.cognitive_tag.index(when['cognitive_tag'])]
            for item_id, p in rule['accept'].items():
                item_field = f'{rule_field}.accept.{item_id}'
                if item_id not in item_ids:
                    self.fail(f"Unknown item '{item_id}'", item_field, key)
                if isinstance(p, bool) or not isinstance(p, Real) or not 0.0 <= p <= 1.0:
                    self.fail(f"P_accept must be a number in [0, 1], got {p!r}", item_field, key)
                position = item_ids.index(item_id)
                for r in rows:
                    for c in cols:
                        table[r, c, position] = float(p)
        return table

    def parse_preferences(self, alphabets, item_ids, groups, target_user):
        model = self.require('preference_model', (dict,))
        shape = (len(alphabets.time_slot), len(alphabets.cognitive_tag), len(item_ids))
        group_ids = {group_id for group_id, _ in groups}
        members = {user_id: group_id for group_id, ids in groups for user_id in ids}
        for key in model:
            if key.startswith(GROUP_RULE_PREFIX):
                if key[len(GROUP_RULE_PREFIX):] not in group_ids:
                    self.fail(f"Rules for unknown group '{key}'", f'preference_model.{key}', key)
            elif key not in members and key != target_user:
                self.fail(f"Rules for unknown user '{key}'", f'preference_model.{key}', key)

        group_tables = {}
        for group_id in group_ids:
            key = f'{GROUP_RULE_PREFIX}{group_id}'
            group_tables[group_id] = self.compile_rules(
                model.get(key, []), np.zeros(shape), alphabets, item_ids, f'preference_model.{key}', key)

        tables = {}
        for user_id, group_id in members.items():
            if user_id == target_user:
                continue
            probabilities = self.compile_rules(
                model.get(user_id, []), group_tables[group_id], alphabets, item_ids,
                f'preference_model.{user_id}', user_id)
            tables[user_id] = AcceptTable(alphabets, item_ids, probabilities)
        if target_user in model:
            target_group = self.document['target_user']['group_id']
            probabilities = self.compile_rules(
                model[target_user], group_tables[target_group], alphabets, item_ids,
                f'preference_model.{target_user}', target_user)
            tables[target_user] = AcceptTable(alphabets, item_ids, probabilities)
        return tables


# --- Ground truth for the target user ---
def group_mean_table(scenario, group_id):
    """Mean accept table over the colleagues of a group."""
    tables = [scenario.accept_table(user_id).probabilities
              for user_id, member_group in scenario.colleagues() if member_group == group_id]
    if not tables:
        shape = (len(scenario.alphabets.time_slot), len(scenario.alphabets.cognitive_tag), len(scenario.item_set))
        return np.zeros(shape)
    return np.mean(np.stack(tables), axis=0)


def target_accept_table(scenario, rng):
    """The target's ground truth: an explicit table, or a rho-blend of the group mean.

    The blend partner keeps the group's acceptance levels but permutes them
    across items inside every context cell.
    """
    if scenario.target_user in scenario.preference_model:
        return scenario.accept_table(scenario.target_user)
    group_mean = group_mean_table(scenario, scenario.target_group)
    shuffled = np.empty_like(group_mean)
    for t in range(group_mean.shape[0]):
        for c in range(group_mean.shape[1]):
            shuffled[t, c] = rng.permutation(group_mean[t, c])
    rho = scenario.group_coherence_rho
    blended = np.clip(rho * group_mean + (1.0 - rho) * shuffled, 0.0, 1.0)
    return AcceptTable(scenario.alphabets, scenario.item_ids(), blended)


def target_user(scenario, rng):
    return SimulatedUser(scenario.target_user, target_accept_table(scenario, rng))


# --- Simulation operations ---
def generate_colleague_history(scenario, rng):
    """Samples every colleague's choices over sampled context events.

    Item i is chosen with probability proportional to P_accept(i | s); a cell
    where every probability is 0 yields no choice.
    """
    history = []
    pool = scenario.history_pool()
    if scenario.history_trials_per_colleague == 0 or not pool:
        return history
    item_ids = scenario.item_ids()
    for user_id, _ in scenario.colleagues():
        table = scenario.accept_table(user_id)
        for _ in range(scenario.history_trials_per_colleague):
            s = pool[int(rng.integers(len(pool)))]
            weights = table.row(s)
            total = weights.sum()
            if total <= 0.0:
                continue
            choice = int(rng.choice(len(item_ids), p=weights / total))
            history.append(Transaction(user_id, item_ids[choice], 1))
    logger.debug("Generated %d colleague transactions for '%s'", len(history), scenario.name)
    return history


def user_choice(user, s, recommended, rng, position_discount=DEFAULT_SCENARIO_SETTINGS['position_discount']):
    """Scans the list in rank order; rank j is taken with P_accept * discount^(j-1)."""
    ids = [action.item_id for action in recommended]
    if not ids:
        raise InvalidInputError("Recommendation list is empty")
    if len(set(ids)) != len(ids):
        raise InvalidInputError(f"Recommendation list has duplicates: {ids}")
    weight = 1.0
    for action in recommended:
        if rng.random() < user.accept_table.p_accept(action.item_id, s) * weight:
            return action
        weight *= position_discount
    return None


def next_event(scenario, trial_index):
    """(s, s_next) for a trial; the last event is its own successor."""
    if not 0 <= trial_index < scenario.trials:
        raise InvalidInputError(f"Trial {trial_index} outside 0..{scenario.trials - 1}")
    s = scenario.event_sequence[trial_index]
    if trial_index + 1 < len(scenario.event_sequence):
        return s, scenario.event_sequence[trial_index + 1]
    return s, s
