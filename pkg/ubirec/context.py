# ubirec/context.py
# Context states, actions, transactions and user profiles shared by every module

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, UnknownItemError, UnknownSymbolError
from .utils import read_jsonl, write_jsonl

logger = logging.getLogger(__name__)

# Field order of a transaction log record; fixed so logs round-trip byte-identically.
TRANSACTION_FIELDS = ('user_id', 'item_id', 'rating')


@dataclass(frozen=True, order=True)
class ContextState:
    """Discrete (time, social, cognitive) context; the MDP state."""
    time_slot: str
    social_group: str
    cognitive_tag: str

    def cell(self):
        """(time_slot, cognitive_tag): the part of the state a group member varies over."""
        return self.time_slot, self.cognitive_tag

    def as_dict(self):
        return {
            'time_slot': self.time_slot,
            'social_group': self.social_group,
            'cognitive_tag': self.cognitive_tag,
        }


@dataclass(frozen=True)
class Alphabets:
    """Per-dimension symbol lists declared by a scenario."""
    time_slot: tuple
    cognitive_tag: tuple
    social_group: tuple

    def state(self, time_slot, social_group, cognitive_tag):
        """Builds a ContextState, rejecting out-of-alphabet symbols."""
        for dimension, symbol in (('time_slot', time_slot),
                                  ('social_group', social_group),
                                  ('cognitive_tag', cognitive_tag)):
            if symbol not in getattr(self, dimension):
                raise UnknownSymbolError(symbol, dimension)
        return ContextState(time_slot, social_group, cognitive_tag)

    def validate(self, state):
        """Returns the state unchanged if every field is in-alphabet."""
        return self.state(state.time_slot, state.social_group, state.cognitive_tag)

    def cells(self):
        """Every (time_slot, cognitive_tag) pair in declaration order."""
        return [(t, c) for t in self.time_slot for c in self.cognitive_tag]


@dataclass(frozen=True)
class Action:
    """A recommendable resource."""
    item_id: str
    label: str = ''

    def __str__(self):
        return self.item_id


@dataclass(frozen=True)
class Transaction:
    """<user id, item, rating> record under the implicit 1/0 regime."""
    user_id: str
    item_id: str
    rating: int = 1

    def __post_init__(self):
        if self.rating not in (0, 1):
            raise InvalidInputError(f"Implicit rating must be 0 or 1, got {self.rating!r}")

    def as_record(self):
        return {'user_id': self.user_id, 'item_id': self.item_id, 'rating': int(self.rating)}


@dataclass(frozen=True, eq=False)
class UserProfile:
    """Dense implicit-rating vector of one user over the scenario's item set."""
    user_id: str
    social_group: str
    item_ids: tuple
    ratings: np.ndarray = field(repr=False)

    def __post_init__(self):
        ratings = np.asarray(self.ratings, dtype=float)
        if ratings.shape != (len(self.item_ids),):
            raise InvalidInputError(
                f"Profile of '{self.user_id}' has {ratings.shape} ratings for {len(self.item_ids)} items")
        ratings.setflags(write=False)
        object.__setattr__(self, 'ratings', ratings)

    def __eq__(self, other):
        if not isinstance(other, UserProfile):
            return NotImplemented
        return (self.user_id == other.user_id
                and self.social_group == other.social_group
                and self.item_ids == other.item_ids
                and np.array_equal(self.ratings, other.ratings))

    def __hash__(self):
        return hash((self.user_id, self.social_group, self.item_ids, self.ratings.tobytes()))

    def is_empty(self):
        """True for a cold-start profile (no recorded preference)."""
        return not self.ratings.any()


def item_index(item_set):
    """Maps item_id to its position in the ordered item set."""
    return {action.item_id: position for position, action in enumerate(item_set)}


def build_profile(transactions, user_id, item_set, social_group=''):
    """Folds a transaction log into the dense profile of one user (most-recent-wins)."""
    positions = item_index(item_set)
    ratings = np.zeros(len(positions), dtype=float)
    for transaction in transactions:
        position = positions.get(transaction.item_id)
        if position is None:
            raise UnknownItemError(transaction.item_id)
        if transaction.user_id == user_id:
            ratings[position] = transaction.rating
    return UserProfile(user_id, social_group, tuple(positions), ratings)


# --- Transaction log persistence ---
def write_transaction_log(path, transactions):
    """Writes transactions as line-delimited records in log order."""
    return write_jsonl(path, (t.as_record() for t in transactions))


def read_transaction_log(path):
    """Reads a transaction log written by write_transaction_log."""
    transactions = []
    for record in read_jsonl(path):
        missing = [name for name in TRANSACTION_FIELDS if name not in record]
        if missing:
            raise InvalidInputError(f"Transaction record missing {', '.join(missing)}: {record}")
        transactions.append(Transaction(str(record['user_id']), str(record['item_id']), record['rating']))
    logger.debug("Read %d transactions from %s", len(transactions), path)
    return transactions
