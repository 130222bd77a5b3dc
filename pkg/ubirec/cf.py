# ubirec/cf.py
# Memory-based user-user collaborative filtering over implicit 1/0 profiles

import logging
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .config import DEFAULT_GROUP_RESTRICTION, DEFAULT_NEIGHBORHOOD_K
from .context import build_profile
from .errors import InvalidInputError, UnknownItemError

logger = logging.getLogger(__name__)


class Prediction(NamedTuple):
    """Predicted rating plus whether any neighbor evidence backed it."""
    rating: float
    evidence: bool


@dataclass(frozen=True)
class RecommendationList:
    """Top-N (item_id, predicted_rating) pairs, descending, ties by ascending item_id."""
    entries: tuple = ()
    evidence: bool = False

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, index):
        return self.entries[index]

    def item_ids(self):
        return [item_id for item_id, _ in self.entries]


@dataclass(frozen=True)
class CfModel:
    """Snapshot of the stored transaction set in dense form.

    The model is never mutated; ``with_profile`` returns the next snapshot.
    """
    item_ids: tuple
    profiles: tuple = ()
    neighborhood_size_k: int = DEFAULT_NEIGHBORHOOD_K
    group_restriction: bool = DEFAULT_GROUP_RESTRICTION
    _by_user: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.neighborhood_size_k < 1:
            raise InvalidInputError(f"neighborhood_size_k must be >= 1, got {self.neighborhood_size_k}")
        by_user = {}
        for profile in self.profiles:
            if profile.user_id in by_user:
                raise InvalidInputError(f"Duplicate profile for user '{profile.user_id}'")
            if profile.item_ids != self.item_ids:
                raise InvalidInputError(f"Profile of '{profile.user_id}' is over a different item set")
            by_user[profile.user_id] = profile
        # Sorted by user_id so candidate order never depends on insertion order
        object.__setattr__(self, 'profiles', tuple(sorted(self.profiles, key=lambda p: p.user_id)))
        object.__setattr__(self, '_by_user', by_user)

    @classmethod
    def from_transactions(cls, transactions, members, item_set, **kwargs):
        """Builds a model with one profile per member from a transaction log.

        ``members`` maps user_id to social_group; members without transactions
        get an all-zero profile.
        """
        transactions = list(transactions)
        profiles = [build_profile(transactions, user_id, item_set, social_group=group)
                    for user_id, group in members.items()]
        return cls(tuple(a.item_id for a in item_set), tuple(profiles), **kwargs)

    def groups(self):
        return {profile.social_group for profile in self.profiles}

    def profile(self, user_id):
        return self._by_user.get(user_id)

    def with_profile(self, profile):
        """Returns a new snapshot with ``profile`` added or replacing the user's previous one."""
        kept = tuple(p for p in self.profiles if p.user_id != profile.user_id)
        return replace(self, profiles=kept + (profile,))


def similarity(p, q):
    """Cosine similarity of two rating vectors; 0 when either one is all-zero."""
    a, b = p.ratings, q.ratings
    if a.shape != b.shape:
        raise InvalidInputError(
            f"Cannot compare profiles of length {a.shape[0]} and {b.shape[0]}")
    denominator = np.sqrt(float(a @ a) * float(b @ b))
    if denominator == 0.0:
        return 0.0
    return float(min(1.0, max(0.0, float(a @ b) / denominator)))


def _candidates(model, target):
    if model.group_restriction:
        if target.social_group not in model.groups():
            raise InvalidInputError(f"Social group '{target.social_group}' has no profile in the model")
        return [p for p in model.profiles
                if p.user_id != target.user_id and p.social_group == target.social_group]
    return [p for p in model.profiles if p.user_id != target.user_id]


def _neighborhood(model, target):
    scored = [(p.user_id, similarity(target, p), p) for p in _candidates(model, target)]
    scored.sort(key=lambda entry: (-entry[1], entry[0]))
    return scored[:model.neighborhood_size_k]


def find_neighbors(model, target):
    """The k most similar users other than the target, descending, ties by user_id."""
    return [(user_id, sim) for user_id, sim, _ in _neighborhood(model, target)]


def _score_items(model, target):
    """Predicted rating of every item for the target, plus the evidence flag."""
    neighbors = _neighborhood(model, target)
    if not neighbors:
        return np.zeros(len(model.item_ids)), False
    weights = np.array([sim for _, sim, _ in neighbors])
    matrix = np.vstack([profile.ratings for _, _, profile in neighbors])
    evidence = bool(matrix.any())
    total = weights.sum()
    if total > 0.0:
        scores = weights @ matrix / total
    else:
        # Cold-start target: every similarity is 0, fall back to the group mean
        scores = matrix.mean(axis=0)
    return np.clip(scores, 0.0, 1.0), evidence


def predict(model, target, item_id):
    """Similarity-weighted mean neighbor rating for one item."""
    try:
        position = model.item_ids.index(item_id)
    except ValueError:
        raise UnknownItemError(item_id) from None
    scores, evidence = _score_items(model, target)
    return Prediction(float(scores[position]), evidence)


def top_n(model, target, n, exclude=frozenset()):
    """The n highest-predicted items not in ``exclude``."""
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    scores, evidence = _score_items(model, target)
    ranked = sorted(
        ((item_id, float(score)) for item_id, score in zip(model.item_ids, scores)
         if item_id not in exclude),
        key=lambda entry: (-entry[1], entry[0]))
    return RecommendationList(tuple(ranked[:n]), evidence)
