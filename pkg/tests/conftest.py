import copy
import json

import numpy as np
from pytest import fixture

from ubirec import create_app
from ubirec.cf import CfModel
from ubirec.config import TestingConfig
from ubirec.context import Action, ContextState, UserProfile
from ubirec.simulator import parse_scenario

TINY_SCENARIO = {
    "name": "tiny",
    "item_set": ["a", "b", "c", "d"],
    "alphabets": {"time_slot": ["am", "pm"], "cognitive_tag": ["work", "rest"]},
    "groups": [
        {"group_id": "g", "members": ["u1", "u2", "u3"]},
        {"group_id": "h", "members": ["v1"]},
    ],
    "target_user": {"user_id": "t", "group_id": "g"},
    "preference_model": {
        "group:g": [
            {"when": {"time_slot": "am"}, "accept": {"a": 0.9, "b": 0.3}},
            {"when": {"time_slot": "pm"}, "accept": {"c": 0.8}},
        ],
        "group:h": [{"accept": {"d": 0.9}}],
    },
    "event_sequence": {"repeat": 10, "pattern": [["am", "work"], ["pm", "rest"]]},
    "trials": 20,
    "n_recommend": 2,
    "seeds": [0, 1],
    "history_trials_per_colleague": 5,
}


@fixture
def app(tmp_path):
    class _Config(TestingConfig):
        RESULTS_DIR = str(tmp_path / 'results')

    yield create_app(_Config)


@fixture
def client(app):
    return app.test_client()


@fixture
def runner(app):
    return app.test_cli_runner()


@fixture
def scenario_doc():
    "A fresh, mutable copy of the tiny scenario document."
    return copy.deepcopy(TINY_SCENARIO)


@fixture
def make_scenario(scenario_doc):
    "Builds a scenario from the tiny document with top-level keys overridden."
    def _make(**overrides):
        doc = copy.deepcopy(scenario_doc)
        doc.update(overrides)
        return parse_scenario(json.dumps(doc, indent=2))
    return _make


@fixture
def scenario_file(tmp_path, scenario_doc):
    path = tmp_path / 'tiny.json'
    path.write_text(json.dumps(scenario_doc, indent=2), encoding='utf-8')
    return path


def make_profile(user_id, ratings, group='g', item_ids=None):
    item_ids = item_ids or tuple(f'i{n}' for n in range(1, len(ratings) + 1))
    return UserProfile(user_id, group, tuple(item_ids), np.asarray(ratings, dtype=float))


def make_actions(*item_ids):
    return [Action(item_id) for item_id in item_ids]


def make_model(profiles, **kwargs):
    return CfModel(profiles[0].item_ids, tuple(profiles), **kwargs)


STATE = ContextState('am', 'g', 'work')
OTHER_STATE = ContextState('pm', 'g', 'rest')
