# ubirec/config.py
import logging
import os
from dotenv import load_dotenv

logger = logging.getLogger(__name__)

# Load environment variables from .env file at the root (optional)
dotenv_path = os.path.join(os.path.dirname(__file__), '..', '.env')
if os.path.exists(dotenv_path):
    load_dotenv(dotenv_path=dotenv_path)

# Q-learning hyperparameters
DEFAULT_ALPHA = 0.3
DEFAULT_GAMMA = 0.5
DEFAULT_INITIAL_Q = 0.0

# Exploration schedule (linear decay, horizon defaults to the trial count)
DEFAULT_EPSILON_START = 0.5
DEFAULT_EPSILON_END = 0.05

# Collaborative filtering
DEFAULT_NEIGHBORHOOD_K = 10
DEFAULT_GROUP_RESTRICTION = True

# Simulated users
DEFAULT_GROUP_COHERENCE_RHO = 0.7
DEFAULT_POSITION_DISCOUNT = 0.8

# Experiment protocol
DEFAULT_N_RECOMMEND = 3
PRECISION_INTERVAL_WIDTH = 10
DEFAULT_SWEEP_SEEDS = 30
ALGORITHMS = ('cf', 'ql', 'cfql')

# --- Default Scenario Settings ---
# Optional scenario keys fall back to these values at load time.
DEFAULT_SCENARIO_SETTINGS = {
    "n_recommend": DEFAULT_N_RECOMMEND,
    "seeds": [0],
    "history_trials_per_colleague": 0,
    "group_coherence_rho": DEFAULT_GROUP_COHERENCE_RHO,
    "position_discount": DEFAULT_POSITION_DISCOUNT,
    "neighborhood_size_k": DEFAULT_NEIGHBORHOOD_K,
    "group_restriction": DEFAULT_GROUP_RESTRICTION,
    "learning_rate_alpha": DEFAULT_ALPHA,
    "discount_gamma": DEFAULT_GAMMA,
    "initial_q": DEFAULT_INITIAL_Q,
    "epsilon_start": DEFAULT_EPSILON_START,
    "epsilon_end": DEFAULT_EPSILON_END,
    # None means "use the trial count"
    "decay_trials": None,
}


# --- Base Configuration Class ---
class Config:
    """Base configuration settings."""
    BASE_DIR = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
    SCENARIO_DIR = os.path.join(BASE_DIR, 'ubirec', 'scenarios')
    RESULTS_DIR = os.environ.get('UBIREC_RESULTS_DIR') or os.path.join(BASE_DIR, 'results')
    LOG_LEVEL = os.environ.get('UBIREC_LOG_LEVEL', 'WARNING').upper()

    PRECISION_INTERVAL_WIDTH = PRECISION_INTERVAL_WIDTH
    DEFAULT_SWEEP_SEEDS = DEFAULT_SWEEP_SEEDS

    # Make defaults accessible via app config
    DEFAULT_SCENARIO_SETTINGS = DEFAULT_SCENARIO_SETTINGS


class TestingConfig(Config):
    """Configuration used by the test suite."""
    TESTING = True
    LOG_LEVEL = 'DEBUG'
