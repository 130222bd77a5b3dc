# ubirec/errors.py
# Exception hierarchy and error handlers for the ubirec application

import logging
from flask import jsonify

logger = logging.getLogger(__name__)


class UbirecError(Exception):
    """Base class for every error raised by ubirec."""


class InvalidInputError(UbirecError, ValueError):
    """Rejected input: a precondition of an operation does not hold."""


class ScenarioError(InvalidInputError):
    """A scenario document violates the schema."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        location = []
        if field:
            location.append(f"field '{field}'")
        if line:
            location.append(f"line {line}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class UnknownSymbolError(ScenarioError):
    """A context symbol is not a member of its declared alphabet."""

    def __init__(self, symbol, dimension, field=None, line=None):
        self.symbol = symbol
        self.dimension = dimension
        super().__init__(f"Unknown {dimension} symbol '{symbol}'", field=field, line=line)


class UnknownItemError(InvalidInputError):
    """An item id is not part of the scenario item set."""

    def __init__(self, item_id):
        self.item_id = item_id
        super().__init__(f"Unknown item '{item_id}'")


# --- JSON error handlers for the results browser ---
# Registered in create_app() in __init__.py

def page_not_found(error):
    """Returns a JSON 404 body."""
    logger.info("404 Error: %s", error)
    return jsonify({'error': 'not found'}), 404


def invalid_input(error):
    """Returns a JSON 400 body for rejected input."""
    logger.warning("Rejected input: %s", error)
    return jsonify({'error': str(error)}), 400


def internal_server_error(error):
    """Logs the original exception and returns a JSON 500 body."""
    original_exception = getattr(error, "original_exception", error)
    logger.exception("500 Error Encountered: %s", original_exception)
    return jsonify({'error': 'internal server error'}), 500
