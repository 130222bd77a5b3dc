# ubirec/__init__.py

import logging

from flask import Flask
from werkzeug.exceptions import InternalServerError, NotFound

from .config import Config
from .errors import InvalidInputError

# Import Blueprints
from .cli import sim_cli_bp
from .results_bp import results_bp


# Application Factory Function
def create_app(config_class=Config):
    """Creates and configures the Flask application instance."""
    app = Flask(__name__, instance_relative_config=False)

    # Load configuration from config object
    app.config.from_object(config_class)

    logging.basicConfig(
        level=app.config.get('LOG_LEVEL', 'WARNING'),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )
    logging.getLogger('ubirec').setLevel(app.config.get('LOG_LEVEL', 'WARNING'))

    # Register Blueprints
    app.register_blueprint(results_bp, url_prefix='/api')
    app.register_blueprint(sim_cli_bp)
    app.logger.debug("Registered Blueprints: %s", list(app.blueprints.keys()))

    # --- Register global error handlers ---
    from .errors import internal_server_error, invalid_input, page_not_found

    app.register_error_handler(404, page_not_found)
    app.register_error_handler(NotFound, page_not_found)
    app.register_error_handler(InvalidInputError, invalid_input)
    app.register_error_handler(500, internal_server_error)
    app.register_error_handler(InternalServerError, internal_server_error)
    app.register_error_handler(Exception, internal_server_error)
    # --- End Error Handler Registration ---

    return app
