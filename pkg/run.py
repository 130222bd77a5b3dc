# run.py
# Main entry point for the ubirec command line.
#
#   python run.py simulate --scenario nomalys --algo cfql --trials 100 --seed 0
#   python run.py sweep --scenario nomalys --seeds 30 --out results/nomalys
#   python run.py report --in results/nomalys --out results/nomalys/comparison.csv
#   python run.py run            # serves the results browser on /api

from flask.cli import FlaskGroup

from ubirec import create_app

cli = FlaskGroup(create_app=create_app)

if __name__ == '__main__':
    cli()
