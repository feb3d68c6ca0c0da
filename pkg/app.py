import logging
import sys

import click

from lstm_anomaly_rules.controller.pipeline_controller import COMMANDS
from lstm_anomaly_rules.errors import EXIT_OK, EXIT_USAGE, AnomalyRulesError


class AnomalyRulesGroup(click.Group):
    """Maps failures onto exit codes: 1 usage, 2 data, 3 numerical."""

    def main(self, *args, standalone_mode: bool = True, **kwargs):
        if not standalone_mode:
            return super().main(*args, standalone_mode=False, **kwargs)
        try:
            code = super().main(*args, standalone_mode=False, **kwargs)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        except AnomalyRulesError as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(e.exit_code)
        sys.exit(code if isinstance(code, int) else EXIT_OK)


@click.group(cls=AnomalyRulesGroup)
@click.option("-v", "--verbose", count=True, help="-v for progress, -vv for per-epoch detail.")
def cli(verbose: int):
    """LSTM prediction-error anomaly detection: Gaussian, EVT and Tukey rules."""
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", force=True)


for command in COMMANDS:
    cli.add_command(command)


if __name__ == "__main__":
    cli()
