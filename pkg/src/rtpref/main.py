"""Main CLI application"""

import logging
import sys
from typing import Optional

import click

from .api import convert_dated_rewards_command, evaluate, fit, identity_check, simulate
from .config import settings
from .exceptions import RtprefError, ValidationError

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

logger = logging.getLogger(__name__)


def setup_logging(level: Optional[str] = None):
    """Log to stderr, and to settings.log_file when it is set"""
    logging.basicConfig(level=(level or settings.log_level).upper(), format=LOG_FORMAT, stream=sys.stderr, force=True)
    if settings.log_file is not None:
        # Create logs directory
        settings.log_file.parent.mkdir(parents=True, exist_ok=True)
        handler = logging.FileHandler(settings.log_file, encoding="utf-8")
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logging.getLogger().addHandler(handler)


class RtprefGroup(click.Group):
    """Click group whose exit codes are 0 (success), 1 (bad input) and 2 (numerical failure)"""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        if not standalone_mode:
            return super().main(args, prog_name, complete_var, standalone_mode, **extra)
        try:
            super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.ClickException as e:
            e.show()
            sys.exit(ValidationError.exit_code)
        except click.exceptions.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(ValidationError.exit_code)
        except RtprefError as e:
            logger.error(f"{type(e).__name__}: {e}")
            click.echo(f"Error: {e}", err=True)
            sys.exit(e.exit_code)
        sys.exit(0)


@click.group(cls=RtprefGroup)
@click.version_option(settings.app_version, prog_name=settings.app_name)
@click.option("--log-level", default=None, help="Override RTPREF_LOG_LEVEL")
def cli(log_level):
    """Preference estimation from choices and response times."""
    setup_logging(log_level)


cli.add_command(simulate)
cli.add_command(fit)
cli.add_command(evaluate)
cli.add_command(identity_check)
cli.add_command(convert_dated_rewards_command)


def run_cli():
    """Run the CLI (used by poetry script)"""
    cli(prog_name=settings.app_name)


if __name__ == "__main__":
    run_cli()
