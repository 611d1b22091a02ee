"""CLI commands"""

from .commands import simulate, fit, evaluate, identity_check, convert_dated_rewards_command

__all__ = ["simulate", "fit", "evaluate", "identity_check", "convert_dated_rewards_command"]
