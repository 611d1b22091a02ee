"""Utility modules"""

from .csv_io import parse_csv, write_csv, write_json, read_oracle_params
from .dated_rewards import convert_dated_rewards

__all__ = ["parse_csv", "write_csv", "write_json", "read_oracle_params", "convert_dated_rewards"]
