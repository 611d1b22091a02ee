"""Converter from a long-format dated-rewards table to the rtpref CSV schema.

Each trial offers an immediate amount m against a delayed reward R after t_d
time units. The converter writes x = [m, 0] and y = [R, t_d], so a weight
vector [w_money, -w_time] gives the utility w_money * amount - w_time * delay,
and choice = +1 when the immediate option was taken.

Assumptions (the source layout is not fixed, so every column is configurable):
  - delays are copied as given; their unit defines the unit of the discount factor
  - response times are converted to seconds from ``rt_unit`` ("s" or "ms")
  - rows keep their file order within each subject
"""

import logging
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from ..exceptions import ValidationError
from ..models.dataset import Dataset
from .csv_io import write_csv

logger = logging.getLogger(__name__)

RT_DIVISOR = {"s": 1.0, "ms": 1000.0}


def convert_dated_rewards(
    input_path: Union[str, Path],
    output_path: Union[str, Path],
    subject_col: str = "subject",
    immediate_col: str = "immediate_amount",
    delayed_col: str = "delayed_amount",
    delay_col: str = "delay",
    choice_col: str = "choice",
    rt_col: str = "rt",
    immediate_code: str = "1",
    rt_unit: str = "s",
) -> Path:
    """Convert a dated-rewards file; returns the output path"""
    if rt_unit not in RT_DIVISOR:
        raise ValidationError(f"rt_unit must be one of {sorted(RT_DIVISOR)}, got '{rt_unit}'")
    try:
        frame = pd.read_csv(input_path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise ValidationError(f"input file not found: {input_path}")
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise ValidationError(f"cannot read {input_path}: {e}")

    required = [subject_col, immediate_col, delayed_col, delay_col, choice_col, rt_col]
    missing = [column for column in required if column not in frame.columns]
    if missing:
        raise ValidationError(f"missing columns: {', '.join(missing)}", line=1)

    numeric = frame[[immediate_col, delayed_col, delay_col, rt_col]].apply(
        lambda column: pd.to_numeric(column.str.strip(), errors="coerce")
    )
    bad = numeric.isna().any(axis=1).to_numpy()
    if bad.any():
        raise ValidationError("non-numeric amount, delay or rt", line=int(np.argmax(bad)) + 2)

    n = len(frame)
    X = np.column_stack([numeric[immediate_col].to_numpy(), np.zeros(n)])
    Y = np.column_stack([numeric[delayed_col].to_numpy(), numeric[delay_col].to_numpy()])
    z = np.where(frame[choice_col].str.strip() == immediate_code, 1.0, -1.0)
    t = numeric[rt_col].to_numpy() / RT_DIVISOR[rt_unit]

    agents = []
    subjects = frame[subject_col].str.strip()
    for subject in pd.unique(subjects):
        rows = np.flatnonzero((subjects == subject).to_numpy())
        try:
            agents.append((str(subject), Dataset.from_arrays(X[rows], Y[rows], z[rows], t[rows])))
        except ValidationError as e:
            raise ValidationError(f"subject {subject}: {e}", line=int(rows[(e.row or 1) - 1]) + 2)

    logger.info(f"Converted {n} dated-reward trials for {len(agents)} subjects")
    return write_csv(output_path, agents, d=2)
