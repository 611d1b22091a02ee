"""Reading and writing choice/response-time CSV files and JSON reports.

CSV schema (header is exact):

    agent_id,x_1,...,x_d,y_1,...,y_d,choice,rt

with ``choice`` in {-1, 1} and ``rt`` in seconds; ``d`` is read from the header.
Line numbers in errors count the header as line 1.
"""

import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from ..exceptions import ValidationError
from ..models.dataset import Dataset
from ..models.params import DdmParams

logger = logging.getLogger(__name__)

AgentData = Tuple[str, Dataset]


def header_for(d: int) -> List[str]:
    return ["agent_id"] + [f"x_{i}" for i in range(1, d + 1)] + [f"y_{i}" for i in range(1, d + 1)] + ["choice", "rt"]


def _dimension_from_header(columns: Sequence[str]) -> int:
    columns = list(columns)
    attributes = len(columns) - 3
    if attributes < 2 or attributes % 2 or columns[0] != "agent_id" or columns[-2:] != ["choice", "rt"]:
        expected = {"agent_id", "choice", "rt"}
        missing = sorted(expected - set(columns))
        detail = f"missing columns: {', '.join(missing)}" if missing else "expected agent_id,x_1..x_d,y_1..y_d,choice,rt"
        raise ValidationError(f"bad header ({detail})", line=1)
    d = attributes // 2
    if columns != header_for(d):
        raise ValidationError(f"bad header: expected {','.join(header_for(d))}", line=1)
    return d


def _first_bad_line(mask: pd.Series, message: str):
    if mask.any():
        # header is line 1, data start on line 2
        raise ValidationError(message, line=int(np.flatnonzero(mask.to_numpy())[0]) + 2)


def parse_csv(path: Union[str, Path]) -> List[AgentData]:
    """Read a CSV into per-agent datasets, agents in order of first appearance"""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"input file not found: {path}")

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=False)
    except pd.errors.EmptyDataError:
        raise ValidationError("file is empty (no header)", line=1)
    except pd.errors.ParserError as e:
        raise ValidationError(f"malformed CSV: {e}")

    d = _dimension_from_header(frame.columns)
    if frame.empty:
        return []
    frame = frame.fillna("")

    _first_bad_line(frame["agent_id"].str.strip() == "", "missing agent_id")
    numeric_columns = list(frame.columns[1:])
    values = frame[numeric_columns].apply(lambda column: pd.to_numeric(column.str.strip(), errors="coerce"))
    for column in numeric_columns:
        _first_bad_line(values[column].isna(), f"column {column} is not a number")

    attributes = values[numeric_columns[: 2 * d]].to_numpy(dtype=np.float64)
    _first_bad_line(pd.Series(~np.isfinite(attributes).all(axis=1)), "non-finite attribute")
    _first_bad_line(~values["choice"].isin([-1.0, 1.0]), "choice must be -1 or 1")
    _first_bad_line(~np.isfinite(values["rt"]) | (values["rt"] <= 0), "rt must be finite and strictly positive")

    agent_ids = frame["agent_id"].str.strip()
    agents = []
    for agent_id, rows in values.groupby(agent_ids, sort=False):
        agents.append(
            (
                str(agent_id),
                Dataset.from_arrays(
                    rows[numeric_columns[:d]].to_numpy(),
                    rows[numeric_columns[d : 2 * d]].to_numpy(),
                    rows["choice"].to_numpy(),
                    rows["rt"].to_numpy(),
                ),
            )
        )
    logger.info(f"Read {len(frame)} rows for {len(agents)} agents from {path}")
    return agents


def dataset_frame(agents: Sequence[AgentData], d: int) -> pd.DataFrame:
    columns = header_for(d)
    blocks = []
    for agent_id, ds in agents:
        if ds.d != d:
            raise ValidationError(f"agent {agent_id} has d = {ds.d}, expected {d}")
        block = pd.DataFrame(np.hstack([ds.X, ds.Y]), columns=columns[1 : 2 * d + 1])
        block.insert(0, "agent_id", agent_id)
        block["choice"] = ds.z.astype(int)
        block["rt"] = ds.t
        blocks.append(block)
    if not blocks:
        return pd.DataFrame(columns=columns)
    return pd.concat(blocks, ignore_index=True)[columns]


def write_csv(path: Union[str, Path], agents: Sequence[AgentData], d: int) -> Path:
    """Write datasets in the CSV schema; float columns use shortest round-trip repr"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buffer = io.StringIO()
    dataset_frame(agents, d).to_csv(buffer, index=False, lineterminator="\n")
    path.write_text(buffer.getvalue(), encoding="utf-8")
    logger.info(f"Wrote {sum(ds.n for _, ds in agents)} rows to {path}")
    return path


def _jsonable(payload: Any) -> Any:
    if isinstance(payload, BaseModel):
        return payload.model_dump(mode="json")
    if isinstance(payload, (list, tuple)):
        return [_jsonable(item) for item in payload]
    if isinstance(payload, dict):
        return {key: _jsonable(value) for key, value in payload.items()}
    return payload


def write_json(path: Union[str, Path], payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2) + "\n", encoding="utf-8")
    logger.info(f"Wrote {path}")
    return path


def params_sidecar_path(csv_path: Union[str, Path]) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.name + ".params.json")


def write_params(path: Union[str, Path], params: Dict[str, BaseModel]) -> Path:
    """True per-agent generating parameters, keyed by agent_id"""
    return write_json(path, {agent_id: params[agent_id] for agent_id in sorted(params)})


def read_oracle_params(path: Union[str, Path]) -> Dict[str, DdmParams]:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError(f"oracle parameter file not found: {path}")
    except json.JSONDecodeError as e:
        raise ValidationError(f"oracle parameter file {path} is not valid JSON: {e.msg}", line=e.lineno)
    if not isinstance(raw, dict):
        raise ValidationError(f"oracle parameter file {path} must map agent_id to {{w, b}}")
    try:
        return {agent_id: DdmParams(**entry) for agent_id, entry in raw.items()}
    except (TypeError, ValueError) as e:
        raise ValidationError(f"invalid oracle parameters in {path}: {e}")
