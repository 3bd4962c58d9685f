"""CSV schema: header ``x1,...,xp[,y][,z][,domain]``, one sample per line."""
import re
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from datasets.base import Dataset, Domain
from utils.exceptions import ParseError, ValidationError

FEATURE_RE = re.compile(r"^x(\d+)$")


def save_csv(dataset: Dataset, path) -> None:
    frame = pd.DataFrame(dataset.features, columns=[f"x{j + 1}" for j in range(dataset.p)])
    if dataset.labels is not None:
        frame["y"] = dataset.labels
    if dataset.protected is not None:
        frame["z"] = dataset.protected.astype(np.int64)
    frame["domain"] = dataset.domain.value
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n", encoding="utf-8")


def _check_header(columns, path) -> int:
    columns = list(columns)
    p = 0
    while p < len(columns) and FEATURE_RE.match(str(columns[p])):
        if str(columns[p]) != f"x{p + 1}":
            raise ParseError(1, f"expected column x{p + 1}, found {columns[p]!r}", path)
        p += 1
    if p == 0:
        raise ParseError(1, "header must start with x1", path)
    rest = columns[p:]
    allowed = ["y", "z", "domain"]
    position = 0
    for name in rest:
        if name not in allowed[position:]:
            raise ParseError(1, f"unexpected column {name!r}", path)
        position = allowed.index(name) + 1
    return p


def _numeric(frame: pd.DataFrame, column: str, path) -> np.ndarray:
    raw = frame[column]
    values = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise ParseError(row + 2, f"column {column!r} has non-numeric or non-finite cell {raw.iloc[row]!r}", path)
    return values


def load_csv(path, domain: Optional[Domain] = None) -> Dataset:
    """Parse a dataset file; errors name the offending line (header is line 1)."""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False, skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        raise ParseError(1, "empty file, header missing", path)
    except pd.errors.ParserError as err:
        match = re.search(r"line (\d+)", str(err))
        line = int(match.group(1)) if match else None
        raise ParseError(line, f"ragged row ({err})", path)

    p = _check_header(frame.columns, path)
    # short rows come back as missing cells
    missing = frame.isna() | frame.eq("")
    if missing.to_numpy().any():
        row = int(np.flatnonzero(missing.to_numpy().any(axis=1))[0])
        raise ParseError(row + 2, "ragged row or empty cell", path)

    if frame.shape[0] == 0:
        features = np.zeros((0, p))
    else:
        features = np.column_stack([_numeric(frame, f"x{j + 1}", path) for j in range(p)])
    labels = _numeric(frame, "y", path) if "y" in frame.columns else None

    protected = None
    if "z" in frame.columns:
        z = _numeric(frame, "z", path)
        bad = ~np.isin(z, (0.0, 1.0))
        if bad.any():
            raise ParseError(int(np.flatnonzero(bad)[0]) + 2, "z must be 0 or 1", path)
        protected = z.astype(np.int64)

    if "domain" in frame.columns and frame.shape[0] > 0:
        values = frame["domain"].str.strip()
        bad = ~values.isin([d.value for d in Domain])
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise ParseError(row + 2, f"domain must be source or target, got {values.iloc[row]!r}", path)
        if values.nunique() > 1:
            row = int(np.flatnonzero((values != values.iloc[0]).to_numpy())[0])
            raise ParseError(row + 2, "a file holds a single domain", path)
        domain = Domain(values.iloc[0])
    domain = Domain(domain or Domain.SOURCE)

    try:
        return Dataset(features, labels, domain, protected, labels_held_out=domain == Domain.TARGET and labels is not None)
    except ValidationError as err:
        raise ParseError(None, str(err), path)
