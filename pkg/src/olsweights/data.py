"""Dataset container, CSV ingestion and stratification."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .errors import ParseError, SchemaError, StratificationError, ValidationError


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Outcome, binary treatment, covariates and optional block labels.

    Arrays are copied and made read-only on construction, so a Dataset can be
    shared freely once built.
    """

    outcome: np.ndarray
    treatment: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple = ()
    blocks: Optional[np.ndarray] = None
    outcome_name: str = "Y"
    treatment_name: str = "D"
    block_name: str = "B"

    def __post_init__(self):
        y = np.asarray(self.outcome, dtype=float).ravel()
        d_raw = np.asarray(self.treatment).ravel()
        n = y.shape[0]
        if n < 2:
            raise ValidationError("dataset needs at least 2 units")
        if d_raw.shape[0] != n:
            raise ValidationError(f"treatment has length {d_raw.shape[0]}, outcome has {n}")
        d = d_raw.astype(float)
        bad = np.flatnonzero((d != 0.0) & (d != 1.0))
        if bad.size:
            raise ValidationError(
                f"treatment must be 0/1; row {int(bad[0])} has value {d_raw[bad[0]]!r}"
            )
        if d.sum() == 0 or d.sum() == n:
            raise ValidationError("both treatment arms required")
        if not np.all(np.isfinite(y)):
            raise ValidationError(f"outcome has non-finite value at row {int(np.flatnonzero(~np.isfinite(y))[0])}")

        X = np.asarray(self.covariates, dtype=float)
        if X.size == 0:
            X = np.zeros((n, 0))
        elif X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.shape[0] != n:
            raise ValidationError(f"covariates have {X.shape[0]} rows, outcome has {n}")
        if not np.all(np.isfinite(X)):
            r = int(np.flatnonzero(~np.all(np.isfinite(X), axis=1))[0])
            raise ValidationError(f"covariates contain a non-finite value at row {r}")
        names = tuple(self.covariate_names) or tuple(f"X{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ValidationError(f"{len(names)} covariate names for {X.shape[1]} columns")

        object.__setattr__(self, "outcome", _frozen(y))
        object.__setattr__(self, "treatment", _frozen(d))
        object.__setattr__(self, "covariates", _frozen(X))
        object.__setattr__(self, "covariate_names", names)
        if self.blocks is not None:
            b = np.asarray([str(v) for v in np.asarray(self.blocks).ravel()], dtype=object)
            if b.shape[0] != n:
                raise ValidationError(f"blocks have length {b.shape[0]}, outcome has {n}")
            object.__setattr__(self, "blocks", _frozen(b))

    @property
    def n(self) -> int:
        return self.outcome.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def treated(self) -> np.ndarray:
        return self.treatment == 1.0

    def with_covariates(self, X, names=None) -> "Dataset":
        """Copy of this dataset with the covariate matrix replaced."""
        return Dataset(
            self.outcome, self.treatment, X, tuple(names or ()), self.blocks,
            self.outcome_name, self.treatment_name, self.block_name,
        )

    def select(self, columns: Sequence[str]) -> np.ndarray:
        idx = [self.covariate_names.index(c) for c in columns]
        return self.covariates[:, idx]


@dataclass(frozen=True)
class Stratum:
    key: tuple
    indices: np.ndarray
    n_x: int
    n_treated: int
    pi_x: float
    p_hat_x: float

    @property
    def n_control(self) -> int:
        return self.n_x - self.n_treated


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------


def parse_schema(text: str) -> dict:
    """Parse ``"Y=y,D=d,X=x1,X=x2,B=block"`` into a role map.

    ``X`` may be repeated, or list several columns separated by ``|``.
    """
    schema = {"X": []}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise SchemaError(f"schema entry {part!r} is not ROLE=column")
        role, col = (s.strip() for s in part.split("=", 1))
        role = role.upper()
        if role == "X":
            schema["X"].extend(c for c in col.split("|") if c)
        elif role in ("Y", "D", "B"):
            schema[role] = col
        else:
            raise SchemaError(f"unknown schema role {role!r}; expected Y, D, X or B")
    return schema


def _normalize_schema(schema: Mapping) -> dict:
    out = {k.upper(): v for k, v in schema.items()}
    for role in ("Y", "D"):
        if not out.get(role):
            raise SchemaError(f"schema must name the {role} column")
    xs = out.get("X") or []
    out["X"] = [xs] if isinstance(xs, str) else list(xs)
    out.setdefault("B", None)
    return out


def load_csv(path: Union[str, Path], schema: Mapping) -> Dataset:
    """Read a CSV file into a validated :class:`Dataset`.

    ``schema`` maps roles ``Y``, ``D``, ``X`` (list) and optionally ``B`` to
    column names. Row order is preserved. Row numbers in error messages are
    1-based data rows (the header is row 0).
    """
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"input file {path} does not exist")
    s = _normalize_schema(schema)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path} is empty; a header row is required") from None
        rows = list(reader)
    header = [h.strip() for h in header]
    wanted = [s["Y"], s["D"], *s["X"]] + ([s["B"]] if s["B"] else [])
    missing = [c for c in wanted if c not in header]
    if missing:
        raise SchemaError(f"missing column(s) {missing} in {path}; found {header}")
    pos = {c: header.index(c) for c in wanted}

    def num(row_no, row, col):
        cell = row[pos[col]].strip() if pos[col] < len(row) else ""
        try:
            return float(cell)
        except ValueError:
            raise ParseError(
                f"row {row_no}, column {col!r}: cannot parse {cell!r} as a number",
                row=row_no, column=col,
            ) from None

    rows = [r for r in rows if any(c.strip() for c in r)]
    y = np.empty(len(rows))
    d = np.empty(len(rows))
    X = np.empty((len(rows), len(s["X"])))
    blocks = [] if s["B"] else None
    for i, row in enumerate(rows, start=1):
        y[i - 1] = num(i, row, s["Y"])
        d[i - 1] = num(i, row, s["D"])
        if d[i - 1] not in (0.0, 1.0):
            raise ValidationError(
                f"row {i}: treatment column {s['D']!r} must be 0 or 1, got {row[pos[s['D']]].strip()!r}"
            )
        for j, c in enumerate(s["X"]):
            X[i - 1, j] = num(i, row, c)
        if blocks is not None:
            blocks.append(row[pos[s["B"]]].strip())
    return Dataset(
        y, d, X, tuple(s["X"]),
        None if blocks is None else np.array(blocks, dtype=object),
        outcome_name=s["Y"], treatment_name=s["D"], block_name=s["B"] or "B",
    )


def _fmt(v: float) -> str:
    return repr(float(v))


def save_csv(data: Dataset, path: Union[str, Path]) -> dict:
    """Write ``data`` to CSV so that :func:`load_csv` reproduces it exactly.

    Returns the schema needed to read the file back.
    """
    header = [data.outcome_name, data.treatment_name, *data.covariate_names]
    if data.blocks is not None:
        header.append(data.block_name)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(data.n):
            row = [_fmt(data.outcome[i]), str(int(data.treatment[i]))]
            row += [_fmt(v) for v in data.covariates[i]]
            if data.blocks is not None:
                row.append(data.blocks[i])
            w.writerow(row)
    schema = {"Y": data.outcome_name, "D": data.treatment_name, "X": list(data.covariate_names)}
    if data.blocks is not None:
        schema["B"] = data.block_name
    return schema


# --------------------------------------------------------------------------
# Stratification
# --------------------------------------------------------------------------


def stratify(data: Dataset, by: Union[str, Sequence[str], None] = None) -> list:
    """Partition units into strata of identical covariate values (or blocks).

    ``by="blocks"`` uses block labels; ``by=None`` uses every covariate
    column; otherwise ``by`` lists covariate names. Keys compare stored values
    exactly. Strata are returned sorted by key.
    """
    n = data.n
    if isinstance(by, str) and by == "blocks":
        if data.blocks is None:
            raise StratificationError("dataset has no block labels")
        keys = [(b,) for b in data.blocks]
    else:
        cols = list(data.covariate_names) if by is None else ([by] if isinstance(by, str) else list(by))
        if not cols:
            keys = [()] * n
        else:
            unknown = [c for c in cols if c not in data.covariate_names]
            if unknown:
                raise StratificationError(f"unknown covariate(s) {unknown}")
            Z = data.select(cols)
            for j, c in enumerate(cols):
                if np.unique(Z[:, j]).size > n / 2:
                    raise StratificationError(
                        f"stratification requires discrete covariates; column {c!r} "
                        f"has {np.unique(Z[:, j]).size} distinct values for n={n}"
                    )
            keys = [tuple(float(v) for v in row) for row in Z]

    groups: dict = {}
    for i, k in enumerate(keys):
        groups.setdefault(k, []).append(i)
    d = data.treatment
    strata = []
    for k in sorted(groups, key=_sort_key):
        idx = np.asarray(groups[k], dtype=int)
        n1 = int(d[idx].sum())
        strata.append(Stratum(k, idx, idx.size, n1, n1 / idx.size, idx.size / n))
    return strata


def _sort_key(k):
    return tuple((0, v, "") if isinstance(v, float) else (1, 0.0, str(v)) for v in k)
