"""Tabular data model: typed columns, CSV I/O, schema inference, splits.

A Table keeps every cell as its raw token (string, or None for missing)
alongside a float view for the cells that parse as finite numbers. All
downstream typing decisions (continuous / categorical / mixed) are made
against this dual view, so nothing is lost before the user has had a
chance to override the inferred schema.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np


class RaggedRowError(ValueError):
    """A data row whose cell count differs from the header's."""

    def __init__(self, row_index, expected, got):
        self.row_index = row_index
        super().__init__(
            "row %d has %d cells, expected %d" % (row_index, got, expected))


class SchemaError(ValueError):
    pass


# ---------------------------------------------------------------------------
# column kinds

@dataclass(frozen=True)
class Continuous:
    log_transform: bool = False


@dataclass(frozen=True)
class Categorical:
    pass


@dataclass(frozen=True)
class Mixed:
    """Numeric column with point masses treated as categories.

    categorical_values are encoded as discrete modes and decoded back to
    their exact value; the remaining cells are treated as continuous.
    May be empty when the column was promoted to Mixed only because it
    carries missing values.
    """
    categorical_values: tuple = ()
    log_transform: bool = False

    def __post_init__(self):
        vals = tuple(float(v) for v in self.categorical_values)
        if len(set(vals)) != len(vals):
            raise SchemaError("duplicate categorical_values in Mixed kind")
        object.__setattr__(self, "categorical_values", vals)


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: object                     # Continuous | Categorical | Mixed
    include: bool = True
    target: bool = False


@dataclass(frozen=True)
class TargetSpec:
    column: str
    problem: str = "multiclass"      # "binary" | "multiclass" | "none"

    def __post_init__(self):
        if self.problem not in ("binary", "multiclass", "none"):
            raise SchemaError("unknown problem type: %r" % (self.problem,))


@dataclass
class Schema:
    columns: list = field(default_factory=list)   # list[ColumnSpec]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")
        if not any(c.include for c in self.columns):
            raise SchemaError("schema excludes every column")
        targets = [c.name for c in self.columns if c.target]
        if len(targets) > 1:
            raise SchemaError("more than one target column: %r" % (targets,))
        for c in self.columns:
            if c.target and not c.include:
                raise SchemaError("target column %r is excluded" % (c.name,))

    def __getitem__(self, name):
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def included(self):
        return [c for c in self.columns if c.include]

    @property
    def target_column(self):
        for c in self.columns:
            if c.target:
                return c.name
        return None

    def to_dict(self):
        cols = []
        for c in self.columns:
            d = {"name": c.name, "kind": _kind_name(c.kind),
                 "include": c.include, "target": c.target}
            if isinstance(c.kind, Mixed):
                d["categorical_values"] = list(c.kind.categorical_values)
            if isinstance(c.kind, (Continuous, Mixed)):
                d["log_transform"] = c.kind.log_transform
            cols.append(d)
        return {"columns": cols}

    @classmethod
    def from_dict(cls, d):
        cols = []
        for cd in d["columns"]:
            kind = _kind_from_dict(cd)
            cols.append(ColumnSpec(cd["name"], kind,
                                   include=cd.get("include", True),
                                   target=cd.get("target", False)))
        return cls(cols)


def _kind_name(kind):
    if isinstance(kind, Continuous):
        return "continuous"
    if isinstance(kind, Categorical):
        return "categorical"
    if isinstance(kind, Mixed):
        return "mixed"
    raise SchemaError("unknown column kind: %r" % (kind,))


def _kind_from_dict(d):
    k = d["kind"]
    if k == "continuous":
        return Continuous(log_transform=d.get("log_transform", False))
    if k == "categorical":
        return Categorical()
    if k == "mixed":
        return Mixed(tuple(d.get("categorical_values", ())),
                     log_transform=d.get("log_transform", False))
    raise SchemaError("unknown column kind: %r" % (k,))


# ---------------------------------------------------------------------------
# table

def _parse_numeric(token):
    try:
        v = float(token)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


class Table:
    """Column-major token storage with a parallel float view.

    tokens[j][i] is the raw cell (None = missing); numeric[j][i] is its
    float value or NaN when the token is missing or non-numeric.
    """

    def __init__(self, names, token_columns):
        self.names = list(names)
        if len(set(self.names)) != len(self.names):
            raise SchemaError("duplicate column names: %r" % (self.names,))
        self.tokens = [list(col) for col in token_columns]
        if len(self.tokens) != len(self.names):
            raise ValueError("column count mismatch")
        n = len(self.tokens[0]) if self.tokens else 0
        for col in self.tokens:
            if len(col) != n:
                raise ValueError("uneven column lengths")
        self.numeric = []
        self.numeric_mask = []
        for col in self.tokens:
            vals = np.full(n, np.nan)
            mask = np.zeros(n, dtype=bool)
            for i, tok in enumerate(col):
                if tok is None:
                    continue
                v = _parse_numeric(tok)
                if v is not None:
                    vals[i] = v
                    mask[i] = True
            self.numeric.append(vals)
            self.numeric_mask.append(mask)

    @property
    def n_rows(self):
        return len(self.tokens[0]) if self.tokens else 0

    @property
    def n_cols(self):
        return len(self.names)

    def column_index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError("no such column: %r" % (name,)) from None

    def column_tokens(self, name):
        return self.tokens[self.column_index(name)]

    def column_numeric(self, name):
        return self.numeric[self.column_index(name)]

    def missing_mask(self, name):
        col = self.column_tokens(name)
        return np.array([tok is None for tok in col], dtype=bool)

    def take_rows(self, indices):
        idx = np.asarray(indices, dtype=np.intp)
        cols = [[col[i] for i in idx] for col in self.tokens]
        return Table(self.names, cols)

    def select_columns(self, names):
        cols = [self.tokens[self.column_index(n)] for n in names]
        return Table(list(names), cols)

    @classmethod
    def from_rows(cls, names, rows):
        cols = [[r[j] for r in rows] for j in range(len(names))]
        return cls(names, cols)

    @classmethod
    def from_values(cls, names, value_columns):
        """Build from python values: floats/ints become their repr token,
        strings pass through, None stays missing."""
        cols = []
        for col in value_columns:
            toks = []
            for v in col:
                if v is None:
                    toks.append(None)
                elif isinstance(v, str):
                    toks.append(v)
                elif isinstance(v, (int, np.integer)):
                    toks.append(str(int(v)))
                else:
                    toks.append(repr(float(v)))
            cols.append(toks)
        return cls(names, cols)


DEFAULT_MISSING_TOKENS = ("",)


def load_csv(path, delimiter=",", missing_tokens=DEFAULT_MISSING_TOKENS,
             header=True):
    """Read an RFC-4180 CSV into a Table.

    Tokens are whitespace-trimmed; trimmed tokens found in missing_tokens
    become missing cells. Ragged rows raise RaggedRowError with the
    offending data-row index (0-based, excluding the header).
    """
    missing = set(missing_tokens)
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        rows = list(reader)
    if not rows:
        raise ValueError("empty file: %s" % (path,))
    if header:
        names, data = [t.strip() for t in rows[0]], rows[1:]
    else:
        width = len(rows[0])
        names, data = ["col_%d" % j for j in range(width)], rows
    if not data:
        raise ValueError("no data rows in %s" % (path,))
    width = len(names)
    parsed = []
    for i, row in enumerate(data):
        if len(row) != width:
            raise RaggedRowError(i, width, len(row))
        parsed.append([None if (t := cell.strip()) in missing else t
                       for cell in row])
    return Table.from_rows(names, parsed)


def write_csv(table, path, delimiter=","):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(table.names)
        for i in range(table.n_rows):
            writer.writerow(["" if col[i] is None else col[i]
                             for col in table.tokens])


# ---------------------------------------------------------------------------
# schema inference

def _skewness(values):
    v = np.asarray(values, dtype=np.float64)
    if v.size < 3:
        return 0.0
    m = v.mean()
    s2 = ((v - m) ** 2).mean()
    if s2 <= 0:
        return 0.0
    return float(((v - m) ** 3).mean() / s2 ** 1.5)


def infer_schema(table, k_cat=25, p_spike=0.20, skew_threshold=10.0):
    """Propose a column kind per column.

    Rules, in order: any non-numeric token -> Categorical; distinct
    numeric count <= k_cat -> Categorical; a value holding >= p_spike of
    the non-missing mass while the rest stays continuous-like -> Mixed
    with that spike as a categorical value; numeric with missing ->
    Mixed (missing handled as a discrete mode); otherwise Continuous.
    Long-tail compression is switched on when sample skewness exceeds
    skew_threshold.
    """
    if table.n_rows == 0:
        raise ValueError("cannot infer a schema from an empty table")
    cols = []
    for name in table.names:
        toks = table.column_tokens(name)
        mask = table.numeric_mask[table.column_index(name)]
        nums = table.numeric[table.column_index(name)]
        present = [t for t in toks if t is not None]
        has_missing = len(present) < len(toks)
        all_numeric = bool(mask.sum() == len(present)) and len(present) > 0
        if not all_numeric:
            cols.append(ColumnSpec(name, Categorical()))
            continue
        vals = nums[mask]
        uniq, counts = np.unique(vals, return_counts=True)
        if uniq.size <= k_cat:
            cols.append(ColumnSpec(name, Categorical()))
            continue
        spikes = uniq[counts >= p_spike * vals.size]
        rest_distinct = uniq.size - spikes.size
        if spikes.size > 0 and rest_distinct > k_cat:
            rest = vals[~np.isin(vals, spikes)]
            kind = Mixed(tuple(spikes),
                         log_transform=_skewness(rest) > skew_threshold)
        elif has_missing:
            kind = Mixed((), log_transform=_skewness(vals) > skew_threshold)
        else:
            kind = Continuous(log_transform=_skewness(vals) > skew_threshold)
        cols.append(ColumnSpec(name, kind))
    return Schema(cols)


def apply_overrides(schema, doc):
    """Apply a JSON override document to an inferred schema.

    doc = {"columns": {name: {"kind": ..., "categorical_values": [...],
                              "log_transform": ..., "include": ...}},
           "target": {"column": name, "problem": "binary"|"multiclass"|"none"}}

    Returns (new_schema, TargetSpec or None). Unknown column names are
    hard errors, as is excluding the target column.
    """
    if isinstance(doc, str):
        doc = json.loads(doc)
    known = {c.name for c in schema.columns}
    cols = list(schema.columns)
    for name, od in (doc.get("columns") or {}).items():
        if name not in known:
            raise SchemaError("override names unknown column %r" % (name,))
        i = [j for j, c in enumerate(cols) if c.name == name][0]
        cur = cols[i]
        kind = cur.kind
        if "kind" in od or "categorical_values" in od or "log_transform" in od:
            kd = {"kind": od.get("kind", _kind_name(kind))}
            if kd["kind"] == "mixed":
                prev = (list(kind.categorical_values)
                        if isinstance(kind, Mixed) else [])
                kd["categorical_values"] = od.get("categorical_values", prev)
            prev_log = getattr(kind, "log_transform", False)
            kd["log_transform"] = od.get("log_transform", prev_log)
            kind = _kind_from_dict(kd)
        cols[i] = replace(cur, kind=kind,
                          include=od.get("include", cur.include))
    target = None
    if "target" in doc and doc["target"] is not None:
        td = doc["target"]
        target = TargetSpec(td["column"], td.get("problem", "multiclass"))
        if target.column not in known:
            raise SchemaError("target names unknown column %r"
                              % (target.column,))
        cols = [replace(c, target=(c.name == target.column)) for c in cols]
    return Schema(cols), target


def validate_against_schema(table, schema):
    """Check a table satisfies a schema's structural expectations.

    Continuous columns must be fully numeric with no missing cells;
    Mixed columns numeric-or-missing; categorical columns are free-form.
    """
    for spec in schema.included:
        if spec.name not in table.names:
            raise SchemaError("table lacks column %r" % (spec.name,))
        j = table.column_index(spec.name)
        toks = table.tokens[j]
        mask = table.numeric_mask[j]
        n_missing = sum(1 for t in toks if t is None)
        n_numeric = int(mask.sum())
        if isinstance(spec.kind, Continuous):
            if n_missing:
                raise SchemaError(
                    "continuous column %r has missing cells" % (spec.name,))
            if n_numeric != len(toks):
                raise SchemaError(
                    "continuous column %r has non-numeric tokens"
                    % (spec.name,))
        elif isinstance(spec.kind, Mixed):
            if n_numeric + n_missing != len(toks):
                raise SchemaError(
                    "mixed column %r has non-numeric tokens" % (spec.name,))


# ---------------------------------------------------------------------------
# splitting

def stratified_split(table, target, test_fraction, seed=0):
    """Split into (train, test) preserving target class proportions.

    Test quotas per class follow the largest-remainder method, so each
    class's test share is within one sample of test_fraction. With
    problem "none" (or target None) the split is a plain random one.
    Any represented class needs >= 2 rows.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    n = table.n_rows
    rng = np.random.default_rng(seed)
    if target is None or target.problem == "none":
        strata = [np.arange(n)]
    else:
        toks = table.column_tokens(target.column)
        classes = {}
        for i, t in enumerate(toks):
            classes.setdefault(t, []).append(i)
        for cls, idx in classes.items():
            if len(idx) < 2:
                raise ValueError(
                    "target class %r has %d row(s); need at least 2"
                    % (cls, len(idx)))
        # sort by token for a deterministic stratum order (None first)
        keys = sorted(classes, key=lambda t: (t is not None, t))
        strata = [np.array(classes[k]) for k in keys]
    total_test = int(round(n * test_fraction))
    quotas = [len(s) * test_fraction for s in strata]
    base = [int(math.floor(q)) for q in quotas]
    rem = total_test - sum(base)
    order = sorted(range(len(strata)),
                   key=lambda j: (-(quotas[j] - base[j]), j))
    take = list(base)
    for j in order[:max(rem, 0)]:
        take[j] += 1
    test_idx, train_idx = [], []
    for s, t in zip(strata, take):
        perm = rng.permutation(len(s))
        test_idx.extend(s[perm[:t]])
        train_idx.extend(s[perm[t:]])
    return (table.take_rows(sorted(train_idx)),
            table.take_rows(sorted(test_idx)))
