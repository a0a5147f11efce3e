"""Statistical similarity, privacy distance, and ML utility metrics.

All metrics are exact computations on the given samples, no estimators
with tuning knobs. Distribution distance uses base-2 Jensen-Shannon
divergence for categorical columns and the exact 1-D Wasserstein
distance (sorted-merge form of the CDF integral) for continuous and
mixed columns. Pairwise association uses Pearson correlation between
continuous pairs, Theil's U (both directions, it is asymmetric) between
categorical pairs, and the correlation ratio across kinds. Privacy is
summarized by 5th-percentile distance-to-closest-record and
nearest-neighbour distance ratio in a normalized representation.
Utility compares classifier plugins trained on real vs synthetic rows
against a common held-out test set.
"""

from __future__ import annotations

import math

import numpy as np

from .classifiers import builtin_plugins
from .data import Categorical, Schema, Table, TargetSpec


# ---------------------------------------------------------------------------
# distribution distances


def jsd(p, q) -> float:
    """Jensen-Shannon divergence, base 2, between aligned probability
    vectors. Bounded in [0, 1]; zero entries contribute nothing."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.size == 0 or p.size != q.size:
        raise ValueError("need two aligned non-empty distributions")
    p = p / p.sum()
    q = q / q.sum()
    m = 0.5 * (p + q)

    def kl(a, b):
        mask = a > 0
        return float((a[mask] * np.log2(a[mask] / b[mask])).sum())

    return 0.5 * kl(p, m) + 0.5 * kl(q, m)


def category_frequencies(tokens):
    """Relative frequency per token; missing cells count as their own
    category keyed by None."""
    counts = {}
    for t in tokens:
        counts[t] = counts.get(t, 0) + 1
    n = len(tokens)
    return {k: v / n for k, v in counts.items()}


def jsd_tokens(real_tokens, synth_tokens) -> float:
    """JSD between two token samples over their union support."""
    fr = category_frequencies(real_tokens)
    fs = category_frequencies(synth_tokens)
    support = sorted(set(fr) | set(fs), key=lambda t: (t is not None, t))
    p = [fr.get(t, 0.0) for t in support]
    q = [fs.get(t, 0.0) for t in support]
    return jsd(p, q)


def wasserstein_1d(a, b) -> float:
    """Exact 1-D Wasserstein distance between two samples.

    Computed as the integral of |F_a - F_b| over the merged sorted
    support, which equals the quantile-function integral.
    """
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValueError("need two non-empty samples")
    merged = np.concatenate([a, b])
    merged.sort()
    deltas = np.diff(merged)
    ca = np.searchsorted(a, merged[:-1], side="right") / a.size
    cb = np.searchsorted(b, merged[:-1], side="right") / b.size
    return float(np.abs(ca - cb) @ deltas)


def scaled_wasserstein(a, b) -> float:
    """Wasserstein distance after min-max scaling both samples by their
    combined range, so the result lives in [0, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if hi <= lo:
        return 0.0
    return wasserstein_1d((a - lo) / (hi - lo), (b - lo) / (hi - lo))


# ---------------------------------------------------------------------------
# pairwise association


def _entropy(counts):
    p = np.asarray(counts, dtype=np.float64)
    p = p[p > 0]
    p = p / p.sum()
    return float(-(p * np.log(p)).sum())


def theils_u(x_tokens, y_tokens) -> float:
    """Uncertainty coefficient U(X|Y): the fraction of H(X) explained
    by knowing Y. Asymmetric; constant X yields 1 by convention."""
    n = len(x_tokens)
    if n == 0 or n != len(y_tokens):
        raise ValueError("need two aligned non-empty token lists")
    x_counts = {}
    joint = {}
    y_groups = {}
    for xv, yv in zip(x_tokens, y_tokens):
        x_counts[xv] = x_counts.get(xv, 0) + 1
        joint[(xv, yv)] = joint.get((xv, yv), 0) + 1
        y_groups.setdefault(yv, []).append(xv)
    hx = _entropy(list(x_counts.values()))
    if hx == 0.0:
        return 1.0
    hxy = 0.0
    for yv, members in y_groups.items():
        sub = {}
        for xv in members:
            sub[xv] = sub.get(xv, 0) + 1
        hxy += len(members) / n * _entropy(list(sub.values()))
    return (hx - hxy) / hx


def correlation_ratio(cat_tokens, values) -> float:
    """Correlation ratio eta between a categorical grouping and a
    numeric column: sqrt of between-group over total variance."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0 or len(cat_tokens) != values.size:
        raise ValueError("need aligned non-empty samples")
    total = float(((values - values.mean()) ** 2).sum())
    if total == 0.0:
        return 0.0
    groups = {}
    for t, v in zip(cat_tokens, values):
        groups.setdefault(t, []).append(v)
    grand = values.mean()
    between = sum(len(g) * (np.mean(g) - grand) ** 2 for g in groups.values())
    return math.sqrt(max(0.0, min(1.0, between / total)))


def _pearson(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    sa = a.std()
    sb = b.std()
    if sa == 0.0 or sb == 0.0:
        return 0.0
    return float(((a - a.mean()) * (b - b.mean())).mean() / (sa * sb))


def association_matrix(table: Table, schema: Schema):
    """Pairwise association over included columns.

    Returns (matrix, kinds, warnings). kinds[i] is "categorical" or
    "continuous" (mixed columns are treated as continuous through their
    numeric values). Entry [i][j] is Pearson r for continuous pairs,
    U(i|j) for categorical pairs, and eta across kinds; the diagonal is
    1. Zero-variance continuous columns force their entries to 0 and
    add a warning.
    """
    cols = [c for c in schema.columns if c.include]
    kinds = ["categorical" if isinstance(c.kind, Categorical) else "continuous"
             for c in cols]
    k = len(cols)
    warnings = []
    numeric = {}
    masks = {}
    tokens = {}
    for i, c in enumerate(cols):
        if kinds[i] == "continuous":
            numeric[i] = table.column_numeric(c.name)
            masks[i] = ~np.isnan(numeric[i])
            if masks[i].sum() == 0 or numeric[i][masks[i]].std() == 0.0:
                warnings.append(
                    "column %r has zero variance; associations set to 0"
                    % c.name)
                masks[i] = np.zeros_like(masks[i])   # degenerate, pairs -> 0
        else:
            tokens[i] = table.column_tokens(c.name)

    m = np.eye(k)
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            if kinds[i] == "continuous" and kinds[j] == "continuous":
                both = masks[i] & masks[j]
                m[i, j] = _pearson(numeric[i][both], numeric[j][both]) \
                    if both.sum() >= 2 else 0.0
            elif kinds[i] == "categorical" and kinds[j] == "categorical":
                m[i, j] = theils_u(tokens[i], tokens[j])
            else:
                ci, cj = (i, j) if kinds[i] == "categorical" else (j, i)
                ok = masks[cj]
                if ok.sum() < 2:
                    m[i, j] = 0.0
                    continue
                toks = [tokens[ci][r] for r in np.nonzero(ok)[0]]
                m[i, j] = correlation_ratio(toks, numeric[cj][ok])
    return m, kinds, warnings


def diff_corr(real_m, synth_m, kinds) -> float:
    """Euclidean norm of association differences over the upper
    triangle; categorical-categorical pairs contribute both directions
    because Theil's U is asymmetric."""
    real_m = np.asarray(real_m, dtype=np.float64)
    synth_m = np.asarray(synth_m, dtype=np.float64)
    total = 0.0
    k = real_m.shape[0]
    for i in range(k):
        for j in range(i + 1, k):
            d = real_m[i, j] - synth_m[i, j]
            total += d * d
            if kinds[i] == "categorical" and kinds[j] == "categorical":
                d = real_m[j, i] - synth_m[j, i]
                total += d * d
    return math.sqrt(total)


# ---------------------------------------------------------------------------
# privacy distances

ONE_HOT_SCALE = 1.0 / math.sqrt(2.0)


def distance_representation(tables, schema: Schema):
    """Shared numeric representation for record-distance metrics.

    Numeric columns are min-max scaled by the combined range of all
    given tables (missing cells filled with the combined observed
    mean); categorical columns become one-hot blocks scaled by
    1/sqrt(2) so a category change contributes distance 1. Returns one
    matrix per input table.
    """
    cols = [c for c in schema.columns if c.include]
    blocks = [[] for _ in tables]
    for c in cols:
        if isinstance(c.kind, Categorical):
            toks = [t.column_tokens(c.name) for t in tables]
            vocab = sorted({v for ts in toks for v in ts},
                           key=lambda t: (t is not None, t))
            index = {v: i for i, v in enumerate(vocab)}
            for b, ts in zip(blocks, toks):
                hot = np.zeros((len(ts), len(vocab)))
                hot[np.arange(len(ts)), [index[v] for v in ts]] = ONE_HOT_SCALE
                b.append(hot)
        else:
            vals = [t.column_numeric(c.name) for t in tables]
            pool = np.concatenate([v[~np.isnan(v)] for v in vals])
            if pool.size == 0:
                lo, hi, mean = 0.0, 1.0, 0.5
            else:
                lo, hi, mean = pool.min(), pool.max(), pool.mean()
            span = hi - lo if hi > lo else 1.0
            for b, v in zip(blocks, vals):
                filled = np.where(np.isnan(v), mean, v)
                b.append(((filled - lo) / span)[:, None])
    return [np.hstack(b) for b in blocks]


def _nearest(queries, refs, k, exclude_self=False):
    """Distances to the k closest reference rows per query row, brute
    force in blocks. exclude_self treats query row i as reference row i."""
    if refs.shape[0] < k + (1 if exclude_self else 0):
        raise ValueError("reference set too small")
    out = np.empty((queries.shape[0], k))
    block = 256
    for s in range(0, queries.shape[0], block):
        q = queries[s:s + block]
        diff = q[:, None, :] - refs[None, :, :]
        dist = np.sqrt((diff * diff).sum(axis=2))
        if exclude_self:
            rows = np.arange(s, s + q.shape[0])
            dist[np.arange(q.shape[0]), rows] = np.inf
        part = np.partition(dist, k - 1, axis=1)[:, :k]
        part.sort(axis=1)
        out[s:s + q.shape[0]] = part
    return out


def dcr(queries, refs, exclude_self=False) -> float:
    """5th percentile (linear interpolation) of the distance from each
    query row to its closest reference row."""
    d1 = _nearest(queries, refs, 1, exclude_self)[:, 0]
    return float(np.percentile(d1, 5.0))


def nndr(queries, refs, exclude_self=False) -> float:
    """5th percentile of the closest to second-closest distance ratio.
    A zero second distance means duplicates; the ratio is 1 there."""
    near = _nearest(queries, refs, 2, exclude_self)
    d1, d2 = near[:, 0], near[:, 1]
    ratio = np.where(d2 == 0.0, 1.0, d1 / np.where(d2 == 0.0, 1.0, d2))
    return float(np.percentile(ratio, 5.0))


# ---------------------------------------------------------------------------
# ML utility


def _roc_auc(y_true, scores) -> float:
    """Binary AUC via the rank statistic with tie averaging."""
    y_true = np.asarray(y_true, dtype=bool)
    pos = y_true.sum()
    neg = y_true.size - pos
    if pos == 0 or neg == 0:
        raise ValueError("need both classes for AUC")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(y_true.size, dtype=np.float64)
    sorted_scores = np.asarray(scores)[order]
    i = 0
    while i < y_true.size:
        j = i
        while j + 1 < y_true.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return float((ranks[y_true].sum() - pos * (pos + 1) / 2) / (pos * neg))


def _macro_f1(y_true, y_pred, classes) -> float:
    scores = []
    for c in classes:
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


def _classifier_metrics(model, F_test, y_test):
    proba = model.predict_proba(F_test)
    sums = proba.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        raise ValueError("plugin probabilities do not sum to 1")
    pred = [model.classes[i] for i in proba.argmax(axis=1)]
    acc = float(np.mean([p == t for p, t in zip(pred, y_test)]))
    f1 = _macro_f1(y_test, pred, model.classes)
    aucs = []
    for ci, c in enumerate(model.classes):
        mask = np.array([t == c for t in y_test])
        if mask.any() and (~mask).any():
            aucs.append(_roc_auc(mask, proba[:, ci]))
    auc = float(np.mean(aucs)) if aucs else None
    return {"accuracy": acc, "f1_macro": f1, "auc": auc}


def _utility_features(train: Table, test: Table, schema: Schema, target: str):
    """Numeric feature matrices for classifier plugins.

    Continuous and mixed columns are min-max scaled by the training
    range (missing filled with the training mean); categorical columns
    one-hot over the union of train and test vocabularies so unseen
    test categories map cleanly. The target column is excluded from
    features and returned as label lists.
    """
    cols = [c for c in schema.columns if c.include and c.name != target]
    tr_blocks, te_blocks = [], []
    for c in cols:
        if isinstance(c.kind, Categorical):
            tr = train.column_tokens(c.name)
            te = test.column_tokens(c.name)
            vocab = sorted(set(tr) | set(te), key=lambda t: (t is not None, t))
            index = {v: i for i, v in enumerate(vocab)}
            for block, toks in ((tr_blocks, tr), (te_blocks, te)):
                hot = np.zeros((len(toks), len(vocab)))
                hot[np.arange(len(toks)), [index[v] for v in toks]] = 1.0
                block.append(hot)
        else:
            tr = train.column_numeric(c.name)
            te = test.column_numeric(c.name)
            seen = tr[~np.isnan(tr)]
            if seen.size == 0:
                lo, hi, mean = 0.0, 1.0, 0.5
            else:
                lo, hi, mean = seen.min(), seen.max(), seen.mean()
            span = hi - lo if hi > lo else 1.0
            for block, v in ((tr_blocks, tr), (te_blocks, te)):
                filled = np.where(np.isnan(v), mean, v)
                block.append((np.clip((filled - lo) / span, -1.0, 2.0))[:, None])
    F_train = np.hstack(tr_blocks) if tr_blocks else np.zeros((train.n_rows, 0))
    F_test = np.hstack(te_blocks) if te_blocks else np.zeros((test.n_rows, 0))
    return F_train, train.column_tokens(target), F_test, test.column_tokens(target)


def ml_utility(real_train: Table, synth: Table, real_test: Table,
               schema: Schema, target: str, plugins=None):
    """Train each plugin on real and on synthetic rows, evaluate both
    on the same held-out real test set, and report the metric gaps.

    A plugin failure (e.g. single-class synthetic labels) is recorded
    under its name instead of aborting the whole evaluation.
    """
    if plugins is None:
        plugins = builtin_plugins()
    warnings = []
    if synth.n_rows != real_train.n_rows:
        warnings.append(
            "synthetic sample size %d differs from real training size %d"
            % (synth.n_rows, real_train.n_rows))
    models = {}
    for name, factory in plugins:
        entry = {}
        for label, train_table in (("real", real_train), ("synthetic", synth)):
            try:
                F_tr, y_tr, F_te, y_te = _utility_features(
                    train_table, real_test, schema, target)
                keep = [i for i, t in enumerate(y_tr) if t is not None]
                if len(keep) < len(y_tr):
                    warnings.append("%s rows with missing target dropped"
                                    % label)
                    F_tr = F_tr[keep]
                    y_tr = [y_tr[i] for i in keep]
                model = factory().fit(F_tr, y_tr)
                entry[label] = _classifier_metrics(model, F_te, y_te)
            except Exception as exc:   # recorded, not fatal
                entry[label] = {"error": str(exc)}
        if "error" not in entry["real"] and "error" not in entry["synthetic"]:
            entry["difference"] = {
                k: (entry["real"][k] - entry["synthetic"][k])
                if entry["real"][k] is not None
                and entry["synthetic"][k] is not None else None
                for k in ("accuracy", "f1_macro", "auc")}
        models[name] = entry
    return {"models": models, "warnings": warnings}


# ---------------------------------------------------------------------------
# report documents


def _ecdf_points(values, max_points=200):
    vals = np.sort(values[~np.isnan(values)])
    if vals.size == 0:
        return []
    n = vals.size
    idx = np.linspace(0, n - 1, min(n, max_points)).round().astype(int)
    return [[float(vals[i]), float((i + 1) / n)] for i in idx]


def similarity_report(real: Table, synth: Table, schema: Schema):
    """Per-column distances plus association structure, JSON-ready."""
    cols = [c for c in schema.columns if c.include]
    per_column = {}
    jsd_values, wd_values = [], []
    for c in cols:
        if isinstance(c.kind, Categorical):
            value = jsd_tokens(real.column_tokens(c.name),
                               synth.column_tokens(c.name))
            jsd_values.append(value)
            fr = category_frequencies(real.column_tokens(c.name))
            fs = category_frequencies(synth.column_tokens(c.name))
            labels = sorted(set(fr) | set(fs),
                            key=lambda t: (t is not None, t))
            per_column[c.name] = {
                "kind": "categorical", "jsd": value,
                "frequencies": {"labels": labels,
                                "real": [fr.get(t, 0.0) for t in labels],
                                "synthetic": [fs.get(t, 0.0) for t in labels]}}
        else:
            rv = real.column_numeric(c.name)
            sv = synth.column_numeric(c.name)
            rv = rv[~np.isnan(rv)]
            sv = sv[~np.isnan(sv)]
            wd = wasserstein_1d(rv, sv)
            wd_s = scaled_wasserstein(rv, sv)
            wd_values.append(wd_s)
            per_column[c.name] = {
                "kind": "continuous", "wasserstein": wd,
                "wasserstein_scaled": wd_s,
                "ecdf": {"real": _ecdf_points(real.column_numeric(c.name)),
                         "synthetic": _ecdf_points(synth.column_numeric(c.name))}}
    real_m, kinds, warn_r = association_matrix(real, schema)
    synth_m, _, warn_s = association_matrix(synth, schema)
    return {
        "columns": per_column,
        "avg_jsd": float(np.mean(jsd_values)) if jsd_values else None,
        "avg_wasserstein_scaled":
            float(np.mean(wd_values)) if wd_values else None,
        "association": {"order": [c.name for c in cols],
                        "real": real_m.tolist(),
                        "synthetic": synth_m.tolist()},
        "diff_corr": diff_corr(real_m, synth_m, kinds),
        "warnings": sorted(set(warn_r) | set(warn_s)),
    }


def privacy_report(real: Table, synth: Table, schema: Schema):
    """DCR and NNDR 5th percentiles between and within the two sets."""
    R, S = distance_representation([real, synth], schema)
    return {
        "dcr": {"real_synthetic": dcr(S, R),
                "within_real": dcr(R, R, exclude_self=True),
                "within_synthetic": dcr(S, S, exclude_self=True)},
        "nndr": {"real_synthetic": nndr(S, R),
                 "within_real": nndr(R, R, exclude_self=True),
                 "within_synthetic": nndr(S, S, exclude_self=True)},
    }


def build_report(real: Table, synth: Table, schema: Schema,
                 target: TargetSpec | None = None, test: Table | None = None):
    """Full evaluation document: similarity, privacy, and (when a
    target and test split are given) ML utility."""
    doc = {
        "rows": {"real": real.n_rows, "synthetic": synth.n_rows},
        "similarity": similarity_report(real, synth, schema),
        "privacy": privacy_report(real, synth, schema),
        "utility": None,
    }
    if target is not None and target.problem != "none" and test is not None:
        doc["utility"] = ml_utility(real, synth, test, schema, target.column)
    return doc
