"""Row encoding for mixed-type tables.

Continuous and mixed columns are normalized per mode of a 1-D variational
Bayesian Gaussian mixture: a cell becomes a scalar alpha = (tau - mu_k) /
(4 sigma_k) clipped to [-1, 1] plus a one-hot over the mixture modes.
Mixed columns carry extra discrete modes for their categorical special
values (decoded back to the exact value) and, when the training data had
missing cells, one more mode for "missing". Categorical columns become
plain one-hots over their observed classes, missing class last. Encoded
rows lay out all continuous/mixed segments first, then the categorical
one-hots.

Heavily skewed columns can be compressed with a shifted log before the
mixture fit; the inverse is applied on decode, so the round trip is exact
up to float error.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma, gammaln

from .data import Categorical, Continuous, Mixed, SchemaError, Table


# ---------------------------------------------------------------------------
# long-tail compression

@dataclass(frozen=True)
class LongTailParams:
    """Shifted-log compression y = log(x) for positive domains, else
    y = log(x - lower + eps) with lower the training minimum."""
    lower: float
    eps: float = 1.0


def log_compress(x, params):
    x = np.asarray(x, dtype=np.float64)
    if params.lower > 0:
        return np.log(x)
    return np.log(x - params.lower + params.eps)


def log_expand(y, params):
    y = np.asarray(y, dtype=np.float64)
    if params.lower > 0:
        return np.exp(y)
    return np.exp(y) + params.lower - params.eps


# ---------------------------------------------------------------------------
# 1-D variational Bayesian Gaussian mixture

@dataclass
class GaussianMixture:
    weights: np.ndarray
    means: np.ndarray
    stds: np.ndarray

    @property
    def n_modes(self):
        return len(self.weights)

    def to_dict(self):
        return {"weights": self.weights.tolist(),
                "means": self.means.tolist(),
                "stds": self.stds.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["weights"], dtype=np.float64),
                   np.asarray(d["means"], dtype=np.float64),
                   np.asarray(d["stds"], dtype=np.float64))


def _kmeans_pp_init(x, k, rng):
    n = x.shape[0]
    centers = np.empty(k)
    centers[0] = x[rng.integers(n)]
    d2 = (x - centers[0]) ** 2
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j:] = centers[0]
            return centers
        centers[j] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, (x - centers[j]) ** 2)
    return centers


def _hellinger_sq(m1, s1, m2, s2):
    # squared Hellinger distance between two univariate normals
    v1, v2 = s1 * s1, s2 * s2
    return 1.0 - np.sqrt(2.0 * s1 * s2 / (v1 + v2)) * np.exp(
        -0.25 * (m1 - m2) ** 2 / (v1 + v2))


def _merge_overlapping(w, m, s, max_h2=0.5):
    """Moment-matched agglomerative merge of near-duplicate components.

    Variational fits routinely split one true mode across several
    components whose weights all survive pruning; collapsing pairs whose
    squared Hellinger distance is below max_h2 (closest pair first)
    restores one component per actual density peak without touching
    genuinely separate modes.
    """
    w, m, s = (np.array(a, dtype=np.float64) for a in (w, m, s))
    while len(w) > 1:
        best, bi, bj = np.inf, -1, -1
        for i in range(len(w)):
            for j in range(i + 1, len(w)):
                h2 = _hellinger_sq(m[i], s[i], m[j], s[j])
                if h2 < best:
                    best, bi, bj = h2, i, j
        if best >= max_h2:
            break
        wt = w[bi] + w[bj]
        mu = (w[bi] * m[bi] + w[bj] * m[bj]) / wt
        var = (w[bi] * (s[bi] ** 2 + m[bi] ** 2)
               + w[bj] * (s[bj] ** 2 + m[bj] ** 2)) / wt - mu ** 2
        keep = [t for t in range(len(w)) if t not in (bi, bj)]
        w = np.append(w[keep], wt)
        m = np.append(m[keep], mu)
        s = np.append(s[keep], np.sqrt(max(var, 0.0)))
    return w, m, s


def fit_vgm(values, max_modes=10, seed=0, max_iter=100, tol=1e-5,
            weight_prune=0.005, merge_h2=0.5):
    """Fit a 1-D Bayesian Gaussian mixture with automatic mode count.

    Dirichlet weight prior with concentration 1/max_modes and
    Normal-Gamma location/precision priors centered on the sample
    moments; k-means++ hard assignment for the first responsibilities.
    Iterates at most max_iter times or until the relative ELBO change
    drops below tol. Components with weight < weight_prune are dropped,
    the rest renormalized, near-duplicates merged, and modes returned
    sorted by mean. Standard deviations are floored at 1e-4 of the
    column std (1e-4 absolute when the column is constant).

    Args:
        values: 1-D array, no NaN.
        max_modes: mixture size ceiling.
        seed: init RNG seed; the fit is deterministic given it.

    Returns:
        GaussianMixture with 1..max_modes modes.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("cannot fit a mixture to an empty column")
    if not np.isfinite(x).all():
        raise ValueError("non-finite values in mixture input")
    col_std = float(x.std())
    floor = 1e-4 * col_std if col_std > 0 else 1e-4
    uniq = np.unique(x)
    if uniq.size == 1:
        return GaussianMixture(np.array([1.0]), np.array([float(uniq[0])]),
                               np.array([floor]))
    k = int(min(max_modes, uniq.size))
    rng = np.random.default_rng(seed)
    n = x.size

    alpha0 = 1.0 / max_modes
    m0 = x.mean()
    beta0 = 1.0
    a0 = 1.0
    b0 = x.var()

    centers = _kmeans_pp_init(x, k, rng)
    assign = np.argmin((x[:, None] - centers[None, :]) ** 2, axis=1)
    resp = np.zeros((n, k))
    resp[np.arange(n), assign] = 1.0

    elbo_old = -np.inf
    for _ in range(max_iter):
        Nk = resp.sum(axis=0) + 1e-300
        xbar = (resp * x[:, None]).sum(axis=0) / Nk
        Sk = (resp * (x[:, None] - xbar[None, :]) ** 2).sum(axis=0) / Nk
        alpha = alpha0 + Nk
        beta = beta0 + Nk
        m = (beta0 * m0 + Nk * xbar) / beta
        a = a0 + 0.5 * Nk
        b = b0 + 0.5 * (Nk * Sk
                        + beta0 * Nk * (xbar - m0) ** 2 / (beta0 + Nk))

        Elnpi = digamma(alpha) - digamma(alpha.sum())
        Elnlam = digamma(a) - np.log(b)
        # E[lambda (x-mu)^2] under q = 1/beta + (a/b)(x-m)^2
        quad = (1.0 / beta[None, :]
                + (a / b)[None, :] * (x[:, None] - m[None, :]) ** 2)
        logrho = (Elnpi[None, :] + 0.5 * Elnlam[None, :]
                  - 0.5 * np.log(2 * np.pi) - 0.5 * quad)
        lognorm = np.logaddexp.reduce(logrho, axis=1)
        resp = np.exp(logrho - lognorm[:, None])

        kl_dir = (gammaln(alpha.sum()) - gammaln(k * alpha0)
                  - (gammaln(alpha).sum() - k * gammaln(alpha0))
                  + ((alpha - alpha0)
                     * (digamma(alpha) - digamma(alpha.sum()))).sum())
        kl_gam = ((a - a0) * digamma(a) - gammaln(a) + gammaln(a0)
                  + a0 * (np.log(b) - np.log(b0)) + a * (b0 - b) / b)
        e_lam_msq = (a / b) * (m - m0) ** 2 + 1.0 / beta
        kl_norm = 0.5 * (np.log(beta / beta0) - 1.0 + beta0 * e_lam_msq)
        elbo = lognorm.sum() - kl_dir - (kl_gam + kl_norm).sum()
        if abs(elbo - elbo_old) / max(1.0, abs(elbo)) < tol:
            break
        elbo_old = elbo

    w = alpha / alpha.sum()
    mu = m
    sig = np.sqrt(b / a)

    keep = w >= weight_prune
    if not keep.any():
        keep[np.argmax(w)] = True
    w, mu, sig = w[keep], mu[keep], sig[keep]
    w = w / w.sum()
    w, mu, sig = _merge_overlapping(w, mu, sig, max_h2=merge_h2)
    sig = np.maximum(sig, floor)
    order = np.argsort(mu)
    return GaussianMixture(w[order], mu[order], sig[order])


# ---------------------------------------------------------------------------
# per-column codecs

def _select_modes(tau, gmm, weighted):
    """Mode index per value: argmax over (weighted) normal densities."""
    mu, sig = gmm.means[None, :], gmm.stds[None, :]
    z = (tau[:, None] - mu) / sig
    logd = -np.log(sig) - 0.5 * z * z
    if weighted:
        logd = logd + np.log(gmm.weights[None, :])
    return np.argmax(logd, axis=1)


class ContinuousCodec:
    """alpha in [-1,1] plus a mode one-hot from a fitted mixture."""

    kind = "continuous"

    def __init__(self, gmm, long_tail=None, weighted=True):
        self.gmm = gmm
        self.long_tail = long_tail
        self.weighted = weighted

    @property
    def n_modes(self):
        return self.gmm.n_modes

    @property
    def width(self):
        return 1 + self.gmm.n_modes

    def encode(self, values):
        tau = np.asarray(values, dtype=np.float64)
        if np.isnan(tau).any():
            raise ValueError("missing values in a continuous column")
        if self.long_tail is not None:
            tau = log_compress(tau, self.long_tail)
        modes = _select_modes(tau, self.gmm, self.weighted)
        alpha = (tau - self.gmm.means[modes]) / (4.0 * self.gmm.stds[modes])
        return np.clip(alpha, -1.0, 1.0), modes

    def decode(self, alpha, modes):
        alpha = np.clip(np.asarray(alpha, dtype=np.float64), -1.0, 1.0)
        tau = self.gmm.means[modes] + 4.0 * self.gmm.stds[modes] * alpha
        if self.long_tail is not None:
            tau = log_expand(tau, self.long_tail)
        return tau

    def to_dict(self):
        return {"type": "continuous", "gmm": self.gmm.to_dict(),
                "long_tail": (None if self.long_tail is None else
                              {"lower": self.long_tail.lower,
                               "eps": self.long_tail.eps}),
                "weighted": self.weighted}


class MixedCodec:
    """Continuous modes plus exact-valued categorical modes.

    Mode order: mixture modes sorted by mean, then categorical special
    values in their declared order, then (when the training column had
    missing cells) one missing mode. Cells hitting a categorical mode
    decode back to the exact stored value; alpha is 0 for them.
    """

    kind = "mixed"

    def __init__(self, gmm, cat_values, has_missing,
                 long_tail=None, weighted=True):
        self.gmm = gmm            # may be None: no continuous cells seen
        self.cat_values = [float(v) for v in cat_values]
        self.has_missing = bool(has_missing)
        self.long_tail = long_tail
        self.weighted = weighted

    @property
    def n_cont_modes(self):
        return 0 if self.gmm is None else self.gmm.n_modes

    @property
    def n_modes(self):
        return self.n_cont_modes + len(self.cat_values) + self.has_missing

    @property
    def width(self):
        return 1 + self.n_modes

    def encode(self, values):
        tau = np.asarray(values, dtype=np.float64)
        n = tau.shape[0]
        alpha = np.zeros(n)
        modes = np.zeros(n, dtype=np.intp)
        miss = np.isnan(tau)
        if miss.any() and not self.has_missing:
            raise ValueError("missing cell in a mixed column fitted "
                             "without missing values")
        cat = np.zeros(n, dtype=bool)
        for j, v in enumerate(self.cat_values):
            hit = ~miss & (tau == v)
            modes[hit] = self.n_cont_modes + j
            cat |= hit
        cont = ~miss & ~cat
        if cont.any():
            if self.gmm is None:
                raise ValueError("continuous cell in a mixed column whose "
                                 "fit saw only special values")
            t = tau[cont]
            if self.long_tail is not None:
                t = log_compress(t, self.long_tail)
            sel = _select_modes(t, self.gmm, self.weighted)
            a = (t - self.gmm.means[sel]) / (4.0 * self.gmm.stds[sel])
            alpha[cont] = np.clip(a, -1.0, 1.0)
            modes[cont] = sel
        if self.has_missing:
            modes[miss] = self.n_modes - 1
        return alpha, modes

    def decode(self, alpha, modes):
        """Returns (values, missing_mask)."""
        alpha = np.clip(np.asarray(alpha, dtype=np.float64), -1.0, 1.0)
        modes = np.asarray(modes, dtype=np.intp)
        n = modes.shape[0]
        out = np.empty(n)
        missing = np.zeros(n, dtype=bool)
        nc = self.n_cont_modes
        cont = modes < nc
        if cont.any():
            tau = (self.gmm.means[modes[cont]]
                   + 4.0 * self.gmm.stds[modes[cont]] * alpha[cont])
            if self.long_tail is not None:
                tau = log_expand(tau, self.long_tail)
            out[cont] = tau
        for j, v in enumerate(self.cat_values):
            out[modes == nc + j] = v
        if self.has_missing:
            m = modes == self.n_modes - 1
            out[m] = np.nan
            missing[m] = True
        return out, missing

    def to_dict(self):
        return {"type": "mixed",
                "gmm": None if self.gmm is None else self.gmm.to_dict(),
                "cat_values": self.cat_values,
                "has_missing": self.has_missing,
                "long_tail": (None if self.long_tail is None else
                              {"lower": self.long_tail.lower,
                               "eps": self.long_tail.eps}),
                "weighted": self.weighted}


class CategoricalCodec:
    """One-hot over observed classes (sorted); missing class last."""

    kind = "categorical"

    def __init__(self, classes, has_missing):
        self.classes = list(classes)
        self.has_missing = bool(has_missing)
        self._index = {c: i for i, c in enumerate(self.classes)}

    @property
    def n_classes(self):
        return len(self.classes) + self.has_missing

    @property
    def width(self):
        return self.n_classes

    def encode(self, tokens):
        idx = np.empty(len(tokens), dtype=np.intp)
        for i, t in enumerate(tokens):
            if t is None:
                if not self.has_missing:
                    raise ValueError("missing cell in a categorical column "
                                     "fitted without missing values")
                idx[i] = len(self.classes)
            else:
                j = self._index.get(t)
                if j is None:
                    raise ValueError("unseen category %r" % (t,))
                idx[i] = j
        return idx

    def decode(self, idx):
        out = []
        for i in np.asarray(idx, dtype=np.intp):
            if i == len(self.classes) and self.has_missing:
                out.append(None)
            else:
                out.append(self.classes[int(i)])
        return out

    def to_dict(self):
        return {"type": "categorical", "classes": self.classes,
                "has_missing": self.has_missing}


class MinMaxCodec:
    """Ablation path: a single [-1,1] scalar, no mode one-hot.

    Mixed special values are treated as plain numbers; missing cells are
    imputed with the training mean on encode and cannot be reproduced on
    decode. Long-tail compression still applies when configured.
    """

    kind = "minmax"

    def __init__(self, vmin, vmax, fill, long_tail=None):
        self.vmin = float(vmin)
        self.vmax = float(vmax)
        self.fill = float(fill)
        self.long_tail = long_tail

    @property
    def n_modes(self):
        return 0

    @property
    def width(self):
        return 1

    def encode(self, values):
        tau = np.asarray(values, dtype=np.float64).copy()
        tau[np.isnan(tau)] = self.fill
        if self.long_tail is not None:
            tau = log_compress(tau, self.long_tail)
        span = self.vmax - self.vmin
        if span <= 0:
            return np.zeros_like(tau), np.zeros(len(tau), dtype=np.intp)
        alpha = 2.0 * (tau - self.vmin) / span - 1.0
        return np.clip(alpha, -1.0, 1.0), np.zeros(len(tau), dtype=np.intp)

    def decode(self, alpha, modes=None):
        alpha = np.clip(np.asarray(alpha, dtype=np.float64), -1.0, 1.0)
        tau = self.vmin + (alpha + 1.0) / 2.0 * (self.vmax - self.vmin)
        if self.long_tail is not None:
            tau = log_expand(tau, self.long_tail)
        return tau, np.zeros(len(tau), dtype=bool)

    def to_dict(self):
        return {"type": "minmax", "vmin": self.vmin, "vmax": self.vmax,
                "fill": self.fill,
                "long_tail": (None if self.long_tail is None else
                              {"lower": self.long_tail.lower,
                               "eps": self.long_tail.eps})}


def _codec_from_dict(d):
    lt = d.get("long_tail")
    lt = None if lt is None else LongTailParams(lt["lower"], lt["eps"])
    t = d["type"]
    if t == "continuous":
        return ContinuousCodec(GaussianMixture.from_dict(d["gmm"]),
                               long_tail=lt, weighted=d["weighted"])
    if t == "mixed":
        gmm = (None if d["gmm"] is None
               else GaussianMixture.from_dict(d["gmm"]))
        return MixedCodec(gmm, d["cat_values"], d["has_missing"],
                          long_tail=lt, weighted=d["weighted"])
    if t == "categorical":
        return CategoricalCodec(d["classes"], d["has_missing"])
    if t == "minmax":
        return MinMaxCodec(d["vmin"], d["vmax"], d["fill"], long_tail=lt)
    raise ValueError("unknown codec type %r" % (t,))


# ---------------------------------------------------------------------------
# layout over the encoded row

@dataclass(frozen=True)
class Segment:
    column: str
    role: str          # "alpha" | "mode" | "class"
    offset: int        # start in the encoded row
    width: int
    cond_offset: int   # start in the conditional vector; -1 for alpha

    def to_dict(self):
        return {"column": self.column, "role": self.role,
                "offset": self.offset, "width": self.width,
                "cond_offset": self.cond_offset}


@dataclass
class EncodingLayout:
    segments: list = field(default_factory=list)
    width: int = 0
    cond_width: int = 0
    decode_order: list = field(default_factory=list)

    @property
    def condition_segments(self):
        return [s for s in self.segments if s.cond_offset >= 0]

    def column_segments(self, name):
        return [s for s in self.segments if s.column == name]

    def to_dict(self):
        return {"segments": [s.to_dict() for s in self.segments],
                "width": self.width, "cond_width": self.cond_width,
                "decode_order": self.decode_order}

    @classmethod
    def from_dict(cls, d):
        segs = [Segment(s["column"], s["role"], s["offset"], s["width"],
                        s["cond_offset"]) for s in d["segments"]]
        return cls(segs, d["width"], d["cond_width"], d["decode_order"])


@dataclass
class CodecConfig:
    max_modes: int = 10
    weight_prune: float = 0.005
    weighted_mode_choice: bool = True
    vgm: bool = True               # False: min-max ablation encoding
    seed: int = 0

    def to_dict(self):
        return {"max_modes": self.max_modes,
                "weight_prune": self.weight_prune,
                "weighted_mode_choice": self.weighted_mode_choice,
                "vgm": self.vgm, "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def fit_codecs(table, schema, config=None):
    """Fit one codec per included column. Returns {name: codec}."""
    config = config or CodecConfig()
    codecs = {}
    for spec in schema.included:
        name = spec.name
        j = table.column_index(name)
        if isinstance(spec.kind, Categorical):
            toks = table.tokens[j]
            present = sorted({t for t in toks if t is not None})
            if not present:
                raise SchemaError("categorical column %r is all-missing"
                                  % (name,))
            codecs[name] = CategoricalCodec(
                present, has_missing=any(t is None for t in toks))
            continue
        nums = table.numeric[j]
        if isinstance(spec.kind, Continuous):
            if np.isnan(nums).any():
                raise SchemaError("continuous column %r has missing or "
                                  "non-numeric cells" % (name,))
            lt = None
            if spec.kind.log_transform:
                lt = LongTailParams(float(nums.min()))
            vals = nums if lt is None else log_compress(nums, lt)
            if not config.vgm:
                codecs[name] = MinMaxCodec(vals.min(), vals.max(),
                                           nums.mean(), long_tail=lt)
            else:
                gmm = fit_vgm(vals, max_modes=config.max_modes,
                              seed=config.seed,
                              weight_prune=config.weight_prune)
                codecs[name] = ContinuousCodec(
                    gmm, long_tail=lt,
                    weighted=config.weighted_mode_choice)
            continue
        # mixed
        miss = np.isnan(nums)
        tok_missing = table.missing_mask(name)
        if (miss != tok_missing).any():
            raise SchemaError("mixed column %r has non-numeric tokens"
                              % (name,))
        cat_vals = list(spec.kind.categorical_values)
        is_cat = np.isin(nums, cat_vals) & ~miss
        cont = nums[~miss & ~is_cat]
        if not config.vgm:
            # special values are plain numbers here, so the long-tail
            # shift must cover them too (zeros push it onto the
            # shifted-log branch instead of log(0))
            vals = nums[~miss]
            lt = None
            if spec.kind.log_transform and vals.size:
                lt = LongTailParams(float(vals.min()))
            cvals = vals if lt is None else log_compress(vals, lt)
            fill = vals.mean() if vals.size else 0.0
            codecs[name] = MinMaxCodec(
                cvals.min() if vals.size else 0.0,
                cvals.max() if vals.size else 1.0, fill, long_tail=lt)
            continue
        lt = None
        if spec.kind.log_transform and cont.size:
            lt = LongTailParams(float(cont.min()))
        gmm = None
        if cont.size:
            cvals = cont if lt is None else log_compress(cont, lt)
            gmm = fit_vgm(cvals, max_modes=config.max_modes,
                          seed=config.seed,
                          weight_prune=config.weight_prune)
        codecs[name] = MixedCodec(gmm, cat_vals, bool(miss.any()),
                                  long_tail=lt,
                                  weighted=config.weighted_mode_choice)
    return codecs


def build_layout(schema, codecs):
    """Segment map: continuous/mixed columns first, then categorical."""
    num_cols = [c.name for c in schema.included
                if isinstance(c.kind, (Continuous, Mixed))]
    cat_cols = [c.name for c in schema.included
                if isinstance(c.kind, Categorical)]
    segments = []
    off = 0
    coff = 0
    for name in num_cols:
        cdc = codecs[name]
        segments.append(Segment(name, "alpha", off, 1, -1))
        off += 1
        if cdc.n_modes > 0:
            segments.append(Segment(name, "mode", off, cdc.n_modes, coff))
            off += cdc.n_modes
            coff += cdc.n_modes
    for name in cat_cols:
        cdc = codecs[name]
        segments.append(Segment(name, "class", off, cdc.n_classes, coff))
        off += cdc.n_classes
        coff += cdc.n_classes
    decode_order = [c.name for c in schema.included]
    return EncodingLayout(segments, off, coff, decode_order)


def encode_table(table, schema, codecs, layout):
    """Encode every row. Returns an (n_rows, layout.width) float array."""
    X = np.zeros((table.n_rows, layout.width))
    for spec in schema.included:
        name = spec.name
        cdc = codecs[name]
        segs = layout.column_segments(name)
        if isinstance(spec.kind, Categorical):
            idx = cdc.encode(table.column_tokens(name))
            seg = segs[0]
            X[np.arange(table.n_rows), seg.offset + idx] = 1.0
        else:
            alpha, modes = cdc.encode(table.column_numeric(name))
            aseg = [s for s in segs if s.role == "alpha"][0]
            X[:, aseg.offset] = alpha
            mseg = [s for s in segs if s.role == "mode"]
            if mseg:
                X[np.arange(table.n_rows), mseg[0].offset + modes] = 1.0
    return X


def _hard_argmax(block, column):
    """Validate a hard one-hot block and return the set index per row."""
    if not np.isin(block, (0.0, 1.0)).all() or (block.sum(axis=1) != 1).any():
        raise ValueError("segment of column %r is not a hard one-hot"
                         % (column,))
    return np.argmax(block, axis=1)


def decode_rows(X, schema, codecs, layout):
    """Invert encode_table. One-hot segments must be hard (exactly one 1).

    Returns a Table over the included columns in their schema order.
    """
    X = np.asarray(X, dtype=np.float64)
    names, value_cols = [], []
    for name in layout.decode_order:
        spec = schema[name]
        cdc = codecs[name]
        segs = layout.column_segments(name)
        if isinstance(spec.kind, Categorical):
            seg = segs[0]
            idx = _hard_argmax(X[:, seg.offset:seg.offset + seg.width], name)
            value_cols.append(cdc.decode(idx))
        else:
            aseg = [s for s in segs if s.role == "alpha"][0]
            alpha = X[:, aseg.offset]
            mseg = [s for s in segs if s.role == "mode"]
            if mseg:
                s = mseg[0]
                modes = _hard_argmax(X[:, s.offset:s.offset + s.width], name)
            else:
                modes = np.zeros(X.shape[0], dtype=np.intp)
            if isinstance(cdc, ContinuousCodec):
                vals = cdc.decode(alpha, modes)
                value_cols.append([float(v) for v in vals])
            else:
                vals, missing = cdc.decode(alpha, modes)
                value_cols.append([None if mi else float(v)
                                   for v, mi in zip(vals, missing)])
        names.append(name)
    return Table.from_values(names, value_cols)


# ---------------------------------------------------------------------------
# bundle serialization

CODEC_FORMAT = "tabsynth-codecs-v1"


def codecs_to_json(schema, codecs, layout, config):
    return json.dumps({
        "format": CODEC_FORMAT,
        "schema": schema.to_dict(),
        "codecs": {n: c.to_dict() for n, c in codecs.items()},
        "layout": layout.to_dict(),
        "config": config.to_dict(),
    })


def codecs_from_json(text):
    from .data import Schema
    d = json.loads(text)
    if d.get("format") != CODEC_FORMAT:
        raise ValueError("not a codec bundle (format=%r)"
                         % (d.get("format"),))
    schema = Schema.from_dict(d["schema"])
    codecs = {n: _codec_from_dict(cd) for n, cd in d["codecs"].items()}
    layout = EncodingLayout.from_dict(d["layout"])
    config = CodecConfig.from_dict(d["config"])
    return schema, codecs, layout, config
