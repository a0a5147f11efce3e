"""Conditional GAN over encoded rows.

Three networks: a generator fed noise plus a conditional vector, a
discriminator judging (row, condition) pairs, and an auxiliary
classifier trained on real records that scores the semantic consistency
of fake ones. The generator's loss stacks four terms: non-saturating
adversarial, feature-statistics matching on the discriminator's
penultimate activations, classifier cross-entropy against the fake
row's own generated label, and cross-entropy tying the conditioned
segment to the sampled condition.

Everything runs on the hand-rolled dense stack from nn.py; training is
deterministic under the config seed.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .condvec import (FrequencyTable, draw_real_batch, make_condition,
                      sample_condition)
from .data import Categorical, SchemaError, TargetSpec
from .nn import Adam, DenseNet, OutputHead
from .transform import (CategoricalCodec, CodecConfig, MinMaxCodec,
                        build_layout, codecs_from_json, codecs_to_json,
                        decode_rows, encode_table, fit_codecs, log_compress)

PROB_CLAMP = 1e-7
BUNDLE_FORMAT = "tabsynth-model-v1"


@dataclass
class TrainConfig:
    epochs: int = 150
    batch_size: int = 500
    noise_dim: int = 100
    seed: int = 0
    classifier_on: bool = True
    info_loss_on: bool = True
    vgm_on: bool = True
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.9
    adam_eps: float = 1e-8
    lambda_info: float = 1.0
    lambda_class: float = 1.0
    lambda_cond: float = 1.0
    g_hidden: tuple = (256, 256, 256, 256)
    d_hidden: tuple = (256, 256)
    c_hidden: tuple = (256, 256, 256, 256, 256, 256)
    gumbel_temperature: float = 0.2
    info_features: str = "penultimate"   # or "output"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        self.g_hidden = tuple(self.g_hidden)
        self.d_hidden = tuple(self.d_hidden)
        self.c_hidden = tuple(self.c_hidden)

    def to_dict(self):
        d = self.__dict__.copy()
        for k in ("g_hidden", "d_hidden", "c_hidden"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


# ---------------------------------------------------------------------------
# losses (values plus the gradients the trainer chains)

def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))


def adv_losses(p_real, p_fake):
    """Non-saturating GAN losses from discriminator probabilities."""
    pr = np.clip(np.asarray(p_real, dtype=np.float64),
                 PROB_CLAMP, 1.0 - PROB_CLAMP)
    pf = np.clip(np.asarray(p_fake, dtype=np.float64),
                 PROB_CLAMP, 1.0 - PROB_CLAMP)
    d_loss = float(-np.log(pr).mean() - np.log1p(-pf).mean())
    g_adv = float(-np.log(pf).mean())
    return d_loss, g_adv


def _adv_d_grads(logit_real, logit_fake):
    # d_loss in logit form: mean softplus(-lr) + mean softplus(lf)
    br, bf = logit_real.shape[0], logit_fake.shape[0]
    return (sigmoid(logit_real) - 1.0) / br, sigmoid(logit_fake) / bf


def _adv_g_grad(logit_fake):
    # g_adv = mean softplus(-lf)
    return (sigmoid(logit_fake) - 1.0) / logit_fake.shape[0]


@dataclass
class FeatureStats:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def from_batch(cls, F):
        F = np.asarray(F, dtype=np.float64)
        return cls(F.mean(axis=0), F.std(axis=0))


def info_loss(real_stats, fake_stats):
    """L2 gap of batch feature means plus L2 gap of feature stds."""
    if real_stats.mean.shape != fake_stats.mean.shape:
        raise ValueError("feature width mismatch")
    dm = np.linalg.norm(real_stats.mean - fake_stats.mean)
    ds = np.linalg.norm(real_stats.std - fake_stats.std)
    return float(dm + ds)


def _info_grad(real_stats, F_fake):
    """Gradient of info_loss with respect to the fake feature batch."""
    F = np.asarray(F_fake, dtype=np.float64)
    B = F.shape[0]
    mu = F.mean(axis=0)
    sd = F.std(axis=0)
    dmu_vec = mu - real_stats.mean
    dm = np.linalg.norm(dmu_vec)
    dsd_vec = sd - real_stats.std
    ds = np.linalg.norm(dsd_vec)
    grad = np.zeros_like(F)
    if dm > 1e-12:
        grad += dmu_vec[None, :] / (dm * B)
    if ds > 1e-12:
        safe = np.maximum(sd, 1e-12)
        coeff = dsd_vec / (ds * safe * B)
        grad += coeff[None, :] * (F - mu[None, :])
    return grad


def cond_loss(fake_soft, layout, condition):
    """Cross-entropy of the conditioned soft segment against the condition."""
    seg = layout.condition_segments[condition.segment_index]
    p = fake_soft[:, seg.offset + condition.local]
    return float(-np.log(np.clip(p, PROB_CLAMP, None)).mean())


def _cond_grad(fake_soft, layout, condition):
    seg = layout.condition_segments[condition.segment_index]
    grad = np.zeros_like(fake_soft)
    p = np.clip(fake_soft[:, seg.offset + condition.local], PROB_CLAMP, None)
    grad[:, seg.offset + condition.local] = -1.0 / (p * fake_soft.shape[0])
    return grad


def _log_softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def soft_cross_entropy(logits, soft_targets):
    """Mean CE of a softmax readout against (possibly soft) target rows.

    Returns (value, dlogits, dtargets); both gradients already carry the
    1/batch factor.
    """
    logp = _log_softmax(logits)
    B = logits.shape[0]
    value = float(-(soft_targets * logp).sum() / B)
    p = np.exp(logp)
    dlogits = (p * soft_targets.sum(axis=1, keepdims=True) - soft_targets) / B
    dtargets = -logp / B
    return value, dlogits, dtargets


def hard_cross_entropy(logits, labels):
    """Mean CE against integer labels; returns (value, dlogits)."""
    logp = _log_softmax(logits)
    B = logits.shape[0]
    value = float(-logp[np.arange(B), labels].mean())
    p = np.exp(logp)
    p[np.arange(B), labels] -= 1.0
    return value, p / B


def class_loss(c_net, features, soft_labels):
    """CE between the classifier's prediction on fake features and the
    fake rows' own generated label segment."""
    logits = c_net.forward(features)
    value, _, _ = soft_cross_entropy(logits, soft_labels)
    return value


# ---------------------------------------------------------------------------
# classifier feature map (differentiable, shared by real and fake rows)

class ClassifierFeatures:
    """Projects encoded rows onto the auxiliary classifier's input.

    Per non-target numeric column: one scalar that min-max-rescales the
    mode-mixture decode sum_k beta_k (mu_k + 4 sigma_k alpha) (zero when
    a special-value/missing mode is selected) plus the mode block passed
    through; long-tail columns stay in compressed space so the scalar is
    linear in the row. Per non-target categorical column: the class
    block passed through. The target column is excluded from features
    and its class segment provides the labels.
    """

    def __init__(self, schema, codecs, layout, target_column, spans):
        self.schema = schema
        self.codecs = codecs
        self.layout = layout
        self.target_column = target_column
        self.spans = spans   # {column: (lo, hi)} for scaled numeric slots
        tseg = [s for s in layout.segments
                if s.column == target_column and s.role == "class"]
        if not tseg:
            raise SchemaError("target column %r has no class segment"
                              % (target_column,))
        self.target_segment = tseg[0]
        self._plan = []
        w = 0
        for spec in schema.included:
            if spec.name == target_column:
                continue
            segs = layout.column_segments(spec.name)
            if isinstance(spec.kind, Categorical):
                seg = segs[0]
                self._plan.append(("block", spec.name, seg, w))
                w += seg.width
            else:
                aseg = [s for s in segs if s.role == "alpha"][0]
                mseg = [s for s in segs if s.role == "mode"]
                self._plan.append(("value", spec.name, aseg,
                                   mseg[0] if mseg else None, w))
                w += 1
                if mseg:
                    self._plan.append(("block", spec.name, mseg[0], w))
                    w += mseg[0].width
        self.width = w

    @property
    def n_classes(self):
        return self.target_segment.width

    @classmethod
    def fit(cls, table, schema, codecs, layout, target_column):
        spans = {}
        for spec in schema.included:
            if spec.name == target_column or isinstance(spec.kind,
                                                        Categorical):
                continue
            cdc = codecs[spec.name]
            nums = table.column_numeric(spec.name)
            if isinstance(cdc, MinMaxCodec):
                vals = nums[~np.isnan(nums)]
                if cdc.long_tail is not None:
                    vals = log_compress(vals, cdc.long_tail)
            else:
                keep = ~np.isnan(nums)
                if getattr(cdc, "cat_values", None):
                    keep &= ~np.isin(nums, cdc.cat_values)
                vals = nums[keep]
                if cdc.long_tail is not None and vals.size:
                    vals = log_compress(vals, cdc.long_tail)
            if vals.size:
                lo, hi = float(vals.min()), float(vals.max())
            else:
                lo, hi = 0.0, 1.0
            spans[spec.name] = (lo, hi if hi > lo else lo + 1.0)
        return cls(schema, codecs, layout, target_column, spans)

    def _value_params(self, name):
        cdc = self.codecs[name]
        lo, hi = self.spans[name]
        span = hi - lo
        if isinstance(cdc, MinMaxCodec):
            return None, None, span, lo
        if cdc.gmm is None:
            return np.zeros(0), np.zeros(0), span, lo
        return cdc.gmm.means, cdc.gmm.stds, span, lo

    def forward(self, X):
        X = np.asarray(X, dtype=np.float64)
        F = np.zeros((X.shape[0], self.width))
        for item in self._plan:
            if item[0] == "block":
                _, _, seg, w = item
                F[:, w:w + seg.width] = X[:, seg.offset:seg.offset + seg.width]
            else:
                _, name, aseg, mseg, w = item
                mu, sig, span, lo = self._value_params(name)
                alpha = X[:, aseg.offset]
                if mu is None:            # min-max codec: affine in alpha
                    F[:, w] = (alpha + 1.0) / 2.0
                elif mseg is None or mu.size == 0:
                    F[:, w] = 0.0
                else:
                    nc = mu.size
                    beta = X[:, mseg.offset:mseg.offset + nc]
                    vals = (mu[None, :] - lo) + 4.0 * sig[None, :] \
                        * alpha[:, None]
                    F[:, w] = (beta * vals).sum(axis=1) / span
        return F

    def vjp(self, X, dF):
        """Chain dL/dF back onto the encoded row."""
        X = np.asarray(X, dtype=np.float64)
        dX = np.zeros_like(X)
        for item in self._plan:
            if item[0] == "block":
                _, _, seg, w = item
                dX[:, seg.offset:seg.offset + seg.width] += \
                    dF[:, w:w + seg.width]
            else:
                _, name, aseg, mseg, w = item
                mu, sig, span, lo = self._value_params(name)
                d = dF[:, w]
                if mu is None:
                    dX[:, aseg.offset] += d / 2.0
                elif mseg is None or mu.size == 0:
                    continue
                else:
                    nc = mu.size
                    alpha = X[:, aseg.offset]
                    beta = X[:, mseg.offset:mseg.offset + nc]
                    vals = (mu[None, :] - lo) + 4.0 * sig[None, :] \
                        * alpha[:, None]
                    dX[:, mseg.offset:mseg.offset + nc] += \
                        d[:, None] * vals / span
                    dX[:, aseg.offset] += \
                        d * (beta * 4.0 * sig[None, :]).sum(axis=1) / span
        return dX

    def labels(self, X):
        seg = self.target_segment
        return np.argmax(X[:, seg.offset:seg.offset + seg.width], axis=1)

    def label_block(self, X):
        seg = self.target_segment
        return X[:, seg.offset:seg.offset + seg.width]

    def to_dict(self):
        return {"target_column": self.target_column,
                "spans": {k: list(v) for k, v in self.spans.items()}}


# ---------------------------------------------------------------------------
# bundle

@dataclass
class GanBundle:
    schema: object
    codecs: dict
    layout: object
    codec_config: CodecConfig
    freq: FrequencyTable
    target: object                 # TargetSpec | None
    config: TrainConfig
    g: DenseNet
    d: DenseNet
    c: object                      # DenseNet | None
    head: OutputHead
    features: object               # ClassifierFeatures | None
    history: dict = field(default_factory=dict)
    trained: bool = False

    @property
    def classifier_active(self):
        return self.c is not None


def _validate_target(schema, codecs, target):
    if target is None or target.problem == "none":
        return None
    if target.column not in [c.name for c in schema.included]:
        raise SchemaError("target column %r is not an included column"
                          % (target.column,))
    cdc = codecs[target.column]
    if not isinstance(cdc, CategoricalCodec):
        raise SchemaError("target column %r must be categorical"
                          % (target.column,))
    k = cdc.n_classes
    if target.problem == "binary" and k != 2:
        raise SchemaError("binary target %r has %d classes"
                          % (target.column, k))
    if target.problem == "multiclass" and k < 3:
        raise SchemaError("multiclass target %r has %d classes"
                          % (target.column, k))
    return target


def build_bundle(table, schema, target, config):
    """Fit codecs on the table and assemble untrained networks.

    Returns (bundle, encoded_matrix); the matrix feeds train().
    """
    codec_config = CodecConfig(vgm=config.vgm_on, seed=config.seed)
    codecs = fit_codecs(table, schema, codec_config)
    layout = build_layout(schema, codecs)
    X = encode_table(table, schema, codecs, layout)
    freq = FrequencyTable.from_encoded(X, layout)
    target = _validate_target(schema, codecs, target)

    rng = np.random.default_rng(config.seed)
    g = DenseNet.build(config.noise_dim + layout.cond_width, config.g_hidden,
                       layout.width, rng)
    d = DenseNet.build(layout.width + layout.cond_width, config.d_hidden,
                       1, rng)
    c = None
    features = None
    if config.classifier_on and target is not None:
        features = ClassifierFeatures.fit(table, schema, codecs, layout,
                                          target.column)
        c = DenseNet.build(features.width, config.c_hidden,
                           features.n_classes, rng)
    head = OutputHead(layout, temperature=config.gumbel_temperature)
    return GanBundle(schema, codecs, layout, codec_config, freq, target,
                     config, g, d, c, head, features), X


def _finite_or_die(name, value):
    if not np.isfinite(value):
        raise RuntimeError("training diverged: %s is %r" % (name, value))
    return value


def train(bundle, X, config=None, progress=None):
    """Run the adversarial loop; mutates the bundle's networks in place.

    Per step: sample one condition, draw the matching real batch, update
    the discriminator on real vs fake, update the generator on the
    four-term loss, then (when active) update the classifier on the real
    batch. History holds per-epoch means of each enabled loss.
    progress, when given, is called as progress(epoch, total, history)
    after every epoch with the history accumulated so far.
    """
    config = config or bundle.config
    layout = bundle.layout
    n, width = X.shape
    if width != layout.width:
        raise ValueError("encoded matrix width %d != layout width %d"
                         % (width, layout.width))
    B = min(config.batch_size, n)
    steps = max(1, n // B)
    rng = np.random.default_rng(config.seed + 1)
    conditioned = layout.cond_width > 0

    g, d, c = bundle.g, bundle.d, bundle.c
    head = bundle.head
    feats = bundle.features
    opt_g = Adam(g.parameters(), config.lr, config.beta1, config.beta2,
                 config.adam_eps)
    opt_d = Adam(d.parameters(), config.lr, config.beta1, config.beta2,
                 config.adam_eps)
    opt_c = Adam(c.parameters(), config.lr, config.beta1, config.beta2,
                 config.adam_eps) if c is not None else None

    keys = ["d_loss", "g_adv", "cond_loss"]
    if config.info_loss_on:
        keys.append("info_loss")
    if c is not None:
        keys.extend(["class_loss", "classifier_ce"])
    history = {k: [] for k in keys}

    for epoch in range(config.epochs):
        sums = {k: 0.0 for k in keys}
        for _ in range(steps):
            if conditioned:
                cond = sample_condition(bundle.freq, rng)
                ridx = draw_real_batch(X, layout, cond, rng, B)
                V = np.tile(cond.vec, (B, 1))
            else:
                cond = None
                ridx = rng.integers(n, size=B)
                V = np.zeros((B, 0))
            Xr = X[ridx]
            real_in = np.hstack([Xr, V])

            # discriminator update
            z = rng.normal(size=(B, config.noise_dim))
            xf = head.forward(g.forward(np.hstack([z, V])), rng)
            d.zero_grad()
            l_real = d.forward(real_in)
            dreal, _ = _adv_d_grads(l_real, l_real)
            d.backward(dreal)
            l_fake = d.forward(np.hstack([xf, V]))
            _, dfake = _adv_d_grads(l_fake, l_fake)
            d.backward(dfake)
            d_loss, _ = adv_losses(sigmoid(l_real), sigmoid(l_fake))
            sums["d_loss"] += _finite_or_die("d_loss", d_loss)
            opt_d.step(d.gradients())

            # generator update
            z = rng.normal(size=(B, config.noise_dim))
            g.zero_grad()
            d.zero_grad()
            raw = g.forward(np.hstack([z, V]))
            xf = head.forward(raw, rng)
            real_stats = None
            if config.info_loss_on:
                d.forward(real_in)
                F_real = (d.layers[-2].out if len(d.layers) > 1
                          else real_in).copy()
                if config.info_features == "output":
                    F_real = sigmoid(d.forward(real_in))
                real_stats = FeatureStats.from_batch(F_real)
            fake_in = np.hstack([xf, V])
            l_fake = d.forward(fake_in)
            _, g_adv = adv_losses(np.full(1, 0.5), sigmoid(l_fake))
            sums["g_adv"] += _finite_or_die("g_adv", g_adv)
            dxf = d.backward(_adv_g_grad(l_fake))[:, :width]
            if config.info_loss_on:
                if config.info_features == "output":
                    F_fake = sigmoid(l_fake)
                    il = info_loss(real_stats, FeatureStats.from_batch(F_fake))
                    dFf = _info_grad(real_stats, F_fake) \
                        * F_fake * (1 - F_fake)
                    dxf += d.backward(config.lambda_info * dFf)[:, :width]
                else:
                    F_fake = d.layers[-2].out
                    il = info_loss(real_stats, FeatureStats.from_batch(F_fake))
                    dFf = _info_grad(real_stats, F_fake)
                    dxf += d.backward(config.lambda_info * dFf,
                                      start=len(d.layers) - 2)[:, :width]
                sums["info_loss"] += _finite_or_die("info_loss", il)
            if c is not None:
                c.zero_grad()
                Ff = feats.forward(xf)
                logits = c.forward(Ff)
                t = feats.label_block(xf)
                cl, dlogits, dt = soft_cross_entropy(logits, t)
                sums["class_loss"] += _finite_or_die("class_loss", cl)
                dFf = c.backward(config.lambda_class * dlogits)
                dxf += feats.vjp(xf, dFf)
                seg = feats.target_segment
                dxf[:, seg.offset:seg.offset + seg.width] += \
                    config.lambda_class * dt
            if cond is not None:
                cl = cond_loss(xf, layout, cond)
                sums["cond_loss"] += _finite_or_die("cond_loss", cl)
                dxf += config.lambda_cond * _cond_grad(xf, layout, cond)
            g.backward(head.backward(dxf))
            opt_g.step(g.gradients())

            # classifier update on the real batch
            if c is not None:
                c.zero_grad()
                Fr = feats.forward(Xr)
                logits = c.forward(Fr)
                ce, dlogits = hard_cross_entropy(logits, feats.labels(Xr))
                sums["classifier_ce"] += _finite_or_die("classifier_ce", ce)
                c.backward(dlogits)
                opt_c.step(c.gradients())

        for k in keys:
            history[k].append(sums[k] / steps)
        if progress is not None:
            progress(epoch + 1, config.epochs, history)

    bundle.history = history
    bundle.trained = True
    return bundle


def condition_for(bundle, column, category=None, mode=None):
    """Build a fixed synthesis condition for a column's class or mode."""
    segs = bundle.layout.condition_segments
    for j, seg in enumerate(segs):
        if seg.column != column:
            continue
        if category is not None:
            cdc = bundle.codecs[column]
            if not isinstance(cdc, CategoricalCodec):
                raise ValueError("column %r has no categories" % (column,))
            local = int(cdc.encode([category])[0])
        elif mode is not None:
            local = int(mode)
        else:
            raise ValueError("give a category or a mode index")
        return make_condition(bundle.layout, j, local)
    raise ValueError("column %r is not conditionable" % (column,))


def synthesize(bundle, n_rows, condition=None, seed=None):
    """Sample n_rows records and decode them to a Table."""
    if n_rows <= 0:
        raise ValueError("n_rows must be positive")
    if not bundle.trained:
        raise RuntimeError("bundle is untrained")
    config = bundle.config
    rng = np.random.default_rng(config.seed + 2 if seed is None else seed)
    layout = bundle.layout
    conditioned = layout.cond_width > 0
    chunks = []
    remaining = n_rows
    while remaining > 0:
        B = min(config.batch_size, remaining)
        if not conditioned:
            V = np.zeros((B, 0))
        elif condition is not None:
            V = np.tile(condition.vec, (B, 1))
        else:
            V = np.stack([sample_condition(bundle.freq, rng).vec
                          for _ in range(B)])
        z = rng.normal(size=(B, config.noise_dim))
        raw = bundle.g.forward(np.hstack([z, V]))
        hard = bundle.head.forward(raw, rng, hard=True)
        chunks.append(hard)
        remaining -= B
    X = np.vstack(chunks)
    return decode_rows(X, bundle.schema, bundle.codecs, layout)


# ---------------------------------------------------------------------------
# bundle persistence

def save_bundle(bundle, path):
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "codecs.json"), "w") as fh:
        fh.write(codecs_to_json(bundle.schema, bundle.codecs, bundle.layout,
                                bundle.codec_config))
    bundle.g.save(os.path.join(path, "generator.npz"))
    bundle.d.save(os.path.join(path, "discriminator.npz"))
    if bundle.c is not None:
        bundle.c.save(os.path.join(path, "classifier.npz"))
    meta = {"format": BUNDLE_FORMAT,
            "target": (None if bundle.target is None else
                       {"column": bundle.target.column,
                        "problem": bundle.target.problem}),
            "config": bundle.config.to_dict(),
            "freq_counts": bundle.freq.to_dict()["counts"],
            "features": (None if bundle.features is None
                         else bundle.features.to_dict()),
            "history": bundle.history,
            "trained": bundle.trained}
    with open(os.path.join(path, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=1)


def load_bundle(path):
    with open(os.path.join(path, "meta.json")) as fh:
        meta = json.load(fh)
    if meta.get("format") != BUNDLE_FORMAT:
        raise ValueError("not a model bundle: %s" % (path,))
    with open(os.path.join(path, "codecs.json")) as fh:
        schema, codecs, layout, codec_config = codecs_from_json(fh.read())
    config = TrainConfig.from_dict(meta["config"])
    target = (None if meta["target"] is None
              else TargetSpec(meta["target"]["column"],
                              meta["target"]["problem"]))
    freq = FrequencyTable(layout, [np.asarray(c) for c
                                   in meta["freq_counts"]])
    g = DenseNet.load(os.path.join(path, "generator.npz"))
    d = DenseNet.load(os.path.join(path, "discriminator.npz"))
    c = None
    features = None
    cpath = os.path.join(path, "classifier.npz")
    if meta["features"] is not None and os.path.exists(cpath):
        c = DenseNet.load(cpath)
        spans = {k: tuple(v) for k, v
                 in meta["features"]["spans"].items()}
        features = ClassifierFeatures(schema, codecs, layout,
                                      meta["features"]["target_column"],
                                      spans)
    head = OutputHead(layout, temperature=config.gumbel_temperature)
    bundle = GanBundle(schema, codecs, layout, codec_config, freq, target,
                       config, g, d, c, head, features,
                       history=meta.get("history", {}),
                       trained=meta.get("trained", False))
    return bundle
