"""Toy training harness for the combined grounding objective.

A small model maps synthetic scenes to coordinate-token logits: learned
projections embed both modalities, the cross-attention block fuses them,
and token heads read a pooled representation whose spatial/temporal
moment features are computed under the attention weights. The training
loss is cross-entropy over coordinate tokens plus the weighted transport
and attention-consistency terms, optimized with warmup + cosine learning
rate, gradient accumulation, and best-validation checkpointing. The
ablation runner trains every loss combination on shared seeds and scores
held-out scenes.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace

import numpy as np

from avalign import tensor as T
from avalign.attention import (
    AvaceConfig,
    CrossAttentionBlock,
    attention_consistency_loss,
    cross_attend,
    rasterize_mask,
)
from avalign.codec import (
    AUDIO_WINDOW_SECONDS,
    GroundedObject,
    TimeSegment,
    CodecError,
    parse_box,
    parse_time,
    serialize_box,
    serialize_time,
)
from avalign.data import SceneSpec, SyntheticScene
from avalign.metrics import EvalSample, ParseFailure, ciou_at, segment_f1
from avalign.ot import SinkhornConfig, ot_loss
from avalign.tensor import Tensor

__all__ = [
    "VOCAB_SIZE",
    "TrainConfig",
    "ToyModel",
    "LossBreakdown",
    "TrainingDiverged",
    "forward",
    "total_loss",
    "lr_at",
    "train",
    "evaluate_model",
    "run_ablation",
]

# shared 101-bin vocabularies: k/100 for space, 0.3*k seconds for time
VOCAB_SIZE = 101
SPACE_BIN = 0.01
TIME_BIN = AUDIO_WINDOW_SECONDS / (VOCAB_SIZE - 1)

# Coordinate logits form a concave bump -exp(s) * (c - m)^2 over the bin
# values c: the head regresses a peak location m and log-sharpness s per
# coordinate instead of shaping 101 free logits, which turns the token
# cross-entropy into a peak-tracking signal while still emitting a full
# 101-way distribution (and one-hot behavior in the sharp limit).
_BIN_CENTERS = (np.arange(VOCAB_SIZE) / (VOCAB_SIZE - 1)).reshape(1, VOCAB_SIZE)
_N_COORD_ROWS = 6  # x_left, y_top, x_right, y_bottom, t_start, t_end


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; carries the step at which it happened."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class TrainConfig:
    base_lr: float = 1e-3
    warmup_ratio: float = 0.03
    schedule: str = "cosine"
    epochs: int = 5
    grad_accumulation: int = 3
    lambda_ot: float = 0.75
    lambda_ac: float = 0.35
    seed: int = 0
    batch_size: int = 8
    weight_decay: float = 1e-4
    hidden: int = 48
    two_stage: bool = False
    # loose transport solve: the plan is an envelope constant of the
    # backward pass, so training only needs a decent coupling, not 1e-6
    # marginals
    sinkhorn: SinkhornConfig = field(
        default_factory=lambda: SinkhornConfig(
            beta=0.5, outer_steps=50, inner_steps=5,
            marginal_tolerance=1e-2, max_total_iterations=5000,
        )
    )
    avace: AvaceConfig = field(default_factory=AvaceConfig)

    def __post_init__(self):
        if self.lambda_ot < 0 or self.lambda_ac < 0:
            raise ValueError("loss weights must be non-negative")
        if not (0.0 < self.warmup_ratio < 1.0):
            raise ValueError("warmup_ratio must be in (0, 1)")
        if self.schedule != "cosine":
            raise ValueError(f"unsupported schedule {self.schedule!r}")
        if self.epochs < 1 or self.batch_size < 1 or self.grad_accumulation < 1:
            raise ValueError("epochs, batch_size, grad_accumulation must be >= 1")


@dataclass
class LossBreakdown:
    l_ce: float
    l_ot: float
    l_ac: float
    total: float

    def __post_init__(self):
        for name in ("l_ce", "l_ot", "l_ac", "total"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} is not finite")


class ToyModel:
    """Parameter store plus scene geometry; weights are plain float arrays."""

    def __init__(self, params: dict[str, np.ndarray], spec: SceneSpec):
        self.params = params
        self.spec = spec

    @classmethod
    def initialized(cls, spec: SceneSpec, seed: int, hidden: int = 48) -> "ToyModel":
        rng = np.random.default_rng(seed)
        d = spec.feature_dim
        # pooled image + pooled audio + 6 moments + spatial marginals + relevance
        fused = 2 * d + 6 + spec.grid_w + spec.grid_h + spec.audio_tokens

        def eye_ish(rows, cols, scale=0.1):
            return np.eye(rows, cols) + scale * rng.normal(size=(rows, cols)) / math.sqrt(rows)

        def dense(rows, cols):
            return rng.normal(size=(rows, cols)) / math.sqrt(rows)

        params = {
            "proj_image": eye_ish(d, d),
            "proj_audio": eye_ish(d, d),
            "w_query": eye_ish(d, d, scale=0.2),
            "w_key": eye_ish(d, d, scale=0.2),
            "w_value": eye_ish(d, d, scale=0.2),
            "w_out_image": 0.1 * dense(d, d),
            "w_out_audio": 0.1 * dense(d, d),
            "head_w1": dense(fused, hidden),
            "head_b1": np.zeros(hidden),
            # zero last layers: untrained logits are uniform over the vocab
            # (coordinate bumps start centered with near-zero sharpness)
            "peak_w2": np.zeros((hidden, _N_COORD_ROWS)),
            "peak_b2": np.zeros(_N_COORD_ROWS),
            "sharp_w2": np.zeros((hidden, _N_COORD_ROWS)),
            "sharp_b2": np.full(_N_COORD_ROWS, 1.0),
            "label_w2": np.zeros((hidden, VOCAB_SIZE)),
            "label_b2": np.zeros(VOCAB_SIZE),
            "class_w2": np.zeros((hidden, VOCAB_SIZE)),
            "class_b2": np.zeros(VOCAB_SIZE),
        }
        return cls(params, spec)

    def clone(self) -> "ToyModel":
        return ToyModel({k: v.copy() for k, v in self.params.items()}, self.spec)


_GRID_CACHE: dict[tuple[int, int, int], tuple[Tensor, Tensor, Tensor, Tensor]] = {}


def _coordinate_grids(spec: SceneSpec):
    """Constant per-cell bases: moments [x, y, x^2, y^2] / [t, t^2] plus
    column/row selector matrices that turn patch weights into marginals."""
    key = (spec.grid_h, spec.grid_w, spec.audio_tokens)
    cached = _GRID_CACHE.get(key)
    if cached is not None:
        return cached
    h, w = spec.grid_h, spec.grid_w
    ys = np.repeat((np.arange(h) + 0.5) / h, w)
    xs = np.tile((np.arange(w) + 0.5) / w, h)
    spatial = Tensor(np.stack([xs, ys, xs * xs, ys * ys], axis=1))
    ts = (np.arange(spec.audio_tokens) + 0.5) / spec.audio_tokens
    temporal = Tensor(np.stack([ts, ts * ts], axis=1))
    cols = np.tile(np.arange(w), h)
    rows = np.repeat(np.arange(h), w)
    x_sel = Tensor(np.eye(w)[cols])
    y_sel = Tensor(np.eye(h)[rows])
    cached = (spatial, temporal, x_sel, y_sel)
    _GRID_CACHE[key] = cached
    return cached


def gt_tokens(scene: SyntheticScene) -> list[int]:
    """Token targets: [label, x1, y1, x2, y2, t_start, t_end, class]."""
    b = scene.gt_box
    seg = scene.gt_segment
    space = [int(round(v / SPACE_BIN)) for v in b.as_tuple()]
    times = [int(round(t / TIME_BIN)) for t in seg.as_tuple()]
    return [scene.class_id, *space, *times, scene.class_id]


def forward(params: dict[str, Tensor], scene: SyntheticScene, spec: SceneSpec):
    """Scene to (token logits (8 x V), attention map, z_img, z_aud).

    Pooling uses the attention map over patches and an image-conditioned
    softmax over audio tokens; first and second spatial/temporal moments
    under those weights join the pooled embeddings as head inputs, so a
    well-placed attention map makes the coordinates linearly readable.
    """
    h, w = spec.grid_h, spec.grid_w
    s_img = h * w
    patches = scene.image_patches()
    z_img = T.matmul(patches, params["proj_image"])
    z_aud = T.matmul(scene.audio, params["proj_audio"])

    block = CrossAttentionBlock(
        params["w_query"], params["w_key"], params["w_value"],
        params["w_out_image"], params["w_out_audio"],
    )
    z_img_u, z_aud_u, amap = cross_attend(z_img, z_aud, block, (h, w))

    flat = T.reshape(amap.grid, (s_img, 1))
    wsum = T.add(T.tsum(flat), 1e-8)
    weights = T.div(flat, wsum)

    spatial, temporal, x_sel, y_sel = _coordinate_grids(spec)
    weights_t = T.transpose(weights)
    space_moments = T.matmul(weights_t, spatial)
    x_marginal = T.matmul(weights_t, x_sel)
    y_marginal = T.matmul(weights_t, y_sel)

    d_attn = params["w_query"].shape[1]
    q_tok = T.matmul(z_aud, params["w_query"])
    k_mean = T.tmean(T.matmul(z_img, params["w_key"]), axis=0, keepdims=True)
    rel = T.softmax(
        T.mul(T.matmul(q_tok, T.transpose(k_mean)), 1.0 / math.sqrt(d_attn)), axis=0
    )
    rel_t = T.transpose(rel)
    time_moments = T.matmul(rel_t, temporal)

    pooled_img = T.matmul(weights_t, z_img_u)
    pooled_aud = T.matmul(rel_t, z_aud_u)
    fused = T.concat(
        [pooled_img, pooled_aud, space_moments, time_moments,
         x_marginal, y_marginal, rel_t],
        axis=1,
    )

    hid = T.tanh(T.add(T.matmul(fused, params["head_w1"]), params["head_b1"]))
    # bounded peak keeps the bump's argmax inside the vocabulary; the gain
    # starts active (bias +1) so the peak-tracking gradient works from the
    # first step and can still sharpen arbitrarily for memorization
    peak = T.sigmoid(
        T.transpose(T.add(T.matmul(hid, params["peak_w2"]), params["peak_b2"]))
    )
    sharp = T.transpose(T.add(T.matmul(hid, params["sharp_w2"]), params["sharp_b2"]))
    gain = T.mul(T.exp(sharp), -1.0)
    diff = T.sub(Tensor(_BIN_CENTERS), peak)
    coord_logits = T.mul(T.mul(diff, diff), gain)
    label_logits = T.add(T.matmul(hid, params["label_w2"]), params["label_b2"])
    class_logits = T.add(T.matmul(hid, params["class_w2"]), params["class_b2"])
    logits = T.concat([label_logits, coord_logits, class_logits], axis=0)
    return logits, amap, z_img, z_aud


def cross_entropy(logits: Tensor, targets: list[int]) -> Tensor:
    """Mean negative log-likelihood of the target token per position."""
    n, v = logits.shape
    if len(targets) != n:
        raise ValueError(f"{len(targets)} targets for {n} positions")
    onehot = np.zeros((n, v))
    onehot[np.arange(n), targets] = 1.0
    logp = T.log_softmax(logits, axis=1)
    return T.mul(T.tsum(T.mul(logp, Tensor(onehot))), -1.0 / n)


def total_loss(
    logits: Tensor,
    targets: list[int],
    amap,
    mask,
    z_img: Tensor,
    z_aud: Tensor,
    cfg: TrainConfig,
) -> tuple[Tensor, LossBreakdown]:
    """Combined objective: CE + lambda_ot * OT + lambda_ac * AC.

    Terms with a zero weight are skipped entirely (their value reported as
    0), so ablations pay no cost for disabled losses.
    """
    ce = cross_entropy(logits, targets)
    total = ce
    l_ot = 0.0
    l_ac = 0.0
    if cfg.lambda_ot > 0:
        ot = ot_loss(z_img, z_aud, cfg=cfg.sinkhorn)
        l_ot = ot.item()
        total = T.add(total, T.mul(ot, cfg.lambda_ot))
    if cfg.lambda_ac > 0:
        ac = attention_consistency_loss(amap, mask, cfg.avace)
        l_ac = ac.item()
        total = T.add(total, T.mul(ac, cfg.lambda_ac))
    breakdown = LossBreakdown(
        l_ce=ce.item(), l_ot=l_ot, l_ac=l_ac, total=total.item()
    )
    return total, breakdown


def lr_at(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Linear warmup to ``base_lr`` then cosine decay to zero.

    Anchors: 0 at step 0, exactly ``base_lr`` at the end of warmup,
    0 at ``total_steps``.
    """
    if not (0 <= step <= total_steps):
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    warmup = max(1, math.ceil(cfg.warmup_ratio * total_steps))
    if step <= warmup:
        return cfg.base_lr * step / warmup
    progress = (step - warmup) / (total_steps - warmup)
    return cfg.base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


class _AdamW:
    """Adam moments with decoupled weight decay."""

    def __init__(self, params: dict[str, np.ndarray], weight_decay: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0
        self.weight_decay = weight_decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
             lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k, p in params.items():
            g = grads[k]
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            mhat = self.m[k] / (1 - b1**self.t)
            vhat = self.v[k] / (1 - b2**self.t)
            p -= lr * (mhat / (np.sqrt(vhat) + self.eps) + self.weight_decay * p)


class _SceneCache:
    """Per-scene constants reused across epochs: box mask and token targets."""

    def __init__(self, spec: SceneSpec):
        self.spec = spec
        self.masks: dict[str, object] = {}
        self.tokens: dict[str, list[int]] = {}

    def mask(self, scene: SyntheticScene):
        m = self.masks.get(scene.id)
        if m is None:
            m = rasterize_mask(scene.gt_box, (self.spec.grid_h, self.spec.grid_w))
            self.masks[scene.id] = m
        return m

    def targets(self, scene: SyntheticScene) -> list[int]:
        t = self.tokens.get(scene.id)
        if t is None:
            t = gt_tokens(scene)
            self.tokens[scene.id] = t
        return t


def _micro_batch_pass(model: ToyModel, scenes: list[SyntheticScene],
                      cfg: TrainConfig, collect_grads: bool,
                      cache: _SceneCache | None = None):
    """One tape over a micro-batch; returns (grads or None, mean breakdown)."""
    cache = cache or _SceneCache(model.spec)
    tape = T.Tape()
    leaves = {k: tape.leaf(v) for k, v in model.params.items()}
    losses = []
    parts = np.zeros(4)
    for scene in scenes:
        logits, amap, z_img, z_aud = forward(leaves, scene, model.spec)
        loss, breakdown = total_loss(
            logits, cache.targets(scene), amap, cache.mask(scene), z_img, z_aud, cfg
        )
        losses.append(loss)
        parts += (breakdown.l_ce, breakdown.l_ot, breakdown.l_ac, breakdown.total)
    mean_loss = T.mul(T.concat([T.reshape(l, (1,)) for l in losses], axis=0).sum(),
                      1.0 / len(scenes))
    parts /= len(scenes)
    mean = LossBreakdown(*parts)
    if not collect_grads:
        return None, mean
    grads_acc = T.backward(mean_loss)
    return {k: grads_acc.wrt(leaf) for k, leaf in leaves.items()}, mean


@dataclass
class TrainResult:
    model: ToyModel
    best_model: ToyModel
    train_curve: list[LossBreakdown]
    val_curve: list[float]
    best_epoch: int
    updates: int


def _stage_configs(cfg: TrainConfig) -> list[tuple[TrainConfig, int]]:
    if not cfg.two_stage:
        return [(cfg, cfg.epochs)]
    # stage I: transport alignment only; stage II: the full objective
    first = max(1, cfg.epochs // 2)
    stage1 = replace(cfg, lambda_ac=0.0, two_stage=False)
    stage2 = replace(cfg, two_stage=False)
    return [(stage1, first), (stage2, cfg.epochs - first)] if cfg.epochs > first \
        else [(stage1, first)]


def train(cfg: TrainConfig, train_scenes: list[SyntheticScene],
          val_scenes: list[SyntheticScene], spec: SceneSpec | None = None) -> TrainResult:
    """Seeded training loop with accumulation and best-val checkpointing.

    Gradients from ``grad_accumulation`` micro-batches are averaged per
    optimizer update; validation runs at every epoch end and the best
    checkpoint is returned alongside the final model. Raises
    ``TrainingDiverged`` on a non-finite loss.
    """
    if not train_scenes or not val_scenes:
        raise ValueError("need non-empty train and validation splits")
    spec = spec or SceneSpec()
    model = ToyModel.initialized(spec, seed=cfg.seed, hidden=cfg.hidden)
    opt = _AdamW(model.params, cfg.weight_decay)
    rng = np.random.default_rng(cfg.seed + 1)
    cache = _SceneCache(spec)

    micro_per_epoch = math.ceil(len(train_scenes) / cfg.batch_size)
    updates_per_epoch = math.ceil(micro_per_epoch / cfg.grad_accumulation)
    total_updates = cfg.epochs * updates_per_epoch

    train_curve: list[LossBreakdown] = []
    val_curve: list[float] = []
    best_val = np.inf
    best_model = model.clone()
    best_epoch = -1
    update = 0

    stage1_loss_cfg = None
    stages = _stage_configs(cfg)

    epoch_global = 0
    for stage_cfg, stage_epochs in stages:
        for _ in range(stage_epochs):
            order = rng.permutation(len(train_scenes))
            epoch_parts = np.zeros(4)
            micro_count = 0
            acc: dict[str, np.ndarray] | None = None
            acc_n = 0
            for start in range(0, len(order), cfg.batch_size):
                batch = [train_scenes[i] for i in order[start:start + cfg.batch_size]]
                grads, mean = _micro_batch_pass(model, batch, stage_cfg, True, cache)
                if not np.isfinite(mean.total):
                    raise TrainingDiverged(
                        f"non-finite loss at update {update}", step=update
                    )
                epoch_parts += (mean.l_ce, mean.l_ot, mean.l_ac, mean.total)
                micro_count += 1
                if acc is None:
                    acc = grads
                else:
                    for k in acc:
                        acc[k] = acc[k] + grads[k]
                acc_n += 1
                if acc_n == cfg.grad_accumulation:
                    update += 1
                    lr = lr_at(update, total_updates, cfg)
                    opt.step(model.params, {k: g / acc_n for k, g in acc.items()}, lr)
                    acc, acc_n = None, 0
            if acc_n:
                update += 1
                lr = lr_at(min(update, total_updates), total_updates, cfg)
                opt.step(model.params, {k: g / acc_n for k, g in acc.items()}, lr)
                acc, acc_n = None, 0

            train_curve.append(LossBreakdown(*(epoch_parts / micro_count)))
            val_parts = np.zeros(4)
            for start in range(0, len(val_scenes), cfg.batch_size):
                batch = val_scenes[start:start + cfg.batch_size]
                _, mean = _micro_batch_pass(model, batch, stage_cfg, False, cache)
                val_parts += np.array(
                    (mean.l_ce, mean.l_ot, mean.l_ac, mean.total)
                ) * len(batch)
            val_total = float(val_parts[3] / len(val_scenes))
            val_curve.append(val_total)
            if val_total < best_val:
                best_val = val_total
                best_model = model.clone()
                best_epoch = epoch_global
            epoch_global += 1
    _ = stage1_loss_cfg
    return TrainResult(
        model=model,
        best_model=best_model,
        train_curve=train_curve,
        val_curve=val_curve,
        best_epoch=best_epoch,
        updates=update,
    )


def decode_tokens(logits: Tensor) -> tuple[str, str]:
    """Argmax tokens rendered through the text codec.

    Returns the serialized box answer and time answer; ill-ordered
    coordinates surface later as parse failures, scoring zero.
    """
    ids = np.argmax(logits.data, axis=1)
    label = f"class{ids[0]}"
    coords = [i * SPACE_BIN for i in ids[1:5]]
    times = [i * TIME_BIN for i in ids[5:7]]
    fmt = "{:.2f}"
    box_text = f"[{label}," + ",".join(fmt.format(c) for c in coords) + "]"
    time_text = f"({times[0]:.1f},{times[1]:.1f})"
    return box_text, time_text


def evaluate_model(model: ToyModel, scenes: list[SyntheticScene]
                   ) -> tuple[float, float]:
    """Held-out box cIoU@0.5 and segment F1@0.5 via the text codec."""
    params = {k: Tensor(v) for k, v in model.params.items()}
    box_samples = []
    seg_samples = []
    for scene in scenes:
        logits, _, _, _ = forward(params, scene, model.spec)
        box_text, time_text = decode_tokens(logits)
        try:
            pred_box = parse_box(box_text).box
        except CodecError as exc:
            pred_box = ParseFailure.from_error(exc)
        try:
            pred_seg = parse_time(time_text)
        except CodecError as exc:
            pred_seg = ParseFailure.from_error(exc)
        box_samples.append(EvalSample(scene.id, pred_box, scene.gt_box))
        seg_samples.append(EvalSample(scene.id, pred_seg, scene.gt_segment))
    return ciou_at(box_samples, 0.5), segment_f1(seg_samples, 0.5)


ABLATION_COMBOS = (
    ("ce", 0.0, 0.0),
    ("ce+ot", None, 0.0),
    ("ce+ac", 0.0, None),
    ("ce+ot+ac", None, None),
)


def run_ablation(
    base_cfg: TrainConfig,
    seeds: list[int],
    n_train: int = 2000,
    n_test: int = 500,
    spec: SceneSpec | None = None,
    jobs: int = 1,
) -> dict:
    """Train every loss combination on shared seeds and score held out.

    ``None`` in a combo means "use the weight from base_cfg". Returns a
    table mapping combo name to per-seed (ciou, f1) plus medians.
    """
    if len(seeds) < 1:
        raise ValueError("need at least one seed")
    spec = spec or SceneSpec()
    tasks = []
    for name, lot, lac in ABLATION_COMBOS:
        for seed in seeds:
            cfg = replace(
                base_cfg,
                seed=seed,
                lambda_ot=base_cfg.lambda_ot if lot is None else lot,
                lambda_ac=base_cfg.lambda_ac if lac is None else lac,
            )
            tasks.append((name, seed, cfg, n_train, n_test, spec))

    if jobs > 1:
        import multiprocessing as mp

        with mp.Pool(jobs) as pool:
            results = pool.map(_ablation_task, tasks)
    else:
        results = [_ablation_task(t) for t in tasks]

    table: dict[str, dict] = {}
    for (name, seed, *_), (ciou, f1) in zip(tasks, results):
        row = table.setdefault(name, {"per_seed": {}})
        row["per_seed"][seed] = {"ciou": ciou, "f1": f1}
    for name, row in table.items():
        cious = [row["per_seed"][s]["ciou"] for s in seeds]
        f1s = [row["per_seed"][s]["f1"] for s in seeds]
        row["median_ciou"] = float(np.median(cious))
        row["median_f1"] = float(np.median(f1s))
    return {"seeds": list(seeds), "rows": table}


def _ablation_task(task) -> tuple[float, float]:
    name, seed, cfg, n_train, n_test, spec = task
    from avalign.data import generate_dataset

    scenes = generate_dataset(seed=seed, n=n_train + n_test,
                              positive_fraction=1.0, spec=spec)
    train_scenes = scenes[:n_train]
    holdout = scenes[n_train:]
    n_val = max(1, len(train_scenes) // 10)
    result = train(cfg, train_scenes[n_val:], train_scenes[:n_val], spec=spec)
    return evaluate_model(result.best_model, holdout)


def ablation_markdown(table: dict) -> str:
    """Render the ablation table, one row per loss combination."""
    lines = [
        "| objective | median cIoU@0.5 | median F1@0.5 |",
        "|---|---|---|",
    ]
    for name in ("ce", "ce+ot", "ce+ac", "ce+ot+ac"):
        row = table["rows"][name]
        lines.append(
            f"| {name} | {row['median_ciou']:.3f} | {row['median_f1']:.3f} |"
        )
    return "\n".join(lines)
