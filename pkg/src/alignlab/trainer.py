"""Training loop, evaluation, gradient checking, and sweep orchestration.

A run is a pure function of (dataset spec, train config): batches are
shuffled from the run seed, the model is selected by best validation
accuracy (mean of the two encoders), and final metrics come from the test
split only. Sweeps enumerate (R, lambda, seed) cells; each (R, seed) pair
shares one regenerated dataset, and result order is independent of worker
scheduling.
"""

from __future__ import annotations

import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import losses, model
from .optim import AdamWState, adamw_step
from .rng import Rng
from .simmetrics import AlignmentReport, alignment_report
from .syndata import GenSpec, SyntheticDataset, generate
from .tape import Tape

DEFAULT_LAMBDAS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 2.0)
DEFAULT_R_LEVELS = tuple(range(9))
DEFAULT_SEEDS = (0, 1, 2, 3)


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 0.0
    lr: float = 1e-3
    weight_decay: float = 1e-4
    batch_size: int = 512
    epochs: int = 30
    seed: int = 0
    eval_every: int = 1
    tau: float = 0.1
    patience: int = 10
    metric_subsample: int = 2048
    knn_k: int = 10
    svcca_variance_keep: float = 0.99

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"alignment weight must be >= 0, got {self.lam}")
        if self.tau <= 0:
            raise ValueError(f"temperature must be > 0, got {self.tau}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.batch_size < 2:
            warnings.warn("batch_size 1 leaves the alignment loss with no negatives")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class RunRecord:
    config: dict
    spec: dict
    epoch_losses: list = field(default_factory=list)
    best_epoch: int = -1
    acc_A: float = float("nan")
    acc_B: float = float("nan")
    alignment: AlignmentReport | None = None
    status: str = "ok"
    wall_time: float = 0.0
    checkpoint_path: str | None = None

    def to_dict(self) -> dict:
        """JSON-ready view; wall_time is excluded so reruns compare equal."""
        return {
            "config": self.config,
            "spec": self.spec,
            "epoch_losses": [asdict(b) for b in self.epoch_losses],
            "best_epoch": self.best_epoch,
            "acc_A": self.acc_A,
            "acc_B": self.acc_B,
            "alignment": self.alignment.to_dict() if self.alignment else None,
            "status": self.status,
            "checkpoint_path": self.checkpoint_path,
        }


def _batch_loss(tape: Tape, state: model.ModelState, pvars: dict, xb1, xb2, yb, lam, tau):
    """Build the total objective on the tape; returns (loss_var, breakdown).

    Task gradients flow through encoders and classifier heads; alignment
    gradients flow through encoders and projection heads. At lam=0 the
    alignment term stays off the graph and is measured numerically.
    """
    enc_cfg, proj_cfg = state.encoder_cfg, state.projection_cfg
    x1 = tape.leaf(xb1)
    x2 = tape.leaf(xb2)
    h_a = model.encode_tape(tape, pvars, enc_cfg, "A", x1)
    h_b = model.encode_tape(tape, pvars, enc_cfg, "B", x2)
    logits_a = model.classify_tape(tape, pvars, "A", h_a)
    logits_b = model.classify_tape(tape, pvars, "B", h_b)
    task_a = tape.softmax_cross_entropy(logits_a, yb)
    task_b = tape.softmax_cross_entropy(logits_b, yb)
    task = tape.add(task_a, task_b)
    if lam == 0:
        z_a = model.project(state, "A", h_a.value)
        z_b = model.project(state, "B", h_b.value)
        a2b = losses.info_nce(z_a, z_b, tau)
        b2a = losses.info_nce(z_b, z_a, tau)
        total = task
    else:
        z_a_var = model.project_tape(tape, pvars, proj_cfg, "A", h_a)
        z_b_var = model.project_tape(tape, pvars, proj_cfg, "B", h_b)
        a2b_var, b2a_var = losses.info_nce_pair_tape(tape, z_a_var, z_b_var, tau)
        align_var = tape.scale(tape.add(a2b_var, b2a_var), 0.5)
        total = tape.add(task, tape.scale(align_var, lam))
        a2b, b2a = float(a2b_var.value), float(b2a_var.value)
    align = 0.5 * (a2b + b2a)
    breakdown = losses.LossBreakdown(
        task_A=float(task_a.value),
        task_B=float(task_b.value),
        align_AtoB=a2b,
        align_BtoA=b2a,
        align=align,
        total=float(task.value) + (lam * align if lam else 0.0),
        lam=lam,
        tau=tau,
    )
    return total, breakdown


def _mean_breakdown(parts: list, lam: float, tau: float) -> losses.LossBreakdown:
    def m(attr):
        return float(np.mean([getattr(p, attr) for p in parts]))

    return losses.LossBreakdown(
        task_A=m("task_A"),
        task_B=m("task_B"),
        align_AtoB=m("align_AtoB"),
        align_BtoA=m("align_BtoA"),
        align=m("align"),
        total=m("total"),
        lam=lam,
        tau=tau,
    )


def evaluate(state: model.ModelState, ds: SyntheticDataset, split: str) -> tuple[float, float]:
    """Argmax accuracy of each encoder's classifier on one split."""
    if split not in ds.splits:
        raise ValueError(f"unknown split {split!r}")
    idx = ds.splits[split]
    if len(idx) == 0:
        raise ValueError(f"split {split!r} is empty")
    y = ds.y[idx]
    accs = []
    for modality, x in (("A", ds.x1[idx]), ("B", ds.x2[idx])):
        logits = model.classify(state, modality, model.encode(state, modality, x))
        accs.append(float(np.mean(np.argmax(logits, axis=1) == y)))
    return accs[0], accs[1]


def _alignment_on_test(state: model.ModelState, ds: SyntheticDataset, cfg: TrainConfig) -> AlignmentReport:
    """All three metrics on a seed-fixed subsample of the test split.

    Representations are the pre-projection encoder outputs; centering
    happens inside alignment_report."""
    test = ds.splits["test"]
    sub = Rng(ds.spec.seed).child("metric-subsample").permutation(len(test))
    idx = test[sub[: min(cfg.metric_subsample, len(test))]]
    fa = model.encode(state, "A", ds.x1[idx])
    fb = model.encode(state, "B", ds.x2[idx])
    return alignment_report(fa, fb, knn_k=cfg.knn_k, svcca_variance_keep=cfg.svcca_variance_keep)


def train(ds: SyntheticDataset, cfg: TrainConfig, checkpoint_path=None) -> RunRecord:
    """Optimize the total objective with AdamW; deterministic per (spec, cfg)."""
    t0 = time.monotonic()
    state = model.init(model.EncoderConfig(), model.ProjectionConfig(), cfg.seed)
    opt = AdamWState(lr=cfg.lr, weight_decay=cfg.weight_decay)
    record = RunRecord(config=asdict(cfg), spec=ds.spec.to_dict())
    train_idx = ds.splits["train"]
    shuffle_rng = Rng(cfg.seed).child("shuffle")
    best = (-1.0, -1)
    best_params = {k: v.copy() for k, v in state.params.items()}

    for epoch in range(cfg.epochs):
        order = train_idx[shuffle_rng.child(f"epoch-{epoch}").permutation(len(train_idx))]
        parts = []
        finite = True
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            if len(batch) < 2 and cfg.batch_size >= 2:
                continue  # drop a trailing singleton; alignment needs negatives
            tape = Tape()
            pvars = model.leaf_params(tape, state)
            loss, breakdown = _batch_loss(
                tape, state, pvars, ds.x1[batch], ds.x2[batch], ds.y[batch], cfg.lam, cfg.tau
            )
            if not np.isfinite(breakdown.total):
                finite = False
                break
            tape.backward(loss)
            grads = {name: v.grad for name, v in pvars.items() if v.grad is not None}
            adamw_step(opt, state.params, grads)
            parts.append(breakdown)
        if not finite:
            record.status = "diverged"
            break
        record.epoch_losses.append(_mean_breakdown(parts, cfg.lam, cfg.tau))
        if (epoch + 1) % cfg.eval_every == 0 or epoch == cfg.epochs - 1:
            va, vb = evaluate(state, ds, "val")
            score = 0.5 * (va + vb)
            if score > best[0]:
                best = (score, epoch)
                best_params = {k: v.copy() for k, v in state.params.items()}
            elif epoch - best[1] >= cfg.patience:
                break

    state.params = best_params
    record.best_epoch = best[1]
    record.acc_A, record.acc_B = evaluate(state, ds, "test")
    record.alignment = _alignment_on_test(state, ds, cfg)
    if checkpoint_path is not None:
        model.save_checkpoint(state, checkpoint_path)
        record.checkpoint_path = str(checkpoint_path)
    record.wall_time = time.monotonic() - t0
    return record


def gradient_check(state: model.ModelState, batch: tuple, cfg: TrainConfig, entries_per_param: int = 4, h: float = 1e-4, rng: Rng | None = None) -> float:
    """Max error between tape gradients and central finite differences.

    Error is |analytic - fd| / max(1, |analytic|, |fd|), sampled over a
    random subset of entries of every parameter."""
    xb1, xb2, yb = batch
    if len(yb) > 8:
        raise ValueError("gradient_check expects a small batch (N <= 8)")
    rng = rng or Rng(0).child("gradcheck")

    def loss_value():
        tape = Tape()
        pvars = model.leaf_params(tape, state)
        loss, _ = _batch_loss(tape, state, pvars, xb1, xb2, yb, cfg.lam, cfg.tau)
        return float(loss.value)

    tape = Tape()
    pvars = model.leaf_params(tape, state)
    loss, _ = _batch_loss(tape, state, pvars, xb1, xb2, yb, cfg.lam, cfg.tau)
    tape.backward(loss)
    worst = 0.0
    for name, p in state.params.items():
        g = pvars[name].grad
        if g is None:
            g = np.zeros_like(p)
        flat = p.reshape(-1)
        n_entries = min(entries_per_param, flat.size)
        picks = rng.child(name).choice_without_replacement(flat.size, n_entries)
        for j in picks:
            orig = flat[j]
            flat[j] = orig + h
            up = loss_value()
            flat[j] = orig - h
            down = loss_value()
            flat[j] = orig
            fd = (up - down) / (2 * h)
            a = g.reshape(-1)[j]
            worst = max(worst, abs(a - fd) / max(1.0, abs(a), abs(fd)))
    return worst


# ----------------------------------------------------------------- sweeps


def _sweep_cell(args) -> list:
    """One (R, seed) cell: generate the dataset once, train every lambda."""
    r, seed, lambdas, cfg_dict, tau, split_sizes = args
    spec = GenSpec(r=r, tau=tau, seed=seed, split_sizes=tuple(split_sizes))
    ds = generate(spec)
    out = []
    for lam in lambdas:
        cfg = TrainConfig(**{**cfg_dict, "lam": lam, "seed": seed})
        try:
            out.append(train(ds, cfg))
        except Exception as exc:  # recorded, sweep continues
            rec = RunRecord(config={**cfg_dict, "lam": lam, "seed": seed}, spec=spec.to_dict())
            rec.status = f"failed: {exc}"
            out.append(rec)
    return out


def sweep(
    r_levels=DEFAULT_R_LEVELS,
    lambdas=DEFAULT_LAMBDAS,
    seeds=DEFAULT_SEEDS,
    base_cfg: TrainConfig = TrainConfig(),
    dataset_tau: float = 1.0,
    split_sizes=None,
    workers: int = 1,
    progress=None,
) -> list:
    """Train one run per (R, lambda, seed); deterministic result order."""
    if not (len(r_levels) and len(lambdas) and len(seeds)):
        raise ValueError("sweep grids must be non-empty")
    from .syndata import CANONICAL_SPLITS

    split_sizes = tuple(split_sizes) if split_sizes else CANONICAL_SPLITS
    cfg_dict = asdict(base_cfg)
    cfg_dict.pop("lam")
    cfg_dict.pop("seed")
    tasks = [
        (r, seed, tuple(lambdas), cfg_dict, dataset_tau, split_sizes)
        for r in r_levels
        for seed in seeds
    ]
    records = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for cell in pool.map(_sweep_cell, tasks):
                records.extend(cell)
                if progress:
                    progress(len(records))
    else:
        for task in tasks:
            records.extend(_sweep_cell(task))
            if progress:
                progress(len(records))
    records.sort(key=lambda rec: (rec.spec["r"], rec.config["lam"], rec.config["seed"]))
    return records
