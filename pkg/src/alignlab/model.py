"""Two unimodal MLP encoders with linear classifier heads and optional
projection heads.

Parameters live in a flat name -> float64 array dict so the optimizer and
the gradient tape can treat them uniformly. Every forward exists in two
forms: a plain numpy path for evaluation and a tape path for training;
they compute identical values (covered by tests).
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

import numpy as np

from .rng import Rng
from .tape import Tape, Var

N_CLASSES = 4
NORM_EPS = 1e-12


@dataclass(frozen=True)
class EncoderConfig:
    input_dim: int = 12
    hidden_dim: int = 12
    depth: int = 3
    activation: str = "relu"

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError(f"encoder depth must be >= 1, got {self.depth}")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")


@dataclass(frozen=True)
class ProjectionConfig:
    enabled: bool = False
    out_dim: int = 12
    depth: int = 1
    dropout: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.enabled and self.depth < 1:
            raise ValueError("projection depth must be >= 1 when enabled")


@dataclass
class ModelState:
    encoder_cfg: EncoderConfig
    projection_cfg: ProjectionConfig
    init_seed: int
    params: dict = field(default_factory=dict)


def _he_uniform(rng: Rng, fan_in: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, shape)


def init(encoder_cfg: EncoderConfig, projection_cfg: ProjectionConfig, seed: int) -> ModelState:
    """Fan-in-uniform initialization of both towers from one seed."""
    params = {}
    rng = Rng(seed)
    for side in ("A", "B"):
        r = rng.child(f"enc-{side}")
        d_in = encoder_cfg.input_dim
        for layer in range(encoder_cfg.depth):
            d_out = encoder_cfg.hidden_dim
            params[f"{side}/enc/W{layer}"] = _he_uniform(r.child(f"W{layer}"), d_in, (d_in, d_out))
            params[f"{side}/enc/b{layer}"] = np.zeros(d_out)
            d_in = d_out
        rc = rng.child(f"clf-{side}")
        params[f"{side}/clf/W"] = _he_uniform(rc, encoder_cfg.hidden_dim, (encoder_cfg.hidden_dim, N_CLASSES))
        params[f"{side}/clf/b"] = np.zeros(N_CLASSES)
        if projection_cfg.enabled:
            rp = rng.child(f"proj-{side}")
            d_in = encoder_cfg.hidden_dim
            for layer in range(projection_cfg.depth):
                d_out = projection_cfg.out_dim
                params[f"{side}/proj/W{layer}"] = _he_uniform(rp.child(f"W{layer}"), d_in, (d_in, d_out))
                params[f"{side}/proj/b{layer}"] = np.zeros(d_out)
                d_in = d_out
    return ModelState(encoder_cfg=encoder_cfg, projection_cfg=projection_cfg, init_seed=seed, params=params)


def _check_input(state: ModelState, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != state.encoder_cfg.input_dim:
        raise ValueError(
            f"expected input of shape (n, {state.encoder_cfg.input_dim}), got {x.shape}"
        )
    return x


# ------------------------------------------------------------ numpy path


def encode(state: ModelState, modality: str, x: np.ndarray) -> np.ndarray:
    """Final hidden representation f_M(x), pre-classifier and pre-projection."""
    x = _check_input(state, x)
    h = x
    for layer in range(state.encoder_cfg.depth):
        h = h @ state.params[f"{modality}/enc/W{layer}"] + state.params[f"{modality}/enc/b{layer}"]
        if layer < state.encoder_cfg.depth - 1:
            h = np.maximum(h, 0.0)
    return h


def normalize_rows(h: np.ndarray, eps: float = NORM_EPS):
    """Unit-normalize rows; returns (normalized, zero_row_count).

    Rows with norm <= eps are kept as zero rows (the documented guard)."""
    norms = np.linalg.norm(h, axis=1, keepdims=True)
    safe = norms > eps
    out = np.where(safe, h / np.where(safe, norms, 1.0), 0.0)
    return out, int((~safe).sum())


def project(state: ModelState, modality: str, h: np.ndarray) -> np.ndarray:
    """Projection-head output with unit-norm rows (identity head when disabled)."""
    z = h
    if state.projection_cfg.enabled:
        for layer in range(state.projection_cfg.depth):
            z = z @ state.params[f"{modality}/proj/W{layer}"] + state.params[f"{modality}/proj/b{layer}"]
            if layer < state.projection_cfg.depth - 1:
                z = np.maximum(z, 0.0)
    out, _ = normalize_rows(z)
    return out


def classify(state: ModelState, modality: str, h: np.ndarray) -> np.ndarray:
    """Linear logits over the 4 classes."""
    return h @ state.params[f"{modality}/clf/W"] + state.params[f"{modality}/clf/b"]


# -------------------------------------------------------------- tape path


def leaf_params(tape: Tape, state: ModelState) -> dict:
    """Wrap every parameter as a tape leaf (one Var per parameter)."""
    return {name: tape.leaf(p) for name, p in state.params.items()}


def encode_tape(tape: Tape, pvars: dict, cfg: EncoderConfig, modality: str, x: Var) -> Var:
    h = x
    for layer in range(cfg.depth):
        h = tape.add(tape.matmul(h, pvars[f"{modality}/enc/W{layer}"]), pvars[f"{modality}/enc/b{layer}"])
        if layer < cfg.depth - 1:
            h = tape.relu(h)
    return h


def project_tape(
    tape: Tape,
    pvars: dict,
    cfg: ProjectionConfig,
    modality: str,
    h: Var,
    dropout_mask: np.ndarray | None = None,
) -> Var:
    z = h
    if cfg.enabled:
        for layer in range(cfg.depth):
            z = tape.add(tape.matmul(z, pvars[f"{modality}/proj/W{layer}"]), pvars[f"{modality}/proj/b{layer}"])
            if layer < cfg.depth - 1:
                z = tape.relu(z)
                if dropout_mask is not None:
                    z = tape.mul_const(z, dropout_mask)
    return tape.normalize_rows(z, NORM_EPS)


def classify_tape(tape: Tape, pvars: dict, modality: str, h: Var) -> Var:
    return tape.add(tape.matmul(h, pvars[f"{modality}/clf/W"]), pvars[f"{modality}/clf/b"])


# ------------------------------------------------------------ checkpoints


def save_checkpoint(state: ModelState, path) -> None:
    doc = {
        "format": "alignlab-checkpoint",
        "version": 1,
        "encoder_cfg": vars(state.encoder_cfg).copy(),
        "projection_cfg": vars(state.projection_cfg).copy(),
        "init_seed": state.init_seed,
        "params": {
            name: {
                "shape": list(p.shape),
                "data": base64.b64encode(np.ascontiguousarray(p.astype("<f8")).tobytes()).decode("ascii"),
            }
            for name, p in state.params.items()
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path) -> ModelState:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "alignlab-checkpoint":
        raise ValueError(f"not a checkpoint file: {path}")
    params = {}
    for name, entry in doc["params"].items():
        raw = base64.b64decode(entry["data"].encode("ascii"))
        params[name] = np.frombuffer(raw, dtype="<f8").reshape(entry["shape"]).copy()
    return ModelState(
        encoder_cfg=EncoderConfig(**doc["encoder_cfg"]),
        projection_cfg=ProjectionConfig(**doc["projection_cfg"]),
        init_seed=int(doc["init_seed"]),
        params=params,
    )
