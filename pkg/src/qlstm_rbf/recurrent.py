"""QLSTM and LSTM cells, the Seq2Seq autoencoder, and its training loop.

Gradients are computed by hand-written backpropagation through time. The
quantum path differentiates each gate's circuit with the adjoint method
from :mod:`qlstm_rbf.vqc`. Everything is batched over sequences: a batch
of ``B`` sequences of length ``L`` with ``d_in`` features has shape
``(B, L, d_in)``.

Gate order along the stacked gate axis is input, forget, output,
candidate. Both cell kinds produce gate pre-activations of shape
``(B, 4, H)`` and share :func:`_combine_gates` for the sigmoid/tanh
state update.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import vqc
from ._validation import check_sequences
from .exceptions import ConfigError, DataError, TrainingDivergedError

logger = logging.getLogger(__name__)

GATES = ("input", "forget", "output", "candidate")
LATENT_DIM = 2
MODES = ("quantum", "classical")
CHECKPOINT_FORMAT = "qlstm-rbf-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class ReturnSequence:
    entity_id: str
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 2:
            raise DataError(f"sequence {self.entity_id!r} must be 1-D with at least 2 values")
        if not np.all(np.isfinite(self.values)):
            raise DataError(f"sequence {self.entity_id!r} contains non-finite values")


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 600
    teacher_forcing_prob: float = 0.5
    seed: int = 0
    hidden_width: int = 16
    qubits: int = 4
    input_width: int = 1
    entangler: str = "ring"
    encoding: str = "atan"
    standardize: bool = True

    def validate(self):
        if not (np.isfinite(self.learning_rate) and self.learning_rate >= 0):
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ConfigError(f"epochs must be a positive integer, got {self.epochs}")
        if not 0.0 <= self.teacher_forcing_prob <= 1.0:
            raise ConfigError(f"teacher_forcing_prob must be in [0, 1], got {self.teacher_forcing_prob}")
        if int(self.hidden_width) != self.hidden_width or self.hidden_width < 1:
            raise ConfigError(f"hidden_width must be a positive integer, got {self.hidden_width}")
        if int(self.qubits) != self.qubits or not 1 <= self.qubits <= 8:
            raise ConfigError(f"qubits must be an integer in [1, 8], got {self.qubits}")
        if int(self.input_width) != self.input_width or self.input_width < 1:
            raise ConfigError(f"input_width must be a positive integer, got {self.input_width}")
        if self.entangler not in vqc.ENTANGLERS:
            raise ConfigError(f"entangler must be one of {vqc.ENTANGLERS}")
        if self.encoding not in vqc.ENCODINGS:
            raise ConfigError(f"encoding must be one of {vqc.ENCODINGS}")
        return self


# --------------------------------------------------------------------------
# cells


@dataclass
class QlstmGateParams:
    """One gate's classical maps: ``readout @ vqc(compression @ v) + bias``."""

    compression: np.ndarray
    readout: np.ndarray
    bias: np.ndarray


@dataclass
class QlstmCell:
    """Four gates stacked on axis 0: compression (4, q, D), angles (4, q, 2),
    readout (4, H, q), bias (4, H), with ``D = d_in + H``."""

    compression: np.ndarray
    angles: np.ndarray
    readout: np.ndarray
    bias: np.ndarray
    entangler: str = "ring"
    encoding: str = "atan"

    kind = "quantum"
    param_names = ("compression", "angles", "readout", "bias")

    def __post_init__(self):
        g, q, d = self.compression.shape
        h = self.bias.shape[1]
        if g != 4 or self.angles.shape != (4, q, 2) or self.readout.shape != (4, h, q) or self.bias.shape != (4, h):
            raise ConfigError("inconsistent QLSTM cell parameter shapes")
        if d <= h:
            raise ConfigError("compression width must exceed the hidden width")

    @property
    def hidden_width(self):
        return self.bias.shape[1]

    @property
    def input_width(self):
        return self.compression.shape[2] - self.hidden_width

    @property
    def qubits(self):
        return self.compression.shape[1]

    def gate(self, name):
        g = GATES.index(name)
        classical = QlstmGateParams(self.compression[g], self.readout[g], self.bias[g])
        return classical, vqc.VqcParams(self.qubits, self.angles[g])

    def pre_activations(self, v):
        z = np.einsum("bd,gqd->bgq", v, self.compression)
        e, psi = vqc.forward_with_state(z, self.angles, self.entangler, self.encoding)
        a = np.einsum("bgq,ghq->bgh", e, self.readout) + self.bias
        return a, (v, z, e, psi)

    def pre_activations_backward(self, da, cache):
        v, z, e, psi = cache
        grads = {
            "bias": da.sum(axis=0),
            "readout": np.einsum("bgh,bgq->ghq", da, e),
        }
        de = np.einsum("bgh,ghq->bgq", da, self.readout)
        vg = vqc.vqc_backward(z, self.angles, de, self.entangler, self.encoding, final_state=psi)
        grads["angles"] = vg.d_angles.sum(axis=0)
        grads["compression"] = np.einsum("bgq,bd->gqd", vg.d_input, v)
        dv = np.einsum("bgq,gqd->bd", vg.d_input, self.compression)
        return dv, grads


@dataclass
class LstmCell:
    """Classical baseline: weights (4, H, D), bias (4, H)."""

    weights: np.ndarray
    bias: np.ndarray

    kind = "classical"
    param_names = ("weights", "bias")

    def __post_init__(self):
        g, h, d = self.weights.shape
        if g != 4 or self.bias.shape != (4, h) or d <= h:
            raise ConfigError("inconsistent LSTM cell parameter shapes")

    @property
    def hidden_width(self):
        return self.bias.shape[1]

    @property
    def input_width(self):
        return self.weights.shape[2] - self.hidden_width

    def pre_activations(self, v):
        return np.einsum("bd,ghd->bgh", v, self.weights) + self.bias, v

    def pre_activations_backward(self, da, v):
        grads = {"bias": da.sum(axis=0), "weights": np.einsum("bgh,bd->ghd", da, v)}
        return np.einsum("bgh,ghd->bd", da, self.weights), grads


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _combine_gates(a, c_prev):
    i, f, o = _sigmoid(a[:, 0]), _sigmoid(a[:, 1]), _sigmoid(a[:, 2])
    g = np.tanh(a[:, 3])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    return o * tc, c, (i, f, o, g, c_prev, tc)


def _combine_gates_backward(dh, dc, cache):
    i, f, o, g, c_prev, tc = cache
    dc = dc + dh * o * (1.0 - tc**2)
    da = np.stack(
        [
            dc * g * i * (1.0 - i),
            dc * c_prev * f * (1.0 - f),
            dh * tc * o * (1.0 - o),
            dc * i * (1.0 - g**2),
        ],
        axis=1,
    )
    return da, dc * f


def _check_step_shapes(cell, x, h, c):
    if x.shape[-1] != cell.input_width or h.shape[-1] != cell.hidden_width or c.shape != h.shape:
        raise ConfigError(
            f"step shapes x{x.shape}, h{h.shape}, c{c.shape} do not match cell "
            f"(d_in={cell.input_width}, H={cell.hidden_width})"
        )


def cell_forward(cell, x, h_prev, c_prev):
    """Batched step. Returns ``(h, c, cache)``."""
    v = np.concatenate([x, h_prev], axis=1)
    a, pre_cache = cell.pre_activations(v)
    h, c, gate_cache = _combine_gates(a, c_prev)
    return h, c, (pre_cache, gate_cache)


def cell_backward(cell, dh, dc, cache):
    """Returns ``(dx, dh_prev, dc_prev, grads)``."""
    pre_cache, gate_cache = cache
    da, dc_prev = _combine_gates_backward(dh, dc, gate_cache)
    dv, grads = cell.pre_activations_backward(da, pre_cache)
    d_in = cell.input_width
    return dv[:, :d_in], dv[:, d_in:], dc_prev, grads


def _single_step(cell, x_t, h_prev, c_prev):
    x_t, h_prev, c_prev = (np.asarray(a, dtype=float) for a in (x_t, h_prev, c_prev))
    _check_step_shapes(cell, x_t, h_prev, c_prev)
    h, c, _ = cell_forward(cell, x_t[None], h_prev[None], c_prev[None])
    return h[0], c[0]


def qlstm_cell_step(x_t, h_prev, c_prev, cell: QlstmCell):
    """One QLSTM step for a single (unbatched) input. Returns ``(h_t, c_t)``."""
    if not isinstance(cell, QlstmCell):
        raise ConfigError("qlstm_cell_step needs a QlstmCell")
    return _single_step(cell, x_t, h_prev, c_prev)


def lstm_cell_step(x_t, h_prev, c_prev, cell: LstmCell):
    """One classical LSTM step for a single (unbatched) input. Returns ``(h_t, c_t)``."""
    if not isinstance(cell, LstmCell):
        raise ConfigError("lstm_cell_step needs an LstmCell")
    return _single_step(cell, x_t, h_prev, c_prev)


# --------------------------------------------------------------------------
# Seq2Seq model


@dataclass
class Seq2SeqModel:
    encoder: object
    decoder: object
    latent_proj: np.ndarray
    latent_expand: np.ndarray
    output_head: np.ndarray
    mode: str = "quantum"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        h = self.encoder.hidden_width
        if self.decoder.hidden_width != h or self.decoder.input_width != self.encoder.input_width:
            raise ConfigError("encoder and decoder widths differ")
        if self.latent_proj.shape != (LATENT_DIM, h) or self.latent_expand.shape != (h, LATENT_DIM):
            raise ConfigError("latent maps must be 2 x H and H x 2")
        if self.output_head.shape != (self.encoder.input_width, h):
            raise ConfigError("output head must be d_in x H")

    @property
    def hidden_width(self):
        return self.encoder.hidden_width

    @property
    def input_width(self):
        return self.encoder.input_width

    def parameters(self):
        """Name -> array mapping. Arrays are the live parameters, not copies."""
        params = {}
        for prefix, cell in (("encoder", self.encoder), ("decoder", self.decoder)):
            for name in cell.param_names:
                params[f"{prefix}.{name}"] = getattr(cell, name)
        params["latent_proj"] = self.latent_proj
        params["latent_expand"] = self.latent_expand
        params["output_head"] = self.output_head
        return params

    def copy(self):
        return model_from_parameters(
            {k: v.copy() for k, v in self.parameters().items()}, self.mode, **self._cell_options()
        )

    def _cell_options(self):
        if self.mode == "quantum":
            return {"entangler": self.encoder.entangler, "encoding": self.encoder.encoding}
        return {}


def model_from_parameters(params, mode, entangler="ring", encoding="atan"):
    def cell(prefix):
        if mode == "quantum":
            return QlstmCell(
                params[f"{prefix}.compression"],
                params[f"{prefix}.angles"],
                params[f"{prefix}.readout"],
                params[f"{prefix}.bias"],
                entangler=entangler,
                encoding=encoding,
            )
        return LstmCell(params[f"{prefix}.weights"], params[f"{prefix}.bias"])

    return Seq2SeqModel(
        cell("encoder"),
        cell("decoder"),
        params["latent_proj"],
        params["latent_expand"],
        params["output_head"],
        mode=mode,
    )


def init_model(config: TrainConfig, mode="quantum", rng=None):
    """Seeded initialization: classical weights U(-0.1, 0.1), circuit angles
    U(-pi/8, pi/8), biases zero."""
    config.validate()
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    h, d_in, q = config.hidden_width, config.input_width, config.qubits
    d = d_in + h

    def uniform(*shape, scale=0.1):
        return rng.uniform(-scale, scale, size=shape)

    def cell():
        if mode == "quantum":
            return QlstmCell(
                uniform(4, q, d),
                uniform(4, q, 2, scale=np.pi / 8),
                uniform(4, h, q),
                np.zeros((4, h)),
                entangler=config.entangler,
                encoding=config.encoding,
            )
        return LstmCell(uniform(4, h, d), np.zeros((4, h)))

    encoder, decoder = cell(), cell()
    return Seq2SeqModel(
        encoder, decoder, uniform(LATENT_DIM, h), uniform(h, LATENT_DIM), uniform(d_in, h), mode=mode
    )


def zero_model(config: TrainConfig, mode="quantum"):
    model = init_model(config, mode)
    for arr in model.parameters().values():
        arr[...] = 0.0
    return model


def _as_batch(x, d_in):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :, None]
    elif x.ndim == 2:
        x = x[:, :, None] if d_in == 1 else x[None]
    if x.ndim != 3 or x.shape[2] != d_in:
        raise ConfigError(f"expected sequences with {d_in} feature(s), got shape {x.shape}")
    return x


def _encode_forward(model, x):
    b, length, _ = x.shape
    h = np.zeros((b, model.hidden_width))
    c = np.zeros_like(h)
    caches = []
    for t in range(length):
        h, c, cache = cell_forward(model.encoder, x[:, t], h, c)
        caches.append(cache)
    latent = h @ model.latent_proj.T
    return latent, (h, caches)


def _decode_forward(model, latent, targets, forced):
    """``forced[:, j]`` selects the true previous value as input to step j (j >= 1)."""
    b, length, d_in = targets.shape
    h = latent @ model.latent_expand.T
    c = np.zeros_like(h)
    u = np.zeros((b, d_in))
    preds = np.empty_like(targets)
    hs, caches = [], []
    for j in range(length):
        if j > 0:
            u = np.where(forced[:, j, None], targets[:, j - 1], preds[:, j - 1])
        h, c, cache = cell_forward(model.decoder, u, h, c)
        preds[:, j] = h @ model.output_head.T
        hs.append(h)
        caches.append(cache)
    return preds, (hs, caches)


def teacher_forcing_mask(shape, p_tf, rng):
    """Per-timestep coin flips; column 0 is unused (the first input is zero)."""
    if p_tf <= 0.0:
        return np.zeros(shape, dtype=bool)
    if p_tf >= 1.0:
        return np.ones(shape, dtype=bool)
    return rng.random(shape) < p_tf


def mse_loss(target, prediction) -> float:
    """Mean over time steps of the squared reconstruction error."""
    target = np.asarray(target, dtype=float)
    prediction = np.asarray(prediction, dtype=float)
    if target.shape != prediction.shape:
        raise DataError(f"length mismatch: {target.shape} vs {prediction.shape}")
    diff = target - prediction
    if diff.ndim == 1:
        return float(np.mean(diff**2))
    return float(np.sum(diff**2) / diff.shape[0])


def loss_and_gradients(model: Seq2SeqModel, x, forced):
    """Mean reconstruction loss over the batch and its exact gradient.

    ``x`` has shape ``(B, L, d_in)``; ``forced`` is the ``(B, L)`` teacher
    forcing mask. Returns ``(loss, grads)`` with grads keyed like
    :meth:`Seq2SeqModel.parameters`.
    """
    b, length, _ = x.shape
    latent, (h_enc, enc_caches) = _encode_forward(model, x)
    preds, (hs, dec_caches) = _decode_forward(model, latent, x, forced)
    diff = preds - x
    loss = float(np.sum(diff**2) / (b * length))

    grads = {k: np.zeros_like(v) for k, v in model.parameters().items()}

    def accumulate(prefix, cell_grads):
        for name, g in cell_grads.items():
            grads[f"{prefix}.{name}"] += g

    dpred_direct = 2.0 * diff / (b * length)
    dh = np.zeros_like(hs[0])
    dc = np.zeros_like(dh)
    du_next = None
    for j in reversed(range(length)):
        dpred = dpred_direct[:, j]
        if du_next is not None:
            dpred = dpred + np.where(forced[:, j + 1, None], 0.0, du_next)
        grads["output_head"] += dpred.T @ hs[j]
        dh = dh + dpred @ model.output_head
        du, dh, dc, cell_grads = cell_backward(model.decoder, dh, dc, dec_caches[j])
        accumulate("decoder", cell_grads)
        du_next = du

    grads["latent_expand"] += dh.T @ latent
    dlatent = dh @ model.latent_expand
    grads["latent_proj"] += dlatent.T @ h_enc
    dh = dlatent @ model.latent_proj
    dc = np.zeros_like(dh)
    for t in reversed(range(length)):
        _, dh, dc, cell_grads = cell_backward(model.encoder, dh, dc, enc_caches[t])
        accumulate("encoder", cell_grads)
    return loss, grads


def encode(seq, model: Seq2SeqModel, expected_length: Optional[int] = None):
    """Latent 2-vector of one sequence (raw values, no rescaling)."""
    values = seq.values if isinstance(seq, ReturnSequence) else np.asarray(seq, dtype=float)
    if expected_length is not None and values.shape[0] != expected_length:
        raise DataError(f"sequence length {values.shape[0]} != trained length {expected_length}")
    latent, _ = _encode_forward(model, _as_batch(values, model.input_width))
    return latent[0]


def encode_batch(model, x):
    latent, _ = _encode_forward(model, _as_batch(x, model.input_width))
    return latent


def decode(latent, target, p_tf, rng, model: Seq2SeqModel):
    """Reconstruct a sequence from a latent vector.

    With ``p_tf = 0`` only the decoder's own predictions feed back, and
    ``target`` contributes nothing but its length.
    """
    if not 0.0 <= p_tf <= 1.0:
        raise ConfigError(f"p_tf must be in [0, 1], got {p_tf}")
    values = target.values if isinstance(target, ReturnSequence) else np.asarray(target, dtype=float)
    targets = _as_batch(values, model.input_width)
    forced = teacher_forcing_mask(targets.shape[:2], p_tf, rng)
    preds, _ = _decode_forward(model, np.asarray(latent, dtype=float)[None], targets, forced)
    return preds[0, :, 0] if model.input_width == 1 else preds[0]


# --------------------------------------------------------------------------
# training


class Adam:
    def __init__(self, params, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k in sorted(params):
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def _dataset_array(dataset, d_in):
    if len(dataset) == 0:
        raise DataError("training dataset is empty")
    if isinstance(dataset, np.ndarray):
        return _as_batch(dataset, d_in)
    rows = [s.values if isinstance(s, ReturnSequence) else np.asarray(s, dtype=float) for s in dataset]
    lengths = {len(r) for r in rows}
    if len(lengths) != 1:
        raise DataError(f"sequences must share one length, got {sorted(lengths)}")
    return _as_batch(np.stack(rows), d_in)


def train_autoencoder(dataset, config: TrainConfig, mode="quantum"):
    """Full-batch Adam training on the mean reconstruction loss.

    The data are used as given; :class:`QLSTMAutoencoder` handles
    rescaling. The teacher-forcing generator is reseeded from
    ``config.seed`` at every epoch, so the coin flips repeat across epochs
    and the run is a pure function of ``(dataset, config, mode)``.
    ``loss_history[e]`` is the loss at the parameters entering epoch ``e``.
    """
    config.validate()
    x = _dataset_array(dataset, config.input_width)
    if not np.all(np.isfinite(x)):
        raise DataError("training data contain non-finite values")
    model = init_model(config, mode)
    params = model.parameters()
    opt = Adam(params, lr=config.learning_rate)
    history = []
    for epoch in range(config.epochs):
        rng = np.random.default_rng(config.seed)
        forced = teacher_forcing_mask(x.shape[:2], config.teacher_forcing_prob, rng)
        loss, grads = loss_and_gradients(model, x, forced)
        if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
            raise TrainingDivergedError(f"non-finite loss or gradient at epoch {epoch}")
        history.append(loss)
        opt.step(params, grads)
        if epoch % 50 == 0:
            logger.debug("epoch %d loss %.6g", epoch, loss)
    return model, history


# --------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, model: Seq2SeqModel, config: TrainConfig, extra=None):
    """Write all parameters plus config as JSON. Floats use ``repr`` so the
    round trip is exact."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "mode": model.mode,
        "config": asdict(config),
        "params": {
            name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in sorted(model.parameters().items())
        },
        "extra": extra or {},
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")


def load_checkpoint(path):
    """Returns ``(model, config, extra)``."""
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{path} is not a model checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint version {payload.get('version')}")
    config = TrainConfig(**payload["config"])
    params = {
        name: np.array(spec["data"], dtype=float).reshape(spec["shape"])
        for name, spec in payload["params"].items()
    }
    model = model_from_parameters(params, payload["mode"], config.entangler, config.encoding)
    return model, config, payload.get("extra", {})


# --------------------------------------------------------------------------
# estimator


class QLSTMAutoencoder(TransformerMixin, BaseEstimator):
    """Seq2Seq autoencoder mapping fixed-length sequences to 2-D latents.

    ``fit(X)`` trains from scratch on ``X`` of shape ``(n_sequences, L)``;
    ``transform(X)`` returns ``(n_sequences, 2)`` latent coordinates from
    the frozen encoder. With ``standardize=True`` inputs are divided by the
    standard deviation of the training values before entering the network.
    """

    def __init__(
        self,
        mode="quantum",
        hidden_width=16,
        qubits=4,
        epochs=600,
        learning_rate=0.01,
        teacher_forcing_prob=0.5,
        entangler="ring",
        encoding="atan",
        standardize=True,
        random_state=0,
    ):
        self.mode = mode
        self.hidden_width = hidden_width
        self.qubits = qubits
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.teacher_forcing_prob = teacher_forcing_prob
        self.entangler = entangler
        self.encoding = encoding
        self.standardize = standardize
        self.random_state = random_state

    def train_config(self):
        return TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            teacher_forcing_prob=self.teacher_forcing_prob,
            seed=self.random_state,
            hidden_width=self.hidden_width,
            qubits=self.qubits,
            entangler=self.entangler,
            encoding=self.encoding,
            standardize=self.standardize,
        ).validate()

    def fit(self, X, y=None):
        X = check_sequences(X)
        config = self.train_config()
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        self.scale_ = _fit_scale(X) if self.standardize else 1.0
        self.model_, self.loss_history_ = train_autoencoder(X / self.scale_, config, self.mode)
        self.seq_len_ = X.shape[1]
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = check_sequences(X, length=self.seq_len_)
        return encode_batch(self.model_, X / self.scale_)

    def reconstruct(self, X):
        """Inference-mode reconstruction (own predictions only), in input units."""
        check_is_fitted(self, "model_")
        X = check_sequences(X, length=self.seq_len_)
        xs = _as_batch(X / self.scale_, 1)
        latent = encode_batch(self.model_, xs)
        forced = np.zeros(xs.shape[:2], dtype=bool)
        preds, _ = _decode_forward(self.model_, latent, xs, forced)
        return preds[:, :, 0] * self.scale_

    def save(self, path, extra=None):
        check_is_fitted(self, "model_")
        info = {"scale": self.scale_, "seq_len": self.seq_len_, "loss_history": list(self.loss_history_)}
        info.update(extra or {})
        save_checkpoint(path, self.model_, self.train_config(), info)

    @classmethod
    def load(cls, path):
        model, config, extra = load_checkpoint(path)
        est = cls(
            mode=model.mode,
            hidden_width=config.hidden_width,
            qubits=config.qubits,
            epochs=config.epochs,
            learning_rate=config.learning_rate,
            teacher_forcing_prob=config.teacher_forcing_prob,
            entangler=config.entangler,
            encoding=config.encoding,
            standardize=config.standardize,
            random_state=config.seed,
        )
        est.model_ = model
        est.scale_ = float(extra.get("scale", 1.0))
        est.seq_len_ = int(extra["seq_len"])
        est.n_features_in_ = est.seq_len_
        est.loss_history_ = list(extra.get("loss_history", []))
        est.checkpoint_extra_ = extra
        return est


def _fit_scale(X):
    scale = float(np.std(X))
    return scale if scale > 0 else 1.0
