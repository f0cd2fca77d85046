"""Vector-quantized flow autoencoder, trained with hand-written backprop.

Every 4x4x2 flow patch is encoded independently:

    h = tanh(W1 x + b1),  z = W2 h + b2          (encoder, P -> H -> D)
    e = C[argmin_k ||z - C_k||^2]                 (quantization)
    g = tanh(V1 e + c1),  x' = V2 g + c2          (decoder, D -> H -> P)

Loss for a set of patches is ``mse(x', x) + mean||sg(z) - e||^2 +
beta * mean||z - sg(e)||^2`` with the means taken over patch positions.
"""

import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, fields, replace
from typing import NamedTuple

import numpy as np

from skillbench.core.exceptions import EmptyDatasetError, NonFiniteInputError
from skillbench.core.logging import get_logger
from skillbench.core.metrics import CODEC_EPOCHS, CODEC_RECON_MSE
from skillbench.core.seeding import make_rng

logger = get_logger(__name__)

PATCH_SIZE = 4
FLOW_CHANNELS = 2
PATCH_DIM = PATCH_SIZE * PATCH_SIZE * FLOW_CHANNELS

DEFAULT_CODEBOOK_SIZE = 64
DEFAULT_LATENT_DIM = 8
DEFAULT_HIDDEN = 16
DEFAULT_BETA = 0.25

_EVAL_CHUNK = 8192


@dataclass(frozen=True)
class CodecParams:
    """Encoder, decoder and codebook tensors plus the commitment weight."""

    w_enc1: np.ndarray  # (H, P)
    b_enc1: np.ndarray  # (H,)
    w_enc2: np.ndarray  # (D, H)
    b_enc2: np.ndarray  # (D,)
    codebook: np.ndarray  # (K, D)
    w_dec1: np.ndarray  # (H, D)
    b_dec1: np.ndarray  # (H,)
    w_dec2: np.ndarray  # (P, H)
    b_dec2: np.ndarray  # (P,)
    beta: float = DEFAULT_BETA

    def __post_init__(self) -> None:
        h, p = self.w_enc1.shape
        d = self.w_enc2.shape[0]
        expected = {
            "b_enc1": (h,),
            "w_enc2": (d, h),
            "b_enc2": (d,),
            "w_dec1": (h, d),
            "b_dec1": (h,),
            "w_dec2": (p, h),
            "b_dec2": (p,),
        }
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise ValueError(f"{name} has shape {actual}, expected {shape}")
        if self.codebook.ndim != 2 or self.codebook.shape[1] != d:
            raise ValueError(f"codebook must be (K, {d}), got {self.codebook.shape}")
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @property
    def codebook_size(self) -> int:
        return int(self.codebook.shape[0])

    @property
    def latent_dim(self) -> int:
        return int(self.codebook.shape[1])

    @property
    def hidden(self) -> int:
        return int(self.w_enc1.shape[0])

    @property
    def patch_dim(self) -> int:
        return int(self.w_enc1.shape[1])

    @property
    def dtype(self) -> np.dtype:
        return self.w_enc1.dtype

    def tensors(self) -> dict[str, np.ndarray]:
        """Tensors in file order."""
        return {name: getattr(self, name) for name in TENSOR_ORDER}

    def with_tensors(self, **tensors: np.ndarray) -> "CodecParams":
        return replace(self, **tensors)

    def astype(self, dtype: np.dtype | type) -> "CodecParams":
        return replace(self, **{k: v.astype(dtype) for k, v in self.tensors().items()})


TENSOR_ORDER: tuple[str, ...] = tuple(
    f.name for f in fields(CodecParams) if f.name != "beta"
)


class LossTerms(NamedTuple):
    total: float
    recon_mse: float
    codebook: float
    commitment: float


def init_params(
    seed: int,
    *,
    codebook_size: int = DEFAULT_CODEBOOK_SIZE,
    latent_dim: int = DEFAULT_LATENT_DIM,
    hidden: int = DEFAULT_HIDDEN,
    patch_dim: int = PATCH_DIM,
    beta: float = DEFAULT_BETA,
    dtype: type = np.float32,
    output_init_std: float = 0.0,
) -> CodecParams:
    """Seeded initial parameters.

    The decoder output layer starts at ``output_init_std`` (zero by default,
    so an untrained codec reconstructs every patch as zero flow).
    """
    rng = make_rng(seed, "codec-init")

    def normal(shape: tuple[int, ...], std: float) -> np.ndarray:
        return (rng.standard_normal(shape) * std).astype(dtype)

    return CodecParams(
        w_enc1=normal((hidden, patch_dim), 1.0 / np.sqrt(patch_dim)),
        b_enc1=np.zeros(hidden, dtype=dtype),
        w_enc2=normal((latent_dim, hidden), 1.0 / np.sqrt(hidden)),
        b_enc2=np.zeros(latent_dim, dtype=dtype),
        codebook=normal((codebook_size, latent_dim), 0.5),
        w_dec1=normal((hidden, latent_dim), 1.0 / np.sqrt(latent_dim)),
        b_dec1=np.zeros(hidden, dtype=dtype),
        w_dec2=normal((patch_dim, hidden), output_init_std),
        b_dec2=np.zeros(patch_dim, dtype=dtype),
        beta=beta,
    )


def _check_finite(array: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(array)):
        raise NonFiniteInputError(f"{what} contains NaN or infinite values")


def patchify(frames: np.ndarray) -> np.ndarray:
    """``(..., S, S, 2)`` -> ``(..., S/4, S/4, 32)``, patch vectors in (row, col, channel) order."""
    *lead, height, width, channels = frames.shape
    if height % PATCH_SIZE or width % PATCH_SIZE:
        raise ValueError(f"frame size {height}x{width} is not a multiple of {PATCH_SIZE}")
    gh, gw = height // PATCH_SIZE, width // PATCH_SIZE
    n = len(lead)
    split = frames.reshape(*lead, gh, PATCH_SIZE, gw, PATCH_SIZE, channels)
    order = (*range(n), n, n + 2, n + 1, n + 3, n + 4)
    return split.transpose(order).reshape(*lead, gh, gw, PATCH_SIZE * PATCH_SIZE * channels)


def unpatchify(patches: np.ndarray) -> np.ndarray:
    *lead, gh, gw, _ = patches.shape
    n = len(lead)
    split = patches.reshape(*lead, gh, gw, PATCH_SIZE, PATCH_SIZE, FLOW_CHANNELS)
    order = (*range(n), n, n + 2, n + 1, n + 3, n + 4)
    return split.transpose(order).reshape(
        *lead, gh * PATCH_SIZE, gw * PATCH_SIZE, FLOW_CHANNELS
    )


def _encode_rows(x: np.ndarray, params: CodecParams) -> tuple[np.ndarray, np.ndarray]:
    h = np.tanh(x @ params.w_enc1.T + params.b_enc1)
    z = h @ params.w_enc2.T + params.b_enc2
    return h, z


def _decode_rows(e: np.ndarray, params: CodecParams) -> tuple[np.ndarray, np.ndarray]:
    g = np.tanh(e @ params.w_dec1.T + params.b_dec1)
    return g, g @ params.w_dec2.T + params.b_dec2


def squared_distances(latents: np.ndarray, codebook: np.ndarray) -> np.ndarray:
    """``(n, K)`` squared L2 distances, summed from float64 differences.

    Equidistant entries compare equal, so ``argmin`` keeps the lowest index.
    """
    diff = latents.astype(np.float64)[:, None, :] - codebook.astype(np.float64)[None]
    dist: np.ndarray = np.sum(diff * diff, axis=-1)
    return dist


def _assign(latents: np.ndarray, codebook: np.ndarray) -> np.ndarray:
    # argmin returns the first minimum, so ties go to the lowest index
    out = np.empty(latents.shape[0], dtype=np.int64)
    for start in range(0, latents.shape[0], _EVAL_CHUNK):
        chunk = latents[start : start + _EVAL_CHUNK]
        out[start : start + _EVAL_CHUNK] = np.argmin(squared_distances(chunk, codebook), axis=1)
    return out


def encode(frame: np.ndarray, params: CodecParams) -> np.ndarray:
    """Latent grid ``(S/4, S/4, D)`` of one flow frame."""
    _check_finite(frame, "flow frame")
    patches = patchify(np.asarray(frame, dtype=params.dtype))
    _, z = _encode_rows(patches.reshape(-1, params.patch_dim), params)
    return z.reshape(*patches.shape[:-1], params.latent_dim)


def quantize(latents: np.ndarray, codebook: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest codebook entry for every latent: ``(indices, quantized latents)``."""
    if latents.shape[-1] != codebook.shape[1]:
        raise ValueError(
            f"latent dim {latents.shape[-1]} does not match codebook dim {codebook.shape[1]}"
        )
    flat = latents.reshape(-1, latents.shape[-1])
    indices = _assign(flat, codebook)
    return indices.reshape(latents.shape[:-1]), codebook[indices].reshape(latents.shape)


def decode(quantized: np.ndarray, params: CodecParams) -> np.ndarray:
    """Reconstructed flow frame from a quantized latent grid."""
    if quantized.shape[-1] != params.latent_dim:
        raise ValueError("quantized latents do not match the decoder input size")
    _, xhat = _decode_rows(quantized.reshape(-1, params.latent_dim), params)
    return unpatchify(xhat.reshape(*quantized.shape[:-1], params.patch_dim))


def code_grid(frame: np.ndarray, params: CodecParams) -> np.ndarray:
    indices, _ = quantize(encode(frame, params), params.codebook)
    return indices


def code_grids(frames: np.ndarray, params: CodecParams) -> np.ndarray:
    """Code indices ``(F, S/4, S/4)`` for a stack of frames."""
    _check_finite(frames, "flow frames")
    patches = patchify(np.asarray(frames, dtype=params.dtype))
    _, z = _encode_rows(patches.reshape(-1, params.patch_dim), params)
    return _assign(z, params.codebook).reshape(patches.shape[:-1])


def _terms(
    x: np.ndarray, xhat: np.ndarray, z: np.ndarray, e: np.ndarray, beta: float
) -> LossTerms:
    recon = float(np.mean((xhat - x) ** 2))
    q = float(np.mean(np.sum((z - e) ** 2, axis=1)))
    return LossTerms(recon + q + beta * q, recon, q, beta * q)


def loss(frame: np.ndarray, params: CodecParams) -> LossTerms:
    """Loss terms for one frame, averaged over its patch positions."""
    _check_finite(frame, "flow frame")
    x = patchify(np.asarray(frame, dtype=params.dtype)).reshape(-1, params.patch_dim)
    _, z = _encode_rows(x, params)
    idx = _assign(z, params.codebook)
    e = params.codebook[idx]
    _, xhat = _decode_rows(e, params)
    return _terms(x, xhat, z, e, params.beta)


def loss_and_grads(
    x: np.ndarray, params: CodecParams, *, straight_through: bool = True
) -> tuple[LossTerms, dict[str, np.ndarray], np.ndarray]:
    """Loss terms, parameter gradients and code assignments for patch rows ``x``.

    With ``straight_through`` the encoder receives the decoder's input
    gradient plus the commitment gradient, and the codebook only the codebook
    term, which is how the model is trained. Without it the gradients are
    those of the loss as written with assignments held fixed (the quantity a
    finite-difference check measures).
    """
    n = x.shape[0]
    beta = params.beta
    h, z = _encode_rows(x, params)
    idx = _assign(z, params.codebook)
    e = params.codebook[idx]
    g, xhat = _decode_rows(e, params)
    terms = _terms(x, xhat, z, e, beta)

    d_xhat = 2.0 * (xhat - x) / xhat.size
    grads: dict[str, np.ndarray] = {
        "w_dec2": d_xhat.T @ g,
        "b_dec2": d_xhat.sum(axis=0),
    }
    d_a2 = (d_xhat @ params.w_dec2) * (1.0 - g**2)
    grads["w_dec1"] = d_a2.T @ e
    grads["b_dec1"] = d_a2.sum(axis=0)
    d_e_recon = d_a2 @ params.w_dec1

    residual = 2.0 * (z - e) / n
    if straight_through:
        d_z = d_e_recon + beta * residual
        d_e = -residual
    else:
        d_z = (1.0 + beta) * residual
        d_e = d_e_recon - (1.0 + beta) * residual

    d_codebook = np.zeros_like(params.codebook)
    np.add.at(d_codebook, idx, d_e)
    grads["codebook"] = d_codebook

    grads["w_enc2"] = d_z.T @ h
    grads["b_enc2"] = d_z.sum(axis=0)
    d_a1 = (d_z @ params.w_enc2) * (1.0 - h**2)
    grads["w_enc1"] = d_a1.T @ x
    grads["b_enc1"] = d_a1.sum(axis=0)
    return terms, grads, idx


def sgd_step(params: CodecParams, grads: dict[str, np.ndarray], lr: float) -> CodecParams:
    return params.with_tensors(
        **{
            name: (tensor - lr * grads[name]).astype(tensor.dtype)
            for name, tensor in params.tensors().items()
        }
    )


def _as_dataset(dataset: Sequence[np.ndarray] | np.ndarray, dtype: np.dtype | type) -> np.ndarray:
    frames = np.asarray(dataset, dtype=dtype)
    if frames.ndim != 4 or frames.shape[0] == 0:
        raise EmptyDatasetError("codec dataset has no frames")
    _check_finite(frames, "codec dataset")
    return frames


def _evaluate(rows: np.ndarray, params: CodecParams) -> tuple[float, np.ndarray, np.ndarray]:
    """Reconstruction MSE, latents and assignments over all patch rows."""
    sq_err = 0.0
    latents = np.empty((rows.shape[0], params.latent_dim), dtype=params.dtype)
    assigned = np.empty(rows.shape[0], dtype=np.int64)
    for start in range(0, rows.shape[0], _EVAL_CHUNK):
        x = rows[start : start + _EVAL_CHUNK]
        _, z = _encode_rows(x, params)
        idx = _assign(z, params.codebook)
        _, xhat = _decode_rows(params.codebook[idx], params)
        sq_err += float(np.sum((xhat.astype(np.float64) - x) ** 2))
        latents[start : start + _EVAL_CHUNK] = z
        assigned[start : start + _EVAL_CHUNK] = idx
    return sq_err / rows.size, latents, assigned


@dataclass(frozen=True)
class TrainingResult:
    """Best parameters seen plus the reconstruction MSE history.

    ``history[0]`` is the untrained model; ``history[i]`` follows epoch ``i``.
    """

    params: CodecParams
    history: list[float]
    best_epoch: int

    @property
    def initial_recon(self) -> float:
        return self.history[0]

    @property
    def final_recon(self) -> float:
        return self.history[self.best_epoch]


class CodecTrainer:
    """Mini-batch SGD with straight-through gradients and dead-code reseeding.

    An entry no batch selected during an epoch is replaced by a randomly
    chosen training latent. The best parameters by full-dataset
    reconstruction MSE are kept, so training never ends worse than it began.
    """

    def __init__(
        self,
        *,
        epochs: int,
        lr: float = 0.05,
        beta: float = DEFAULT_BETA,
        seed: int = 0,
        batch_size: int = 32,
        codebook_size: int = DEFAULT_CODEBOOK_SIZE,
        latent_dim: int = DEFAULT_LATENT_DIM,
        hidden: int = DEFAULT_HIDDEN,
        on_epoch: Callable[[int, float], None] | None = None,
    ) -> None:
        if epochs < 0:
            raise ValueError("epochs must be non-negative")
        self.epochs = epochs
        self.lr = lr
        self.beta = beta
        self.seed = seed
        self.batch_size = batch_size
        self.codebook_size = codebook_size
        self.latent_dim = latent_dim
        self.hidden = hidden
        self.on_epoch = on_epoch

    def fit(
        self,
        dataset: Sequence[np.ndarray] | np.ndarray,
        initial: CodecParams | None = None,
    ) -> TrainingResult:
        params = initial or init_params(
            self.seed,
            codebook_size=self.codebook_size,
            latent_dim=self.latent_dim,
            hidden=self.hidden,
            beta=self.beta,
        )
        frames = _as_dataset(dataset, params.dtype)
        per_frame = patchify(frames).reshape(frames.shape[0], -1, params.patch_dim)
        rows = per_frame.reshape(-1, params.patch_dim)
        rng = make_rng(self.seed, "codec-train")

        recon, latents, _ = _evaluate(rows, params)
        history = [recon]
        best, best_epoch = params, 0
        logger.info(
            "codec_training_started",
            frames=frames.shape[0],
            epochs=self.epochs,
            codebook_size=params.codebook_size,
            recon_mse=recon,
        )

        for epoch in range(1, self.epochs + 1):
            start = time.perf_counter()
            used = np.zeros(params.codebook_size, dtype=bool)
            order = rng.permutation(frames.shape[0])
            for first in range(0, len(order), self.batch_size):
                batch = per_frame[order[first : first + self.batch_size]]
                _, grads, idx = loss_and_grads(
                    batch.reshape(-1, params.patch_dim), params, straight_through=True
                )
                used[idx] = True
                params = sgd_step(params, grads, self.lr)

            recon, latents, _ = _evaluate(rows, params)
            history.append(recon)
            if recon < history[best_epoch]:
                best, best_epoch = params, epoch

            dead = np.flatnonzero(~used)
            if dead.size:
                picks = rng.integers(latents.shape[0], size=dead.size)
                codebook = params.codebook.copy()
                codebook[dead] = latents[picks]
                params = params.with_tensors(codebook=codebook)

            CODEC_EPOCHS.inc()
            CODEC_RECON_MSE.set(recon)
            logger.info(
                "codec_epoch",
                epoch=epoch,
                recon_mse=recon,
                used_codes=int(used.sum()),
                reseeded=int(dead.size),
                duration_ms=round((time.perf_counter() - start) * 1000, 2),
            )
            if self.on_epoch is not None:
                self.on_epoch(epoch, recon)

        logger.info(
            "codec_training_finished",
            best_epoch=best_epoch,
            initial_recon_mse=history[0],
            final_recon_mse=history[best_epoch],
        )
        return TrainingResult(params=best, history=history, best_epoch=best_epoch)


def train(
    dataset: Sequence[np.ndarray] | np.ndarray,
    epochs: int,
    lr: float,
    beta: float,
    seed: int,
    **options: int,
) -> CodecParams:
    """Train a codec and return its best parameters."""
    return CodecTrainer(epochs=epochs, lr=lr, beta=beta, seed=seed, **options).fit(dataset).params


def codebook_usage(dataset: Sequence[np.ndarray] | np.ndarray, params: CodecParams) -> float:
    """Fraction of codebook entries selected at least once over ``dataset``."""
    frames = _as_dataset(dataset, params.dtype)
    used = np.unique(code_grids(frames, params))
    return used.size / params.codebook_size


def quantization_error(latents: np.ndarray, codebook: np.ndarray) -> float:
    """Mean squared distance from each latent to its nearest entry."""
    flat = latents.reshape(-1, codebook.shape[1])
    _, quantized = quantize(flat, codebook)
    return float(np.mean(np.sum((flat - quantized) ** 2, axis=1)))


def kmeans_refresh(latents: np.ndarray, codebook: np.ndarray) -> np.ndarray:
    """One k-means step: move every used entry to the mean of its latents."""
    flat = latents.reshape(-1, codebook.shape[1]).astype(np.float64)
    idx = _assign(flat, codebook.astype(np.float64))
    counts = np.bincount(idx, minlength=codebook.shape[0])
    sums = np.zeros((codebook.shape[0], codebook.shape[1]), dtype=np.float64)
    np.add.at(sums, idx, flat)
    refreshed = codebook.astype(np.float64).copy()
    used = counts > 0
    refreshed[used] = sums[used] / counts[used, None]
    return refreshed.astype(codebook.dtype)


def assignment_margin(latents: np.ndarray, codebook: np.ndarray) -> np.ndarray:
    """Gap between the nearest and second-nearest squared distances per latent."""
    dist = np.sort(squared_distances(latents.reshape(-1, codebook.shape[1]), codebook), axis=1)
    if dist.shape[1] < 2:
        return np.full(dist.shape[0], np.inf)
    margin: np.ndarray = dist[:, 1] - dist[:, 0]
    return margin
