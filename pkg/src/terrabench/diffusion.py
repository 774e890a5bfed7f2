"""Text-conditioned denoising diffusion kernels, numerically verified.

Pure-numpy reference implementations of the generative formulation used
for depth synthesis: the variance schedule, forward corruption, reverse
(ancestral) step, the noise-prediction MSE objective, single-head
cross-attention fusion of image/depth latents with text embeddings, and
an analytic Gaussian denoiser that makes the whole loop testable without
training anything. All randomness is supplied by the caller, so every
operation is a pure function.

Tensors follow (batch, channels, height, width); text embeddings follow
(batch, tokens, dim). The latent codec is the identity: a depth map is
triplicated to three channels where a pretrained image autoencoder would
normally sit, which keeps every equation intact while staying at desk
scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .errors import (
    BandMismatch,
    ContractViolation,
    InvalidSchedule,
    ShapeMismatch,
    StepOutOfRange,
)
from .raster import GeoGrid

DEFAULT_T = 1000
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02


@dataclass(frozen=True)
class NoiseSchedule:
    """Variance schedule tables; index t-1 holds step t (t = 1..T)."""

    beta: np.ndarray
    alpha_bar: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        alpha_bar = np.asarray(self.alpha_bar, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha_bar", alpha_bar)
        object.__setattr__(self, "sigma", sigma)
        if not (len(beta) == len(alpha_bar) == len(sigma)) or len(beta) == 0:
            raise InvalidSchedule("schedule tables must be non-empty and equal length")
        if not ((beta > 0) & (beta < 1)).all():
            raise InvalidSchedule("beta values must lie strictly in (0, 1)")
        if not ((alpha_bar > 0) & (alpha_bar < 1)).all():
            raise InvalidSchedule("alpha_bar values must lie strictly in (0, 1)")
        if len(alpha_bar) > 1 and not (np.diff(alpha_bar) < 0).all():
            raise InvalidSchedule("alpha_bar must be strictly decreasing")

    @property
    def T(self) -> int:
        return len(self.beta)

    def at(self, t: int) -> tuple[float, float, float]:
        """(beta_t, alpha_bar_t, sigma_t) for a 1-based step."""
        if not 1 <= t <= self.T:
            raise StepOutOfRange(f"step {t} outside 1..{self.T}")
        return float(self.beta[t - 1]), float(self.alpha_bar[t - 1]), float(self.sigma[t - 1])


def make_schedule(
    T: int = DEFAULT_T,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
    kind: str = "linear",
) -> NoiseSchedule:
    """Linear beta schedule; alpha_bar is the running product of (1 - beta)."""
    if kind != "linear":
        raise InvalidSchedule(f"unknown schedule kind {kind!r}")
    if T < 1:
        raise InvalidSchedule("T must be at least 1")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise InvalidSchedule("need 0 < beta_start <= beta_end < 1")
    beta = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alpha_bar = np.cumprod(1.0 - beta)
    return NoiseSchedule(beta=beta, alpha_bar=alpha_bar, sigma=np.sqrt(beta))


def _check_same_shape(*arrays: np.ndarray) -> None:
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise ShapeMismatch(f"shapes differ: {sorted(shapes)}")


def forward_diffuse(d0: np.ndarray, t: int, eps: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """Corrupt clean data to step t: sqrt(ab_t) * d0 + sqrt(1 - ab_t) * eps."""
    d0 = np.asarray(d0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    _check_same_shape(d0, eps)
    _, alpha_bar, _ = sched.at(t)
    return np.sqrt(alpha_bar) * d0 + np.sqrt(1.0 - alpha_bar) * eps


def reverse_step(
    d_t: np.ndarray,
    t: int,
    eps_hat: np.ndarray,
    sched: NoiseSchedule,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """One ancestral denoising step.

    d_{t-1} = (d_t - beta_t / sqrt(1 - ab_t) * eps_hat) / sqrt(1 - beta_t)
              + sigma_t * z, with z forced to zero at t = 1.
    """
    d_t = np.asarray(d_t, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    _check_same_shape(d_t, eps_hat)
    beta, alpha_bar, sigma = sched.at(t)
    mean = (d_t - beta / np.sqrt(1.0 - alpha_bar) * eps_hat) / np.sqrt(1.0 - beta)
    if t == 1 or noise is None:
        return mean
    noise = np.asarray(noise, dtype=np.float64)
    _check_same_shape(d_t, noise)
    return mean + sigma * noise


def diffusion_loss(eps: np.ndarray, eps_hat: np.ndarray) -> float:
    """Noise-prediction objective: mean squared error over every element."""
    eps = np.asarray(eps, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    _check_same_shape(eps, eps_hat)
    return float(((eps - eps_hat) ** 2).mean())


def diffusion_loss_grad(eps: np.ndarray, eps_hat: np.ndarray) -> np.ndarray:
    """Analytic gradient of :func:`diffusion_loss` w.r.t. eps_hat."""
    eps = np.asarray(eps, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    _check_same_shape(eps, eps_hat)
    return 2.0 * (eps_hat - eps) / eps.size


# ---------------------------------------------------------------------------
# Cross-modal fusion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttentionWeights:
    """Projections for single-head cross-attention.

    w_query: (C, dk) over the concatenated latent channels;
    w_key/w_value: (D, dk)/(D, dv) over the text embedding dim;
    w_output: (dv, C) back to the latent channels.
    """

    w_query: np.ndarray
    w_key: np.ndarray
    w_value: np.ndarray
    w_output: np.ndarray

    def __post_init__(self):
        if self.w_query.ndim != 2 or self.w_key.ndim != 2 or self.w_value.ndim != 2 or self.w_output.ndim != 2:
            raise ShapeMismatch("attention projections must be 2-D matrices")
        if self.w_query.shape[1] != self.w_key.shape[1]:
            raise ShapeMismatch("query and key projections must share the head dim")
        if self.w_value.shape[0] != self.w_key.shape[0]:
            raise ShapeMismatch("key and value projections must share the text dim")
        if self.w_output.shape[0] != self.w_value.shape[1]:
            raise ShapeMismatch("output projection must consume the value dim")

    @classmethod
    def random(cls, channels: int, text_dim: int, head_dim: int, rng) -> "AttentionWeights":
        s = 1.0 / np.sqrt(head_dim)
        return cls(
            w_query=rng.normal(0.0, s, (channels, head_dim)),
            w_key=rng.normal(0.0, s, (text_dim, head_dim)),
            w_value=rng.normal(0.0, s, (text_dim, head_dim)),
            w_output=rng.normal(0.0, s, (head_dim, channels)),
        )


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_attention_fuse(
    z_x: np.ndarray,
    z_d: np.ndarray,
    text_emb: np.ndarray,
    weights: AttentionWeights,
) -> np.ndarray:
    """Fuse image and depth latents with text tokens.

    The latents are channel-concatenated, spatial positions become the
    query sequence, and a single-head scaled dot-product attention reads
    the (B, L, D) text embedding; the result is projected back and
    reshaped to the concatenated latent shape. Each attention row is a
    proper distribution over the L tokens.
    """
    z_x = np.asarray(z_x, dtype=np.float64)
    z_d = np.asarray(z_d, dtype=np.float64)
    text_emb = np.asarray(text_emb, dtype=np.float64)
    if z_x.ndim != 4 or z_d.ndim != 4:
        raise ShapeMismatch("latents must be (batch, channels, height, width)")
    if z_x.shape[0] != z_d.shape[0] or z_x.shape[2:] != z_d.shape[2:]:
        raise ShapeMismatch("latents must share batch and spatial dims")
    if text_emb.ndim != 3 or text_emb.shape[0] != z_x.shape[0]:
        raise ShapeMismatch("text embedding must be (batch, tokens, dim)")
    fused = np.concatenate([z_x, z_d], axis=1)
    b, c, h, w = fused.shape
    if weights.w_query.shape[0] != c:
        raise ShapeMismatch(
            f"query projection expects {weights.w_query.shape[0]} channels, latents have {c}"
        )
    if weights.w_key.shape[0] != text_emb.shape[2]:
        raise ShapeMismatch(
            f"key projection expects dim {weights.w_key.shape[0]}, text has {text_emb.shape[2]}"
        )
    queries = fused.reshape(b, c, h * w).transpose(0, 2, 1)  # (B, HW, C)
    q = queries @ weights.w_query                             # (B, HW, dk)
    k = text_emb @ weights.w_key                              # (B, L, dk)
    v = text_emb @ weights.w_value                            # (B, L, dv)
    scores = q @ k.transpose(0, 2, 1) / np.sqrt(weights.w_query.shape[1])
    attn = _softmax(scores)                                   # (B, HW, L)
    out = (attn @ v) @ weights.w_output                       # (B, HW, C)
    return out.transpose(0, 2, 1).reshape(b, c, h, w)


def cross_attention_fuse_vjp(
    z_x: np.ndarray,
    z_d: np.ndarray,
    text_emb: np.ndarray,
    weights: AttentionWeights,
    upstream: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Hand-derived vector-Jacobian product of :func:`cross_attention_fuse`.

    Given the upstream gradient w.r.t. the fused output, returns the
    gradients w.r.t. (z_x, z_d, text_emb). Verified against central finite
    differences by the verification suite.
    """
    z_x = np.asarray(z_x, dtype=np.float64)
    z_d = np.asarray(z_d, dtype=np.float64)
    text_emb = np.asarray(text_emb, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    fused = np.concatenate([z_x, z_d], axis=1)
    b, c, h, w = fused.shape
    if upstream.shape != fused.shape:
        raise ShapeMismatch("upstream gradient must match the fused output shape")
    dk = weights.w_query.shape[1]
    scale = 1.0 / np.sqrt(dk)

    queries = fused.reshape(b, c, h * w).transpose(0, 2, 1)
    q = queries @ weights.w_query
    k = text_emb @ weights.w_key
    v = text_emb @ weights.w_value
    scores = q @ k.transpose(0, 2, 1) * scale
    attn = _softmax(scores)

    g_out = upstream.reshape(b, c, h * w).transpose(0, 2, 1)      # (B, HW, C)
    g_av = g_out @ weights.w_output.T                              # (B, HW, dv)
    g_attn = g_av @ v.transpose(0, 2, 1)                           # (B, HW, L)
    g_v = attn.transpose(0, 2, 1) @ g_av                           # (B, L, dv)
    # softmax backward: rows are independent distributions
    g_scores = attn * (g_attn - (g_attn * attn).sum(axis=-1, keepdims=True))
    g_q = g_scores @ k * scale                                     # (B, HW, dk)
    g_k = g_scores.transpose(0, 2, 1) @ q * scale                  # (B, L, dk)
    g_queries = g_q @ weights.w_query.T                            # (B, HW, C)
    g_text = g_k @ weights.w_key.T + g_v @ weights.w_value.T       # (B, L, D)
    g_fused = g_queries.transpose(0, 2, 1).reshape(b, c, h, w)
    cx = z_x.shape[1]
    return g_fused[:, :cx], g_fused[:, cx:], g_text


# ---------------------------------------------------------------------------
# Denoiser interface and analytic oracle
# ---------------------------------------------------------------------------


class Denoiser(Protocol):
    """Noise-residual predictor: (z_t, t, text_emb) -> eps_hat, same shape as z_t."""

    def __call__(
        self, z_t: np.ndarray, t: int, text_emb: np.ndarray | None = None
    ) -> np.ndarray: ...


def predict_noise(
    denoiser: Denoiser,
    z_t: np.ndarray,
    t: int,
    text_emb: np.ndarray | None = None,
) -> np.ndarray:
    """Delegate through the denoiser interface, enforcing the shape contract."""
    eps_hat = np.asarray(denoiser(z_t, t, text_emb))
    if eps_hat.shape != np.asarray(z_t).shape:
        raise ContractViolation(
            f"denoiser returned shape {eps_hat.shape}, expected {np.asarray(z_t).shape}"
        )
    return eps_hat


def gaussian_oracle_denoiser(mu: float, s: float, sched: NoiseSchedule) -> Callable:
    """Optimal noise predictor for data distributed N(mu, s^2 I).

    eps_hat(d_t, t) = sqrt(1 - ab_t) * (d_t - sqrt(ab_t) * mu)
                      / (ab_t * s^2 + 1 - ab_t);
    this is the posterior mean of the injected noise, hence the minimizer
    of the MSE objective, which makes it the reference against which the
    sampling loop is verified.
    """
    if s <= 0:
        raise ValueError("oracle standard deviation must be positive")

    def denoiser(d_t: np.ndarray, t: int, text_emb=None) -> np.ndarray:
        _, alpha_bar, _ = sched.at(t)
        num = np.sqrt(1.0 - alpha_bar) * (np.asarray(d_t, dtype=np.float64) - np.sqrt(alpha_bar) * mu)
        return num / (alpha_bar * s * s + 1.0 - alpha_bar)

    return denoiser


def sample(
    denoiser: Denoiser,
    sched: NoiseSchedule,
    shape: tuple[int, ...],
    text_emb: np.ndarray | None = None,
    rng_seed: int = 0,
) -> np.ndarray:
    """Ancestral sampling from pure noise down to step 0 (seeded, deterministic)."""
    rng = np.random.default_rng(rng_seed)
    d = rng.standard_normal(shape)
    for t in range(sched.T, 0, -1):
        eps_hat = predict_noise(denoiser, d, t, text_emb)
        noise = rng.standard_normal(shape) if t > 1 else None
        d = reverse_step(d, t, eps_hat, sched, noise)
    return d


def encode_depth_triplicate(dem: GeoGrid) -> np.ndarray:
    """Lift a single-band depth grid to (1, 3, H, W) by channel triplication.

    The channel mean is the exact inverse.
    """
    if dem.bands != 1:
        raise BandMismatch(f"expected a single-band grid, got {dem.bands}")
    band = dem.band(0)
    return np.repeat(band[np.newaxis, np.newaxis, :, :], 3, axis=1)


def decode_depth_triplicate(latent: np.ndarray) -> np.ndarray:
    """Inverse of :func:`encode_depth_triplicate` (mean over channels).

    The mean is computed as a + ((b-a) + (c-a))/3 so identical channels
    decode bit-exactly to the original band.
    """
    latent = np.asarray(latent)
    if latent.ndim != 4 or latent.shape[1] != 3:
        raise ShapeMismatch("expected a (B, 3, H, W) latent")
    a = latent[:, 0].astype(np.float64)
    b = latent[:, 1].astype(np.float64)
    c = latent[:, 2].astype(np.float64)
    return (a + ((b - a) + (c - a)) / 3.0).astype(latent.dtype)


def seeded_text_embedding(batch: int, tokens: int, dim: int, seed: int = 0) -> np.ndarray:
    """Deterministic stand-in for a pretrained text encoder: (B, L, D) from a seed."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((batch, tokens, dim))
