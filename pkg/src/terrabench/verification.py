"""Self-contained verification suite for the diffusion kernels.

Every check pits the vectorized implementation against an independent
route: Monte-Carlo statistics with known closed forms, a deliberately
naive loop-based attention evaluator, and central finite differences for
the hand-derived gradients. The suite is seeded and emits a plain dict,
so reports are byte-identical across runs with the same seed.
"""

from __future__ import annotations

import math

import numpy as np

from .diffusion import (
    AttentionWeights,
    cross_attention_fuse,
    cross_attention_fuse_vjp,
    diffusion_loss,
    diffusion_loss_grad,
    forward_diffuse,
    gaussian_oracle_denoiser,
    make_schedule,
    sample,
)

VARIANCE_DRAWS = 100_000
SAMPLING_DRAWS = 10_000
MEAN_TOLERANCE = 0.02       # relative
STD_TOLERANCE = 0.05        # relative
ATTENTION_TOLERANCE = 1e-10
GRADIENT_TOLERANCE = 1e-4
FD_STEP = 1e-5


def attention_oracle(z_x, z_d, text_emb, weights: AttentionWeights) -> np.ndarray:
    """Brute-force cross-attention: explicit loops over batch, position, token.

    Kept deliberately scalar so it shares nothing with the vectorized path.
    """
    z_x = np.asarray(z_x, dtype=np.float64)
    z_d = np.asarray(z_d, dtype=np.float64)
    text_emb = np.asarray(text_emb, dtype=np.float64)
    b, cx, h, w = z_x.shape
    cd = z_d.shape[1]
    c = cx + cd
    length = text_emb.shape[1]
    dk = weights.w_query.shape[1]
    dv = weights.w_value.shape[1]
    out = np.zeros((b, c, h, w))
    for bi in range(b):
        for r in range(h):
            for col in range(w):
                query_vec = [0.0] * c
                for ch in range(c):
                    query_vec[ch] = z_x[bi, ch, r, col] if ch < cx else z_d[bi, ch - cx, r, col]
                q = [sum(query_vec[i] * weights.w_query[i, j] for i in range(c)) for j in range(dk)]
                scores = []
                for tok in range(length):
                    k = [
                        sum(text_emb[bi, tok, i] * weights.w_key[i, j] for i in range(text_emb.shape[2]))
                        for j in range(dk)
                    ]
                    scores.append(sum(q[j] * k[j] for j in range(dk)) / math.sqrt(dk))
                m = max(scores)
                exps = [math.exp(s - m) for s in scores]
                z = sum(exps)
                probs = [e / z for e in exps]
                attended = [0.0] * dv
                for tok in range(length):
                    vv = [
                        sum(text_emb[bi, tok, i] * weights.w_value[i, j] for i in range(text_emb.shape[2]))
                        for j in range(dv)
                    ]
                    for j in range(dv):
                        attended[j] += probs[tok] * vv[j]
                for ch in range(c):
                    out[bi, ch, r, col] = sum(attended[j] * weights.w_output[j, ch] for j in range(dv))
    return out


def check_variance_preservation(seed: int) -> dict:
    """Forward corruption of unit-variance data keeps unit variance at any t."""
    rng = np.random.default_rng(seed)
    sched = make_schedule()
    results = []
    ok = True
    bound = 3.0 * math.sqrt(2.0 / (VARIANCE_DRAWS - 1))
    for t in (1, 250, 500, 1000):
        d0 = rng.standard_normal(VARIANCE_DRAWS)
        eps = rng.standard_normal(VARIANCE_DRAWS)
        dt = forward_diffuse(d0, t, eps, sched)
        var = float(dt.var(ddof=1))
        within = abs(var - 1.0) <= bound
        ok &= within
        results.append({"t": t, "variance": var, "bound": bound, "pass": within})
    return {"pass": bool(ok), "cases": results}


def check_perfect_denoiser_loss(seed: int) -> dict:
    """The objective is exactly zero when the predictor returns the true noise."""
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((2, 3, 8, 8))
    loss = diffusion_loss(eps, eps)
    return {"pass": loss == 0.0, "loss": loss}


def check_sampling_moments(seed: int) -> dict:
    """Ancestral sampling with the analytic oracle recovers N(mu, s^2) moments."""
    mu, s = 3.0, 0.5
    sched = make_schedule()
    denoiser = gaussian_oracle_denoiser(mu, s, sched)
    draws = sample(denoiser, sched, (SAMPLING_DRAWS,), rng_seed=seed)
    mean = float(draws.mean())
    std = float(draws.std(ddof=1))
    mean_err = abs(mean - mu) / abs(mu)
    std_err = abs(std - s) / s
    ok = mean_err <= MEAN_TOLERANCE and std_err <= STD_TOLERANCE
    return {
        "pass": bool(ok),
        "target_mean": mu,
        "target_std": s,
        "mean": mean,
        "std": std,
        "mean_rel_err": mean_err,
        "std_rel_err": std_err,
    }


def check_attention_oracle(seed: int) -> dict:
    """Vectorized fusion equals the loop oracle on small random instances."""
    rng = np.random.default_rng(seed)
    cases = []
    ok = True
    for b, cx, cd, h, w, length, dim, dk in ((1, 1, 1, 2, 2, 3, 4, 4), (2, 2, 1, 2, 3, 1, 5, 3), (1, 2, 2, 3, 2, 4, 3, 2)):
        z_x = rng.standard_normal((b, cx, h, w))
        z_d = rng.standard_normal((b, cd, h, w))
        text = rng.standard_normal((b, length, dim))
        weights = AttentionWeights.random(cx + cd, dim, dk, rng)
        fast = cross_attention_fuse(z_x, z_d, text, weights)
        slow = attention_oracle(z_x, z_d, text, weights)
        err = float(np.abs(fast - slow).max())
        within = err <= ATTENTION_TOLERANCE
        ok &= within
        cases.append({"shape": [b, cx + cd, h, w], "tokens": length, "max_abs_err": err, "pass": within})
    return {"pass": bool(ok), "cases": cases}


def _rel_err(fd: np.ndarray, analytic: np.ndarray) -> float:
    denom = max(float(np.linalg.norm(analytic)), 1e-12)
    return float(np.linalg.norm(fd - analytic)) / denom


def check_gradients(seed: int) -> dict:
    """Central finite differences vs hand-derived gradients."""
    rng = np.random.default_rng(seed)

    eps = rng.standard_normal((2, 1, 3, 3))
    eps_hat = rng.standard_normal((2, 1, 3, 3))
    analytic = diffusion_loss_grad(eps, eps_hat)
    fd = np.zeros_like(eps_hat)
    flat = eps_hat.reshape(-1)
    for i in range(flat.size):
        bump = np.zeros_like(flat)
        bump[i] = FD_STEP
        up = diffusion_loss(eps, (flat + bump).reshape(eps_hat.shape))
        down = diffusion_loss(eps, (flat - bump).reshape(eps_hat.shape))
        fd.reshape(-1)[i] = (up - down) / (2.0 * FD_STEP)
    loss_err = _rel_err(fd, analytic)

    b, cx, cd, h, w, length, dim, dk = 1, 1, 1, 2, 2, 3, 4, 3
    z_x = rng.standard_normal((b, cx, h, w))
    z_d = rng.standard_normal((b, cd, h, w))
    text = rng.standard_normal((b, length, dim))
    weights = AttentionWeights.random(cx + cd, dim, dk, rng)
    probe = rng.standard_normal((b, cx + cd, h, w))

    def scalar(zx, zd, tx):
        return float((cross_attention_fuse(zx, zd, tx, weights) * probe).sum())

    g_zx, g_zd, g_text = cross_attention_fuse_vjp(z_x, z_d, text, weights, probe)
    attn_errs = []
    for target, grad, apply in (
        (z_x, g_zx, lambda arr: scalar(arr, z_d, text)),
        (z_d, g_zd, lambda arr: scalar(z_x, arr, text)),
        (text, g_text, lambda arr: scalar(z_x, z_d, arr)),
    ):
        fd = np.zeros_like(target)
        flat = target.reshape(-1)
        for i in range(flat.size):
            bump = np.zeros_like(flat)
            bump[i] = FD_STEP
            up = apply((flat + bump).reshape(target.shape))
            down = apply((flat - bump).reshape(target.shape))
            fd.reshape(-1)[i] = (up - down) / (2.0 * FD_STEP)
        attn_errs.append(_rel_err(fd, grad))

    worst = max([loss_err] + attn_errs)
    return {
        "pass": worst <= GRADIENT_TOLERANCE,
        "loss_grad_rel_err": loss_err,
        "attention_grad_rel_err": {"z_x": attn_errs[0], "z_d": attn_errs[1], "text": attn_errs[2]},
        "tolerance": GRADIENT_TOLERANCE,
    }


def run_verification(seed: int = 0) -> dict:
    """Run the full suite; returns a JSON-ready report."""
    checks = {
        "variance_preservation": check_variance_preservation(seed),
        "perfect_denoiser_loss": check_perfect_denoiser_loss(seed + 1),
        "sampling_moments": check_sampling_moments(seed + 2),
        "attention_vs_oracle": check_attention_oracle(seed + 3),
        "gradient_checks": check_gradients(seed + 4),
    }
    return {
        "seed": seed,
        "passed": bool(all(c["pass"] for c in checks.values())),
        "checks": checks,
    }
