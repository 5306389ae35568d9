"""Two-phase amplify-and-forward relay channel.

Broadcast phase: the source sends sqrt(pi1*P) z to the N relays, z = V x.
Cooperation phase: relay j scales and forwards B_j r_j (conjugating first
when j is in S), and the destination's N_D antennas observe

    Y = sqrt(rho) X(x) H + U,   rho = pi1*pi2*P^2 / (pi1*P + 1),

with H = diag(fbar) Gmat and U colored by the forwarded relay noise. The
module provides the physical simulation, the exact noise covariance and its
whitening transform, and the real-valued equivalent model y' = G' x + u'.

Realification convention: rvec(A) stacks vec(Re A) over vec(Im A) with
column-major vec, matching the block form Gamma = 1/2 [[Re, -Im], [Im, Re]]
of the realified covariance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .construct import DstbcCode, rate_cspcu
from .design import LinearDesign

__all__ = [
    "ChannelRealization",
    "PowerConfig",
    "NoiseModel",
    "draw_realization",
    "draw_cn",
    "rvec",
    "effective_channel",
    "noise_covariance",
    "simulate_transmission",
    "equivalent_real_channel",
    "whiten",
    "noise_bound",
]

_POWER_TOL = 1e-9
_EIG_CLAMP = 1e-12


def draw_cn(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly symmetric complex Gaussian, unit variance per entry."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


def rvec(a: np.ndarray) -> np.ndarray:
    """Stack vec(Re a) over vec(Im a), column-major."""
    flat = np.asarray(a).reshape(-1, order="F")
    return np.concatenate([flat.real, flat.imag])


@dataclass(frozen=True)
class ChannelRealization:
    """Source-to-relay gains f (N,) and relay-to-destination gains Gmat (N, N_D)."""

    f: np.ndarray
    Gmat: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.f, dtype=complex).reshape(-1)
        g = np.asarray(self.Gmat, dtype=complex)
        if g.ndim != 2 or g.shape[0] != f.shape[0]:
            raise ValueError("Gmat must be (N, N_D) with N matching f")
        f.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "Gmat", g)

    @property
    def N(self) -> int:
        return self.f.shape[0]

    @property
    def n_dest(self) -> int:
        return self.Gmat.shape[1]


def draw_realization(rng: np.random.Generator, n_relays: int, n_dest: int) -> ChannelRealization:
    return ChannelRealization(draw_cn(rng, n_relays), draw_cn(rng, (n_relays, n_dest)))


@dataclass(frozen=True)
class PowerConfig:
    """Total network power P and the phase split (pi1, pi2)."""

    P: float
    pi1: float
    pi2: float

    @property
    def rho(self) -> float:
        return self.pi1 * self.pi2 * self.P**2 / (self.pi1 * self.P + 1.0)

    @property
    def relay_gain(self) -> float:
        """Per-relay forwarding power scale pi2*P/(pi1*P + 1)."""
        return self.pi2 * self.P / (self.pi1 * self.P + 1.0)

    @classmethod
    def balanced(cls, code: DstbcCode, P: float, pi1: float = 1.0) -> "PowerConfig":
        """Split satisfying pi1*T1 + pi2*R*T2 = T1 + T2; pi1 = 1 gives pi2 = 1/R."""
        r = rate_cspcu(code)
        t1, t2 = code.T1, code.T2
        pi2 = (t1 + t2 - pi1 * t1) / (float(r) * t2)
        cfg = cls(P, pi1, pi2)
        if not cfg.satisfies_constraint(code):
            raise ValueError("power split violates the phase-power constraint")
        return cfg

    def satisfies_constraint(self, code: DstbcCode) -> bool:
        r = float(rate_cspcu(code))
        lhs = self.pi1 * code.T1 + self.pi2 * r * code.T2
        return abs(lhs - (code.T1 + code.T2)) <= _POWER_TOL * (code.T1 + code.T2)


def effective_channel(code: DstbcCode, realization: ChannelRealization) -> np.ndarray:
    """H = diag(fbar) Gmat, with f conjugated on the relays in S."""
    if realization.N != code.N:
        raise ValueError(f"realization has {realization.N} relays, code has {code.N}")
    if code.relay_form is None:
        raise ValueError("code has no relay form")
    fbar = realization.f.copy()
    s_idx = sorted(code.relay_form.S)
    fbar[s_idx] = fbar[s_idx].conj()
    return fbar[:, None] * realization.Gmat


@dataclass(frozen=True)
class NoiseModel:
    """Colored destination noise: complex covariance, realified covariance,
    and the symmetric whitening matrix (inverse square root)."""

    gamma_c: np.ndarray
    gamma: np.ndarray
    whitener: np.ndarray

    @property
    def dim(self) -> int:
        return self.gamma.shape[0]


def _realify_cov(gamma_c: np.ndarray) -> np.ndarray:
    re, im = gamma_c.real, gamma_c.imag
    return 0.5 * np.block([[re, -im], [im, re]])


def _inv_sqrt_sym(mat: np.ndarray, clamp: float = _EIG_CLAMP) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    w = np.maximum(w, clamp)
    return (v / np.sqrt(w)) @ v.T


def noise_covariance(
    code: DstbcCode, realization: ChannelRealization, power: PowerConfig
) -> NoiseModel:
    """Exact covariance of the realified total noise rvec(U).

    Block (l1, l2) of the complex covariance is
    relay_gain * sum_j g[j,l1] conj(g[j,l2]) Bbar_j Bbar_j^H + 1{l1=l2} I.
    """
    if code.relay_form is None:
        raise ValueError("code has no relay form")
    form = code.relay_form
    t2, nd = code.T2, realization.n_dest
    g = realization.Gmat
    bbh = np.empty((code.N, t2, t2), dtype=complex)
    for j in range(code.N):
        b = form.relay_matrix(j)
        bbh[j] = b @ b.conj().T
    coef = power.relay_gain * (g[:, :, None] * g.conj()[:, None, :])  # (N, ND, ND)
    gamma_c = np.einsum("jlm,jab->lamb", coef, bbh).reshape(nd * t2, nd * t2)
    gamma_c = gamma_c + np.eye(nd * t2)
    gamma = _realify_cov(gamma_c)
    mineig = float(np.linalg.eigvalsh(gamma)[0])
    if mineig < -1e-10:
        raise ArithmeticError(f"noise covariance not PSD (min eigenvalue {mineig:g})")
    return NoiseModel(gamma_c, gamma, _inv_sqrt_sym(gamma))


def simulate_transmission(
    code: DstbcCode,
    x: np.ndarray,
    realization: ChannelRealization,
    power: PowerConfig,
    rng: np.random.Generator,
    relay_noise: bool = True,
    dest_noise: bool = True,
) -> np.ndarray:
    """Run the physical two-phase pipeline, returning the T2 x N_D matrix Y.

    Noise draws always consume the same rng stream; the flags only zero the
    injected noise, so noisy/noiseless runs stay draw-aligned.
    """
    if code.relay_form is None:
        raise ValueError("code has no relay form; cannot simulate")
    form = code.relay_form
    t1, t2, n = form.T1, code.T2, code.N
    nd = realization.n_dest
    x = np.asarray(x, dtype=float)
    z = form.V @ x
    v = draw_cn(rng, (n, t1))
    w = draw_cn(rng, (t2, nd))
    if not relay_noise:
        v = np.zeros_like(v)
    if not dest_noise:
        w = np.zeros_like(w)
    amp1 = np.sqrt(power.pi1 * power.P)
    amp2 = np.sqrt(power.relay_gain)
    y = w.astype(complex)
    for j in range(n):
        r_j = realization.f[j] * amp1 * z + v[j]
        if j in form.S:
            r_j = r_j.conj()
        t_j = amp2 * (form.relay_matrix(j) @ r_j)
        y += realization.Gmat[j][None, :] * t_j[:, None]
    return y


def equivalent_real_channel(design: LinearDesign, h: np.ndarray, rho: float) -> np.ndarray:
    """Real 2*N_D*T2 x K matrix with columns sqrt(rho) rvec(A_i H)."""
    h = np.asarray(h, dtype=complex)
    if h.shape[0] != design.N:
        raise ValueError(f"H must have {design.N} rows, got {h.shape}")
    cols = [np.sqrt(rho) * rvec(design.weights[i] @ h) for i in range(design.K)]
    return np.stack(cols, axis=1)


def whiten(noise: NoiseModel, gprime: np.ndarray, yprime: np.ndarray):
    """Apply the inverse square root of the noise covariance to both."""
    return noise.whitener @ gprime, noise.whitener @ yprime


def noise_bound(code: DstbcCode, realization: ChannelRealization, power: PowerConfig) -> dict:
    """Trace/eigenvalue bound on the realified covariance.

    alpha = T2*N_D + beta * relay_gain * sum |g|^2 with beta the largest
    squared Frobenius norm among the relay matrices; both the trace and the
    largest eigenvalue of Gamma stay below alpha.
    """
    model = noise_covariance(code, realization, power)
    form = code.relay_form
    beta = max(float(np.linalg.norm(form.relay_matrix(j)) ** 2) for j in range(code.N))
    alpha = code.T2 * realization.n_dest + beta * power.relay_gain * float(
        np.sum(np.abs(realization.Gmat) ** 2)
    )
    trace = float(np.trace(model.gamma))
    lam_max = float(np.linalg.eigvalsh(model.gamma)[-1])
    return {
        "trace": trace,
        "lam_max": lam_max,
        "alpha": alpha,
        "passed": trace <= alpha * (1 + 1e-12) and lam_max <= alpha * (1 + 1e-12),
    }
