"""Small-scale fading and AP oscillator phases for one coherence block."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import LargeScaleModel
from .mathcore import sample_complex_gaussian

__all__ = [
    "ChannelBlock",
    "DimensionMismatch",
    "PhaseConfig",
    "PhaseProcess",
    "draw_block",
    "draw_phases",
    "effective_channel",
    "effective_gains",
]


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class PhaseConfig:
    """How AP oscillator phases evolve.

    ``mode`` is ``"static"`` (one uniform phase per AP per block) or
    ``"wiener"`` (uniform start, Gaussian increments of ``increment_std``
    rad per sample). ``sync`` forces all phases to zero.
    """

    mode: str = "static"
    increment_std: float = 0.0
    sync: bool = False

    def __post_init__(self):
        if self.mode not in ("static", "wiener"):
            raise ValueError(f"unknown phase mode {self.mode!r}")
        if self.increment_std < 0:
            raise ValueError("increment_std must be non-negative")


@dataclass(frozen=True)
class PhaseProcess:
    mode: str
    increment_std: float
    theta: np.ndarray  # (L, n_samples), radians

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.theta == self.theta[:, :1]))

    def rotation(self) -> np.ndarray:
        """``exp(-j theta)``: the factor each AP's DL signal picks up
        through ``g^H = exp(-j theta) h^H``."""
        return np.exp(-1j * self.theta)


@dataclass(frozen=True)
class ChannelBlock:
    h: np.ndarray  # (K, L, N)
    phases: PhaseProcess
    block_index: int = 0

    @property
    def g(self) -> np.ndarray:
        """Phase-corrupted channel at the first data sample, (K, L, N)."""
        return np.exp(1j * self.phases.theta[None, :, 0, None]) * self.h


def draw_phases(L: int, n_samples: int, cfg: PhaseConfig, rng) -> PhaseProcess:
    if cfg.sync:
        return PhaseProcess(cfg.mode, cfg.increment_std, np.zeros((L, n_samples)))
    theta0 = rng.uniform(0.0, 2 * np.pi, size=L)
    if cfg.mode == "static" or cfg.increment_std == 0 or n_samples == 1:
        theta = np.repeat(theta0[:, None], n_samples, axis=1)
    else:
        steps = rng.normal(0.0, cfg.increment_std, size=(L, n_samples - 1))
        theta = theta0[:, None] + np.concatenate(
            [np.zeros((L, 1)), np.cumsum(steps, axis=1)], axis=1)
    return PhaseProcess(cfg.mode, cfg.increment_std, theta)


def draw_block(large_scale: LargeScaleModel, phase_cfg: PhaseConfig, rng, *,
               n_samples: int = 1, block_index: int = 0,
               phase_rng=None) -> ChannelBlock:
    """Draw ``h[k, l] ~ CN(0, R[k, l])`` and a phase trajectory.

    ``phase_rng`` lets callers keep fading and phases on separate streams
    so that toggling ``sync`` leaves the fading draws untouched.
    """
    h = sample_complex_gaussian(large_scale.R, rng, sqrt_R=large_scale.sqrt_R)
    phases = draw_phases(large_scale.L, n_samples, phase_cfg,
                         rng if phase_rng is None else phase_rng)
    return ChannelBlock(h=h, phases=phases, block_index=block_index)


def effective_channel(g, w, a: float = 1.0) -> complex:
    """Scalar ``a * g^H w`` seen by a UE from one AP."""
    g = np.asarray(g)
    w = np.asarray(w)
    if g.shape != w.shape:
        raise DimensionMismatch(f"channel {g.shape} vs precoder {w.shape}")
    return complex(a * np.vdot(g, w))


def effective_gains(h: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Phase-free gains ``G[k, i, l] = h[k, l]^H w[i, l]``.

    ``w`` is (K, L, N) with zeros where AP ``l`` does not serve UE ``i``,
    so the association factor is already folded in.
    """
    if h.shape != w.shape:
        raise DimensionMismatch(f"channels {h.shape} vs precoders {w.shape}")
    return np.einsum("kln,iln->kil", np.conj(h), w)
