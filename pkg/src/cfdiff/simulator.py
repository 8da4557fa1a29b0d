"""Monte Carlo orchestration: setups, coherence blocks, BER and SE.

Random streams are addressed by ``(seed, (setup, block, purpose))`` so a
result never depends on how setups are scheduled across workers, and
schemes run with the same seed see the same layouts, fading and noise.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .access import LmmseEstimator, ServingMap, assign_pilots_and_cluster
from .channel import DimensionMismatch, PhaseConfig, draw_phases, effective_gains
from .config import SimConfig
from .diffcoding import (DESIGNS, PskConstellation, StbcDesign, coherent_psk_detect,
                         diff_encode_chain, dpsk_encode_chain, dpsk_ml_decode,
                         dstbc_ml_decode_fast)
from .geometry import LargeScaleModel, build_large_scale, drop_topology
from .mathcore import RandomStream, sample_complex_gaussian, standard_complex_normal
from .precoding import (allocate_power_centralized, allocate_power_distributed, lp_mmse,
                        normalization_scale, p_mmse)

__all__ = [
    "FrameMisalignment",
    "SetupContext",
    "SetupResult",
    "SimResult",
    "block_decisions",
    "prelog_factor",
    "prepare_setup",
    "run_campaign",
    "run_setup",
    "synthesize_coherent",
    "synthesize_dstbc_block",
]

log = logging.getLogger(__name__)

# stream purposes
TOPOLOGY, SHADOWING, NORM_FADING, NORM_PILOT, FADING, PHASE, PILOT_NOISE, PAYLOAD, DL_NOISE = range(9)


class FrameMisalignment(ValueError):
    pass


def prelog_factor(cfg: SimConfig) -> float:
    """Fraction of each coherence block that carries new data."""
    if cfg.scheme == "dstbc":
        d = DESIGNS[cfg.design_name]
        G = cfg.tau_d // d.P
        return (G - 1) * d.n_s / cfg.tau_c
    if cfg.scheme == "dpsk":
        return (cfg.tau_d - 1) / cfg.tau_c
    return cfg.tau_d / cfg.tau_c


# ---------------------------------------------------------------------------
# received-signal synthesis

def _rotations(theta: np.ndarray) -> np.ndarray:
    return np.exp(-1j * np.asarray(theta))


def synthesize_coherent(h, w, symbols, theta, noise=None) -> np.ndarray:
    """Per-sample received signals for symbol-by-symbol transmission.

    ``y[k, p] = sum_l sum_i exp(-j theta[l, p]) h[k, l]^H w[i, l] x[i, p] + n[k, p]``

    Parameters
    ----------
    h, w : (K, L, N)
        True channels and (association-masked) precoders.
    symbols : (K, n)
        Unit-modulus transmit samples (PSK symbols or DPSK chain values).
    theta : (L,) or (L, n)
        AP phases, constant or per sample. Zero means synchronized.
    noise : (K, n), optional
    """
    h = np.asarray(h)
    w = np.asarray(w)
    x = np.asarray(symbols)
    if x.shape[0] != h.shape[0]:
        raise DimensionMismatch(f"{x.shape[0]} symbol streams for {h.shape[0]} UEs")
    G = effective_gains(h, w)     # (K, K, L)
    rot = _rotations(theta)
    if rot.ndim == 1:
        y = np.einsum("kil,l->ki", G, rot) @ x
    else:
        if rot.shape[1] != x.shape[1]:
            raise DimensionMismatch("phase trajectory and symbol stream lengths differ")
        y = np.einsum("kil,lp,ip->kp", G, rot, x)
    return y if noise is None else y + noise


def synthesize_dstbc_block(h, w, C, clusters, theta, noise=None) -> np.ndarray:
    """Received DSTBC codewords for all UEs.

    UE ``i``'s row ``r`` is sent by AP ``clusters[i, r]`` with precoder
    ``w[i, clusters[i, r]]``, so each UE hears

    ``y[k, t] = sum_i sum_r exp(-j theta) h[k, l]^H w[i, l] C[i, t, r, :]``,
    ``l = clusters[i, r]``, plus noise. ``i = k`` is the desired term and the
    rest is the interference of the other UEs' own chains and row maps.

    Parameters
    ----------
    C : (K, T, n_t, P)
        Transmitted differential matrices per UE and codeword.
    clusters : (K, n_t)
    theta : (L,) or (L, T * P)
    noise : (K, T, P), optional
    """
    h = np.asarray(h)
    C = np.asarray(C)
    K, T, n_t, P = C.shape
    clusters = np.asarray(clusters)
    if clusters.shape != (K, n_t):
        raise FrameMisalignment(f"row map {clusters.shape} does not match codewords {C.shape}")
    G = effective_gains(h, w)                              # (K, K, L)
    Gr = G[:, np.arange(K)[:, None], clusters]            # (K, K, n_t): AP of row r of UE i
    rot = _rotations(theta)
    if rot.ndim == 1:
        F = Gr * rot[clusters][None]
        y = np.einsum("kir,itrp->ktp", F, C)
    else:
        if rot.shape[1] < T * P:
            raise FrameMisalignment("phase trajectory shorter than the codeword frame")
        rot_t = rot[:, :T * P].reshape(rot.shape[0], T, P)[clusters]   # (K, n_t, T, P)
        y = np.einsum("kir,irtp,itrp->ktp", Gr, rot_t, C)
    return y if noise is None else y + noise


# ---------------------------------------------------------------------------
# setup-level state

@dataclass(eq=False)
class SetupContext:
    cfg: SimConfig
    setup: int
    large_scale: LargeScaleModel
    serving: ServingMap
    estimator: LmmseEstimator
    rho: np.ndarray
    scale: np.ndarray
    constellation: PskConstellation
    design: StbcDesign | None

    @property
    def p_ul(self) -> float:
        return self.cfg.p_ul_mw * 1e-3

    def stream(self, block: int, purpose: int) -> RandomStream:
        return RandomStream(self.cfg.seed, (self.setup, block, purpose))

    def unnormalized_precoders(self, h_hat_est) -> np.ndarray:
        fn = p_mmse if self.cfg.processing == "centralized" else lp_mmse
        return fn(h_hat_est, self.serving, self.p_ul, self.large_scale.noise_power)


def prepare_setup(cfg: SimConfig, setup: int) -> SetupContext:
    """Layout, large-scale model, serving map, estimator and power scaling."""
    topo_rng = RandomStream(cfg.seed, (setup, 0, TOPOLOGY))
    topo = drop_topology(cfg.L, cfg.K, cfg.side_m, cfg.h_ap_m, cfg.h_ue_m, topo_rng)
    ls = build_large_scale(
        topo, RandomStream(cfg.seed, (setup, 0, SHADOWING)), N=cfg.N, fc=cfg.fc_ghz,
        bandwidth_hz=cfg.bandwidth_mhz * 1e6, noise_figure_db=cfg.noise_figure_db,
        sigma_sf=cfg.sigma_sf_db, asd_deg=cfg.asd_deg, spacing=cfg.antenna_spacing,
        decorr_distance=cfg.shadow_decorr_m)
    serving = assign_pilots_and_cluster(ls, cfg.tau_p, cfg.L_k)
    p_ul = cfg.p_ul_mw * 1e-3
    estimator = LmmseEstimator(ls, serving.pilot, cfg.tau_p, p_ul)
    rho_d = cfg.rho_d_mw * 1e-3
    if cfg.processing == "centralized":
        rho = allocate_power_centralized(ls.beta, serving, rho_d, cfg.upsilon)
    else:
        rho = allocate_power_distributed(ls.beta, serving, rho_d)
    design = DESIGNS[cfg.design_name] if cfg.scheme == "dstbc" else None
    ctx = SetupContext(cfg=cfg, setup=setup, large_scale=ls, serving=serving,
                       estimator=estimator, rho=rho, scale=np.zeros_like(rho),
                       constellation=PskConstellation(cfg.M_o), design=design)

    # precoder normalization batch on its own streams
    batch = np.empty((cfg.norm_batch, cfg.K, cfg.L, cfg.N), dtype=np.complex128)
    for b in range(cfg.norm_batch):
        h = sample_complex_gaussian(ls.R, RandomStream(cfg.seed, (setup, b, NORM_FADING)),
                                    sqrt_R=ls.sqrt_R)
        y = estimator.observe(h, RandomStream(cfg.seed, (setup, b, NORM_PILOT)))
        batch[b] = ctx.unnormalized_precoders(estimator.estimate(y))
    ctx.scale = normalization_scale(batch, rho)
    return ctx


# ---------------------------------------------------------------------------
# one coherence block

@dataclass
class BlockOutcome:
    sent: np.ndarray      # (K, n) symbol indices
    decided: np.ndarray   # (K, n)
    bit_errors: np.ndarray  # (K,)
    bits: int              # per UE


def block_decisions(ctx: SetupContext, block: int, *, sync: bool | None = None,
                    noise_scale: float = 1.0) -> BlockOutcome:
    """Simulate one coherence block end to end and return the decisions.

    ``sync`` overrides the scheme's phase behaviour (``None`` keeps it:
    zero phases for coherent-sync or ``force_sync``, random otherwise).
    ``noise_scale`` multiplies the downlink receiver noise amplitude (the
    same draw is reused, so 0 gives the noiseless counterpart of a block).
    """
    cfg = ctx.cfg
    ls = ctx.large_scale
    const = ctx.constellation
    if sync is None:
        sync = cfg.scheme == "coherent-sync" or cfg.force_sync
    h = sample_complex_gaussian(ls.R, ctx.stream(block, FADING), sqrt_R=ls.sqrt_R)
    y_pilot = ctx.estimator.observe(h, ctx.stream(block, PILOT_NOISE))
    wbar = ctx.unnormalized_precoders(ctx.estimator.estimate(y_pilot))
    w = wbar * ctx.scale[..., None]

    phases = draw_phases(cfg.L, cfg.tau_d,
                         PhaseConfig(cfg.phase_mode, cfg.increment_std, sync),
                         ctx.stream(block, PHASE))
    theta = phases.theta[:, 0] if phases.is_constant else phases.theta
    payload_rng = ctx.stream(block, PAYLOAD)
    noise_rng = ctx.stream(block, DL_NOISE)
    sigma = noise_scale * np.sqrt(ls.noise_power)
    K = cfg.K
    b = const.bits_per_symbol

    if cfg.scheme == "dstbc":
        d = ctx.design
        G = cfg.tau_d // d.P
        n_data = (G - 1) * d.n_s
        bits = payload_rng.integers(0, 2, size=(K, n_data * b))
        sent = const.bits_to_indices(bits)
        X = d.map(const.points[sent.reshape(K, G - 1, d.n_s)])
        C = diff_encode_chain(X)                                   # (K, G, n_t, P)
        noise = sigma * standard_complex_normal(noise_rng, (K, G, d.P))
        y = synthesize_dstbc_block(h, w, C, ctx.serving.clusters, theta, noise)
        decided = dstbc_ml_decode_fast(y[:, 1:], y[:, :-1], d, const).reshape(K, n_data)
    else:
        n_data = cfg.tau_d - 1 if cfg.scheme == "dpsk" else cfg.tau_d
        bits = payload_rng.integers(0, 2, size=(K, n_data * b))
        sent = const.bits_to_indices(bits)
        tx = dpsk_encode_chain(sent, const.order) if cfg.scheme == "dpsk" else sent
        noise = sigma * standard_complex_normal(noise_rng, tx.shape)
        if theta.ndim == 2:
            theta = theta[:, :tx.shape[1]]
        y = synthesize_coherent(h, w, const.points[tx], theta, noise)
        if cfg.scheme == "dpsk":
            decided = dpsk_ml_decode(y[:, 1:], y[:, :-1], const)
        else:
            decided = coherent_psk_detect(y, const)
    errors = const.bit_errors(sent, decided).sum(axis=1)
    return BlockOutcome(sent=sent, decided=decided, bit_errors=errors, bits=n_data * b)


# ---------------------------------------------------------------------------
# setups and campaigns

@dataclass
class SetupResult:
    setup: int
    bits: np.ndarray    # (K,)
    errors: np.ndarray  # (K,)
    prelog: float
    bits_per_symbol: int

    @property
    def ber(self) -> np.ndarray:
        return self.errors / self.bits

    @property
    def se(self) -> np.ndarray:
        return self.prelog * self.bits_per_symbol * (1.0 - self.ber)


def run_setup(cfg: SimConfig, setup: int) -> SetupResult:
    ctx = prepare_setup(cfg, setup)
    errors = np.zeros(cfg.K, dtype=np.int64)
    bits = np.zeros(cfg.K, dtype=np.int64)
    for block in range(cfg.blocks):
        out = block_decisions(ctx, block)
        errors += out.bit_errors
        bits += out.bits
    return SetupResult(setup=setup, bits=bits, errors=errors, prelog=prelog_factor(cfg),
                       bits_per_symbol=ctx.constellation.bits_per_symbol)


def _run_setup_args(args):
    return run_setup(*args)


@dataclass
class SimResult:
    config: SimConfig
    setups: list = field(default_factory=list)
    version: str = __version__

    @property
    def scheme(self) -> str:
        return self.config.scheme

    @property
    def precoder(self) -> str:
        return self.config.precoder

    def rows(self):
        """One dict per (setup, ue) in setup-then-UE order."""
        for r in self.setups:
            ber, se = r.ber, r.se
            for k in range(r.bits.size):
                yield {"setup": r.setup, "ue": k, "scheme": self.scheme,
                       "precoder": self.precoder, "ber": float(ber[k]), "se": float(se[k]),
                       "bits": int(r.bits[k]), "errors": int(r.errors[k])}

    @property
    def ber(self) -> np.ndarray:
        """(setups, K) per-UE BER."""
        return np.array([r.ber for r in self.setups])

    @property
    def se(self) -> np.ndarray:
        return np.array([r.se for r in self.setups])

    def cdf_samples(self, metric: str = "se") -> np.ndarray:
        return np.sort(getattr(self, metric).ravel())

    def median_setup(self, metric: str = "ber") -> float:
        """Median across setups of the per-setup UE average."""
        return float(np.median(getattr(self, metric).mean(axis=1)))

    @property
    def metadata(self) -> dict:
        return {"config_hash": self.config.digest(), "seed": self.config.seed,
                "version": self.version}


def run_campaign(cfg: SimConfig, workers: int | None = None) -> SimResult:
    """Run ``cfg.setups`` independent setups, optionally in processes."""
    workers = cfg.workers if workers is None else workers
    tasks = [(cfg, s) for s in range(cfg.setups)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_setup_args, tasks))
    else:
        results = [_run_setup_args(t) for t in tasks]
    results.sort(key=lambda r: r.setup)
    log.info("campaign %s/%s: %d setups", cfg.scheme, cfg.precoder, len(results))
    return SimResult(config=cfg, setups=results)
