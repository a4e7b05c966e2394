"""Small-scale Rayleigh fading and per-AP MMSE channel estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import Scenario


@dataclass(frozen=True)
class PilotConfig:
    tau_u: int = 2000
    rho_u: float = 1.0

    def __post_init__(self):
        if self.tau_u < 1:
            raise ValueError("tau_u must be >= 1")
        if self.rho_u <= 0:
            raise ValueError("rho_u must be positive")


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """One realization: true channels, estimates and estimate variances.

    ``g`` and ``g_hat`` have shape (M, K, L); ``gamma`` has shape (M, K).
    """

    g: np.ndarray
    g_hat: np.ndarray
    gamma: np.ndarray


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def draw_channels(scenario_or_beta, seed=None, L: int | None = None) -> np.ndarray:
    """g[m, k] = sqrt(beta[m, k]) * h with h ~ CN(0, I_L).

    Accepts a Scenario or a raw beta matrix (then ``L`` is required).
    ``seed`` may be an int or a ``np.random.Generator``.
    """
    if isinstance(scenario_or_beta, Scenario):
        beta, L = scenario_or_beta.beta, scenario_or_beta.L
    else:
        beta = np.asarray(scenario_or_beta, dtype=float)
        if L is None:
            raise ValueError("L is required when passing a beta matrix")
    rng = np.random.default_rng(seed)
    h = _complex_normal(rng, beta.shape + (L,))
    return np.sqrt(beta)[..., None] * h


def gamma_of(beta, tau_u, rho_u):
    """Per-element variance of the MMSE estimate, tau*rho*beta^2/(tau*rho*beta + 1)."""
    beta = np.asarray(beta, dtype=float)
    snr = tau_u * rho_u
    return snr * beta**2 / (snr * beta + 1)


def mmse_estimate(g: np.ndarray, pilot: PilotConfig, scenario_or_beta, seed=None) -> ChannelSet:
    """MMSE estimates from orthogonal uplink pilots.

    The received pilot is sqrt(tau*rho)*g + n; the estimate is synthesized
    directly from that model rather than by simulating pilot sequences.
    """
    beta = scenario_or_beta.beta if isinstance(scenario_or_beta, Scenario) else np.asarray(scenario_or_beta)
    K = beta.shape[1]
    if pilot.tau_u < K:
        raise ValueError(f"orthogonal pilots need tau_u >= K ({pilot.tau_u} < {K})")
    rng = np.random.default_rng(seed)
    snr = pilot.tau_u * pilot.rho_u
    gamma = gamma_of(beta, pilot.tau_u, pilot.rho_u)
    scale_g = snr * beta / (snr * beta + 1)
    scale_n = np.sqrt(snr) * beta / (snr * beta + 1)
    n = _complex_normal(rng, g.shape)
    g_hat = scale_g[..., None] * g + scale_n[..., None] * n
    return ChannelSet(g=g, g_hat=g_hat, gamma=gamma)


def draw_channel_set(scenario: Scenario, pilot: PilotConfig, seed=None) -> ChannelSet:
    """Convenience: one true realization plus its estimate from a single seed."""
    rng = np.random.default_rng(seed)
    g = draw_channels(scenario, rng)
    return mmse_estimate(g, pilot, scenario, rng)


def draw_channel_batch(beta: np.ndarray, L: int, pilot: PilotConfig, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """n i.i.d. (g, g_hat) pairs stacked on a leading axis, shape (n, M, K, L)."""
    beta = np.asarray(beta, dtype=float)
    snr = pilot.tau_u * pilot.rho_u
    h = _complex_normal(rng, (n,) + beta.shape + (L,))
    g = np.sqrt(beta)[..., None] * h
    scale_g = snr * beta / (snr * beta + 1)
    scale_n = np.sqrt(snr) * beta / (snr * beta + 1)
    noise = _complex_normal(rng, g.shape)
    g_hat = scale_g[..., None] * g + scale_n[..., None] * noise
    return g, g_hat
