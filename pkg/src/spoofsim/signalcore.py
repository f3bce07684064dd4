"""Transmit-side waveform synthesis for an FMCW radar and its spoofers.

Everything here is complex baseband: the 62.61 GHz carrier is never sampled.
Carrier effects (range phase, Doppler, CFO) enter as explicit phase terms.
Convention used throughout the package: a physical delay tau multiplies the
baseband signal by exp(-1j*2*pi*f_start*tau); the receive mixer conjugates the
received signal, so delays show up with positive phase in the beat domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.signal import firwin

TWO_PI = 2.0 * np.pi


def rng_stream(*keys: int) -> np.random.Generator:
    """Deterministic generator derived from a tuple of integer context keys.

    Each (seed, frame, role, ...) tuple gives an independent stream, so
    per-frame noise does not depend on how many attackers drew before it.
    """
    safe = [int(k) & 0xFFFFFFFF for k in keys]
    return np.random.default_rng(np.random.SeedSequence(safe))


@dataclass(eq=False)
class ChirpParams:
    """Waveform parameters of one coherent frame.

    phi_init holds the per-chirp initial phases; all zeros unless a
    challenge-response policy randomized them.
    """

    f_start: float = 62.61e9
    bandwidth: float = 300e6
    t_chirp: float = 30e-6
    inter_chirp: float = 3e-6
    n_chirps: int = 128
    frame_period: float = 4.224e-3
    phi_init: np.ndarray | None = None

    def __post_init__(self):
        if self.bandwidth <= 0 or self.t_chirp <= 0 or self.f_start <= 0:
            raise ValueError("f_start, bandwidth and t_chirp must be positive")
        if self.inter_chirp < 0:
            raise ValueError("inter_chirp must be non-negative")
        if self.n_chirps < 1:
            raise ValueError("n_chirps must be at least 1")
        if self.frame_period < self.n_chirps * self.t_rep - 1e-12:
            raise ValueError("frame_period shorter than the chirp train")
        if self.phi_init is None:
            self.phi_init = np.zeros(self.n_chirps)
        else:
            self.phi_init = np.asarray(self.phi_init, dtype=float)
            if self.phi_init.shape != (self.n_chirps,):
                raise ValueError("phi_init must have one entry per chirp")
            if np.any(self.phi_init < 0) or np.any(self.phi_init >= TWO_PI):
                raise ValueError("phi_init entries must lie in [0, 2*pi)")

    @property
    def slope(self) -> float:
        return self.bandwidth / self.t_chirp

    @property
    def t_rep(self) -> float:
        # chirp repetition interval, active sweep plus idle gap
        return self.t_chirp + self.inter_chirp

    @property
    def wavelength(self) -> float:
        return C_LIGHT / self.f_start

    def with_phases(self, phi: np.ndarray, f_start: float | None = None) -> "ChirpParams":
        return replace(
            self,
            phi_init=np.asarray(phi, dtype=float),
            f_start=self.f_start if f_start is None else f_start,
        )


@dataclass
class BasebandSignal:
    """Complex samples with their rate and the start time of sample 0."""

    samples: np.ndarray
    sample_rate: float
    t0: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.size == 0:
            raise ValueError("empty signal")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class NoiseSpec:
    """Recipe for a reproducible noise record.

    kind "white" is complex Gaussian with the given average power; kind
    "filtered" low-passes white noise at `cutoff` and rescales to exactly the
    requested power.
    """

    kind: str = "white"
    power: float = 1.0
    cutoff: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("white", "filtered"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.power < 0:
            raise ValueError("power must be non-negative")
        if self.kind == "filtered" and (self.cutoff is None or self.cutoff <= 0):
            raise ValueError("filtered noise needs a positive cutoff")


def make_chirp(params: ChirpParams, chirp_index: int, sample_rate: float) -> BasebandSignal:
    """Single up-chirp exp(j*(pi*slope*t^2 + phi_init[chirp_index])) over [0, t_chirp)."""
    if not 0 <= chirp_index < params.n_chirps:
        raise ValueError("chirp_index out of range")
    if sample_rate <= 0:
        raise ValueError("sample_rate must be positive")
    n = int(round(params.t_chirp * sample_rate))
    t = np.arange(n) / sample_rate
    phase = np.pi * params.slope * t * t + params.phi_init[chirp_index]
    return BasebandSignal(np.exp(1j * phase), sample_rate)


def make_spoof_train(params: ChirpParams, delays, sample_rate: float) -> BasebandSignal:
    """Superposition of time-shifted copies of chirp 0, one per phantom delay.

    Each component is evaluated analytically at its exact (possibly
    fractional-sample) delay and carries the explicit carrier phase
    exp(-j*2*pi*f_start*delay). Components are scaled by 1/sqrt(N) so total
    power stays comparable as phantoms are added.
    """
    delays = np.atleast_1d(np.asarray(delays, dtype=float))
    if delays.size == 0:
        raise ValueError("need at least one delay")
    if np.any(delays < 0) or np.any(delays >= params.t_chirp):
        raise ValueError("delays must lie in [0, t_chirp)")

    # work in integer sample indices (0.0001-sample snap absorbs float fuzz)
    # so single-delay trains are exact prefixes of longer superpositions
    def first_after(t):
        return int(np.ceil(t * sample_rate - 1e-4))

    spans = [(first_after(tau), first_after(tau + params.t_chirp)) for tau in delays]
    n = max(hi for _, hi in spans)
    t = np.arange(n) / sample_rate
    out = np.zeros(n, dtype=complex)
    scale = 1.0 / np.sqrt(delays.size)
    for tau, (lo, hi) in zip(delays, spans):
        ts = t[lo:hi] - tau
        phase = np.pi * params.slope * ts * ts + params.phi_init[0]
        carrier = -TWO_PI * params.f_start * tau
        out[lo:hi] += scale * np.exp(1j * (phase + carrier))
    return BasebandSignal(out, sample_rate)


def make_noise(spec: NoiseSpec, duration: float, sample_rate: float) -> BasebandSignal:
    """Reproducible complex noise record of the given duration."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    n = int(round(duration * sample_rate))
    rng = rng_stream(spec.seed)
    x = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * np.sqrt(spec.power / 2.0)
    if spec.kind == "filtered":
        if spec.cutoff >= sample_rate / 2:
            raise ValueError("cutoff must be below Nyquist")
        taps = firwin(129, spec.cutoff, fs=sample_rate)
        x = np.convolve(x, taps, mode="same")
        p = np.mean(np.abs(x) ** 2)
        if spec.power > 0 and p > 0:
            # exact power after the filter ate the out-of-band part
            x *= np.sqrt(spec.power / p)
    return BasebandSignal(x, sample_rate)


def apply_doppler_phase(
    signal: BasebandSignal, chirp_index: int, v_spoof: float, params: ChirpParams
) -> BasebandSignal:
    """Rotate a chirp by the inter-chirp Doppler phase of a target at v_spoof.

    Positive v_spoof imitates a receding target (same sign the victim's
    processing assigns to genuine receding echoes).
    """
    if chirp_index < 0:
        raise ValueError("chirp_index must be non-negative")
    f_d = 2.0 * v_spoof * params.f_start / C_LIGHT
    rot = np.exp(1j * TWO_PI * f_d * chirp_index * params.t_rep)
    return BasebandSignal(signal.samples * rot, signal.sample_rate, signal.t0)
