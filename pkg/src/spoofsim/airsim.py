"""Over-the-air channel: link budgets, array steering, emission synthesis.

propagate_frame builds the victim's post-mix IQ cube for one frame from
genuine reflectors plus attacker emissions. The default "beat" mode writes the
de-chirped cube directly in closed form (each echo is a complex tone, each
foreign chirp a tone with its residual challenge phase, noise stays noise);
"waveform" mode synthesizes the oversampled RF-domain frame and runs the real
mix + low-pass + decimate chain, and exists to cross-check the beat model.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import c as C_LIGHT

from .radar_dsp import ArrayGeometry, IQCube, mix_and_filter
from .signalcore import TWO_PI, BasebandSignal, ChirpParams, rng_stream

# attacker antennas are directional; outside the usable cone the coupled
# power drops by a fixed floor rather than to exactly zero
FOV_HALF_ANGLE_DEG = 10.0
FOV_PENALTY_DB = 30.0

# beat-domain image of the anti-alias filter: unity below 0.88*Nyquist,
# cosine taper to zero at 0.98*Nyquist
LPF_TAPER_START = 0.88
LPF_TAPER_STOP = 0.98

_ROLE_THERMAL = 0xA1
_ROLE_EMISSION = 0xA2
_ROLE_IMPAIR = 0xA3


@dataclass
class Reflector:
    """Genuine point scatterer in the victim's polar frame.

    radial_velocity > 0 means receding. reflectivity folds radar cross
    section and antenna gains into a single amplitude scale.
    """

    range_m: float
    radial_velocity: float = 0.0
    angle_deg: float = 0.0
    reflectivity: float = 1.0

    def __post_init__(self):
        if self.range_m <= 0:
            raise ValueError("range must be positive")
        if self.reflectivity < 0:
            raise ValueError("reflectivity must be non-negative")


@dataclass
class HardwareFingerprint:
    """Transmit-chain imperfections of one attacker radio."""

    iq_imbalance_db: float = 0.0
    iq_phase_skew_rad: float = 0.0
    phase_noise_std: float = 0.0  # per-sample random-walk step, rad
    nonlinearity_coeff: float = 0.0  # cubic AM/AM term
    dc_offset: complex = 0j

    def is_ideal(self) -> bool:
        return (
            self.iq_imbalance_db == 0.0
            and self.iq_phase_skew_rad == 0.0
            and self.phase_noise_std == 0.0
            and self.nonlinearity_coeff == 0.0
            and self.dc_offset == 0j
        )


# default distortion of the attack hardware used by the bundled scenarios;
# strong enough to fingerprint, mild enough not to blunt the attack: the
# stable components (IQ imbalance, LO leakage) carry the per-chirp signature
# because they repeat identically every chirp and leave Doppler clean, the
# phase walk stays small enough that the spoof peak dominates its own spray,
# and the cubic term stays small enough that its 3rd-harmonic ghost (3x the
# spoofed range) sits under the CFAR floor at scenario link budgets
DEFAULT_ATTACKER_FINGERPRINT = HardwareFingerprint(
    iq_imbalance_db=3.0,
    iq_phase_skew_rad=0.10,
    phase_noise_std=0.05,
    nonlinearity_coeff=0.01,
    dc_offset=0.048 + 0.036j,
)


@dataclass
class AttackerNode:
    """One attacking radio, positioned relative to the victim radar."""

    range_m: float
    angle_deg: float
    tx_power_w: float = 1.0
    antenna_gain_dbi: float = 23.0
    cfo_hz: float = 0.0
    phase_offset_rad: float = 0.0
    clock_skew: float = 0.0  # fractional; enters as carrier offset skew*f_start
    sensing_latency_s: float = 65e-9
    switch_latency_s: float = 10e-9
    impairment: HardwareFingerprint = field(default_factory=HardwareFingerprint)

    def __post_init__(self):
        if self.range_m <= 0:
            raise ValueError("attacker range must be positive")
        if self.tx_power_w < 0:
            raise ValueError("tx power must be non-negative")

    def carrier_offset_hz(self, f_start: float) -> float:
        return self.cfo_hz + self.clock_skew * f_start


@dataclass
class LinkBudget:
    """Free-space path losses at the radar's wavelength."""

    wavelength: float
    noise_floor_w: float = 1e-9

    def __post_init__(self):
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        if self.noise_floor_w < 0:
            raise ValueError("noise floor must be non-negative")

    def one_way_loss(self, d: float) -> float:
        """Power attenuation factor (>= 1) for a one-way link of length d."""
        if d <= 0:
            raise ValueError("distance must be positive")
        return (4.0 * np.pi * d / self.wavelength) ** 2

    def two_way_loss(self, d: float) -> float:
        """Power attenuation for the round trip; equals one_way_loss squared."""
        return self.one_way_loss(d) ** 2


def received_attacker_power(node: AttackerNode, budget: LinkBudget) -> float:
    """One-way received power P*G*lambda^2/(4*pi*d)^2 at the victim."""
    gain = 10.0 ** (node.antenna_gain_dbi / 10.0)
    return node.tx_power_w * gain / budget.one_way_loss(node.range_m)


def fov_penalty(angle_deg: float) -> float:
    """Power scale applied to attacker links outside the antenna cone."""
    return 10.0 ** (-FOV_PENALTY_DB / 10.0) if abs(angle_deg) > FOV_HALF_ANGLE_DEG else 1.0


def apply_impairment(
    sig: BasebandSignal,
    fp: HardwareFingerprint,
    seed: int,
    restart_every: int | None = None,
    stream: int = 0,
) -> BasebandSignal:
    """Distort a transmit waveform with one radio's hardware signature.

    Order: IQ imbalance and phase skew, per-sample phase-noise random walk,
    cubic nonlinearity, DC offset. Deterministic for a given seed; stream
    selects an independent noise substream. restart_every resets the walk
    that often (the PLL re-locks at every chirp boundary, so the phase error
    accumulates within a chirp but not across a frame).
    """
    if restart_every is not None and sig.samples.size % restart_every:
        raise ValueError("restart_every must divide the sample count")
    x = sig.samples.astype(complex, copy=True)
    if fp.iq_imbalance_db or fp.iq_phase_skew_rad:
        gi = 10.0 ** (fp.iq_imbalance_db / 40.0)
        gq = 10.0 ** (-fp.iq_imbalance_db / 40.0)
        i, q = x.real, x.imag
        x = gi * i + 1j * gq * (np.cos(fp.iq_phase_skew_rad) * q + np.sin(fp.iq_phase_skew_rad) * i)
    if fp.phase_noise_std:
        rng = rng_stream(seed, _ROLE_IMPAIR, stream)
        steps = rng.standard_normal(x.size) * fp.phase_noise_std
        if restart_every is None:
            walk = np.cumsum(steps)
        else:
            walk = np.cumsum(steps.reshape(-1, restart_every), axis=-1).reshape(-1)
        x = x * np.exp(1j * walk)
    if fp.nonlinearity_coeff:
        x = x + fp.nonlinearity_coeff * np.abs(x) ** 2 * x
    if fp.dc_offset:
        x = x + fp.dc_offset
    return BasebandSignal(x, sig.sample_rate, sig.t0)


@dataclass
class ChirpEmission:
    """A frame of attacker chirps described parametrically.

    delay_s is the arrival delay at the victim relative to the victim's own
    chirp start (scheduling already folded in propagation). extra_delays adds
    phantom copies (multi-obstacle spoof), each 1/sqrt(N) scaled.
    phi_tx is the challenge-phase sequence the attacker believes is current;
    doppler_step_rad is the per-chirp phase ramp imitating radial motion.
    """

    delay_s: float
    phi_tx: np.ndarray
    doppler_step_rad: float = 0.0
    extra_delays: tuple = ()
    power_scale: float = 1.0


@dataclass
class NoiseEmission:
    """A frame of attacker noise.

    chirped=True means the noise was multiplied onto a chirp before
    transmission, so the victim's de-chirp returns it to baseband intact and
    the whole received power lands inside the IF band. chirped=False is plain
    white RF noise, of which only the IF-band fraction survives the low-pass.
    Nodes sharing `seed` transmit identical noise samples.

    center_delay_s, when set, narrows the noise to sub-bin bandwidth riding a
    delayed chirp: per-chirp complex gains modulate a tone at the matching
    beat frequency, which concentrates the whole received power at one range
    bin (the tracked obstacle's) instead of spreading it over all of them.
    """

    power_scale: float = 1.0
    seed: int = 0
    chirped: bool = True
    center_delay_s: float | None = None


@dataclass
class Emission:
    """What one attacker radiates during one frame."""

    chirps: ChirpEmission | None = None
    noise: NoiseEmission | None = None


def _lpf_gain(beat_hz: np.ndarray, fs: float) -> np.ndarray:
    """Beat-domain amplitude response of the anti-alias filter."""
    f0 = LPF_TAPER_START * fs / 2.0
    f1 = LPF_TAPER_STOP * fs / 2.0
    f = np.abs(np.asarray(beat_hz, dtype=float))
    gain = np.ones_like(f)
    ramp = (f >= f0) & (f < f1)
    gain[ramp] = 0.5 * (1.0 + np.cos(np.pi * (f[ramp] - f0) / (f1 - f0)))
    gain[f >= f1] = 0.0
    return gain


def _beat_tone(
    tx: ChirpParams,
    geometry: ArrayGeometry,
    t_fast: np.ndarray,
    n_idx: np.ndarray,
    tau_n: np.ndarray,
    angle_deg: float,
    amp: float,
    extra_phase_n: np.ndarray | float = 0.0,
    carrier_offset_hz: float = 0.0,
    frame_t0: float = 0.0,
) -> np.ndarray:
    """Closed-form post-mix contribution of one delayed arrival.

    tau_n is the per-chirp arrival delay. Phase follows the mix convention:
    +2*pi*f_start*tau - pi*slope*tau^2 + 2*pi*(slope*tau + df)*t within the
    chirp, plus any per-chirp residual (challenge mismatch, Doppler ramp, CFO
    accumulation).
    """
    fs = 1.0 / (t_fast[1] - t_fast[0])
    beat_hz = tx.slope * tau_n + carrier_offset_hz
    gain = _lpf_gain(beat_hz, fs)
    phase_n = (
        TWO_PI * tx.f_start * tau_n
        - np.pi * tx.slope * tau_n**2
        + np.asarray(extra_phase_n) * np.ones_like(tau_n)
        + TWO_PI * carrier_offset_hz * (frame_t0 + n_idx * tx.t_rep)
    )
    n_chirps = tau_n.size
    diffs = np.diff(beat_hz)
    if n_chirps > 2 and np.ptp(diffs) < 1e-9 * max(abs(beat_hz).max(), 1.0):
        # per-chirp beat frequencies form an arithmetic ramp (constant radial
        # velocity), so the fast-time exponentials are a geometric sequence;
        # a cumulative product replaces the full 2D exp at ~1e-13 phase error
        row = np.exp(1j * TWO_PI * beat_hz[0] * t_fast)
        step = np.exp(1j * TWO_PI * (diffs[0] if n_chirps > 1 else 0.0) * t_fast)
        ramp = np.empty((n_chirps, t_fast.size), dtype=complex)
        ramp[0] = 1.0
        np.cumprod(np.broadcast_to(step, (n_chirps - 1, t_fast.size)), axis=0,
                   out=ramp[1:])
        tones = ramp * row[None, :]
    else:
        tones = np.exp(1j * TWO_PI * beat_hz[:, None] * t_fast[None, :])
    per_chirp = (amp * gain * np.exp(1j * phase_n))[:, None] * tones
    # no echo before the wavefront arrives (waveform mode gates the same way)
    per_chirp *= t_fast[None, :] >= tau_n[:, None]
    steer = geometry.steering(angle_deg)
    return steer[:, None, None] * per_chirp[None, :, :]


def propagate_frame(
    tx: ChirpParams,
    reflectors: list,
    attackers: list,
    geometry: ArrayGeometry,
    budget: LinkBudget,
    seed: int = 0,
    frame_id: int = 0,
    timestamp: float = 0.0,
    n_samples: int = 256,
    mode: str = "beat",
    oversample: int = 8,
) -> IQCube:
    """One frame of the victim's post-mix cube.

    attackers is a list of (AttackerNode, Emission) pairs; pass an empty list
    for clean frames. The same seed reproduces the frame bit for bit.
    """
    if mode not in ("beat", "waveform"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "waveform":
        return _propagate_waveform(
            tx, reflectors, attackers, geometry, budget, seed, frame_id, timestamp,
            n_samples, oversample,
        )

    fs = n_samples / tx.t_chirp
    t_fast = np.arange(n_samples) / fs
    n_idx = np.arange(tx.n_chirps, dtype=float)
    cube = np.zeros((geometry.n_rx, tx.n_chirps, n_samples), dtype=complex)

    for refl in reflectors:
        tau_n = 2.0 * (refl.range_m + refl.radial_velocity * n_idx * tx.t_rep) / C_LIGHT
        amp = refl.reflectivity / np.sqrt(budget.two_way_loss(refl.range_m))
        cube += _beat_tone(tx, geometry, t_fast, n_idx, tau_n, refl.angle_deg, amp)

    for node_idx, (node, emission) in enumerate(attackers):
        if emission is None:
            continue
        p_rcv = received_attacker_power(node, budget) * fov_penalty(node.angle_deg)
        df = node.carrier_offset_hz(tx.f_start)
        if emission.chirps is not None:
            ce = emission.chirps
            amp = np.sqrt(p_rcv * ce.power_scale)
            delays = (0.0,) + tuple(ce.extra_delays)
            amp /= np.sqrt(len(delays))
            residual = (tx.phi_init - ce.phi_tx) + ce.doppler_step_rad * n_idx + node.phase_offset_rad
            contrib = np.zeros_like(cube)
            for extra in delays:
                tau_n = np.full(tx.n_chirps, ce.delay_s + extra)
                contrib += _beat_tone(
                    tx, geometry, t_fast, n_idx, tau_n, node.angle_deg, amp,
                    extra_phase_n=residual, carrier_offset_hz=df, frame_t0=timestamp,
                )
            if not node.impairment.is_ideal():
                contrib = _distort_beat(contrib, node.impairment, seed, frame_id, node_idx, fs)
            cube += contrib
        if emission.noise is not None:
            ne = emission.noise
            rot = np.exp(
                1j * (TWO_PI * df * (timestamp + n_idx * tx.t_rep) + node.phase_offset_rad)
            )
            steer = geometry.steering(node.angle_deg)
            if ne.center_delay_s is not None:
                # sub-bin noise on a delayed chirp: shared per-chirp gains
                # times the beat tone of the centering delay (CFO and phase
                # offset ride inside _beat_tone via carrier_offset_hz)
                rng = rng_stream(ne.seed, _ROLE_EMISSION, frame_id)
                gains = (
                    rng.standard_normal(tx.n_chirps) + 1j * rng.standard_normal(tx.n_chirps)
                ) / np.sqrt(2.0)
                tau_n = np.full(tx.n_chirps, ne.center_delay_s)
                tone = _beat_tone(
                    tx, geometry, t_fast, n_idx, tau_n, node.angle_deg,
                    np.sqrt(p_rcv * ne.power_scale),
                    extra_phase_n=node.phase_offset_rad,
                    carrier_offset_hz=df, frame_t0=timestamp,
                )
                cube += tone * gains[None, :, None]
                continue
            if ne.chirped:
                p_inband = p_rcv * ne.power_scale
            else:
                p_inband = p_rcv * ne.power_scale * fs / (2.0 * tx.bandwidth)
            rng = rng_stream(ne.seed, _ROLE_EMISSION, frame_id)
            base = (
                rng.standard_normal((tx.n_chirps, n_samples))
                + 1j * rng.standard_normal((tx.n_chirps, n_samples))
            ) / np.sqrt(2.0)
            carrier = np.exp(1j * TWO_PI * df * t_fast)
            per_chirp = np.sqrt(p_inband) * base * rot[:, None] * carrier[None, :]
            cube += steer[:, None, None] * per_chirp[None, :, :]

    if budget.noise_floor_w > 0:
        rng = rng_stream(seed, _ROLE_THERMAL, frame_id)
        cube += (
            rng.standard_normal(cube.shape) + 1j * rng.standard_normal(cube.shape)
        ) * np.sqrt(budget.noise_floor_w / 2.0)

    return IQCube(cube, fs, tx, frame_id, timestamp)


def _distort_beat(
    contrib: np.ndarray, fp: HardwareFingerprint, seed: int, frame_id: int,
    node_idx: int, fs: float,
) -> np.ndarray:
    """Apply TX-side hardware distortion to a beat-domain contribution.

    The distortion acts on the (common) transmit waveform, so it is computed
    on the reference antenna's per-chirp series and the relative steering is
    reapplied afterwards. The receive chain's anti-alias filter then acts on
    the distorted signal: without it the cubic term's third harmonic would
    alias around the sample rate into in-band range bins.
    """
    n_rx, n_chirps, n_samples = contrib.shape
    ref = contrib[0]
    rms = np.sqrt(np.mean(np.abs(ref) ** 2))
    if rms == 0:
        return contrib
    # distortion acts on the unit-scale TX waveform, not the received copy
    unit = ref.reshape(-1) / rms
    flat = BasebandSignal(unit, 1.0)
    dist = apply_impairment(
        flat, fp, seed ^ (frame_id * 1000003 + node_idx), restart_every=n_samples
    ).samples
    dist = dist.reshape(n_chirps, n_samples)
    unit = unit.reshape(n_chirps, n_samples)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(np.abs(unit) > 1e-12, dist / np.where(np.abs(unit) > 1e-12, unit, 1.0), 0.0)
    out = contrib * rel[None, :, :]
    mask = _lpf_gain(np.fft.fftfreq(n_samples, d=1.0 / fs), fs)
    return np.fft.ifft(np.fft.fft(out, axis=-1) * mask[None, None, :], axis=-1)


def _propagate_waveform(
    tx, reflectors, attackers, geometry, budget, seed, frame_id, timestamp,
    n_samples, oversample,
) -> IQCube:
    fs_hi = oversample * n_samples / tx.t_chirp
    n_hi = oversample * n_samples
    t = np.arange(n_hi) / fs_hi
    raw = np.zeros((geometry.n_rx, tx.n_chirps, n_hi), dtype=complex)
    k = np.arange(geometry.n_rx)

    # frame-level gain draws for range-centered noise, shared across chirps
    centered_gains = {}
    for node_idx, (node, emission) in enumerate(attackers):
        if emission is not None and emission.noise is not None and emission.noise.center_delay_s is not None:
            rng = rng_stream(emission.noise.seed, _ROLE_EMISSION, frame_id)
            centered_gains[node_idx] = (
                rng.standard_normal(tx.n_chirps) + 1j * rng.standard_normal(tx.n_chirps)
            ) / np.sqrt(2.0)

    def rf_steer(angle_deg):
        # RF-domain steering; the mixer's conjugation flips it to +j downstream
        s = np.sin(np.deg2rad(angle_deg))
        return np.exp(-1j * TWO_PI * geometry.spacing * k * s)

    def chirp_at(delay, phi):
        ts = t - delay
        live = (ts >= 0) & (ts < tx.t_chirp)
        out = np.zeros(n_hi, dtype=complex)
        out[live] = np.exp(1j * (np.pi * tx.slope * ts[live] ** 2 + phi))
        return out

    for n in range(tx.n_chirps):
        acc = np.zeros((geometry.n_rx, n_hi), dtype=complex)
        for refl in reflectors:
            tau = 2.0 * (refl.range_m + refl.radial_velocity * n * tx.t_rep) / C_LIGHT
            amp = refl.reflectivity / np.sqrt(budget.two_way_loss(refl.range_m))
            wave = amp * chirp_at(tau, tx.phi_init[n]) * np.exp(-1j * TWO_PI * tx.f_start * tau)
            acc += rf_steer(refl.angle_deg)[:, None] * wave[None, :]
        for node_idx, (node, emission) in enumerate(attackers):
            if emission is None:
                continue
            p_rcv = received_attacker_power(node, budget) * fov_penalty(node.angle_deg)
            df = node.carrier_offset_hz(tx.f_start)
            # negative RF ramp mixes up to a positive beat shift
            cfo_ramp = np.exp(
                -1j * TWO_PI * df * (timestamp + n * tx.t_rep + t)
            ) * np.exp(-1j * node.phase_offset_rad)
            if emission.chirps is not None:
                ce = emission.chirps
                delays = (0.0,) + tuple(ce.extra_delays)
                amp = np.sqrt(p_rcv * ce.power_scale / len(delays))
                wave = np.zeros(n_hi, dtype=complex)
                for extra in delays:
                    d = ce.delay_s + extra
                    # transmitted pre-mix; the conjugating mixer negates it, so
                    # the victim observes +doppler_step_rad per chirp
                    ph = ce.phi_tx[n] - ce.doppler_step_rad * n
                    wave += chirp_at(d, ph) * np.exp(-1j * TWO_PI * tx.f_start * d)
                if not node.impairment.is_ideal():
                    wave = apply_impairment(
                        BasebandSignal(wave, fs_hi),
                        node.impairment,
                        seed ^ (frame_id * 1000003 + node_idx),
                        stream=n,
                    ).samples
                acc += rf_steer(node.angle_deg)[:, None] * (amp * wave * cfo_ramp)[None, :]
            if emission.noise is not None:
                ne = emission.noise
                if ne.center_delay_s is not None:
                    d = ne.center_delay_s
                    g = centered_gains[node_idx][n]
                    wave = np.conj(g) * chirp_at(d, 0.0) * np.exp(-1j * TWO_PI * tx.f_start * d)
                else:
                    rng = rng_stream(ne.seed, _ROLE_EMISSION, frame_id, n)
                    if ne.chirped:
                        low = (
                            rng.standard_normal(n_samples) + 1j * rng.standard_normal(n_samples)
                        ) / np.sqrt(2.0)
                        wave = np.repeat(low, oversample) * chirp_at(0.0, 0.0)
                    else:
                        wave = (
                            rng.standard_normal(n_hi) + 1j * rng.standard_normal(n_hi)
                        ) / np.sqrt(2.0)
                acc += rf_steer(node.angle_deg)[:, None] * (
                    np.sqrt(p_rcv * ne.power_scale) * wave * cfo_ramp
                )[None, :]
        if budget.noise_floor_w > 0:
            rng = rng_stream(seed, _ROLE_THERMAL, frame_id, n)
            acc += (
                rng.standard_normal(acc.shape) + 1j * rng.standard_normal(acc.shape)
            ) * np.sqrt(budget.noise_floor_w * oversample / 2.0)
        raw[:, n, :] = acc

    raw_cube = IQCube(raw, fs_hi, tx, frame_id, timestamp)
    fs_beat = n_samples / tx.t_chirp
    return mix_and_filter(raw_cube, tx, cutoff=0.49 * fs_beat, decimate_to=n_samples)
