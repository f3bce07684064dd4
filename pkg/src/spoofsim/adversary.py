"""Attacker-side system: sensing, tracking, scheduling, strategy planning.

A roadside node first locks onto the victim's chirp with a short matched
filter, then tracks the victim's kinematics with a Kalman filter, schedules
its transmit delay so the forged echo arrives with the right round-trip
offset, and finally composes per-frame emissions for one of the five
strategies (single phantom, phantom train, Gaussian jam, synchronized pair,
unsynchronized correlated-noise pair).
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.signal import fftconvolve

from .signalcore import TWO_PI, BasebandSignal, ChirpParams

# matched-filter template length as a fraction of one chirp; the sensing
# receiver needs well under one chirp of stored reference
TEMPLATE_FRACTION = 5000 / 101376

STRATEGY_KINDS = (
    "add_obstacle",
    "multi_obstacle",
    "random_gaussian",
    "synchronous_pair",
    "asynchronous_pair",
)

COMMAND_KINDS = (
    "none",
    "chirp_with",
    "spoof_train",
    "gaussian_noise",
    "correlated_chirp_plus_noise",
    "correlated_noise_only",
)


class InfeasibleSchedule(ValueError):
    """No frame lag within bounds leaves enough time to switch to transmit."""


def _check_psd(p: np.ndarray, name: str = "P"):
    if p.shape != (3, 3):
        raise ValueError(f"{name} must be 3x3")
    if not np.allclose(p, p.T, atol=1e-9):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(p)[0] < -1e-9:
        raise ValueError(f"{name} must be positive semidefinite")


@dataclass
class TrackState:
    """Victim kinematic estimate: [range m, radial velocity m/s, angle deg]."""

    x: np.ndarray
    P: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.P = np.asarray(self.P, dtype=float)
        if self.x.shape != (3,):
            raise ValueError("state must be [range, velocity, angle]")
        if self.x[0] < 0:
            raise ValueError("range must be non-negative")
        _check_psd(self.P)

    @property
    def range_m(self) -> float:
        return float(self.x[0])

    @property
    def velocity_mps(self) -> float:
        return float(self.x[1])

    @property
    def angle_deg(self) -> float:
        return float(self.x[2])


def sense_victim(rx_window: BasebandSignal, template: BasebandSignal, threshold: float = 0.7):
    """Locate the victim chirp inside a received window.

    Normalized matched filter; returns (detect_time_s, confidence) for the
    earliest locally maximal peak at or above threshold, or None. Confidence
    is the normalized correlation magnitude in [0, 1].
    """
    rx = np.asarray(rx_window.samples)
    tpl = np.asarray(template.samples)
    m = tpl.size
    if m == 0 or m > rx.size:
        raise ValueError("template must be non-empty and no longer than the window")
    tpl_energy = float(np.sum(np.abs(tpl) ** 2))
    if tpl_energy == 0:
        raise ValueError("template has zero energy")
    corr = fftconvolve(rx, np.conj(tpl[::-1]), mode="valid")
    energy = fftconvolve(np.abs(rx) ** 2, np.ones(m), mode="valid").real
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.abs(corr) / np.sqrt(np.maximum(energy, 1e-300) * tpl_energy)
    rho[energy <= 0] = 0.0
    w = max(1, m // 2)
    hits = np.flatnonzero(rho >= threshold)
    for i in hits:
        lo, hi = max(0, i - w), min(rho.size, i + w + 1)
        if rho[i] >= rho[lo:hi].max() - 1e-12:
            return rx_window.t0 + i / rx_window.sample_rate, float(rho[i])
    return None


def default_template(params: ChirpParams, sample_rate: float) -> BasebandSignal:
    """The stored reference prefix used by sense_victim."""
    from .signalcore import make_chirp

    full = make_chirp(params, 0, sample_rate)
    m = max(8, int(round(TEMPLATE_FRACTION * full.samples.size)))
    return BasebandSignal(full.samples[:m].copy(), sample_rate, full.t0)


def track_victim(prev: TrackState, measurement, dt: float, Q: np.ndarray, R: np.ndarray) -> TrackState:
    """One constant-velocity Kalman cycle on (range, velocity) plus a scalar
    random-walk channel for bearing. measurement=None runs predict only."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    _check_psd(prev.P, "prev.P")
    Q = np.asarray(Q, dtype=float)
    _check_psd(Q, "Q")

    f = np.eye(3)
    f[0, 1] = dt
    x = f @ prev.x
    p = f @ prev.P @ f.T + Q
    if measurement is not None:
        R = np.asarray(R, dtype=float)
        _check_psd(R, "R")
        z = np.asarray(measurement, dtype=float)
        if z.shape != (3,):
            raise ValueError("measurement must be (range, velocity, angle)")
        s = p + R
        k = p @ np.linalg.inv(s)
        x = x + k @ (z - x)
        ikh = np.eye(3) - k
        p = ikh @ p @ ikh.T + k @ R @ k.T  # Joseph form keeps PSD
    p = 0.5 * (p + p.T)
    return TrackState(x=x, P=p, t=prev.t + dt)


def cv_process_noise(dt: float, accel_psd: float = 4.0, angle_psd: float = 0.5) -> np.ndarray:
    """White-acceleration process noise for the 3-state victim model."""
    q = np.zeros((3, 3))
    q[0, 0] = accel_psd * dt**3 / 3.0
    q[0, 1] = q[1, 0] = accel_psd * dt**2 / 2.0
    q[1, 1] = accel_psd * dt
    q[2, 2] = angle_psd * dt
    return q


def schedule_delay(
    victim_track: TrackState,
    node,
    d_spoof: float,
    frame_period: float,
    min_lag: int = 1,
    max_lag: int = 8,
):
    """Pick (frame_lag, fine_delay) so the forgery arrives at the spoofed
    round-trip offset.

    Timeline from the victim chirp's start: one-way propagation to the node,
    the node's sensing pipeline, an optional whole-frame lag, the chosen fine
    delay, and the return propagation must sum to 2*d_spoof/c modulo the
    frame period. fine_delay below the transmit switch latency is physically
    impossible; the smallest feasible lag wins.
    """
    if d_spoof <= 0:
        raise ValueError("d_spoof must be positive")
    if min_lag < 0 or max_lag < min_lag:
        raise ValueError("need 0 <= min_lag <= max_lag")
    d_att = victim_track.range_m if node is None else node.range_m
    base = 2.0 * (d_spoof - d_att) / C_LIGHT - node.sensing_latency_s
    for lag in range(min_lag, max_lag + 1):
        fine = base + lag * frame_period
        if fine >= node.switch_latency_s:
            return lag, fine
    raise InfeasibleSchedule(
        f"cannot reach d_spoof={d_spoof:.2f} m from d_att={d_att:.2f} m "
        f"within {max_lag} frame(s)"
    )


def same_frame_bound(node, d_spoof: float) -> float:
    """Largest attacker standoff that still allows a zero-lag spoof."""
    return d_spoof - C_LIGHT * (node.sensing_latency_s + node.switch_latency_s) / 2.0


@dataclass
class StrategyConfig:
    """One attack strategy with its target and knobs."""

    kind: str
    d_spoof: float = 30.0
    v_spoof: float = 0.0
    theta_spoof: float = 0.0
    power_split: tuple = (1.0, 1.0)
    n_obstacles: int = 4
    spacing_m: float = 10.0
    power_scale: float = 1.0
    noise_seed: int = 1
    perfect_sync: bool = False
    min_lag: int = 1
    max_lag: int = 8

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind: {self.kind!r}")
        if self.d_spoof <= 0:
            raise ValueError("d_spoof must be positive")
        if self.kind in ("synchronous_pair", "asynchronous_pair"):
            if len(self.power_split) != 2 or min(self.power_split) <= 0:
                raise ValueError("pair strategies need two positive power weights")
        if self.n_obstacles < 1:
            raise ValueError("n_obstacles must be at least 1")
        if self.spacing_m <= 0:
            raise ValueError("spacing must be positive")


@dataclass
class SpoofCommand:
    """Per-node emission descriptor for one frame."""

    node_index: int
    kind: str
    frame_id: int
    delay_s: float = 0.0
    phase_ramp_rad: float = 0.0
    extra_delays: tuple = ()
    power_scale: float = 1.0
    noise_seed: int = 0

    def __post_init__(self):
        if self.kind not in COMMAND_KINDS:
            raise ValueError(f"unknown command kind: {self.kind!r}")


def doppler_ramp(v_spoof: float, params: ChirpParams) -> float:
    """Per-chirp phase increment that mimics radial velocity v_spoof."""
    return TWO_PI * (2.0 * v_spoof * params.f_start / C_LIGHT) * params.t_rep


def plan_attack(
    cfg: StrategyConfig,
    victim_track: TrackState,
    frame_id: int,
    nodes,
    params: ChirpParams | None = None,
):
    """Compose per-node SpoofCommands for one frame.

    Pair strategies split cfg's power weights across the first two nodes;
    the stronger weight is normalized to scale 1 so no node is asked to
    exceed its hardware power.
    """
    params = params or ChirpParams()
    if not nodes:
        raise ValueError("at least one attacker node is required")
    pair = cfg.kind in ("synchronous_pair", "asynchronous_pair")
    if pair and len(nodes) < 2:
        raise ValueError(f"{cfg.kind} requires two attacker nodes")
    if cfg.kind == "synchronous_pair" and not cfg.perfect_sync:
        raise ValueError("synchronous_pair requires the perfect_sync flag")

    delay = 2.0 * cfg.d_spoof / C_LIGHT
    ramp = doppler_ramp(cfg.v_spoof, params)
    common = dict(frame_id=frame_id, delay_s=delay, phase_ramp_rad=ramp)

    if cfg.kind == "add_obstacle":
        return [SpoofCommand(node_index=0, kind="chirp_with",
                             power_scale=cfg.power_scale, **common)]
    if cfg.kind == "multi_obstacle":
        extra = tuple(2.0 * cfg.spacing_m * k / C_LIGHT for k in range(1, cfg.n_obstacles))
        return [SpoofCommand(node_index=0, kind="spoof_train", extra_delays=extra,
                             power_scale=cfg.power_scale, **common)]
    if cfg.kind == "random_gaussian":
        return [SpoofCommand(node_index=0, kind="gaussian_noise", frame_id=frame_id,
                             power_scale=cfg.power_scale, noise_seed=cfg.noise_seed + frame_id)]

    w1, w2 = cfg.power_split
    top = max(w1, w2)
    s1, s2 = cfg.power_scale * w1 / top, cfg.power_scale * w2 / top
    if cfg.kind == "synchronous_pair":
        return [
            SpoofCommand(node_index=0, kind="chirp_with", power_scale=s1, **common),
            SpoofCommand(node_index=1, kind="chirp_with", power_scale=s2, **common),
        ]
    # asynchronous pair: node 1 chirp plus correlated noise, node 2 the
    # same noise stream only, doubling as the jammer on the genuine echo
    seed = cfg.noise_seed
    return [
        SpoofCommand(node_index=0, kind="correlated_chirp_plus_noise",
                     power_scale=s1, noise_seed=seed, **common),
        SpoofCommand(node_index=1, kind="correlated_noise_only", frame_id=frame_id,
                     delay_s=delay, power_scale=s2, noise_seed=seed),
    ]


def emission_from_command(cmd: SpoofCommand, params: ChirpParams, phi_tx: np.ndarray | None = None):
    """Translate a SpoofCommand into the channel-level emission.

    phi_tx is the chirp-phase sequence the attacker believes the victim uses
    this frame (stale by frame_lag when the challenge defense hops phases).
    """
    from .airsim import ChirpEmission, Emission, NoiseEmission

    if phi_tx is None:
        phi_tx = params.phi_init.copy()
    if cmd.kind == "none":
        return None
    if cmd.kind in ("chirp_with", "spoof_train"):
        return Emission(chirps=ChirpEmission(
            delay_s=cmd.delay_s, phi_tx=phi_tx, doppler_step_rad=cmd.phase_ramp_rad,
            extra_delays=cmd.extra_delays, power_scale=cmd.power_scale))
    if cmd.kind == "gaussian_noise":
        return Emission(noise=NoiseEmission(
            power_scale=cmd.power_scale, seed=cmd.noise_seed, chirped=True))
    if cmd.kind == "correlated_noise_only":
        return Emission(noise=NoiseEmission(
            power_scale=cmd.power_scale, seed=cmd.noise_seed,
            center_delay_s=cmd.delay_s))
    # correlated_chirp_plus_noise: split the node budget between the phantom
    # chirp and its noise cloak
    half = 0.5 * cmd.power_scale
    return Emission(
        chirps=ChirpEmission(delay_s=cmd.delay_s, phi_tx=phi_tx,
                             doppler_step_rad=cmd.phase_ramp_rad, power_scale=half),
        noise=NoiseEmission(power_scale=half, seed=cmd.noise_seed,
                            center_delay_s=cmd.delay_s),
    )


def music_spectrum_model(theta_grid_deg, sources, geometry, noise_power: float = 1e-12):
    """Analytic one-snapshot-limit MUSIC pseudo-spectrum.

    sources: iterable of (angle_deg, power). Used by the planner to invert
    the power->angle relationship without running the full chain.
    """
    n = geometry.n_rx
    r = np.eye(n) * noise_power
    for ang, pw in sources:
        a = geometry.steering(ang)
        r = r + pw * np.outer(a, a.conj())
    evals, evecs = np.linalg.eigh(r)
    u = evecs[:, -1:]  # dominant eigenvector; k = 1
    proj = np.eye(n) - u @ u.conj().T
    grid = np.asarray(theta_grid_deg, dtype=float)
    spec = np.empty(grid.size)
    for i, ang in enumerate(grid):
        a = geometry.steering(ang)
        spec[i] = 1.0 / max(np.real(a.conj() @ proj @ a), 1e-18)
    return spec


def solve_power_split(
    theta1: float,
    theta2: float,
    target_deg: float,
    geometry,
    total_power: float = 1.0,
    echo: tuple | None = None,
    grid_step: float = 0.05,
    tol: float = 1e-4,
):
    """Power split (P1, P2) steering the merged bearing to target_deg.

    Bisects the monotone ratio->angle map of the analytic pseudo-spectrum.
    echo optionally adds the genuine reflection (angle_deg, power) the pair
    must out-weigh. Raises when the target lies outside the reachable span.
    """
    lo, hi = sorted((theta1, theta2))
    grid = np.arange(lo - 2.0, hi + 2.0 + grid_step, grid_step)

    def angle_of(log_ratio):
        ratio = np.exp(log_ratio)
        p1 = total_power * ratio / (1.0 + ratio)
        p2 = total_power / (1.0 + ratio)
        sources = [(theta1, p1), (theta2, p2)]
        if echo is not None:
            sources.append(echo)
        spec = music_spectrum_model(grid, sources, geometry)
        return grid[int(np.argmax(spec))]

    span = 12.0  # log-ratio search box, ratios ~ e^-12 .. e^12
    a_lo, a_hi = angle_of(-span), angle_of(span)
    lo_ang, hi_ang = sorted((a_lo, a_hi))
    if not (lo_ang - grid_step <= target_deg <= hi_ang + grid_step):
        raise ValueError(
            f"target {target_deg} deg outside reachable span [{lo_ang}, {hi_ang}]")
    sign = 1.0 if a_hi >= a_lo else -1.0
    x_lo, x_hi = -span, span
    for _ in range(200):
        mid = 0.5 * (x_lo + x_hi)
        if (angle_of(mid) - target_deg) * sign < 0:
            x_lo = mid
        else:
            x_hi = mid
        if x_hi - x_lo < tol:
            break
    ratio = np.exp(0.5 * (x_lo + x_hi))
    p1 = total_power * ratio / (1.0 + ratio)
    return p1, total_power - p1


@dataclass
class AttackerState:
    """Per-node runtime state advanced once per frame by the scenario clock."""

    track: TrackState | None = None
    locked: bool = False
    lock_time: float = 0.0
    lock_confidence: float = 0.0
    last_commands: list = field(default_factory=list)

    def update_track(self, measurement, dt, q, r):
        if self.track is None:
            rng_, v, a = measurement
            self.track = TrackState(
                x=np.array([rng_, v, a]), P=np.diag([4.0, 4.0, 4.0]))
        else:
            self.track = track_victim(self.track, measurement, dt, q, r)
        return self.track
