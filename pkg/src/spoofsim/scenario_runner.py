"""Closed-loop driving scenarios against roadside radar spoofers.

One frame of simulated time runs the whole chain: world kinematics, the
victim's chirp frame (optionally phase-hopped by the challenge defense),
attacker sensing/tracking/scheduling, channel propagation, range-Doppler
detection, verification, obstacle tracking, planning, and vehicle motion.
Everything derives from the scenario seed; two runs of the same config
produce byte-identical exports.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .adversary import (
    InfeasibleSchedule,
    StrategyConfig,
    TrackState,
    cv_process_noise,
    default_template,
    emission_from_command,
    plan_attack,
    schedule_delay,
    sense_victim,
    solve_power_split,
    track_victim,
)
from .airsim import (
    DEFAULT_ATTACKER_FINGERPRINT,
    AttackerNode,
    HardwareFingerprint,
    LinkBudget,
    Reflector,
    fov_penalty,
    propagate_frame,
    received_attacker_power,
)
from .av_stack import (
    ObstacleTracker,
    PlannerParams,
    Road,
    TrackerConfig,
    VehicleState,
    decide,
    roi_filter,
    step_vehicle,
)
from .defense import (
    DEFAULT_CONCENTRATION_THRESHOLD,
    FingerprintModel,
    frame_is_spoofed,
    issue_challenge,
    verify_frame,
)
from .radar_dsp import ArrayGeometry, PointCloud, detect, point_cloud, range_doppler
from .signalcore import C_LIGHT, BasebandSignal, ChirpParams, make_chirp, rng_stream

_ROLE_ATT_MEAS = 0xA77ACC
_ROLE_JITTER = 0x171E12
_ROLE_SENSE = 0x5E25E2

# Collision box: bumper-point contact once the gap closes below these.
COLLISION_DX_M = 0.5
COLLISION_DY_M = 1.0

# Attacker sensing link: per-sample SNR of the victim chirp at 20 m standoff.
SENSE_SNR_DB_AT_20M = 20.0
SENSE_OVERSAMPLE = 8

ANCHOR_KINDS = ("victim", "world", "obstacle")
OUTCOME_KINDS = (
    "no_effect", "attack_detected", "stalled",
    "hard_braked", "lane_changed", "collision",
)


# ---------------------------------------------------------------------------
# configuration


@dataclass
class VehicleSpec:
    """Victim's starting state. x_m is the bumper position along the road."""

    x_m: float = 0.0
    lane: int = 0
    speed_mps: float = 0.0
    set_speed_mps: float = 13.9

    def __post_init__(self):
        if self.speed_mps < 0 or self.set_speed_mps <= 0:
            raise ValueError("vehicle speeds must be non-negative (set speed positive)")


@dataclass
class ObstacleSpec:
    """A genuine reflector on the road, moving at constant speed."""

    x_m: float
    lane: int = 0
    speed_mps: float = 0.0
    reflectivity: float = 1.0e6

    def x_at(self, t: float) -> float:
        return self.x_m + self.speed_mps * t


@dataclass
class TrafficLightSpec:
    stop_line_m: float
    green_at_s: float

    def __post_init__(self):
        if self.green_at_s < 0:
            raise ValueError("green_at_s must be non-negative")


@dataclass
class NodeSpec:
    """One attacker radio at a fixed roadside position (world frame)."""

    x_m: float
    y_m: float
    tx_power_w: float = 1.0
    antenna_gain_dbi: float = 23.0
    cfo_hz: float = 0.0
    phase_offset_rad: float = 0.0
    clock_skew: float = 0.0
    sensing_latency_s: float = 65e-9
    switch_latency_s: float = 10e-9
    hardware: str = "default"

    def __post_init__(self):
        if self.tx_power_w < 0:
            raise ValueError("tx_power_w must be non-negative")
        if self.hardware not in ("default", "ideal"):
            raise ValueError(f"hardware must be 'default' or 'ideal', got {self.hardware!r}")

    def impairment(self) -> HardwareFingerprint:
        if self.hardware == "ideal":
            return HardwareFingerprint()
        return DEFAULT_ATTACKER_FINGERPRINT


@dataclass
class StrategySpec:
    """What the group spoofs and how the phantom is anchored.

    anchor 'victim' keeps the phantom at a fixed range ahead of the victim;
    'world' drops it at d_spoof_m ahead of the victim when the group first
    activates and lets it drive at ground_speed_mps; 'obstacle' overlays the
    phantom on a genuine obstacle and steers its bearing sideways by
    deviate_lateral_m (requires two nodes, asynchronous_pair).
    """

    kind: str = "add_obstacle"
    d_spoof_m: float = 30.0
    v_spoof_mps: float = 0.0
    power_scale: float = 1.0
    n_obstacles: int = 4
    spacing_m: float = 10.0
    noise_seed: int = 1
    perfect_sync: bool = False
    min_lag: int = 1
    max_lag: int = 8
    anchor: str = "victim"
    ground_speed_mps: float = 0.0
    anchor_obstacle: int = 0
    deviate_lateral_m: float = 3.5
    margin_db: float = 15.0
    jitter_m: float = 0.15

    def __post_init__(self):
        if self.anchor not in ANCHOR_KINDS:
            raise ValueError(f"anchor must be one of {ANCHOR_KINDS}, got {self.anchor!r}")
        if self.jitter_m < 0:
            raise ValueError("jitter_m must be non-negative")
        if self.margin_db < 0:
            raise ValueError("margin_db must be non-negative")


@dataclass
class AttackerGroupSpec:
    """A set of cooperating nodes running one strategy over a time window."""

    nodes: list
    strategy: StrategySpec
    active_from_s: float = 0.0
    active_until_s: float | None = None

    def __post_init__(self):
        if not self.nodes:
            raise ValueError("attacker group needs at least one node")
        if self.active_until_s is not None and self.active_until_s <= self.active_from_s:
            raise ValueError("active_until_s must exceed active_from_s")


@dataclass
class DefenseSpec:
    challenge_response: bool = False
    fingerprint: bool = False
    latch_frames: int = 5
    concentration_threshold: float | None = None
    model_path: str | None = None

    def __post_init__(self):
        if self.latch_frames < 1:
            raise ValueError("latch_frames must be at least 1")


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    seed: int = 1
    duration_s: float = 5.0
    road: Road = field(default_factory=Road)
    victim: VehicleSpec = field(default_factory=VehicleSpec)
    obstacles: list = field(default_factory=list)
    traffic_light: TrafficLightSpec | None = None
    attackers: list = field(default_factory=list)
    defense: DefenseSpec = field(default_factory=DefenseSpec)
    noise_floor_w: float = 1e-9

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        if not 0 <= self.victim.lane < self.road.n_lanes:
            raise ValueError("victim lane outside the road")
        for i, ob in enumerate(self.obstacles):
            if not 0 <= ob.lane < self.road.n_lanes:
                raise ValueError(f"obstacles[{i}] lane outside the road")
        for gi, grp in enumerate(self.attackers):
            st = grp.strategy
            if st.anchor == "obstacle" and not 0 <= st.anchor_obstacle < len(self.obstacles):
                raise ValueError(f"attackers[{gi}] anchor_obstacle index out of range")


def _from_dict(cls, d, ctx):
    if not isinstance(d, dict):
        raise ValueError(f"{ctx} must be a JSON object")
    names = [f.name for f in fields(cls)]
    unknown = sorted(set(d) - set(names))
    if unknown:
        raise ValueError(f"unknown key(s) {unknown} in {ctx}; expected a subset of {sorted(names)}")
    return cls(**d)


def scenario_from_dict(raw: dict) -> ScenarioConfig:
    """Build and validate a ScenarioConfig from parsed JSON."""
    if not isinstance(raw, dict):
        raise ValueError("scenario config must be a JSON object")
    d = dict(raw)
    kw: dict = {}
    if "road" in d:
        kw["road"] = _from_dict(Road, d.pop("road"), "road")
    if "victim" in d:
        kw["victim"] = _from_dict(VehicleSpec, d.pop("victim"), "victim")
    if "traffic_light" in d:
        tl = d.pop("traffic_light")
        kw["traffic_light"] = None if tl is None else _from_dict(TrafficLightSpec, tl, "traffic_light")
    if "defense" in d:
        kw["defense"] = _from_dict(DefenseSpec, d.pop("defense"), "defense")
    if "obstacles" in d:
        obs = d.pop("obstacles")
        if not isinstance(obs, list):
            raise ValueError("obstacles must be a list")
        kw["obstacles"] = [_from_dict(ObstacleSpec, o, f"obstacles[{i}]") for i, o in enumerate(obs)]
    if "attackers" in d:
        groups = d.pop("attackers")
        if not isinstance(groups, list):
            raise ValueError("attackers must be a list")
        built = []
        for gi, g in enumerate(groups):
            if not isinstance(g, dict):
                raise ValueError(f"attackers[{gi}] must be a JSON object")
            g = dict(g)
            nodes = g.pop("nodes", None)
            strat = g.pop("strategy", None)
            if not isinstance(nodes, list) or strat is None:
                raise ValueError(f"attackers[{gi}] needs 'nodes' (list) and 'strategy'")
            g["nodes"] = [_from_dict(NodeSpec, n, f"attackers[{gi}].nodes[{ni}]")
                          for ni, n in enumerate(nodes)]
            g["strategy"] = _from_dict(StrategySpec, strat, f"attackers[{gi}].strategy")
            built.append(_from_dict(AttackerGroupSpec, g, f"attackers[{gi}]"))
        kw["attackers"] = built
    names = sorted(f.name for f in fields(ScenarioConfig))
    unknown = sorted(set(d) - set(names))
    if unknown:
        raise ValueError(f"unknown key(s) {unknown} in scenario; expected a subset of {names}")
    return ScenarioConfig(**d, **kw)


def bundled_scenarios() -> list:
    """Names of the scenario configs shipped inside the package."""
    root = resources.files("spoofsim") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir()
                  if p.name.endswith(".json") and p.name != "fingerprint_model.json")


def load_config(path_or_name) -> ScenarioConfig:
    """Read a scenario JSON from a file path or a bundled scenario name."""
    p = Path(path_or_name)
    if p.exists():
        text = p.read_text()
    else:
        res = resources.files("spoofsim") / "scenarios" / f"{p.name}.json"
        if not res.is_file():
            raise FileNotFoundError(
                f"no such config file {path_or_name!r}; bundled scenarios: {bundled_scenarios()}")
        text = res.read_text()
    return scenario_from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# run log


@dataclass
class FrameRecord:
    frame_id: int
    timestamp: float
    x_m: float
    y_m: float
    speed_mps: float
    lane_id: int
    decision: str
    accel_mps2: float
    ttc_s: float
    n_detections: int
    n_flagged: int
    frame_flagged: bool
    force_stop: bool


@dataclass
class RunLog:
    """Everything a scenario run produced, ready for export or assertions."""

    config: ScenarioConfig
    frames: list = field(default_factory=list)
    clouds: list = field(default_factory=list)
    events: list = field(default_factory=list)
    captures: list = field(default_factory=list)
    outcome: str = "no_effect"
    collision_frame: int | None = None
    detect_frame: int | None = None
    first_attack_frame: int | None = None
    infeasible_frames: int = 0

    @property
    def min_ttc_s(self) -> float:
        return min((fr.ttc_s for fr in self.frames), default=math.inf)

    @property
    def speeds(self) -> np.ndarray:
        return np.array([fr.speed_mps for fr in self.frames])

    @property
    def times(self) -> np.ndarray:
        return np.array([fr.timestamp for fr in self.frames])

    def decisions_of_kind(self, kind: str) -> list:
        return [ev for ev in self.events if ev.kind == kind]

    def summary(self) -> dict:
        cfg = self.config
        T = ChirpParams().frame_period
        min_ttc = self.min_ttc_s
        detect_t = None if self.detect_frame is None else self.detect_frame * T
        attack_t = None if self.first_attack_frame is None else self.first_attack_frame * T
        latency = None
        if detect_t is not None and attack_t is not None:
            latency = detect_t - attack_t
        return {
            "name": cfg.name,
            "seed": cfg.seed,
            "outcome": self.outcome,
            "n_frames": len(self.frames),
            "duration_s": round(len(self.frames) * T, 6),
            "min_ttc_s": None if math.isinf(min_ttc) else round(min_ttc, 6),
            "hard_brake_count": len(self.decisions_of_kind("hard_brake")),
            "lane_change_count": len(self.decisions_of_kind("lane_change")),
            "collision_time_s": None if self.collision_frame is None
            else round(self.collision_frame * T, 6),
            "attack_start_time_s": None if attack_t is None else round(attack_t, 6),
            "attack_detected_time_s": None if detect_t is None else round(detect_t, 6),
            "defense_latency_s": None if latency is None else round(latency, 6),
            "speed_min_mps": round(float(self.speeds.min()), 6) if self.frames else None,
            "speed_final_mps": round(float(self.speeds[-1]), 6) if self.frames else None,
            "frames_flagged": sum(fr.frame_flagged for fr in self.frames),
            "detections_total": sum(fr.n_detections for fr in self.frames),
            "detections_flagged": sum(fr.n_flagged for fr in self.frames),
            "infeasible_frames": self.infeasible_frames,
            "challenge_response": cfg.defense.challenge_response,
            "fingerprint": cfg.defense.fingerprint,
        }


# ---------------------------------------------------------------------------
# attacker group runtime


class _GroupState:
    """Mutable per-run state of one attacker group."""

    def __init__(self, spec: AttackerGroupSpec, index: int):
        self.spec = spec
        self.index = index
        self.impairments = [n.impairment() for n in spec.nodes]
        self.locked = False
        self.track: TrackState | None = None
        self.t_on: float | None = None
        self.anchor_x: float | None = None
        self.anchor_y = 0.0
        self.lock_frame: int | None = None

    def active(self, t: float) -> bool:
        s = self.spec
        return s.active_from_s <= t and (s.active_until_s is None or t < s.active_until_s)


_R_ATT = np.diag([0.3 ** 2, 0.3 ** 2, 1.0 ** 2])


def _victim_from_node(node: NodeSpec, veh: VehicleState, vy: float):
    """True (range, radial rate, bearing) of the victim as the node sees it."""
    dx = veh.x - node.x_m
    dy = veh.y - node.y_m
    r = max(math.hypot(dx, dy), 0.25)
    rv = (veh.speed * dx + vy * dy) / r
    ang = math.degrees(math.atan2(dy, dx))
    return r, rv, ang


def _try_lock(gs: _GroupState, veh: VehicleState, params: ChirpParams,
              template: BasebandSignal, chirp: BasebandSignal, seed: int, k: int) -> bool:
    """Attempt to detect the victim chirp at the group's first node."""
    node = gs.spec.nodes[0]
    d = max(math.hypot(node.x_m - veh.x, node.y_m - veh.y), 1.0)
    fs = template.sample_rate
    n = chirp.samples.size
    off = int(round(d / C_LIGHT * fs))
    n_win = n + 512
    if off + template.samples.size >= n_win:
        return False
    rng = rng_stream(seed, _ROLE_SENSE, gs.index, k)
    win = (rng.standard_normal(n_win) + 1j * rng.standard_normal(n_win)) / math.sqrt(2.0)
    snr_db = SENSE_SNR_DB_AT_20M - 20.0 * math.log10(d / 20.0)
    amp = 10.0 ** (snr_db / 20.0)
    stop = min(n_win, off + n)
    win[off:stop] += amp * chirp.samples[: stop - off]
    hit = sense_victim(BasebandSignal(win, fs, 0.0), template)
    return hit is not None


def _update_track(gs: _GroupState, veh: VehicleState, vy: float, t: float,
                  dt: float, seed: int, k: int) -> None:
    node = gs.spec.nodes[0]
    r, rv, ang = _victim_from_node(node, veh, vy)
    rng = rng_stream(seed, _ROLE_ATT_MEAS, gs.index, k)
    meas = np.array([
        r + rng.normal(0.0, 0.3),
        rv + rng.normal(0.0, 0.3),
        ang + rng.normal(0.0, 1.0),
    ])
    meas[0] = max(meas[0], 0.1)
    if gs.track is None:
        gs.track = TrackState(x=meas, P=np.diag([4.0, 4.0, 4.0]), t=t)
    else:
        gs.track = track_victim(gs.track, meas, dt, cv_process_noise(dt), _R_ATT)


def _live_nodes(gs: _GroupState, veh: VehicleState) -> list:
    """AttackerNode instances with range/bearing relative to the victim now."""
    out = []
    for spec, imp in zip(gs.spec.nodes, gs.impairments):
        dx = spec.x_m - veh.x
        dy = spec.y_m - veh.y
        out.append(AttackerNode(
            range_m=max(math.hypot(dx, dy), 0.25),
            angle_deg=math.degrees(math.atan2(dy, dx)),
            tx_power_w=spec.tx_power_w,
            antenna_gain_dbi=spec.antenna_gain_dbi,
            cfo_hz=spec.cfo_hz,
            phase_offset_rad=spec.phase_offset_rad,
            clock_skew=spec.clock_skew,
            sensing_latency_s=spec.sensing_latency_s,
            switch_latency_s=spec.switch_latency_s,
            impairment=imp,
        ))
    return out


def _phantom_target(gs: _GroupState, veh: VehicleState, t: float):
    """Victim-relative (d_spoof, v_spoof) for victim/world anchored phantoms."""
    st = gs.spec.strategy
    if st.anchor == "victim":
        return st.d_spoof_m, st.v_spoof_mps
    x_ph = gs.anchor_x + st.ground_speed_mps * (t - gs.t_on)
    d = x_ph - veh.x
    if d < 2.0:
        return None, None  # phantom overrun, nothing sensible to body there
    return d, st.ground_speed_mps - veh.speed


def _deviation_strategy(gs: _GroupState, veh: VehicleState, vy: float, t: float,
                        cfg: ScenarioConfig, nodes_live: list,
                        geometry: ArrayGeometry, budget: LinkBudget):
    """Per-frame pair strategy that drags a genuine echo sideways in bearing.

    Solves the two-node power split whose merged MUSIC peak lands at the
    bearing of a point deviate_lateral_m beside the obstacle. Falls back to
    an edge split when the target is outside the reachable span, and retries
    at reduced total power when a node's hardware limit would be exceeded.
    """
    st = gs.spec.strategy
    ob = cfg.obstacles[st.anchor_obstacle]
    dx = ob.x_at(t) - veh.x
    dy = cfg.road.lane_center(ob.lane) - veh.y
    if dx < 3.0:
        return None
    g = math.hypot(dx, dy)
    th_obs = math.degrees(math.atan2(dy, dx))
    rv_obs = ((ob.speed_mps - veh.speed) * dx + (0.0 - vy) * dy) / g

    side = 1.0 if (gs.spec.nodes[0].y_m + gs.spec.nodes[1].y_m) / 2.0 >= cfg.road.lane_center(ob.lane) else -1.0
    y_target = cfg.road.lane_center(ob.lane) + side * st.deviate_lateral_m
    s = max(-0.93, min(0.93, (y_target - veh.y) / g))
    theta_star = math.degrees(math.asin(s))

    th1, th2 = nodes_live[0].angle_deg, nodes_live[1].angle_deg
    lo, hi = min(th1, th2), max(th1, th2)
    if hi - lo < 0.3:
        return None  # bearings collapsed, no lever arm to steer with
    target = max(lo + 0.1, min(hi - 0.1, theta_star))

    p_echo = ob.reflectivity ** 2 / budget.two_way_loss(g)
    pair_total = 10.0 ** (st.margin_db / 10.0) * p_echo
    rcv = [received_attacker_power(n, budget) * fov_penalty(n.angle_deg) for n in nodes_live[:2]]
    rcv = [max(r, 1e-18) for r in rcv]

    split = None
    total = pair_total
    for _ in range(2):
        try:
            p1, p2 = solve_power_split(th1, th2, target, geometry,
                                       total_power=total, echo=(th_obs, p_echo))
        except ValueError:
            near1 = abs(th1 - target) <= abs(th2 - target)
            p1, p2 = (0.98 * total, 0.02 * total) if near1 else (0.02 * total, 0.98 * total)
        raw1, raw2 = p1 / rcv[0], p2 / rcv[1]
        cap = max(raw1, raw2)
        split = (raw1, raw2)
        if cap <= 1.0:
            break
        total = pair_total / cap  # keep the bearing, concede margin
    scale = min(1.0, max(split))
    return StrategyConfig(
        kind="asynchronous_pair", d_spoof=g, v_spoof=rv_obs,
        power_split=split, power_scale=scale, noise_seed=st.noise_seed,
        min_lag=st.min_lag, max_lag=st.max_lag,
    )


def _group_emissions(gs: _GroupState, veh: VehicleState, vy: float, t: float, k: int,
                     cfg: ScenarioConfig, params: ChirpParams, phi_hist: dict,
                     geometry: ArrayGeometry, budget: LinkBudget,
                     template: BasebandSignal, chirp: BasebandSignal, log: RunLog) -> list:
    st = gs.spec.strategy
    if gs.t_on is None:
        gs.t_on = t
        if st.anchor == "world":
            gs.anchor_x = veh.x + st.d_spoof_m
            gs.anchor_y = veh.y
    if not gs.locked:
        gs.locked = _try_lock(gs, veh, params, template, chirp, cfg.seed, k)
        if not gs.locked:
            return []
        gs.lock_frame = k
    _update_track(gs, veh, vy, t, params.frame_period, cfg.seed, k)
    nodes_live = _live_nodes(gs, veh)

    if st.anchor == "obstacle":
        strat = _deviation_strategy(gs, veh, vy, t, cfg, nodes_live, geometry, budget)
        if strat is None:
            return []
    else:
        d_sp, v_sp = _phantom_target(gs, veh, t)
        if d_sp is None:
            return []
        strat = StrategyConfig(
            kind=st.kind, d_spoof=d_sp, v_spoof=v_sp, power_scale=st.power_scale,
            n_obstacles=st.n_obstacles, spacing_m=st.spacing_m, noise_seed=st.noise_seed,
            perfect_sync=st.perfect_sync, min_lag=st.min_lag, max_lag=st.max_lag,
        )

    if st.jitter_m > 0:
        jit = float(rng_stream(cfg.seed, _ROLE_JITTER, gs.index, k).normal(0.0, st.jitter_m))
        strat = replace(strat, d_spoof=max(strat.d_spoof + jit, 1.0))

    try:
        lag, _fine = schedule_delay(gs.track, nodes_live[0], strat.d_spoof,
                                    params.frame_period, st.min_lag, st.max_lag)
    except InfeasibleSchedule:
        log.infeasible_frames += 1
        return []

    cmds = plan_attack(strat, gs.track, k, nodes_live, params)
    # The challenge phases the attacker replays are stale by the frame lag.
    phi_known = phi_hist.get(k - lag, params.phi_init)
    out = []
    for cmd in cmds:
        em = emission_from_command(cmd, params, phi_tx=phi_known)
        if em is not None:
            out.append((nodes_live[cmd.node_index], em))
    return out


# ---------------------------------------------------------------------------
# world helpers


def _world_reflectors(cfg: ScenarioConfig, t: float, veh: VehicleState, vy: float) -> list:
    out = []
    for ob in cfg.obstacles:
        dx = ob.x_at(t) - veh.x
        if dx <= 0.5:
            continue
        dy = cfg.road.lane_center(ob.lane) - veh.y
        r = max(math.hypot(dx, dy), 1.0)
        if r > cfg.road.horizon_m + 40.0:
            continue
        rv = ((ob.speed_mps - veh.speed) * dx + (0.0 - vy) * dy) / r
        out.append(Reflector(
            range_m=r,
            radial_velocity=rv,
            angle_deg=math.degrees(math.atan2(dy, dx)),
            reflectivity=ob.reflectivity,
        ))
    return out


def _percept_ttc(tracks, veh: VehicleState, road: Road, planner: PlannerParams) -> float:
    """Time to contact against the planner's own obstacle picture."""
    half = road.lane_width / 2.0 + planner.max_nudge
    center = road.lane_center(veh.lane_id)
    best = math.inf
    for tr in tracks:
        dx = tr.state[0] - veh.x
        if dx <= 0:
            continue
        if abs(tr.state[1] - center) > half:
            continue
        closing = veh.speed - tr.state[2]
        if closing <= 0.1:
            continue
        best = min(best, (dx - COLLISION_DX_M) / closing)
    return best


def _check_collision(cfg: ScenarioConfig, t: float, veh: VehicleState) -> bool:
    for ob in cfg.obstacles:
        if abs(ob.x_at(t) - veh.x) < COLLISION_DX_M and \
           abs(cfg.road.lane_center(ob.lane) - veh.y) < COLLISION_DY_M:
            return True
    return False


def _load_fingerprint_model(spec: DefenseSpec) -> FingerprintModel:
    if spec.model_path is not None:
        return FingerprintModel.from_json(Path(spec.model_path).read_text())
    res = resources.files("spoofsim") / "scenarios" / "fingerprint_model.json"
    return FingerprintModel.from_json(res.read_text())


# ---------------------------------------------------------------------------
# the loop


def run(cfg: ScenarioConfig, capture_every: int = 0) -> RunLog:
    """Simulate one scenario end to end and classify its outcome.

    capture_every > 0 additionally records every Nth post-mix cube
    (complex64) into RunLog.captures for later offline verification.
    """
    params = ChirpParams()
    T = params.frame_period
    geometry = ArrayGeometry()
    budget = LinkBudget(wavelength=C_LIGHT / params.f_start, noise_floor_w=cfg.noise_floor_w)
    planner = PlannerParams()
    tracker = ObstacleTracker(TrackerConfig())
    road = cfg.road

    veh = VehicleState(
        x=cfg.victim.x_m, y=road.lane_center(cfg.victim.lane),
        speed=cfg.victim.speed_mps, lane_id=cfg.victim.lane,
        set_speed=cfg.victim.set_speed_mps,
    )
    if cfg.victim.speed_mps == 0:
        veh.mode = "stopped"

    defense = cfg.defense
    cr = defense.challenge_response
    fp = defense.fingerprint
    threshold = (DEFAULT_CONCENTRATION_THRESHOLD if defense.concentration_threshold is None
                 else defense.concentration_threshold)
    model = _load_fingerprint_model(defense) if fp else None

    fs_sense = SENSE_OVERSAMPLE * 256 / params.t_chirp
    template = default_template(params, fs_sense)
    sense_chirp = make_chirp(params, 0, fs_sense)

    groups = [_GroupState(g, i) for i, g in enumerate(cfg.attackers)]
    log = RunLog(config=cfg)
    phi_hist: dict = {}
    cr_streak = fp_streak = 0
    n_frames = int(round(cfg.duration_s / T))
    vy_prev = veh.y

    for k in range(n_frames):
        t = k * T
        chirp_k = issue_challenge(params, cfg.seed, k) if cr else params
        phi_hist[k] = chirp_k.phi_init
        vy = (veh.y - vy_prev) / T if k else 0.0
        vy_prev = veh.y

        reflectors = _world_reflectors(cfg, t, veh, vy)
        emissions = []
        for gs in groups:
            if not gs.active(t):
                continue
            ems = _group_emissions(gs, veh, vy, t, k, cfg, params, phi_hist,
                                   geometry, budget, template, sense_chirp, log)
            if ems and log.first_attack_frame is None:
                log.first_attack_frame = k
            emissions.extend(ems)

        cube = propagate_frame(chirp_k, reflectors, emissions, geometry, budget,
                               seed=cfg.seed, frame_id=k, timestamp=t)
        if capture_every > 0 and k % capture_every == 0:
            log.captures.append((k, t, cube.data.astype(np.complex64)))
        rd = range_doppler(cube)
        bins = detect(rd)
        pc = point_cloud(rd, bins, geometry)

        n_flag = 0
        if cr and bins:
            vr = verify_frame(rd, bins, threshold)
            by_bin = {tuple(b): fl for b, fl in zip(bins, vr.flags)}
            for det in pc.detections:
                det.flagged = by_bin.get((det.range_bin, det.velocity_bin), False)
            n_flag = sum(d.flagged for d in pc.detections)
        cr_streak = cr_streak + 1 if (cr and n_flag) else 0

        # Fingerprinting judges the transmitter behind a detection; a frame
        # with no detections has nothing to classify. 32 sampled chirps keep
        # the verdict stable at a quarter of the full-frame feature cost.
        frame_bad = False
        if fp and pc.detections:
            frame_bad = frame_is_spoofed(
                model, cube.data, n_sample=32, noise_floor_w=cfg.noise_floor_w
            )
        fp_streak = fp_streak + 1 if frame_bad else 0

        if log.detect_frame is None and \
                (cr_streak >= defense.latch_frames or fp_streak >= defense.latch_frames):
            log.detect_frame = k

        kept = PointCloud(k, t, [d for d in pc.detections if not d.flagged])
        roi = roi_filter(kept, road, veh, planner)
        confirmed = tracker.step(roi, veh, T)

        red_light = cfg.traffic_light is not None and t < cfg.traffic_light.green_at_s
        at_line = cfg.traffic_light is not None and veh.x <= cfg.traffic_light.stop_line_m + 0.5
        force = (log.detect_frame is not None) or (red_light and at_line)

        ttc = _percept_ttc(confirmed, veh, road, planner)
        event, veh = decide(veh, confirmed, planner, road, timestamp=t, force_stop=force)
        veh = step_vehicle(veh, event, T, road, planner)

        log.events.append(event)
        log.clouds.append(pc)
        log.frames.append(FrameRecord(
            frame_id=k, timestamp=t, x_m=veh.x, y_m=veh.y, speed_mps=veh.speed,
            lane_id=veh.lane_id, decision=event.kind, accel_mps2=veh.accel,
            ttc_s=ttc, n_detections=len(pc.detections), n_flagged=n_flag,
            frame_flagged=bool(frame_bad or (cr and n_flag > 0)), force_stop=force,
        ))
        if _check_collision(cfg, t + T, veh):
            log.collision_frame = k
            break

    log.outcome = classify_outcome(log)
    return log


def classify_outcome(log: RunLog) -> str:
    """Collapse a run to its most severe observed effect.

    Severity order, worst first: collision, attack_detected, stalled,
    hard_braked, lane_changed, no_effect. attack_detected outranks the
    driving effects because a latched defense stops the vehicle on purpose;
    what the planner did afterwards is not attack damage.
    """
    if log.collision_frame is not None:
        return "collision"
    if log.detect_frame is not None:
        return "attack_detected"
    cfg = log.config
    if cfg.traffic_light is not None and log.frames:
        T = ChirpParams().frame_period
        green = cfg.traffic_light.green_at_s
        horizon = green + 0.75
        if log.frames[-1].timestamp > horizon:
            after = [fr.speed_mps for fr in log.frames if fr.timestamp >= horizon]
            if after and max(after) < 0.1:
                return "stalled"
    if log.decisions_of_kind("hard_brake"):
        return "hard_braked"
    if log.decisions_of_kind("lane_change") or (
            log.frames and log.frames[-1].lane_id != cfg.victim.lane):
        return "lane_changed"
    return "no_effect"


# ---------------------------------------------------------------------------
# exports


def export(log: RunLog, out_dir) -> dict:
    """Write pointclouds.csv, decisions.csv, speed_timeline.csv, summary.json.

    Floats are printed with six decimals so repeated runs of the same seed
    diff clean at the byte level. Returns the summary dict.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "pointclouds.csv", "w") as f:
        f.write("frame_id,timestamp,range_m,velocity_mps,angle_deg,power_db,flagged\n")
        for pc in log.clouds:
            for d in pc.detections:
                f.write(f"{pc.frame_id},{pc.timestamp:.6f},{d.range_m:.6f},"
                        f"{d.velocity_mps:.6f},{d.angle_deg:.6f},{d.power_db:.6f},"
                        f"{int(d.flagged)}\n")

    with open(out / "decisions.csv", "w") as f:
        f.write("timestamp,kind,cause,target_lane,accel_mps2\n")
        prev = None
        for ev in log.events:
            sig = (ev.kind, ev.cause, ev.target_lane)
            if sig == prev:
                continue
            prev = sig
            cause = "" if ev.cause is None else ev.cause
            lane = "" if ev.target_lane is None else ev.target_lane
            f.write(f"{ev.timestamp:.6f},{ev.kind},{cause},{lane},{ev.accel_mps2:.6f}\n")

    with open(out / "speed_timeline.csv", "w") as f:
        f.write("timestamp,speed_mps,x_m,lane_id\n")
        for fr in log.frames:
            f.write(f"{fr.timestamp:.6f},{fr.speed_mps:.6f},{fr.x_m:.6f},{fr.lane_id}\n")

    summary = log.summary()
    with open(out / "summary.json", "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    return summary


def save_capture(log: RunLog, path) -> None:
    """Persist the recorded cubes plus the waveform metadata as one .npz."""
    if not log.captures:
        raise ValueError("run recorded no cubes; pass capture_every > 0 to run()")
    p = ChirpParams()
    np.savez_compressed(
        Path(path),
        data=np.stack([c[2] for c in log.captures]),
        frame_ids=np.array([c[0] for c in log.captures], dtype=np.int64),
        timestamps=np.array([c[1] for c in log.captures]),
        sample_rate=256 / p.t_chirp,
        f_start=p.f_start, bandwidth=p.bandwidth, t_chirp=p.t_chirp,
        inter_chirp=p.inter_chirp, n_chirps=p.n_chirps, frame_period=p.frame_period,
        seed=log.config.seed,
        challenge=int(log.config.defense.challenge_response),
        noise_floor_w=log.config.noise_floor_w,
    )


def verify_capture(path, threshold: float | None = None, model_path: str | None = None) -> list:
    """Defense-only pass over a recorded capture; one report dict per frame.

    Runs the Doppler-concentration verifier on every detection of every
    stored cube, and the hardware fingerprint classifier when a model is
    given. Works on captures taken with or without the challenge active,
    but concentration only separates spoofs when the phases were hopped.
    """
    from .radar_dsp import IQCube

    z = np.load(Path(path))
    params = ChirpParams(
        f_start=float(z["f_start"]), bandwidth=float(z["bandwidth"]),
        t_chirp=float(z["t_chirp"]), inter_chirp=float(z["inter_chirp"]),
        n_chirps=int(z["n_chirps"]), frame_period=float(z["frame_period"]),
    )
    thr = DEFAULT_CONCENTRATION_THRESHOLD if threshold is None else threshold
    model = None
    if model_path is not None:
        model = FingerprintModel.from_json(Path(model_path).read_text())
    reports = []
    for i in range(z["data"].shape[0]):
        cube = IQCube(np.asarray(z["data"][i], dtype=complex), float(z["sample_rate"]),
                      params, int(z["frame_ids"][i]), float(z["timestamps"][i]))
        rd = range_doppler(cube)
        bins = detect(rd)
        vr = verify_frame(rd, bins, thr)
        rep = {
            "frame_id": int(z["frame_ids"][i]),
            "timestamp": float(z["timestamps"][i]),
            "n_detections": len(bins),
            "n_flagged": int(sum(vr.flags)),
            "concentrations": [round(c, 4) for c in vr.concentrations],
            "spoofed": bool(vr.any_flagged),
        }
        if model is not None:
            floor = float(z["noise_floor_w"]) if "noise_floor_w" in z else 1e-9
            rep["fingerprint_spoofed"] = bool(
                frame_is_spoofed(model, cube.data, noise_floor_w=floor)
            )
        reports.append(rep)
    return reports


# ---------------------------------------------------------------------------
# sweeps


def set_by_path(cfg: ScenarioConfig, path: str, value) -> ScenarioConfig:
    """Deep-copy cfg and set a dotted attribute path, e.g.
    'attackers.0.strategy.d_spoof_m'. List indices are path segments."""
    new = copy.deepcopy(cfg)
    parts = path.split(".")
    obj = new
    for part in parts[:-1]:
        obj = obj[int(part)] if part.isdigit() else getattr(obj, part)
    last = parts[-1]
    if last.isdigit():
        obj[int(last)] = value
    else:
        if not hasattr(obj, last):
            raise AttributeError(f"config has no field {path!r}")
        setattr(obj, last, value)
    return new


def sweep(cfg: ScenarioConfig, param_path: str, values) -> list:
    """Run the scenario once per value of the swept parameter."""
    logs = []
    for v in values:
        logs.append(run(set_by_path(cfg, param_path, v)))
    return logs
