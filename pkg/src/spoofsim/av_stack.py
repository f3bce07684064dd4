"""Surrogate of the victim vehicle's perception and planning stack.

Radar point clouds pass through a region-of-interest corridor filter, gated
Hungarian track matching, and per-track constant-velocity Kalman filters.
A rule-based planner built around the piecewise obstacle cost then issues
one driving decision per tick and integrates simple point-mass kinematics.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .radar_dsp import Detection, PointCloud

BIG_COST = 1e9  # forbidden assignment sentinel for the gated matcher

DECISION_KINDS = (
    "hold_stop",
    "proceed",
    "soft_brake",
    "hard_brake",
    "lane_change",
    "side_pass",
    "accelerate",
    "decelerate",
    "maintain",
)


@dataclass
class PlannerParams:
    """Planner tuning; distances in metres, costs dimensionless."""

    min_lane_change_length: float = 5.0
    min_lane_change_prepare: float = 60.0
    follow_min_distance: float = 3.0
    min_stop_distance_obstacle: float = 6.0
    max_stop_distance_obstacle: float = 10.0
    lane_change_prepare_length: float = 80.0
    min_nudge: float = 0.2
    max_nudge: float = 1.1
    min_yield: float = 5.0
    c_nudge: float = 1.0
    c_collision: float = 1e3
    d_n: float = 10.0
    d_c: float = 6.0
    hold_stop_range: float = 15.0
    reaction_ttc_s: float = 2.3
    hard_brake_mps2: float = -6.0
    max_accel_mps2: float = 2.0
    comfort_decel_mps2: float = 2.0
    jerk_limit_mps3: float = 20.0
    lane_change_penalty: float = 5.0

    def __post_init__(self):
        if self.d_c >= self.d_n:
            raise ValueError("d_c must be smaller than d_n")
        for name in ("min_lane_change_length", "follow_min_distance",
                     "min_stop_distance_obstacle", "max_stop_distance_obstacle",
                     "min_nudge", "max_nudge", "min_yield", "d_n", "d_c"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class Road:
    """Straight multi-lane road along +x; lane 0 centered at y = 0."""

    n_lanes: int = 2
    lane_width: float = 3.7
    horizon_m: float = 120.0
    lane_change_threshold: float = 25.0

    def lane_center(self, lane_id: int) -> float:
        if not 0 <= lane_id < self.n_lanes:
            raise ValueError(f"lane_id {lane_id} outside road")
        return lane_id * self.lane_width

    def adjacent_lanes(self, lane_id: int):
        return [l for l in (lane_id - 1, lane_id + 1) if 0 <= l < self.n_lanes]


@dataclass
class VehicleState:
    x: float = 0.0
    y: float = 0.0
    speed: float = 0.0
    lane_id: int = 0
    set_speed: float = 13.9
    mode: str = "cruising"
    accel: float = 0.0
    target_lane: int | None = None

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("speed must be non-negative")


@dataclass
class DecisionEvent:
    timestamp: float
    kind: str
    cause: int | None = None
    target_lane: int | None = None
    accel_mps2: float = 0.0

    def __post_init__(self):
        if self.kind not in DECISION_KINDS:
            raise ValueError(f"unknown decision kind: {self.kind!r}")


@dataclass
class ObstacleTrack:
    """One tracked object; constant-velocity filter over (x, y)."""

    id: int
    state: np.ndarray  # [x, y, vx, vy]
    cov: np.ndarray  # 4x4
    age: int = 1
    hits: int = 1
    last_seen: int = 0

    def __post_init__(self):
        self.state = np.asarray(self.state, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        if self.age < 1:
            raise ValueError("age must be at least 1")

    @property
    def position(self):
        return self.state[:2].copy()

    @property
    def velocity(self):
        return self.state[2:].copy()


@dataclass
class TrackerConfig:
    gate_m: float = 2.0
    confirm_hits: int = 2
    prune_after: int = 24
    accel_psd: float = 4.0
    meas_pos_std: float = 0.35
    meas_vel_std: float = 0.5
    init_pos_std: float = 1.0
    init_vel_std: float = 3.0


def detection_to_xy(det: Detection, vehicle: VehicleState):
    """Polar radar return to road-frame coordinates (sensor at the bumper)."""
    th = np.deg2rad(det.angle_deg)
    return (vehicle.x + det.range_m * np.cos(th),
            vehicle.y + det.range_m * np.sin(th))


def roi_filter(cloud: PointCloud, road: Road, vehicle: VehicleState,
               params: PlannerParams | None = None) -> PointCloud:
    """Keep detections inside the driving corridor of the current lane.

    Corridor half-width is half the lane plus the maximum nudge the planner
    would consider; anything further out cannot interact with the path.
    """
    params = params or PlannerParams()
    half = road.lane_width / 2.0 + params.max_nudge
    center = road.lane_center(vehicle.lane_id)
    kept = []
    for det in cloud.detections:
        x, y = detection_to_xy(det, vehicle)
        ahead = x - vehicle.x
        if 0.0 < ahead <= road.horizon_m and abs(y - center) <= half:
            kept.append(det)
    return PointCloud(frame_id=cloud.frame_id, timestamp=cloud.timestamp,
                      detections=kept)


def match_tracks(tracks, cloud: PointCloud, gate: float, vehicle: VehicleState | None = None):
    """Gated Hungarian association between tracks and detections.

    Returns (pairs, unmatched_tracks, unmatched_detections) where pairs is a
    list of (track_index, detection_index). Pairs further apart than the
    gate are forbidden; leftover detections seed new tracks and leftover
    tracks age out at the caller.
    """
    if gate <= 0:
        raise ValueError("gate must be positive")
    vehicle = vehicle or VehicleState()
    n_t, n_d = len(tracks), len(cloud.detections)
    if n_t == 0 or n_d == 0:
        return [], list(range(n_t)), list(range(n_d))
    cost = np.full((n_t, n_d), BIG_COST)
    for i, tr in enumerate(tracks):
        for j, det in enumerate(cloud.detections):
            xy = np.array(detection_to_xy(det, vehicle))
            d = float(np.hypot(*(xy - tr.position)))
            if d <= gate:
                cost[i, j] = d
    rows, cols = linear_sum_assignment(cost)
    pairs = [(int(i), int(j)) for i, j in zip(rows, cols) if cost[i, j] < BIG_COST]
    matched_t = {i for i, _ in pairs}
    matched_d = {j for _, j in pairs}
    return (pairs,
            [i for i in range(n_t) if i not in matched_t],
            [j for j in range(n_d) if j not in matched_d])


class ObstacleTracker:
    """Maintains the confirmed-obstacle list across frames."""

    def __init__(self, config: TrackerConfig | None = None):
        self.config = config or TrackerConfig()
        self.tracks: list[ObstacleTrack] = []
        self._next_id = 1

    def _model(self, dt):
        f = np.eye(4)
        f[0, 2] = f[1, 3] = dt
        q = np.zeros((4, 4))
        a = self.config.accel_psd
        for p, v in ((0, 2), (1, 3)):
            q[p, p] = a * dt**3 / 3
            q[p, v] = q[v, p] = a * dt**2 / 2
            q[v, v] = a * dt
        return f, q

    def _spawn(self, det: Detection, vehicle: VehicleState, frame_id: int):
        x, y = detection_to_xy(det, vehicle)
        th = np.deg2rad(det.angle_deg)
        # the radar reports relative radial rate; ego speed converts it to
        # the road frame
        vx = det.velocity_mps * np.cos(th) + vehicle.speed
        c = self.config
        track = ObstacleTrack(
            id=self._next_id,
            state=np.array([x, y, vx, 0.0]),
            cov=np.diag([c.init_pos_std**2, c.init_pos_std**2,
                         c.init_vel_std**2, c.init_vel_std**2]),
            last_seen=frame_id,
        )
        self._next_id += 1
        self.tracks.append(track)

    def step(self, cloud: PointCloud, vehicle: VehicleState, dt: float) -> list:
        """Predict, associate, update, spawn, prune. Returns confirmed tracks."""
        c = self.config
        f, q = self._model(dt)
        for tr in self.tracks:
            tr.state = f @ tr.state
            tr.cov = f @ tr.cov @ f.T + q
            tr.age += 1

        pairs, _, unmatched_d = match_tracks(self.tracks, cloud, c.gate_m, vehicle)
        h = np.zeros((3, 4))
        h[0, 0] = h[1, 1] = h[2, 2] = 1.0
        r = np.diag([c.meas_pos_std**2, c.meas_pos_std**2, c.meas_vel_std**2])
        for ti, dj in pairs:
            tr = self.tracks[ti]
            det = cloud.detections[dj]
            x, y = detection_to_xy(det, vehicle)
            th = np.deg2rad(det.angle_deg)
            z = np.array([x, y, det.velocity_mps * np.cos(th) + vehicle.speed])
            s = h @ tr.cov @ h.T + r
            k = tr.cov @ h.T @ np.linalg.inv(s)
            tr.state = tr.state + k @ (z - h @ tr.state)
            ikh = np.eye(4) - k @ h
            tr.cov = ikh @ tr.cov @ ikh.T + k @ r @ k.T
            tr.hits += 1
            tr.last_seen = cloud.frame_id

        for dj in unmatched_d:
            self._spawn(cloud.detections[dj], vehicle, cloud.frame_id)

        self.tracks = [tr for tr in self.tracks
                       if cloud.frame_id - tr.last_seen <= c.prune_after]
        return [tr for tr in self.tracks if tr.hits >= c.confirm_hits]


def obstacle_cost(d: float, params: PlannerParams) -> float:
    """Piecewise planner cost of an obstacle at distance d."""
    if d < 0:
        raise ValueError("distance must be non-negative")
    if d > params.d_n:
        return 0.0
    if d >= params.d_c:
        return params.c_nudge * (d - params.d_c)
    return params.c_collision


def _lane_obstacles(tracks, vehicle: VehicleState, road: Road,
                    params: PlannerParams, lane_id: int):
    """Confirmed tracks ahead of the vehicle inside lane_id's corridor."""
    half = road.lane_width / 2.0 + params.max_nudge
    center = road.lane_center(lane_id)
    out = []
    for tr in tracks:
        gap = tr.state[0] - vehicle.x
        if 0.0 < gap <= road.horizon_m and abs(tr.state[1] - center) <= half:
            out.append((gap, tr))
    out.sort(key=lambda p: p[0])
    return out


def lane_path_cost(tracks, vehicle: VehicleState, road: Road,
                   params: PlannerParams, lane_id: int) -> float:
    """Cost of committing to lane_id.

    A slower-than-ego obstacle in the lane makes the path converge on it, so
    the path is costed at the collision branch; a faster one is costed at the
    present gap. Non-current lanes carry the lane-change penalty.
    """
    cost = 0.0 if lane_id == vehicle.lane_id else params.lane_change_penalty
    for gap, tr in _lane_obstacles(tracks, vehicle, road, params, lane_id):
        closing = vehicle.speed - tr.state[2]
        if closing > 0.1:
            cost += params.c_collision
        else:
            cost += obstacle_cost(gap, params)
    return cost


def follow_speed(gap: float, obstacle_speed: float, params: PlannerParams) -> float:
    """Highest safe speed when trailing an obstacle by gap metres."""
    slack = max(0.0, gap - params.min_stop_distance_obstacle)
    v = obstacle_speed + np.sqrt(2.0 * params.comfort_decel_mps2 * slack)
    return max(0.0, v)


def decide(vehicle: VehicleState, tracks, params: PlannerParams, road: Road,
           timestamp: float = 0.0, force_stop: bool = False):
    """One planning tick: DecisionEvent plus the updated vehicle intent.

    Deterministic in its inputs. tracks are confirmed obstacle tracks,
    already ROI-matched upstream.
    """
    veh = replace(vehicle)

    if force_stop:
        if veh.speed <= 1e-6:
            veh.mode = "stopped"
            veh.speed = 0.0
            return DecisionEvent(timestamp, "hold_stop", cause=None), veh
        veh.mode = "braking"
        return DecisionEvent(timestamp, "soft_brake",
                             accel_mps2=-params.comfort_decel_mps2), veh

    if veh.mode == "lane_changing":
        target = veh.target_lane if veh.target_lane is not None else veh.lane_id
        if abs(veh.y - road.lane_center(target)) < 0.05:
            veh.lane_id = target
            veh.target_lane = None
            veh.mode = "cruising"
        else:
            return DecisionEvent(timestamp, "lane_change",
                                 target_lane=target), veh

    ahead = _lane_obstacles(tracks, veh, road, params, veh.lane_id)
    nearest = ahead[0] if ahead else None
    cause = nearest[1].id if nearest else None

    if veh.speed <= 1e-6:
        if nearest is not None and nearest[0] < params.hold_stop_range:
            veh.mode = "stopped"
            return DecisionEvent(timestamp, "hold_stop", cause=cause), veh
        if nearest is not None:
            for lane in road.adjacent_lanes(veh.lane_id):
                if not _lane_obstacles(tracks, veh, road, params, lane):
                    veh.mode = "cruising"
                    return DecisionEvent(timestamp, "side_pass", cause=cause,
                                         accel_mps2=params.max_accel_mps2 / 2), veh
            veh.mode = "stopped"
            return DecisionEvent(timestamp, "hold_stop", cause=cause), veh
        veh.mode = "cruising"
        return DecisionEvent(timestamp, "proceed",
                             accel_mps2=params.max_accel_mps2), veh

    if nearest is not None:
        gap, tr = nearest
        closing = veh.speed - tr.state[2]
        if closing > 1e-6 and gap / closing < params.reaction_ttc_s:
            veh.mode = "braking"
            return DecisionEvent(timestamp, "hard_brake", cause=tr.id,
                                 accel_mps2=params.hard_brake_mps2), veh

        cur_cost = lane_path_cost(tracks, veh, road, params, veh.lane_id)
        options = [(lane_path_cost(tracks, veh, road, params, lane), lane)
                   for lane in road.adjacent_lanes(veh.lane_id)]
        if options and gap <= road.lane_change_threshold:
            best_cost, best_lane = min(options)
            if best_cost < cur_cost:
                veh.mode = "lane_changing"
                veh.target_lane = best_lane
                return DecisionEvent(timestamp, "lane_change", cause=tr.id,
                                     target_lane=best_lane), veh

        v_allow = follow_speed(gap, max(0.0, tr.state[2]), params)
        if veh.speed > v_allow + 0.05:
            veh.mode = "following"
            accel = max(params.hard_brake_mps2,
                        -params.comfort_decel_mps2 * (1 + (veh.speed - v_allow)))
            return DecisionEvent(timestamp, "decelerate", cause=tr.id,
                                 accel_mps2=accel), veh
        veh.mode = "following"
        return DecisionEvent(timestamp, "maintain", cause=tr.id), veh

    if veh.speed < veh.set_speed - 0.05:
        veh.mode = "cruising"
        return DecisionEvent(timestamp, "accelerate",
                             accel_mps2=params.max_accel_mps2), veh
    veh.mode = "cruising"
    return DecisionEvent(timestamp, "maintain"), veh


def step_vehicle(vehicle: VehicleState, event: DecisionEvent, dt: float,
                 road: Road, params: PlannerParams | None = None) -> VehicleState:
    """Integrate point-mass kinematics one tick under the decision's accel."""
    params = params or PlannerParams()
    veh = replace(vehicle)
    target_a = float(np.clip(event.accel_mps2, params.hard_brake_mps2,
                             params.max_accel_mps2))
    max_da = params.jerk_limit_mps3 * dt
    a = float(np.clip(target_a, veh.accel - max_da, veh.accel + max_da))
    veh.accel = a
    new_speed = max(0.0, veh.speed + a * dt)
    veh.x += 0.5 * (veh.speed + new_speed) * dt
    veh.speed = new_speed
    if veh.speed == 0.0 and a <= 0.0:
        veh.accel = 0.0

    if veh.mode == "lane_changing" and veh.target_lane is not None:
        target_y = road.lane_center(veh.target_lane)
        # lateral slew sized so the maneuver spans min_lane_change_length
        rate = road.lane_width * max(veh.speed, 1.0) / max(
            params.min_lane_change_length, 1e-6)
        dy = float(np.clip(target_y - veh.y, -rate * dt, rate * dt))
        veh.y += dy
        if abs(veh.y - target_y) < 1e-3:
            veh.y = target_y
    return veh
