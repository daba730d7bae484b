"""Dead-reckoning navigation with periodic visual relocation.

The robot walks waypoint to waypoint in legs of at most `relocate_every_m`.
Commands update the believed pose exactly; the true pose picks up odometry
noise - turn jitter, distance jitter, and a per-run heading bias that
deflects every straight motion the same way.  At the end of each leg the
robot renders its expectation at the believed pose, synthesizes perception
at the true pose, runs the evidential matcher, and replaces belief with
the resulting fix.

The controller also keeps a running estimate of the motion bias: each fix
pair reveals the angle between the commanded direction and the direction
actually travelled, and subsequent legs aim upwind of that estimate.  The
estimate uses only believed/fix data, never ground truth.  Without
self-location there are no fixes, hence no bias estimate and no
compensation - dead reckoning is on its own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from .blackboard import Blackboard
from .camera import CameraModel, Pose2, ang_diff, normalize_angle
from .geometry import MetricParams
from .knowledge_sources import MatchingParams
from .render import (
    EmptyRendering,
    PerceptionNoise,
    populate_data_panel,
    populate_model_panel,
    render_expectation,
    synthesize_perception,
)
from .scheduler import FiringBudgetExceeded, SchedulerConfig, run_match
from .self_location import Fix, NoSceneNode, extract_matches, self_locate
from .world import HallwayModel, PoseOutsideWorld


class LegBudgetExceeded(RuntimeError):
    """The course did not complete within the allowed number of legs."""


@dataclass(frozen=True)
class OdometryNoise:
    """Motion degradation: all three defaults mirror a drifty indoor base."""

    turn_sigma_deg_per_45deg: float = 2.0
    distance_sigma_frac: float = 0.10
    heading_bias_max_deg: float = 15.0

    def __post_init__(self) -> None:
        for name in ("turn_sigma_deg_per_45deg", "distance_sigma_frac", "heading_bias_max_deg"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class NavigationParams:
    relocate_every_m: float = 6.0
    waypoint_tolerance_m: float = 0.35
    clearance_m: float = 0.0
    leg_budget: int = 60
    retention_threshold: float = 0.4
    max_range_m: float = 9.0  # segment-extractor reach, applied to both panels
    max_fix_jump_m: float = 2.5  # distrust radius per leg since the last good fix
    # a single edge pair gives position with no redundancy, so a lone-pair
    # fix may relocate only gently; big corrections need corroboration
    lone_pair_jump_m: float = 1.2
    # heading odometry only accrues turn jitter (the straight-line bias
    # deflects translation, not heading), so a fix that disagrees in
    # heading by more than the jitter budget accrued since the last
    # accepted fix is a mislabeled match, not real drift
    max_heading_jump_deg: float = 10.0
    # intermediate waypoints shape the route; passing within this radius
    # is enough and avoids about-face micro-manoeuvres whose large turns
    # inject fresh heading jitter (the final waypoint keeps the tight bound)
    passby_radius_m: float = 1.0
    # corners are taken in pivot steps: a large turn both multiplies turn
    # jitter and swings the camera so far that the next view shares no
    # structure with the last fix's view, so rotate in bounded increments
    # standing still, with a fresh fix between them
    max_turn_per_leg_deg: float = 50.0
    pivot_stride_m: float = 0.0
    bias_gain: float = 0.7
    # a displacement observation is only as good as the fixes at both ends
    # of the leg, so updates are gated on a fresh fix at the start and
    # weighted by how many edge pairs constrained the fix at the end
    bias_obs_clamp_deg: float = 12.0
    # the believed pose follows commands exactly, so one leg of motion
    # opens a believed-vs-true gap of about dist*sin(deflection) no matter
    # how well the bias is compensated; legs are shortened so the predicted
    # gap - on top of the few tenths the previous fix may already be off -
    # stays inside the displacement range the matcher resolves reliably.
    # The deflection bound folds in the commanded turn's jitter, so legs
    # right after a corner come out short until a fix confirms the heading.
    drift_budget_m: float = 0.55
    drift_margin_deg: float = 3.0
    stride_floor_m: float = 1.5
    # arrival at the last waypoint must be confirmed by a position fix taken
    # on the spot; while waiting, the robot scans in place (the approach
    # heading may face structure-poor territory), stepping the camera round
    # by scan_step_deg per retry before giving up
    confirm_tries: int = 8
    scan_step_deg: float = -45.0
    self_location_enabled: bool = True
    # wide proximity radius: one leg of dead reckoning can displace near
    # structure by a couple hundred pixels, and a long wall edge's centre
    # sits far from the centres of the fragments that land on it; soft
    # rotation kernel: pose drift pivots projected lines by depth-dependent
    # amounts, so pair transforms are not drift-invariant; merge tolerances
    # sized to the extractor's dropout (long collinear gaps, jittered
    # endpoints) so fragments of one edge rejoin before grouping
    matcher: SchedulerConfig = SchedulerConfig(
        n_hypotheses=1,
        max_firings=40000,  # cluttered views need room beyond the adaptive default
        params=MatchingParams(
            metric=MetricParams(r_max_px=280.0, sigma_rot=0.4),
            eps_theta_deg=6.0,
            eps_gap_px=40.0,
            eps_offset_px=6.0,
        ),
    )
    perception: PerceptionNoise = PerceptionNoise(
        frag_prob=0.3, drop_prob=0.05, spurious_rate=2.0, endpoint_sigma_px=1.0
    )


@dataclass
class LegRecord:
    index: int
    turn_cmd_rad: float
    dist_cmd_m: float
    believed_pre_fix: Pose2
    believed: Pose2
    true: Pose2
    fix: Optional[Fix]
    note: str = ""

    def line(self) -> str:
        def fmt(p: Pose2) -> str:
            return f"({p.x:.3f},{p.y:.3f},{math.degrees(p.heading):.2f}deg)"

        fix_part = "fix=none"
        if self.fix is not None:
            fix_part = (
                f"fix={fmt(self.fix.pose)} n_matches={self.fix.n_matches} "
                f"heading_edges={self.fix.n_heading_edges} "
                f"pairs={self.fix.n_position_pairs} degraded={self.fix.degraded}"
            )
        note = f" note={self.note}" if self.note else ""
        return (
            f"leg={self.index:02d} turn={math.degrees(self.turn_cmd_rad):+.2f}deg "
            f"dist={self.dist_cmd_m:.2f}m prior={fmt(self.believed_pre_fix)} "
            f"{fix_part} believed={fmt(self.believed)} true={fmt(self.true)}{note}"
        )


@dataclass
class NavigationLog:
    outcome: str  # "goal" | "collision" | "budget"
    legs: List[LegRecord] = field(default_factory=list)
    final_true: Optional[Pose2] = None
    final_believed: Optional[Pose2] = None
    goal: Optional[Tuple[float, float]] = None
    bias_true_deg: float = 0.0
    bias_estimate_deg: float = 0.0

    @property
    def goal_error_m(self) -> float:
        if self.final_true is None or self.goal is None:
            return float("inf")
        return math.hypot(self.final_true.x - self.goal[0], self.final_true.y - self.goal[1])

    @property
    def reached_goal(self) -> bool:
        return self.outcome == "goal"

    def lines(self) -> List[str]:
        out = [leg.line() for leg in self.legs]
        out.append(
            f"outcome={self.outcome} legs={len(self.legs)} "
            f"goal_error={self.goal_error_m:.3f}m "
            f"bias_true={self.bias_true_deg:+.2f}deg "
            f"bias_estimate={self.bias_estimate_deg:+.2f}deg"
        )
        return out


def attempt_fix(
    world: HallwayModel,
    true: Pose2,
    believed: Pose2,
    cam: CameraModel,
    nav: NavigationParams,
    perception_seed: int,
    jump_cap_m: Optional[float] = None,
    heading_gate_rad: Optional[float] = None,
) -> Tuple[Optional[Fix], str]:
    """One relocation: render, perceive, match, locate.

    Returns (fix, note); fix is None when no usable match came out, in
    which case the note says why and the caller keeps dead reckoning.
    """
    try:
        exp = render_expectation(world, believed, cam, max_range_m=nav.max_range_m)
    except PoseOutsideWorld:
        return None, "believed-outside-world"
    noise = replace(nav.perception, seed=perception_seed)
    segments = synthesize_perception(
        world, true, cam, noise, max_range_m=nav.max_range_m
    )
    bb = Blackboard()
    try:
        populate_model_panel(bb, exp)
        populate_data_panel(bb, [p.segment for p in segments])
    except EmptyRendering:
        return None, "empty-rendering"
    try:
        run_match(bb, nav.matcher)
    except FiringBudgetExceeded:
        return None, "matcher-budget"
    try:
        matches = extract_matches(bb, threshold=nav.retention_threshold)
    except NoSceneNode:
        return None, "no-scene"
    fix = self_locate(matches, believed, cam)
    gate = math.radians(nav.max_heading_jump_deg) if heading_gate_rad is None else heading_gate_rad
    swing = abs(ang_diff(fix.pose.heading, believed.heading))
    if swing > gate:
        return None, f"fix-rejected-heading={math.degrees(swing):.1f}deg"
    cap = nav.max_fix_jump_m if jump_cap_m is None else jump_cap_m
    if fix.n_position_pairs == 1:
        cap = min(cap, nav.lone_pair_jump_m)
    jump = math.hypot(fix.pose.x - believed.x, fix.pose.y - believed.y)
    if jump > cap:
        return None, f"fix-rejected-jump={jump:.2f}m"
    return fix, ""


def navigate(
    world: HallwayModel,
    start: Pose2,
    cam: CameraModel,
    odo: OdometryNoise,
    nav: NavigationParams,
    seed: int,
) -> NavigationLog:
    """Walk the world's waypoint course; deterministic per seed."""
    if not world.waypoints:
        raise ValueError("world defines no waypoints")
    if not world.contains((start.x, start.y)):
        raise PoseOutsideWorld(f"start ({start.x}, {start.y}) is outside the hallway")
    rng = np.random.default_rng(seed)
    bias = math.radians(float(rng.uniform(-odo.heading_bias_max_deg, odo.heading_bias_max_deg)))
    turn_sigma_45 = math.radians(odo.turn_sigma_deg_per_45deg)

    true = start
    believed = start
    bias_est = 0.0
    bias_obs_count = 0
    wp_index = 0
    legs_since_fix = 0  # widens the fix-acceptance radius as dead reckoning ages
    turn_jitter = 0.0  # heading noise accrued since the last measured heading
    confirm_left = nav.confirm_tries  # fix-confirmed arrivals remaining to insist on
    scanning = False  # holding at the final waypoint, sweeping for a fix
    log = NavigationLog(
        outcome="budget", goal=world.waypoints[-1], bias_true_deg=math.degrees(bias)
    )

    for leg in range(nav.leg_budget):
        wp = world.waypoints[wp_index]
        if scanning:
            # stand on the spot and step the camera round for a fix
            cmd_heading = normalize_angle(believed.heading + math.radians(nav.scan_step_deg))
            turn = ang_diff(cmd_heading, believed.heading)
            pivoting = True
        else:
            aim = math.atan2(wp[1] - believed.y, wp[0] - believed.x)
            cmd_heading = normalize_angle(aim - bias_est)
            turn = ang_diff(cmd_heading, believed.heading)
            turn_cap = math.radians(nav.max_turn_per_leg_deg)
            pivoting = abs(turn) > turn_cap
            if pivoting:
                turn = math.copysign(turn_cap, turn)
                cmd_heading = normalize_angle(believed.heading + turn)
        # bound the deflection this leg could suffer: residual bias (the
        # platform's rated maximum until the estimator has converged),
        # a fixed margin, and two sigmas of the jitter this turn adds
        if bias_obs_count < 2:
            deflection = math.radians(odo.heading_bias_max_deg)
        else:
            deflection = abs(bias_est)
        deflection += math.radians(nav.drift_margin_deg)
        deflection += 2.0 * turn_sigma_45 * abs(turn) / math.radians(45.0)
        gap_rate = math.sin(min(math.pi / 2, deflection))
        stride = nav.relocate_every_m
        if gap_rate > 1e-9:
            stride = min(stride, max(nav.stride_floor_m, nav.drift_budget_m / gap_rate))
        if legs_since_fix > 0:
            stride = min(stride, 0.5 * nav.relocate_every_m)
        if pivoting:
            stride = min(stride, nav.pivot_stride_m)
        dist_cmd = min(stride, math.hypot(wp[0] - believed.x, wp[1] - believed.y))

        # the turn: belief follows the command, truth adds jitter
        turn_noise = float(rng.normal(0.0, 1.0)) * turn_sigma_45 * abs(turn) / math.radians(45.0)
        true = Pose2(true.x, true.y, true.heading + turn + turn_noise)
        believed = Pose2(believed.x, believed.y, cmd_heading)

        # the straight: truth is deflected by the per-run bias
        dist_true = dist_cmd * max(0.0, 1.0 + float(rng.normal(0.0, odo.distance_sigma_frac)))
        motion_dir = true.heading + bias
        new_true = Pose2(
            true.x + dist_true * math.cos(motion_dir),
            true.y + dist_true * math.sin(motion_dir),
            true.heading,
        )
        collided = world.path_hits_wall(
            (true.x, true.y), (new_true.x, new_true.y), nav.clearance_m
        )
        leg_start_believed = believed
        true = new_true
        believed = Pose2(
            believed.x + dist_cmd * math.cos(cmd_heading),
            believed.y + dist_cmd * math.sin(cmd_heading),
            cmd_heading,
        )
        if collided:
            log.legs.append(
                LegRecord(leg, turn, dist_cmd, believed, believed, true, None, "wall-contact")
            )
            log.outcome = "collision"
            break

        # the fix
        believed_pre = believed
        fix: Optional[Fix] = None
        note = "self-location-disabled"
        if nav.self_location_enabled:
            leg_started_fresh = legs_since_fix == 0
            turn_jitter += turn_sigma_45 * abs(turn) / math.radians(45.0)
            perception_seed = int(rng.integers(0, 2**31 - 1))
            cap = nav.max_fix_jump_m * (1 + legs_since_fix)
            gate = math.radians(nav.max_heading_jump_deg) + 2.0 * turn_jitter
            fix, note = attempt_fix(
                world, true, believed, cam, nav, perception_seed,
                jump_cap_m=cap, heading_gate_rad=gate,
            )
            if fix is None:
                legs_since_fix += 1
            else:
                # a degraded fix carried no position information (prior
                # returned), so it does not count as a relocation
                legs_since_fix = 0 if not fix.degraded else legs_since_fix + 1
                if fix.n_heading_edges > 0:
                    turn_jitter = 0.0  # heading re-measured from structure
                believed = fix.pose
                # one displacement observation of the motion bias; trust it
                # only when both leg endpoints were fix-confirmed, and fold
                # it in proportionally to how well-constrained the fix was
                dx = believed.x - leg_start_believed.x
                dy = believed.y - leg_start_believed.y
                usable = (
                    leg_started_fresh
                    and not fix.degraded
                    and dist_cmd > 1.0
                    and math.hypot(dx, dy) > 0.5
                )
                if usable:
                    obs = ang_diff(math.atan2(dy, dx), cmd_heading)
                    if abs(obs) < math.radians(25.0):
                        gain = nav.bias_gain * min(1.0, fix.n_position_pairs / 3.0)
                        clamp = math.radians(nav.bias_obs_clamp_deg)
                        innovation = ang_diff(obs, bias_est)
                        innovation = max(-clamp, min(clamp, innovation))
                        bias_est = normalize_angle(bias_est + gain * innovation)
                        bias_obs_count += 1
        log.legs.append(LegRecord(leg, turn, dist_cmd, believed_pre, believed, true, fix, note))

        # waypoint bookkeeping
        final_wp = wp_index == len(world.waypoints) - 1
        reach = (
            nav.waypoint_tolerance_m
            if final_wp
            else max(nav.waypoint_tolerance_m, nav.passby_radius_m)
        )
        scanning = False
        if math.hypot(wp[0] - believed.x, wp[1] - believed.y) <= reach:
            confirmed = (
                not nav.self_location_enabled
                or (fix is not None and not fix.degraded)
                or confirm_left <= 0
            )
            if final_wp and not confirmed:
                confirm_left -= 1  # hold position and re-fix before declaring arrival
                scanning = True
                continue
            wp_index += 1
            if wp_index == len(world.waypoints):
                log.outcome = "goal"
                break

    log.final_true = true
    log.final_believed = believed
    log.bias_estimate_deg = math.degrees(bias_est)
    return log
