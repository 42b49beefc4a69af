"""Synthetic bilateral reaching sessions with age-parameterized motor
strategies.

The generator plays the same game the analysis pipeline expects: alternating
asymmetric target pairs, a 50-second clock, and a target counted as hit only
after the hand overlaps it for five consecutive frames. Hand motion is built
from minimum-jerk bursts along a bowed path, with corrective submovements,
reaction delays, an anticipation-scaled homing glide, and measurement
noise. All
parameters are planted monotonically in age, so the generated cohorts act as
ground-truth oracles for the analysis code.

Simulation coordinates are shoulder-width units with the origin at the
shoulder midpoint; conversion to screen pixels is isotropic.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, replace

import numpy as np

from .model_io import (
    Cohort,
    JointSample,
    ParticipantSession,
    SessionManifest,
    SkeletonSequence,
    TargetEvent,
    TargetLog,
    write_session,
)

# Geometry of the simulated play area (shoulder-width units and pixels).
PLAY_W_UNITS = 4.4
PLAY_H_UNITS = 3.2
PLAY_ORIGIN = np.array([-2.2, -0.6])      # top-left corner in sim units
PX_PER_UNIT = 225.0
PLAY_AREA_PX = (int(PLAY_W_UNITS * PX_PER_UNIT), int(PLAY_H_UNITS * PX_PER_UNIT))

SHOULDERS = {"left_shoulder": np.array([-0.5, 0.0]),
             "right_shoulder": np.array([0.5, 0.0])}
HAND_REST = {"left": np.array([-0.9, 1.6]), "right": np.array([0.9, 1.6])}

HIT_RADIUS = 0.30          # sim units
HIT_FRAMES = 5             # consecutive overlap frames required
PAUSE_S = 0.22             # dwell between corrective submovement bursts

DEFAULT_BINS = ((6, 8), (9, 10), (11, 13), (14, 17))


@dataclass(frozen=True)
class StrategyParams:
    peak_speed_scale: float = 4.0     # shoulder-widths/s at burst peak
    detour_amplitude: float = 0.15    # lateral bow, fraction of reach distance
    submovement_count: int = 0        # corrective stutters per reach
    reaction_delay: float = 0.25      # seconds before movement onset
    anticipation: float = 0.5         # in [0,1]; front-loads goal progress
    noise_sigma: float = 0.01         # positional noise, shoulder-width units

    def __post_init__(self):
        if self.peak_speed_scale <= 0:
            raise ValueError("peak_speed_scale must be positive")
        if self.detour_amplitude < 0 or self.reaction_delay < 0 \
                or self.noise_sigma < 0 or self.submovement_count < 0:
            raise ValueError("strategy parameters must be non-negative")
        if not 0.0 <= self.anticipation <= 1.0:
            raise ValueError("anticipation must be in [0, 1]")


def minimum_jerk(u):
    """Minimum-jerk position fraction 10u^3 - 15u^4 + 6u^5 on [0, 1]."""
    u = np.clip(u, 0.0, 1.0)
    return u ** 3 * (10.0 - 15.0 * u + 6.0 * u * u)


def _bowed_path(start, target, amplitude):
    """Return p(u) evaluating the bowed geometric path and its arc length."""
    start = np.asarray(start, dtype=float)
    target = np.asarray(target, dtype=float)
    delta = target - start
    length = np.linalg.norm(delta)
    normal = np.array([-delta[1], delta[0]]) / length

    def path(u):
        u = np.asarray(u, dtype=float)
        bow = amplitude * length * np.sin(np.pi * u)
        return start + np.outer(u, delta) + np.outer(bow, normal)

    fine = np.linspace(0.0, 1.0, 512)
    pts = path(fine)
    arc = float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())
    return path, arc


def generate_reach(params: StrategyParams, start, target, dt, rng=None,
                   duration=None):
    """Simulate one reach; returns (positions (N, 2), total_duration_s).

    The geometric path is a half-sine bow; timing is a chain of minimum-jerk
    bursts: one dominant burst, ``submovement_count`` corrective stutters
    separated by short pauses, then a homing glide whose length and slowness
    grow with the anticipation parameter. ``duration`` overrides the
    speed-derived movement time, split across bursts in proportion to arc.
    Deterministic for a fixed rng state; rng=None means noise-free.
    """
    start = np.asarray(start, dtype=float)
    target = np.asarray(target, dtype=float)
    if np.allclose(start, target):
        raise ValueError("start and target coincide")

    path, arc = _bowed_path(start, target, params.detour_amplitude)
    n_sub = params.submovement_count
    a = params.anticipation
    # One dominant burst covers the early path, corrective submovements
    # stutter through the middle stretch, and an anticipation-scaled homing
    # glide crawls the last piece of arc at reduced speed. The glide length
    # is set in shoulder-width units (not arc fraction) so short and long
    # reaches get comparable final-approach phases; it is what shapes
    # end-phase velocity: more anticipation means a longer, slower approach.
    sub_span = 0.12
    home_units = 0.35 + 0.55 * a
    home_span = min(0.5, home_units / arc)
    home_speed = params.peak_speed_scale * (1.0 - 0.60 * a)
    spans = [1.0 - sub_span * n_sub - home_span] + [sub_span] * n_sub \
        + [home_span]
    if duration is not None:
        burst_T = [duration * s for s in spans]
        pauses = [0.0] * n_sub
    else:
        burst_T = [1.875 * (arc * s) / params.peak_speed_scale
                   for s in spans[:-1]]
        burst_T.append(1.875 * (arc * home_span) / home_speed)
        pauses = [PAUSE_S] * n_sub

    # timeline of (t_start, t_end, u_start, u_end); pauses hold position
    episodes = []
    t = 0.0
    u0 = 0.0
    for m, span in enumerate(spans):
        u1 = u0 + span
        episodes.append((t, t + burst_T[m], u0, u1))
        t += burst_T[m]
        if 1 <= m <= n_sub:
            episodes.append((t, t + pauses[m - 1], u1, u1))
            t += pauses[m - 1]
        u0 = u1
    total = t

    n = max(2, int(np.ceil(total / dt)) + 1)
    times = np.arange(n) * dt
    u = np.empty(n)
    for i, ti in enumerate(times):
        ti = min(ti, total)
        for (t0, t1, u0, u1) in episodes:
            if ti <= t1 or (t0, t1, u0, u1) == episodes[-1]:
                if t1 == t0:
                    u[i] = u1
                else:
                    frac = np.clip((ti - t0) / (t1 - t0), 0.0, 1.0)
                    u[i] = u0 + (u1 - u0) * minimum_jerk(frac)
                break
    positions = path(u)
    if rng is not None and params.noise_sigma > 0:
        positions = positions + rng.normal(0.0, params.noise_sigma,
                                           positions.shape)
    return positions, total


def _spawn_target(side, rng):
    """Normalized-screen target position on the given side of the midline."""
    if side == "left":
        x = rng.uniform(0.08, 0.42)
    else:
        x = rng.uniform(0.58, 0.92)
    y = rng.uniform(0.20, 0.75)
    return (float(x), float(y))


def norm_to_sim(pos_norm):
    """Normalized screen coordinates -> simulation (shoulder-width) units."""
    return PLAY_ORIGIN + np.asarray(pos_norm, dtype=float) * \
        np.array([PLAY_W_UNITS, PLAY_H_UNITS])


def sim_to_px(pos):
    return (np.asarray(pos, dtype=float) - PLAY_ORIGIN) * PX_PER_UNIT


class _HandPlan:
    """Scheduled reach of one hand: delay, then a precomputed path, then dwell."""

    def __init__(self, start, target, t_start, path):
        self.start = np.asarray(start, dtype=float)
        self.target = np.asarray(target, dtype=float)
        self.t_start = t_start
        self.path = path

    def position(self, t, dt):
        if t < self.t_start:
            return self.start
        idx = int(round((t - self.t_start) / dt))
        if idx < len(self.path):
            return self.path[idx]
        return self.target


def generate_session(params: StrategyParams, age: int, seed,
                     participant_id="p000", duration: float = 50.0,
                     fps: float = 30.0) -> ParticipantSession:
    """Simulate one full game session; pure function of (params, age, seed)."""
    rng = np.random.default_rng(seed)
    dt = 1.0 / fps
    n_frames = int(round(duration * fps))
    times = np.arange(n_frames) * dt

    hand_pos = {s: np.empty((n_frames, 2)) for s in ("left", "right")}
    current = {s: HAND_REST[s].copy() for s in ("left", "right")}
    events = []

    frame = 0
    target_id = 0
    while frame < n_frames:
        t_appear = float(times[frame])
        tpos_norm, tpos_sim = {}, {}
        for s in ("left", "right"):
            # respawn until the target is a real reach away from the hand
            for _ in range(50):
                cand = _spawn_target(s, rng)
                cand_sim = norm_to_sim(cand)
                if np.linalg.norm(cand_sim - current[s]) >= 0.8:
                    break
            tpos_norm[s], tpos_sim[s] = cand, cand_sim

        plans = {}
        for s in ("left", "right"):
            delay = params.reaction_delay * float(rng.uniform(0.85, 1.15))
            path, _ = generate_reach(params, current[s], tpos_sim[s], dt,
                                     rng=rng)
            plans[s] = _HandPlan(current[s], tpos_sim[s],
                                 t_appear + delay, path)

        overlap = {"left": 0, "right": 0}
        t_hit = {"left": None, "right": None}
        while frame < n_frames:
            t = float(times[frame])
            for s in ("left", "right"):
                p = plans[s].position(t, dt)
                if params.noise_sigma > 0 and t >= plans[s].t_start:
                    p = p + rng.normal(0.0, params.noise_sigma, 2)
                current[s] = p
                hand_pos[s][frame] = p
                if t_hit[s] is None:
                    if np.linalg.norm(p - tpos_sim[s]) < HIT_RADIUS:
                        overlap[s] += 1
                    else:
                        overlap[s] = 0
                    if overlap[s] >= HIT_FRAMES:
                        t_hit[s] = t
            frame += 1
            if t_hit["left"] is not None and t_hit["right"] is not None:
                break

        for s in ("left", "right"):
            events.append(TargetEvent(target_id=target_id, side=s,
                                      position=tpos_norm[s],
                                      t_appear=t_appear, t_hit=t_hit[s]))
        target_id += 1

    targets = TargetLog(tuple(sorted(events,
                                     key=lambda e: (e.t_appear, e.target_id,
                                                    e.side))))
    score = targets.score

    samples = []
    sway = rng.normal(0.0, 0.01, (n_frames, 2, 2))
    for i in range(n_frames):
        t = float(times[i])
        joints = {
            "left_wrist": hand_pos["left"][i],
            "right_wrist": hand_pos["right"][i],
            "left_shoulder": SHOULDERS["left_shoulder"] + sway[i, 0],
            "right_shoulder": SHOULDERS["right_shoulder"] + sway[i, 1],
        }
        for joint, pos in joints.items():
            conf = float(np.round(rng.uniform(0.80, 1.00), 6))
            if rng.uniform() < 0.01:
                conf = float(np.round(rng.uniform(0.10, 0.70), 6))
            px = sim_to_px(pos)
            samples.append(JointSample(i, t, joint,
                                       (float(px[0]), float(px[1])), conf))
    samples.sort(key=lambda s: (s.joint, s.frame_index))
    skeleton = SkeletonSequence(participant_id, "webcam", fps, tuple(samples))

    manifest = SessionManifest(
        participant_id=participant_id,
        age_years=age,
        play_area_px=PLAY_AREA_PX,
        native_fps=fps,
        camera_ids=("webcam",),
        score=score,
    )
    return ParticipantSession(
        participant_id=participant_id,
        age=age,
        skeletons=(skeleton,),
        targets=targets,
        score=score,
        manifest=manifest,
    )


# --- age profile -----------------------------------------------------------

def age_mean_params(age: int) -> StrategyParams:
    """Planted monotone strategy means: older children reach more directly,
    with lower peak speed, fewer corrections, and more anticipation."""
    u = (age - 6) / 11.0
    return StrategyParams(
        peak_speed_scale=5.0 - 2.2 * u,
        detour_amplitude=0.42 - 0.36 * u,
        submovement_count=int(round(4.0 - 4.0 * u)),
        reaction_delay=0.45 - 0.41 * u,
        anticipation=0.10 + 0.80 * u,
        noise_sigma=0.045 - 0.042 * u,
    )


def sample_params(age: int, rng) -> StrategyParams:
    """Draw one participant's strategy around the age means (4% jitter)."""
    mean = age_mean_params(age)
    j = lambda v: float(v * rng.uniform(0.96, 1.04))   # noqa: E731
    return replace(
        mean,
        peak_speed_scale=j(mean.peak_speed_scale),
        detour_amplitude=j(mean.detour_amplitude),
        reaction_delay=j(mean.reaction_delay),
        anticipation=min(1.0, j(mean.anticipation)),
        noise_sigma=j(mean.noise_sigma),
    )


def generate_cohort(n_per_bin: int, bins=DEFAULT_BINS, seed: int = 0,
                    duration: float = 50.0) -> tuple:
    """Generate a deterministic cohort; returns (Cohort, ground_truth rows).

    Ground-truth rows record every planted parameter per participant.
    """
    root_ss = np.random.SeedSequence(seed)
    sessions = []
    truth = []
    idx = 0
    for lo, hi in bins:
        for _ in range(n_per_bin):
            child_ss = root_ss.spawn(1)[0]
            rng = np.random.default_rng(child_ss)
            age = int(rng.integers(lo, hi + 1))
            params = sample_params(age, rng)
            pid = f"p{idx:03d}"
            session = generate_session(params, age, child_ss.spawn(1)[0],
                                       participant_id=pid, duration=duration)
            sessions.append(session)
            truth.append({
                "participant_id": pid, "age": age, "score": session.score,
                "peak_speed_scale": params.peak_speed_scale,
                "detour_amplitude": params.detour_amplitude,
                "submovement_count": params.submovement_count,
                "reaction_delay": params.reaction_delay,
                "anticipation": params.anticipation,
                "noise_sigma": params.noise_sigma,
            })
            idx += 1
    return Cohort(tuple(sessions), tuple(bins)), truth


def write_cohort(cohort: Cohort, truth, directory):
    os.makedirs(directory, exist_ok=True)
    for session in cohort.sessions:
        write_session(session, os.path.join(directory, session.participant_id))
    with open(os.path.join(directory, "ground_truth.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(truth[0].keys()),
                                lineterminator="\n")
        writer.writeheader()
        writer.writerows(truth)
