"""Core domain types and reading/writing of session data files.

A session on disk is one directory per participant holding three files:

    manifest.json   participant_id, age_years, play_area_px, native_fps,
                    camera_ids, score
    joints.csv      participant_id,camera_id,frame,time_s,joint,x,y,confidence
    targets.csv     participant_id,target_id,side,x_norm,y_norm,t_appear_s,t_hit_s

Reconstructed 3D joint files use the columns
``participant_id,frame,time_s,joint,x,y,z`` (no camera, no confidence).

All types are plain immutable values; parsers and writers are pure functions
apart from filesystem access.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    ConfidenceOutOfRange,
    EmptyFile,
    HitBeforeAppear,
    InputError,
    MissingColumn,
    NonMonotonicTime,
    ParseError,
    UnpairedTarget,
)

JOINTS_2D_HEADER = ["participant_id", "camera_id", "frame", "time_s",
                    "joint", "x", "y", "confidence"]
JOINTS_3D_HEADER = ["participant_id", "frame", "time_s", "joint", "x", "y", "z"]
TARGETS_HEADER = ["participant_id", "target_id", "side", "x_norm", "y_norm",
                  "t_appear_s", "t_hit_s"]

WRIST_JOINTS = ("left_wrist", "right_wrist")
SHOULDER_JOINTS = ("left_shoulder", "right_shoulder")
CORE_JOINTS = WRIST_JOINTS + SHOULDER_JOINTS


@dataclass(frozen=True)
class JointSample:
    frame_index: int
    time: float
    joint: str
    position: tuple    # (x, y) in pixels or (x, y, z) in shoulder-width units
    confidence: float = 1.0


@dataclass(frozen=True)
class SkeletonSequence:
    participant_id: str
    camera_id: str
    sample_rate: float
    samples: tuple  # of JointSample, sorted by (joint, frame_index)

    @property
    def joints(self):
        return tuple(dict.fromkeys(s.joint for s in self.samples))

    @property
    def dims(self):
        return len(self.samples[0].position) if self.samples else 0

    def joint_arrays(self, joint):
        """Return (frames, times, positions, confidences) arrays for one joint."""
        rows = [s for s in self.samples if s.joint == joint]
        if not rows:
            raise InputError(f"joint {joint!r} not present in sequence")
        frames = np.array([s.frame_index for s in rows], dtype=int)
        times = np.array([s.time for s in rows], dtype=float)
        pos = np.array([s.position for s in rows], dtype=float)
        conf = np.array([s.confidence for s in rows], dtype=float)
        return frames, times, pos, conf

    def with_samples(self, samples, sample_rate=None):
        return replace(self, samples=tuple(samples),
                       sample_rate=self.sample_rate if sample_rate is None else sample_rate)


@dataclass(frozen=True)
class TargetEvent:
    target_id: int
    side: str                 # "left" | "right"
    position: tuple           # (x_norm, y_norm) in [0,1]^2 screen units
    t_appear: float
    t_hit: float | None = None

    @property
    def collected(self):
        return self.t_hit is not None


@dataclass(frozen=True)
class TargetLog:
    events: tuple  # of TargetEvent, sorted by (t_appear, target_id, side)

    def pairs(self):
        """Group events into (left, right) pairs by target_id."""
        by_id = {}
        for ev in self.events:
            by_id.setdefault(ev.target_id, {})[ev.side] = ev
        out = []
        for tid in sorted(by_id):
            sides = by_id[tid]
            if set(sides) != {"left", "right"}:
                raise UnpairedTarget(f"target {tid} missing a side")
            out.append((sides["left"], sides["right"]))
        return out

    @property
    def score(self):
        return sum(1 for left, right in self.pairs()
                   if left.collected and right.collected)


@dataclass(frozen=True)
class SessionManifest:
    participant_id: str
    age_years: int
    play_area_px: tuple       # (width, height)
    native_fps: float
    camera_ids: tuple
    score: int = 0


@dataclass(frozen=True)
class ParticipantSession:
    participant_id: str
    age: int
    skeletons: tuple          # one SkeletonSequence per camera
    targets: TargetLog
    score: int
    manifest: SessionManifest

    def skeleton(self, camera_id=None):
        if camera_id is None:
            return self.skeletons[0]
        for seq in self.skeletons:
            if seq.camera_id == camera_id:
                return seq
        raise InputError(f"no skeleton for camera {camera_id!r}")


@dataclass(frozen=True)
class Cohort:
    sessions: tuple
    bin_scheme: tuple   # of (lo_age, hi_age) inclusive bins partitioning 6..17

    def bin_of(self, age):
        for i, (lo, hi) in enumerate(self.bin_scheme):
            if lo <= age <= hi:
                return i
        raise InputError(f"age {age} outside bin scheme {self.bin_scheme}")


@dataclass(frozen=True)
class Finding:
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple = ()

    @property
    def ok(self):
        return not self.findings


# --- parsing ---------------------------------------------------------------

def _float(value, column, row):
    try:
        return float(value)
    except ValueError:
        raise ParseError(f"column {column!r}: not a number: {value!r}", row=row)


def _read_header(reader, expected, what):
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyFile(f"empty {what} file")
    header = [h.strip() for h in header]
    missing = [c for c in expected if c not in header]
    if missing:
        raise MissingColumn(f"{what}: missing column(s) {missing}", row=1)
    return header


def parse_joint_csv(stream) -> SkeletonSequence:
    """Parse a joints.csv character stream (2D or reconstructed 3D schema)."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    try:
        first = next(reader)
    except StopIteration:
        raise EmptyFile("empty joints file")
    header = [h.strip() for h in first]
    is_3d = "z" in header
    expected = JOINTS_3D_HEADER if is_3d else JOINTS_2D_HEADER
    missing = [c for c in expected if c not in header]
    if missing:
        raise MissingColumn(f"joints: missing column(s) {missing}", row=1)
    col = {name: header.index(name) for name in expected}

    samples = []
    participant_id = None
    camera_id = "" if is_3d else None
    for rownum, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) < len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", row=rownum)
        participant_id = row[col["participant_id"]]
        frame = int(_float(row[col["frame"]], "frame", rownum))
        time = _float(row[col["time_s"]], "time_s", rownum)
        joint = row[col["joint"]]
        if is_3d:
            pos = (_float(row[col["x"]], "x", rownum),
                   _float(row[col["y"]], "y", rownum),
                   _float(row[col["z"]], "z", rownum))
            conf = 1.0
        else:
            camera_id = row[col["camera_id"]]
            pos = (_float(row[col["x"]], "x", rownum),
                   _float(row[col["y"]], "y", rownum))
            conf = _float(row[col["confidence"]], "confidence", rownum)
            if not 0.0 <= conf <= 1.0:
                raise ConfidenceOutOfRange(f"confidence {conf} outside [0,1]", row=rownum)
        samples.append(JointSample(frame, time, joint, pos, conf))

    if not samples:
        raise EmptyFile("joints file has a header but no data rows")

    samples.sort(key=lambda s: (s.joint, s.frame_index))
    last = {}
    for s in samples:
        prev = last.get(s.joint)
        if prev is not None and s.time <= prev:
            raise NonMonotonicTime(
                f"joint {s.joint!r}: time {s.time} after {prev} (frame {s.frame_index})")
        last[s.joint] = s.time

    sample_rate = _infer_rate(samples)
    return SkeletonSequence(participant_id, camera_id, sample_rate, tuple(samples))


def _infer_rate(samples):
    by_joint = {}
    for s in samples:
        by_joint.setdefault(s.joint, []).append(s.time)
    deltas = []
    for times in by_joint.values():
        deltas.extend(np.diff(times))
    if not deltas:
        return 30.0
    return 1.0 / float(np.median(deltas))


def parse_target_csv(stream) -> TargetLog:
    """Parse a targets.csv character stream."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    header = _read_header(reader, TARGETS_HEADER, "targets")
    col = {name: header.index(name) for name in TARGETS_HEADER}

    events = []
    for rownum, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        side = row[col["side"]].strip()
        if side not in ("left", "right"):
            raise ParseError(f"side must be left/right, got {side!r}", row=rownum)
        t_appear = _float(row[col["t_appear_s"]], "t_appear_s", rownum)
        raw_hit = row[col["t_hit_s"]].strip()
        t_hit = None if raw_hit == "" else _float(raw_hit, "t_hit_s", rownum)
        if t_hit is not None and t_hit < t_appear:
            raise HitBeforeAppear(
                f"t_hit {t_hit} precedes t_appear {t_appear}", row=rownum)
        events.append(TargetEvent(
            target_id=int(_float(row[col["target_id"]], "target_id", rownum)),
            side=side,
            position=(_float(row[col["x_norm"]], "x_norm", rownum),
                      _float(row[col["y_norm"]], "y_norm", rownum)),
            t_appear=t_appear,
            t_hit=t_hit,
        ))
    if not events:
        raise EmptyFile("targets file has a header but no data rows")

    events.sort(key=lambda e: (e.t_appear, e.target_id, e.side))
    log = TargetLog(tuple(events))
    for left, right in log.pairs():   # raises UnpairedTarget
        if left.t_appear != right.t_appear:
            raise UnpairedTarget(
                f"target {left.target_id}: sides appear at different times")
    return log


# --- writing ---------------------------------------------------------------

def _fmt(x):
    """Full-precision numeric text so parse(serialize(v)) == v."""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_joint_csv(seq: SkeletonSequence, stream):
    writer = csv.writer(stream, lineterminator="\n")
    if seq.dims == 3:
        writer.writerow(JOINTS_3D_HEADER)
        for s in seq.samples:
            writer.writerow([seq.participant_id, s.frame_index, _fmt(s.time),
                             s.joint, *map(_fmt, s.position)])
    else:
        writer.writerow(JOINTS_2D_HEADER)
        for s in seq.samples:
            writer.writerow([seq.participant_id, seq.camera_id, s.frame_index,
                             _fmt(s.time), s.joint, *map(_fmt, s.position),
                             _fmt(s.confidence)])


def write_target_csv(participant_id, log: TargetLog, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(TARGETS_HEADER)
    for ev in log.events:
        writer.writerow([participant_id, ev.target_id, ev.side,
                         _fmt(ev.position[0]), _fmt(ev.position[1]),
                         _fmt(ev.t_appear),
                         "" if ev.t_hit is None else _fmt(ev.t_hit)])


def write_manifest(manifest: SessionManifest, stream):
    json.dump({
        "participant_id": manifest.participant_id,
        "age_years": manifest.age_years,
        "play_area_px": list(manifest.play_area_px),
        "native_fps": manifest.native_fps,
        "camera_ids": list(manifest.camera_ids),
        "score": manifest.score,
    }, stream, indent=2)
    stream.write("\n")


def parse_manifest(stream) -> SessionManifest:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    try:
        raw = json.load(stream)
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest is not valid JSON: {exc}")
    for key in ("participant_id", "age_years", "play_area_px", "native_fps",
                "camera_ids"):
        if key not in raw:
            raise MissingColumn(f"manifest: missing key {key!r}")
    return SessionManifest(
        participant_id=str(raw["participant_id"]),
        age_years=int(raw["age_years"]),
        play_area_px=tuple(raw["play_area_px"]),
        native_fps=float(raw["native_fps"]),
        camera_ids=tuple(raw["camera_ids"]),
        score=int(raw.get("score", 0)),
    )


# --- session directory layout ----------------------------------------------

def write_session(session: ParticipantSession, directory):
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        write_manifest(session.manifest, fh)
    for seq in session.skeletons:
        name = "joints.csv" if len(session.skeletons) == 1 \
            else f"joints_{seq.camera_id}.csv"
        with open(os.path.join(directory, name), "w") as fh:
            write_joint_csv(seq, fh)
    with open(os.path.join(directory, "targets.csv"), "w") as fh:
        write_target_csv(session.participant_id, session.targets, fh)


def load_session(directory) -> ParticipantSession:
    with open(os.path.join(directory, "manifest.json")) as fh:
        manifest = parse_manifest(fh)
    names = sorted(n for n in os.listdir(directory)
                   if n.startswith("joints") and n.endswith(".csv"))
    if not names:
        raise InputError(f"{directory}: no joints csv found")
    skeletons = []
    for name in names:
        with open(os.path.join(directory, name)) as fh:
            skeletons.append(parse_joint_csv(fh))
    with open(os.path.join(directory, "targets.csv")) as fh:
        targets = parse_target_csv(fh)
    return ParticipantSession(
        participant_id=manifest.participant_id,
        age=manifest.age_years,
        skeletons=tuple(skeletons),
        targets=targets,
        score=manifest.score,
        manifest=manifest,
    )


def load_cohort(root, bin_scheme) -> Cohort:
    dirs = sorted(d for d in os.listdir(root)
                  if os.path.isdir(os.path.join(root, d)))
    if not dirs:
        raise InputError(f"{root}: no participant directories")
    sessions = tuple(load_session(os.path.join(root, d)) for d in dirs)
    return Cohort(sessions, tuple(tuple(b) for b in bin_scheme))


# --- validation ------------------------------------------------------------

def validate_session(session: ParticipantSession) -> ValidationReport:
    findings = []

    if not 6 <= session.age <= 17:
        findings.append(Finding("AgeOutOfRange",
                                f"age {session.age} outside [6, 17]"))
    try:
        hit_pairs = session.targets.score
        if session.score != hit_pairs:
            findings.append(Finding(
                "ScoreMismatch",
                f"manifest score {session.score} != {hit_pairs} collected pairs"))
    except UnpairedTarget as exc:
        findings.append(Finding("UnpairedTarget", str(exc)))

    for ev in session.targets.events:
        if ev.t_hit is not None and ev.t_hit < ev.t_appear:
            findings.append(Finding(
                "HitBeforeAppear",
                f"target {ev.target_id} ({ev.side}) hit before appearance"))

    for seq in session.skeletons:
        present = set(seq.joints)
        for joint in CORE_JOINTS:
            if joint not in present:
                findings.append(Finding(
                    "MissingJoint",
                    f"camera {seq.camera_id!r}: joint {joint!r} absent"))
        if seq.sample_rate <= 0:
            findings.append(Finding("BadSampleRate",
                                    f"sample rate {seq.sample_rate}"))

    return ValidationReport(tuple(findings))
