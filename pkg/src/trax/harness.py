"""Experiment harness: load sequences, run tracking trials, persist results.

A trial owns one tracker process for its whole run (fresh process per sweep
point). Trajectory entries use the special markers: 1 at (re)initialization
frames, 2 at detected failures, 0 for frames never sent; timing entries are
0 for frames never sent. Only launch/handshake failures propagate out of a
run; anything that breaks mid-run is recorded as a tracker-exit event and
the remaining frames are filled with the unknown marker.
"""

from __future__ import annotations

import itertools
import logging
import math
import os
import re
import time
from dataclasses import dataclass, field, replace

from .client import Outcome, TrackerHandle, launch
from .errors import (
    BadRegionText,
    CountMismatch,
    MissingGroundtruth,
    TraxError,
    TrialParseError,
)
from .geometry import region_overlap
from .model import (
    MEMORY,
    PATH,
    POLYGON,
    RECTANGLE,
    Image,
    MemoryImage,
    PathImage,
    Polygon,
    Rectangle,
    Region,
    Special,
    format_region,
    parse_region,
)
from .transport import STDIO

log = logging.getLogger(__name__)

UNSUPERVISED = "unsupervised"
SUPERVISED = "supervised"
REALTIME = "realtime"

MODES = (UNSUPERVISED, SUPERVISED, REALTIME)

DEFAULT_FPS = 20.0

_FRAME_RE = re.compile(r"(\d{8})\.(jpg|png|pgm)\Z")
_EXT_FORMAT = {"jpg": "jpeg", "png": "png", "pgm": "pgm"}


@dataclass
class Sequence:
    name: str
    frames: list[PathImage]
    groundtruth: list[Region]
    fps: float = DEFAULT_FPS

    def __len__(self) -> int:
        return len(self.frames)


@dataclass
class TrialEvent:
    frame: int
    kind: str  # init | failure | reinit | skip | downgrade | tracker-exit
    note: str = ""


@dataclass
class Trial:
    """Result of one tracking session over a sequence."""

    trajectory: list[Region]
    timings: list[float]
    events: list[TrialEvent]
    properties: list[dict[str, str]]
    mode: str = UNSUPERVISED

    @classmethod
    def empty(cls, n_frames: int, mode: str) -> "Trial":
        return cls(
            trajectory=[Special(0)] * n_frames,
            timings=[0.0] * n_frames,
            events=[],
            properties=[{} for _ in range(n_frames)],
            mode=mode,
        )


@dataclass
class ExperimentOptions:
    mode: str = UNSUPERVISED
    skip: int = 5
    overlap_threshold: float = 0.0
    fps_override: float | None = None
    init_params: dict[str, str] = field(default_factory=dict)
    image_kind: str = PATH  # memory sends encoded frame bytes instead of paths

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.skip < 1:
            raise ValueError("skip must be >= 1")
        if not (0.0 <= self.overlap_threshold < 1.0):
            raise ValueError("overlap threshold must be in [0, 1)")
        if self.image_kind not in (PATH, MEMORY):
            raise ValueError(f"unknown image kind {self.image_kind!r}")


class RealClock:
    """Timings come from the measured exchange."""

    def elapsed(self, frame_index: int, measured: float) -> float:
        return measured


class VirtualClock:
    """Injected per-frame response times; makes trials bit-reproducible."""

    def __init__(self, values):
        self._fn = values if callable(values) else (lambda i, v=list(values): v[i])

    def elapsed(self, frame_index: int, measured: float) -> float:
        return float(self._fn(frame_index))


# --------------------------------------------------------------------------
# Sequence loading

def load_sequence(directory: str) -> Sequence:
    """Directory layout: frames %08d.{jpg,png,pgm} numbered from 1,
    groundtruth.txt with one region per line, optional `sequence` metadata
    file with an fps=<real> line."""
    gt_path = os.path.join(directory, "groundtruth.txt")
    if not os.path.isfile(gt_path):
        raise MissingGroundtruth(f"no groundtruth.txt in {directory}")

    numbered: dict[int, str] = {}
    for entry in os.listdir(directory):
        match = _FRAME_RE.fullmatch(entry)
        if not match:
            continue
        number = int(match.group(1))
        if number in numbered:
            raise CountMismatch(f"duplicate frame number {number} in {directory}")
        numbered[number] = entry
    frames = [
        PathImage(os.path.abspath(os.path.join(directory, numbered[k])))
        for k in sorted(numbered)
    ]

    groundtruth: list[Region] = []
    with open(gt_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.rstrip("\n").rstrip("\r")
            if not text:
                continue
            try:
                groundtruth.append(parse_region(text))
            except BadRegionText as exc:
                raise BadRegionText(f"groundtruth.txt line {lineno}: {exc}") from None

    if len(frames) != len(groundtruth) or not frames:
        raise CountMismatch(
            f"{len(frames)} frames vs {len(groundtruth)} groundtruth lines in {directory}"
        )
    if not isinstance(groundtruth[0], (Rectangle, Polygon)):
        raise BadRegionText("groundtruth line 1 must be a rectangle or polygon")

    fps = DEFAULT_FPS
    meta = os.path.join(directory, "sequence")
    if os.path.isfile(meta):
        with open(meta, encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("fps="):
                    fps = float(line.strip().split("=", 1)[1])

    return Sequence(os.path.basename(os.path.abspath(directory)), frames, groundtruth, fps)


def _frame_payload(seq: Sequence, index: int, kind: str) -> Image:
    image = seq.frames[index]
    if kind == PATH:
        return image
    with open(image.path, "rb") as fh:
        data = fh.read()
    ext = image.path.rsplit(".", 1)[-1].lower()
    return MemoryImage(_EXT_FORMAT.get(ext, "png"), data)


# --------------------------------------------------------------------------
# Experiment runs

class _Run:
    """Shared per-trial machinery for the three experiment modes."""

    def __init__(self, handle: TrackerHandle, seq: Sequence,
                 opts: ExperimentOptions, clock):
        self.handle = handle
        self.seq = seq
        self.opts = opts
        self.clock = clock if clock is not None else RealClock()
        self.trial = Trial.empty(len(seq), opts.mode)
        self.current = 0  # frame under exchange, for the tracker-exit event

    def initialize(self, index: int, *, reinit: bool) -> Outcome:
        self.current = index
        region = self.seq.groundtruth[index]
        caps = self.handle.capabilities
        if isinstance(region, Polygon) and caps.region_kind == RECTANGLE:
            self.trial.events.append(TrialEvent(
                index, "downgrade", "polygon groundtruth sent as bounding rectangle"))
        outcome = self.handle.initialize(
            _frame_payload(self.seq, index, self.opts.image_kind),
            region,
            self.opts.init_params,
        )
        self.trial.trajectory[index] = Special(1)
        self.trial.timings[index] = self.clock.elapsed(index, outcome.elapsed)
        self.trial.properties[index] = outcome.props
        self.trial.events.append(TrialEvent(index, "reinit" if reinit else "init"))
        return outcome

    def frame(self, index: int) -> Outcome:
        self.current = index
        outcome = self.handle.frame(
            _frame_payload(self.seq, index, self.opts.image_kind))
        self.trial.trajectory[index] = outcome.region
        self.trial.timings[index] = self.clock.elapsed(index, outcome.elapsed)
        self.trial.properties[index] = outcome.props
        return outcome

    def record_exit(self, exc: Exception) -> None:
        # Remaining entries keep the unknown marker from Trial.empty.
        self.trial.events.append(
            TrialEvent(self.current, "tracker-exit", f"{type(exc).__name__}: {exc}"))


def _run_with_tracker(command, seq, opts, body, *, transport=STDIO, env=None,
                      workdir=None, watchdog=30.0, log_sink=None, clock=None,
                      grace=3.0) -> Trial:
    handle = launch(command, env=env, workdir=workdir, transport=transport,
                    log_sink=log_sink, watchdog=watchdog)
    try:
        handle.handshake()  # launch/handshake errors propagate to the caller
        run = _Run(handle, seq, opts, clock)
        body(run)
        return run.trial
    finally:
        handle.terminate(grace)


def run_unsupervised(command, seq: Sequence, opts: ExperimentOptions | None = None,
                     **kwargs) -> Trial:
    """Initialize on the first frame, then one frame request per image."""
    opts = opts or ExperimentOptions(mode=UNSUPERVISED)

    def body(run: _Run):
        try:
            run.initialize(0, reinit=False)
            for i in range(1, len(seq)):
                run.frame(i)
        except TraxError as exc:
            run.record_exit(exc)

    return _run_with_tracker(command, seq, opts, body, **kwargs)


def run_supervised(command, seq: Sequence, opts: ExperimentOptions | None = None,
                   **kwargs) -> Trial:
    """As unsupervised, but reported regions are checked against the
    groundtruth after every frame: overlap at or below the threshold is a
    failure; the next skip-1 frames are not sent and the tracker is
    reinitialized skip frames after the failure (if enough frames remain).
    Initialization responses are never failure-checked."""
    opts = opts or ExperimentOptions(mode=SUPERVISED)

    def body(run: _Run):
        trial = run.trial
        try:
            run.initialize(0, reinit=False)
            i = 1
            while i < len(seq):
                outcome = run.frame(i)
                gt = seq.groundtruth[i]
                overlap = (region_overlap(outcome.region, gt)
                           if isinstance(gt, (Rectangle, Polygon)) else 0.0)
                if overlap <= opts.overlap_threshold:
                    trial.trajectory[i] = Special(2)
                    trial.events.append(TrialEvent(i, "failure", f"overlap={overlap:g}"))
                    for j in range(i + 1, min(i + opts.skip, len(seq))):
                        trial.trajectory[j] = Special(0)
                        trial.events.append(TrialEvent(j, "skip"))
                    if i + opts.skip >= len(seq):
                        break
                    i += opts.skip
                    run.initialize(i, reinit=True)
                i += 1
        except TraxError as exc:
            run.record_exit(exc)

    return _run_with_tracker(command, seq, opts, body, **kwargs)


def run_realtime(command, seq: Sequence, opts: ExperimentOptions | None = None,
                 clock=None, **kwargs) -> Trial:
    """Frame-dropping simulation: after a frame answered in T seconds the
    next frame sent is k + max(1, ceil(T/dt)) with dt = 1/fps; dropped
    frames inherit the last reported region. No failure supervision."""
    opts = opts or ExperimentOptions(mode=REALTIME)
    fps = opts.fps_override if opts.fps_override else seq.fps
    dt = 1.0 / fps

    def body(run: _Run):
        trial = run.trial
        try:
            outcome = run.initialize(0, reinit=False)
            last_region = outcome.region
            next_send = _advance(0, trial.timings[0], dt)
            for i in range(1, len(seq)):
                if i < next_send:
                    trial.trajectory[i] = last_region
                    trial.events.append(TrialEvent(i, "skip", "realtime drop"))
                    continue
                outcome = run.frame(i)
                last_region = outcome.region
                next_send = _advance(i, trial.timings[i], dt)
        except TraxError as exc:
            run.record_exit(exc)

    return _run_with_tracker(command, seq, opts, body, clock=clock, **kwargs)


def _advance(index: int, elapsed: float, dt: float) -> int:
    # The epsilon keeps T == dt (and exact multiples) at a single step.
    return index + max(1, math.ceil(elapsed / dt - 1e-9))


def run_experiment(command, seq: Sequence, opts: ExperimentOptions,
                   clock=None, **kwargs) -> Trial:
    if opts.mode == SUPERVISED:
        return run_supervised(command, seq, opts, clock=clock, **kwargs)
    if opts.mode == REALTIME:
        return run_realtime(command, seq, opts, clock=clock, **kwargs)
    return run_unsupervised(command, seq, opts, clock=clock, **kwargs)


# --------------------------------------------------------------------------
# Parameter sweeps

@dataclass
class SweepResult:
    params: dict[str, str]
    trial: Trial | None
    error: str | None = None


def sweep(command, seq: Sequence, base_opts: ExperimentOptions,
          grid: dict[str, list[str]], **kwargs) -> list[SweepResult]:
    """One full trial per Cartesian-product combination, deterministic
    order (keys sorted, values as given), fresh tracker process each.
    Per-combination failures are recorded and the sweep continues."""
    if not grid:
        raise ValueError("empty sweep grid")
    keys = sorted(grid)
    for key in keys:
        if not grid[key]:
            log.error("sweep key %r has no values; nothing to run", key)
            return []
    results: list[SweepResult] = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        params = dict(zip(keys, combo))
        opts = replace(base_opts, init_params={**base_opts.init_params, **params})
        try:
            trial = run_experiment(command, seq, opts, **kwargs)
            results.append(SweepResult(params, trial))
        except TraxError as exc:
            log.error("sweep point %s failed: %s", params, exc)
            results.append(SweepResult(params, None, f"{type(exc).__name__}: {exc}"))
    return results


# --------------------------------------------------------------------------
# Trial persistence (UTF-8, LF line endings)

def write_trial(trial: Trial, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)

    with open(os.path.join(directory, "trajectory.txt"), "w",
              encoding="utf-8", newline="\n") as fh:
        if trial.mode == REALTIME:
            fh.write("# mode=realtime\n")
        for region in trial.trajectory:
            fh.write(format_region(region) + "\n")

    with open(os.path.join(directory, "timings.txt"), "w",
              encoding="utf-8", newline="\n") as fh:
        for t in trial.timings:
            fh.write(f"{t:.6f}\n")

    with open(os.path.join(directory, "events.txt"), "w",
              encoding="utf-8", newline="\n") as fh:
        for event in trial.events:
            note = event.note.replace("\t", " ").replace("\n", " ")
            fh.write(f"{event.frame}\t{event.kind}\t{note}\n")

    with open(os.path.join(directory, "properties.txt"), "w",
              encoding="utf-8", newline="\n") as fh:
        for i, props in enumerate(trial.properties):
            if props:
                pairs = "\t".join(f"{k}={v}" for k, v in props.items())
                fh.write(f"{i}\t{pairs}\n")


def read_trial(directory: str) -> Trial:
    """Exact inverse of write_trial on the trajectory and timings."""
    mode = UNSUPERVISED
    trajectory: list[Region] = []
    path = os.path.join(directory, "trajectory.txt")
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.rstrip("\n")
            if text.startswith("#"):
                if "mode=realtime" in text:
                    mode = REALTIME
                continue
            try:
                trajectory.append(parse_region(text))
            except BadRegionText as exc:
                raise TrialParseError(f"{path}:{lineno}: {exc}") from None

    timings: list[float] = []
    path = os.path.join(directory, "timings.txt")
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            try:
                timings.append(float(line.strip()))
            except ValueError:
                raise TrialParseError(f"{path}:{lineno}: bad timing value") from None

    events: list[TrialEvent] = []
    path = os.path.join(directory, "events.txt")
    if os.path.isfile(path):
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.rstrip("\n").split("\t", 2)
                if len(parts) < 2:
                    raise TrialParseError(f"{path}:{lineno}: bad event line")
                events.append(TrialEvent(int(parts[0]), parts[1],
                                         parts[2] if len(parts) > 2 else ""))

    properties = [dict() for _ in trajectory]
    path = os.path.join(directory, "properties.txt")
    if os.path.isfile(path):
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                parts = line.rstrip("\n").split("\t")
                index = int(parts[0])
                for pair in parts[1:]:
                    key, _, value = pair.partition("=")
                    properties[index][key] = value

    return Trial(trajectory, timings, events, properties, mode)
