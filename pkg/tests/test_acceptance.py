"""Acceptance suite: one test per acceptance criterion, at the stated
tolerances, printing one PASS/FAIL line per criterion (run with -s to see
them live). Expected values come from the independent oracles in
oracles.py, never from the code under test.
"""

import json
import random
import shlex
import shutil
import subprocess
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from trax.client import launch
from trax.errors import WatchdogTimeout
from trax.geometry import region_overlap
from trax.harness import ExperimentOptions, VirtualClock, run_realtime
from trax.model import Polygon, Rectangle
from trax.synth import generate_sequence
from trax.wire import ARITY, Message, MessageKind, Passthrough, decode, encode

from .conftest import dummy_cmd
from .oracles import (
    all_traces,
    random_convex_polygon,
    rasterized_iou,
    realtime_processed_frames,
    replay_supervised,
    trace_is_legal,
)
from .session_drivers import client_accepts, server_accepts

DUMMY_SHELL = f"{shlex.quote(sys.executable)} -m trax dummy"


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}", flush=True)
        raise
    print(f"[PASS] {name}", flush=True)


def run_cli(*args, timeout=120):
    return subprocess.run([sys.executable, "-m", "trax", *args],
                          capture_output=True, text=True, timeout=timeout)


# -- wire round-trip ----------------------------------------------------------

_VALUE_ALPHABET = (
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
    " \t\r\"\\=,:;./-_()[]{}@#$%^&*'`~|<>?!+"
    "äöüßéμλ→"
)
_KEY_ALPHABET = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_."


def _random_message(rng):
    kind = rng.choice(list(MessageKind))
    args = ["".join(rng.choices(_VALUE_ALPHABET, k=rng.randint(0, 24)))
            for _ in range(ARITY[kind])]
    params = {}
    for _ in range(rng.randint(0, 32)):
        key = "".join(rng.choices(_KEY_ALPHABET, k=rng.randint(1, 12)))
        params[key] = "".join(rng.choices(_VALUE_ALPHABET, k=rng.randint(0, 24)))
    return Message(kind, args, params)


def test_wire_roundtrip_10k():
    with criterion("wire round-trip: 10k messages + 10k passthrough lines < 10 s"):
        rng = random.Random(20260811)
        started = time.perf_counter()
        for _ in range(10_000):
            message = _random_message(rng)
            assert decode(encode(message)) == message
        for _ in range(10_000):
            line = "".join(rng.choices(_VALUE_ALPHABET + "\x00", k=rng.randint(0, 60)))
            if line.startswith("@@TRAX:"):
                continue
            assert decode(line) == Passthrough(line)
        elapsed = time.perf_counter() - started
        assert elapsed < 10.0, f"took {elapsed:.1f}s"


# -- trace legality ------------------------------------------------------------

def test_trace_legality_exhaustive():
    with criterion("trace legality: all traces up to length 6, both sides"):
        checked = 0
        for trace in all_traces(6):
            legal = trace_is_legal(trace)
            assert server_accepts(trace) == legal, f"server disagrees on {trace!r}"
            assert client_accepts(trace) == legal, f"client disagrees on {trace!r}"
            checked += 1
        assert checked == sum(5 ** n for n in range(7))


# -- overlap geometry ----------------------------------------------------------

def test_overlap_geometry():
    with criterion("overlap geometry: exact 1/3, oracle agreement on 1000 pairs"):
        value = region_overlap(Rectangle(0, 0, 2, 2), Rectangle(1, 0, 2, 2))
        assert abs(value - 1 / 3) <= 1e-9

        rng = np.random.RandomState(42)
        worst = 0.0
        for _ in range(1000):
            a = random_convex_polygon(rng)
            b = random_convex_polygon(rng)
            ra, rb = Polygon(tuple(a)), Polygon(tuple(b))
            got = region_overlap(ra, rb)
            assert got == region_overlap(rb, ra)
            assert 0.0 <= got <= 1.0
            want = rasterized_iou(a, b)
            worst = max(worst, abs(got - want))
        assert worst <= 5e-3, f"worst deviation {worst:.2e}"


# -- end-to-end determinism ----------------------------------------------------

@pytest.fixture(scope="module")
def seq20_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("accept-seq20")
    generate_sequence(str(root), 20)
    return str(root)


def test_end_to_end_determinism(seq20_dir, tmp_path):
    with criterion("end-to-end determinism: dummy trajectory identical over stdio/tcp"):
        blobs = {}
        for transport in ("stdio", "tcp"):
            out = tmp_path / transport
            result = run_cli("run", "--tracker", DUMMY_SHELL, "--sequence", seq20_dir,
                             "--transport", transport, "--output", str(out))
            assert result.returncode == 0, result.stderr
            blobs[transport] = (out / "trajectory.txt").read_bytes()
        expected = "\n".join(["1"] + ["10,10,20,20"] * 19) + "\n"
        assert blobs["stdio"].decode() == expected
        assert blobs["stdio"] == blobs["tcp"]


# -- supervised reinitialization ----------------------------------------------

def test_supervised_reinitialization(seq20_dir, tmp_path, request):
    with criterion("supervised reinitialization: matches independent replay fixture"):
        out = tmp_path / "sup"
        result = run_cli("run", "--tracker", DUMMY_SHELL + " --fail-after 3",
                         "--sequence", seq20_dir, "--mode", "supervised",
                         "--skip", "5", "--output", str(out))
        assert result.returncode == 0, result.stderr
        got = (out / "trajectory.txt").read_text()

        fixture = (request.path.parent / "data" / "supervised_fail3_skip5.txt").read_text()
        assert got == fixture

        replayed, _ = replay_supervised(
            [(10.0 + 2 * i, 10.0 + i, 20.0, 20.0) for i in range(20)],
            fail_after=3, skip=5)
        assert fixture == "\n".join(replayed) + "\n"


# -- real-time skipping ---------------------------------------------------------

def test_realtime_skipping(sequence20, null_sink):
    with criterion("real-time skipping: 2.5dt pattern + 100 random resimulations"):
        dt = 1.0 / sequence20.fps
        opts = ExperimentOptions(mode="realtime")
        trial = run_realtime(dummy_cmd(), sequence20, opts,
                             clock=VirtualClock(lambda i: 2.5 * dt),
                             log_sink=null_sink)
        processed = [i for i, t in enumerate(trial.timings) if t > 0]
        assert processed == [0, 3, 6, 9, 12, 15, 18]

        rng = np.random.RandomState(7)
        handle_runs = 100
        for _ in range(handle_runs):
            elapsed = [float(rng.uniform(0.05, 4.5) * dt) for _ in range(len(sequence20))]
            trial = run_realtime(dummy_cmd(), sequence20, opts,
                                 clock=VirtualClock(elapsed), log_sink=null_sink)
            got = [i for i, t in enumerate(trial.timings) if t > 0]
            want = realtime_processed_frames(lambda i: elapsed[i], len(sequence20),
                                             sequence20.fps)
            assert got == want


# -- watchdog -------------------------------------------------------------------

def test_watchdog(sequence5, null_sink):
    with criterion("watchdog: hang detected within timeout+1s, child killed and reaped"):
        handle = launch(dummy_cmd("--hang"), log_sink=null_sink, watchdog=1.0)
        handle.handshake()
        handle.initialize(sequence5.frames[0], Rectangle(5, 5, 10, 10))
        started = time.monotonic()
        with pytest.raises(WatchdogTimeout):
            handle.frame(sequence5.frames[1])
        assert time.monotonic() - started <= 2.0

        grace = 0.5
        started = time.monotonic()
        report = handle.terminate(grace=grace)
        assert time.monotonic() - started <= grace + 1.5
        assert report.killed is True
        assert report.exit_status is not None  # reaped: no orphan remains


# -- interop (secondary component) ----------------------------------------------

SAMPLE_MAIN = Path(__file__).resolve().parent.parent / "sample-tracker" / "dist" / "main.js"


@pytest.mark.skipif(shutil.which("node") is None or not SAMPLE_MAIN.is_file(),
                    reason="sample-tracker not built")
def test_interop_secondary(seq20_dir, tmp_path):
    with criterion("interop: sample-tracker trajectory identical to dummy, test exit 0"):
        node = shutil.which("node")
        blobs = {}
        for name, tracker in (("dummy", DUMMY_SHELL),
                              ("sample", f"{node} {SAMPLE_MAIN}")):
            out = tmp_path / name
            result = run_cli("run", "--tracker", tracker, "--sequence", seq20_dir,
                             "--output", str(out))
            assert result.returncode == 0, result.stderr
            blobs[name] = (out / "trajectory.txt").read_bytes()
        assert blobs["dummy"] == blobs["sample"]

        result = run_cli("test", "--tracker", f"{node} {SAMPLE_MAIN}")
        assert result.returncode == 0, result.stdout + result.stderr


# -- conformance CLI -------------------------------------------------------------

def test_conformance_cli():
    with criterion("conformance: dummy passes both transports, fixtures fail their check"):
        for transport in ("stdio", "tcp"):
            result = run_cli("test", "--tracker", DUMMY_SHELL, "--transport", transport)
            assert result.returncode == 0, result.stdout + result.stderr

        targets = {
            "no-hello": "hello-first",
            "double-state": "one-state-per-request",
            "malformed-region": "state-region",
        }
        for violation, target in targets.items():
            result = run_cli("test", "--json", "--tracker",
                             DUMMY_SHELL + f" --violate {violation}")
            assert result.returncode == 3
            report = json.loads(result.stdout)
            failed = sorted(k for k, v in report.items() if not v["passed"])
            assert failed == [target], (violation, report)
