"""Smoke test for the `gca` extension module.

Build with `cargo build -p gca-py`, then copy `target/debug/libgca.so` next to
this file as `gca.so` (or run `python/build.sh`), and run
`python3 -m pytest python/smoke_test.py`.
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import gca  # noqa: E402
import pytest  # noqa: E402


def test_frame_round_trip():
    spec = gca.parse_frame("+Z_ref = -Z_toaster")
    assert "toaster" in spec
    assert gca.render_frame(spec) == "+Z_ref = -Z_toaster"


def test_bad_frame_raises():
    with pytest.raises(ValueError):
        gca.parse_frame("+Z_ref = -Q_toaster")


def test_cardinal_axes_enu_case():
    north, east, south, west = gca.cardinal_axes("south", (0.0, -1.0, 0.0), (0.0, 0.0, -1.0))
    assert west == (-1.0, 0.0, 0.0)
    assert north == (0.0, 1.0, 0.0)
    assert east == (1.0, 0.0, 0.0)
    assert south == (0.0, -1.0, 0.0)


def test_suite_and_solve():
    suite = json.loads(gca.generate_suite(3, 1))
    assert len(suite["questions"]) == 7
    q = next(q for q in suite["questions"] if q["category"] == "relative_position")
    scene = suite["scenes"][q["scene"]]
    answer, option, trace = gca.solve(json.dumps(scene), q["query"], q["options"])
    assert answer is not None, trace
    assert option == "ABCD"[q["answer"]]
    assert trace.strip()


def test_free_form_distance():
    suite = json.loads(gca.generate_suite(4, 1))
    q = next(q for q in suite["questions"] if q["category"] == "metric_distance")
    scene = suite["scenes"][q["scene"]]
    answer, option, _ = gca.solve(json.dumps(scene), q["query"])
    assert answer is not None and option is None
    assert not math.isnan(float(answer.split()[0]))
