"""Tests for report values and network digests."""

from __future__ import annotations

import json
import math

import numpy as np

from spin_control.data import SpinNetwork
from spin_control.report import build_report, network_digest, plain, render


def test_plain_values() -> None:
    assert plain(0.1 + 0.2) == 0.3
    assert plain(-0.0) == 0.0
    assert plain(math.nan) is None
    assert plain(np.inf) is None
    assert plain(1 + 2j) == [1.0, 2.0]
    assert plain(np.array([1.0, 2.0])) == [1.0, 2.0]
    assert plain({1: np.bool_(True)}) == {"1": True}
    assert plain((np.int64(3),)) == [3]


def test_network_digest(fig1: SpinNetwork, triangle: SpinNetwork, example1: list) -> None:
    digest = network_digest(fig1)
    assert digest["n"] == 7
    assert digest["control_edges"] == 1
    assert digest["pendant"] is True
    assert digest["bipartite"] is True
    assert network_digest(triangle)["bipartite"] is False
    assert network_digest(example1)["dim"] == 3
    assert network_digest(None) == {}


def test_render_is_sorted_json(fig1: SpinNetwork) -> None:
    text = render(build_report("analyze", fig1, {"b": 1.0, "a": math.nan}))
    assert text.endswith("\n")
    document = json.loads(text)
    assert document["results"] == {"a": None, "b": 1.0}
    assert list(document) == sorted(document)
