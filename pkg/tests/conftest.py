"""Shared fixtures: synthetic corpora and gradient-check helpers."""

import numpy as np
import pytest

from simpleir.data import build_manifest
from simpleir.numerics import DiffGraph, Tensor, backward, finite_diff


@pytest.fixture(scope="session")
def unit_corpus(tmp_path_factory):
    """Small four-kind corpus for fast manifest/pipeline/cli tests."""
    root = tmp_path_factory.mktemp("unit_corpus")
    return build_manifest(root, train_count=6, test_count=2, size=48, seed=3)


@pytest.fixture(scope="session")
def desk_corpus(tmp_path_factory):
    """Default-sized corpus the curriculum statistics are tuned on."""
    root = tmp_path_factory.mktemp("desk_corpus")
    return build_manifest(root, train_count=30, test_count=3, size=64, seed=0)


@pytest.fixture(scope="session")
def two_task_corpus(tmp_path_factory):
    """Asymmetric two-task corpus for the forgetting/ordering trends."""
    root = tmp_path_factory.mktemp("two_task_corpus")
    return build_manifest(root, kinds=("blur", "lowlight"),
                          train_count={"blur": 100, "lowlight": 16},
                          test_count=3, size=64, seed=11)


def rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max absolute gap normalized by the oracle's own scale."""
    return float(np.max(np.abs(analytic - numeric))
                 / (np.max(np.abs(numeric)) + 1e-12))


def grad_check(build, wrt: list[Tensor], h: float = 1e-5) -> float:
    """Worst relative error of tape gradients vs central differences.

    ``build`` constructs the scalar loss tensor from current parameter
    contents; it runs once under a live graph for the analytic side and
    repeatedly ungraphed for the numeric side.
    """
    with DiffGraph() as graph:
        loss = build()
    grads = backward(graph, loss)
    numeric = finite_diff(lambda: build().item(), wrt, h=h)
    worst = 0.0
    for t in wrt:
        assert t in grads, "parameter missing from the gradient map"
        worst = max(worst, rel_err(grads[t], numeric[t]))
    return worst
