"""Smoke tests for the python module: generate, solve, certify, I/O."""

import math

import numpy as np
import pytest

import bmstair


@pytest.fixture(scope="module")
def exact_instance():
    return bmstair.generate_rotation_sync(
        num_rotations=6, dim=2, graph="cycle", noise_sigma=0.0, seed=3
    )


def test_generate_shapes(exact_instance):
    prob = exact_instance["problem"]
    gt = exact_instance["ground_truth"]
    assert prob.n == 12
    assert prob.k == 2
    assert prob.m == 18  # 6 blocks x d(d+1)/2
    assert gt.shape == (12, 2)
    assert exact_instance["ground_truth_cost"] <= 1e-12
    assert prob.metadata["graph"] == "cycle"


def test_objective_at_ground_truth(exact_instance):
    prob = exact_instance["problem"]
    gt = exact_instance["ground_truth"]
    assert bmstair.objective(prob, gt) == pytest.approx(0.0, abs=1e-12)
    res = bmstair.constraint_residuals(prob, gt)
    assert np.max(np.abs(res)) <= 1e-10


def test_solve_certifies(exact_instance):
    prob = exact_instance["problem"]
    result = bmstair.solve(prob, seed=1)
    assert result["certified"] is True
    assert result["f_bm"] <= 1e-8
    assert result["gap_relative"] <= 1e-8
    assert result["final_rank"] == 2

    Y = np.asarray(result["Y"])
    cert = bmstair.certify(prob, Y)
    assert cert["psd"] is True
    assert cert["stationarity_residual"] <= 1e-6


def test_licq_and_random_point(exact_instance):
    prob = exact_instance["problem"]
    Y = bmstair.random_point(prob, prob.k, seed=4)
    report = bmstair.licq_check(prob, Y)
    assert report["holds"] is True
    assert report["jacobian_rank"] == prob.m


def test_problem_roundtrip(tmp_path, exact_instance):
    prob = exact_instance["problem"]
    path = tmp_path / "prob.json"
    bmstair.save_problem(prob, str(path))
    back = bmstair.load_problem(str(path))
    assert back.n == prob.n and back.k == prob.k and back.m == prob.m
    gt = exact_instance["ground_truth"]
    assert bmstair.objective(back, gt) == pytest.approx(
        bmstair.objective(prob, gt), abs=1e-14
    )


def test_rounding_noisy_instance():
    inst = bmstair.generate_rotation_sync(
        num_rotations=4, dim=3, graph="complete", noise_sigma=0.1, seed=9
    )
    prob = inst["problem"]
    result = bmstair.solve(prob, seed=2)
    assert result["certified"] is True
    rounded = bmstair.round_solution(prob, np.asarray(result["Y"]))
    assert rounded["X"].shape == (prob.n, prob.k)
    assert rounded["gap"] <= 1e-6 * max(1.0, abs(result["f_bm"]))


def test_invalid_arguments_raise():
    with pytest.raises(ValueError):
        bmstair.generate_rotation_sync(num_rotations=1, dim=2)
    with pytest.raises(ValueError):
        bmstair.generate_rotation_sync(num_rotations=3, dim=5)
