"""Gate model tests: validation, joint state evolution, serialization."""

import math

import numpy as np
import numpy.testing as npt
import pytest

from qel.gates import (
    Constant,
    GateProgram,
    Rotation,
    TrackedState,
    apply_gate,
    condition_number,
    inverse_drift,
    load_program,
    program_from_text,
    program_matrix,
    program_to_text,
    random_program,
    run_program,
    save_program,
    verify_well_conditioned,
)
from qel.hadamard import fast_wht_program, wht_matrix

ATOL = 1e-12
DRIFT_ATOL = 1e-10


def rotation_block(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]])


def test_rotation_validation():
    Rotation(1, 2, 0.5).validate(4)
    with pytest.raises(ValueError):
        Rotation(0, 2, 0.5).validate(4)
    with pytest.raises(ValueError):
        Rotation(1, 5, 0.5).validate(4)
    with pytest.raises(ValueError):
        Rotation(3, 3, 0.5).validate(4)
    with pytest.raises(ValueError):
        Rotation(1, 2, math.inf).validate(4)


def test_constant_validation():
    Constant(4, -2.0).validate(4)
    with pytest.raises(ValueError):
        Constant(5, 1.0).validate(4)
    with pytest.raises(ValueError):
        Constant(1, 0.0).validate(4)
    with pytest.raises(ValueError):
        Constant(1, math.nan).validate(4)


def test_program_validation_reports_gate_index():
    with pytest.raises(ValueError, match="gate 2"):
        GateProgram(4, [Rotation(1, 2, 0.1), Constant(9, 1.0)])


def test_apply_rotation_matches_left_multiplication():
    rng = np.random.default_rng(11)
    M0 = rng.standard_normal((6, 6)) + 3 * np.eye(6)
    state = TrackedState(M0.copy(), np.linalg.inv(M0).T.copy(), 0)
    theta = 0.7
    apply_gate(state, Rotation(2, 5, theta))
    G = np.eye(6)
    G[np.ix_([1, 4], [1, 4])] = rotation_block(theta)
    npt.assert_allclose(state.M, G @ M0, atol=ATOL)
    npt.assert_allclose(state.MinvT, G @ np.linalg.inv(M0).T, atol=1e-10)
    npt.assert_allclose(state.M.T @ state.MinvT, np.eye(6), atol=1e-10)


def test_apply_constant_scales_row_and_inverse_row():
    rng = np.random.default_rng(12)
    M0 = rng.standard_normal((5, 5)) + 3 * np.eye(5)
    state = TrackedState(M0.copy(), np.linalg.inv(M0).T.copy(), 0)
    apply_gate(state, Constant(3, -4.0))
    npt.assert_allclose(state.M[2], -4.0 * M0[2], atol=ATOL)
    npt.assert_allclose(state.M.T @ state.MinvT, np.eye(5), atol=1e-10)


def test_inverse_transpose_stays_synchronized_along_random_program():
    rng = np.random.default_rng(13)
    program = random_program(16, 300, 30, rng)
    state = run_program(program)
    assert state.t == len(program)
    assert inverse_drift(state) < DRIFT_ATOL


def test_run_program_observer_sees_every_gate():
    program = fast_wht_program(8)
    seen = []
    run_program(program, observers=[lambda t, gate, state: seen.append(t)])
    assert seen == list(range(1, len(program) + 1))


def test_drift_check_raises_on_impossible_tolerance():
    rng = np.random.default_rng(14)
    program = random_program(8, 64, 8, rng)
    with pytest.raises(RuntimeError, match="drift"):
        run_program(program, drift_check_every=16, drift_tol=1e-18)


def test_program_matrix_realizes_walsh_hadamard():
    for n in (2, 4, 16):
        F = program_matrix(fast_wht_program(n))
        npt.assert_allclose(F, wht_matrix(n), atol=1e-13)


def test_condition_number_exact_cases():
    assert condition_number(np.eye(7)) == pytest.approx(1.0)
    assert condition_number(np.diag([2.0, 1.0, 1.0])) == pytest.approx(2.0)
    M = np.eye(3)
    M[1, 1] = 0.0
    with pytest.raises(ValueError, match="singular"):
        condition_number(M)


def test_verify_well_conditioned_isometry_program():
    rng = np.random.default_rng(15)
    program = random_program(12, 80, 8, rng, log2_scale=0.0)
    report = verify_well_conditioned(program, kappa_max=1.0 + 1e-9)
    assert report.passed
    assert report.max_kappa == pytest.approx(1.0, abs=1e-9)


def test_verify_well_conditioned_flags_large_scaling():
    program = GateProgram(4, [Rotation(1, 2, 0.3), Constant(1, 8.0)])
    report = verify_well_conditioned(program, kappa_max=2.0)
    assert not report.passed
    assert report.max_kappa == pytest.approx(8.0)
    assert report.at_step == 2


def test_exhaustive_and_sampled_conditioning_agree():
    rng = np.random.default_rng(16)
    program = random_program(8, 60, 12, rng, log2_scale=1.0)
    fast = verify_well_conditioned(program, kappa_max=1e6)
    slow = verify_well_conditioned(program, kappa_max=1e6, exhaustive=True)
    assert fast.max_kappa == pytest.approx(slow.max_kappa, rel=1e-9)


def test_program_text_round_trip():
    rng = np.random.default_rng(17)
    program = random_program(8, 25, 5, rng)
    text = program_to_text(program)
    back = program_from_text(text)
    assert back.n == program.n
    assert back.gates == program.gates


def test_program_text_header_and_comments():
    text = "# produced by hand\nn 4 m 2\nR 1 2 0.5\nC 3 -1.0\n"
    program = program_from_text(text)
    assert program.n == 4
    assert program.gates == [Rotation(1, 2, 0.5), Constant(3, -1.0)]


def test_program_text_count_mismatch_rejected():
    with pytest.raises(ValueError):
        program_from_text("n 4 m 3\nR 1 2 0.5\n")


def test_save_and_load_program(tmp_path):
    rng = np.random.default_rng(18)
    program = random_program(4, 10, 2, rng)
    path = tmp_path / "prog.gates"
    save_program(program, path)
    assert load_program(path).gates == program.gates


def test_random_program_is_deterministic_in_seed():
    a = random_program(8, 20, 4, np.random.default_rng(99))
    b = random_program(8, 20, 4, np.random.default_rng(99))
    assert a.gates == b.gates
    assert a.rotation_count() == 20
    assert a.constant_count() == 4
