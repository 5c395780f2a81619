import numpy as np
import pytest

from civr import (DoublePhasePoint, LaunchParams, QuarticSpec, evolve,
                  evolve_ensemble, finite_diff_tangent, initial_conditions,
                  m_to_M, n_to_m, period_and_turning_points, build_scaled,
                  trajectory_history)
from civr.trajectory import H2_DRIFT_CAP, launch_grid
from civr.grids import AxisSpec, PhaseGridSpec
from civr.phase_space import CoherentLabel

J4 = np.array([[0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, 0, 0], [0, -1, 0, 0]],
              dtype=float)

HARMONIC = build_scaled(QuarticSpec(Omega=1.0, lam=0.0))
QUARTIC = build_scaled(QuarticSpec(Omega=1.0, lam=0.4))


# -- initial conditions -------------------------------------------------------


def test_initial_conditions_central():
    x = initial_conditions(LaunchParams(0.0, -2.0, 0.0, -2.0, 1.0))
    assert x == DoublePhasePoint(0.0, 0.0, -2.0, 0.0)


def test_initial_conditions_position_displacement():
    x = initial_conditions(LaunchParams(0.0, -2.0, 1.0, -2.0, 1.0))
    assert x == DoublePhasePoint(0.5, 0.5, -2.0, 0.0)
    # complex form: q(0) = 0.5, p(0) = -2 + 0.5i
    assert x.Q1 + 1j * x.P2 == 0.5
    assert x.P1 + 1j * x.Q2 == -2.0 + 0.5j


def test_initial_conditions_momentum_displacement():
    x = initial_conditions(LaunchParams(0.0, -2.0, 0.0, -1.0, 1.0))
    assert x == DoublePhasePoint(0.0, 0.0, -1.5, -0.5)


def test_initial_conditions_w_relation():
    rng = np.random.default_rng(30)
    for _ in range(50):
        q0, p0, q1, p1 = rng.normal(size=4) * 2
        lp = LaunchParams(q0, p0, q1, p1, 1.0)
        x = initial_conditions(lp)
        w = lp.w
        assert abs((x.Q1 + 1j * x.P2) - (q0 + w)) < 1e-14
        assert abs((x.P1 + 1j * x.Q2) - (p0 + 1j * w)) < 1e-14
        # u(0) must equal the wavepacket label
        u0 = ((x.Q1 + 1j * x.P2) + 1j * (x.P1 + 1j * x.Q2)) / np.sqrt(2)
        assert abs(u0 - CoherentLabel(q0, p0).z) < 1e-14


# -- closed-form harmonic checks ---------------------------------------------


def test_harmonic_central_trajectory_closed_form():
    T = 1.0
    rec = evolve(HARMONIC, LaunchParams(0.0, -2.0, 0.0, -2.0, T))
    z0 = CoherentLabel(0.0, -2.0).z
    assert abs(rec.end.u - z0 * np.exp(-1j * T)) < 1e-10
    assert abs(rec.end.v - np.conj(z0) * np.exp(1j * T)) < 1e-10
    assert abs(rec.M_vv - np.exp(1j * T)) < 1e-10
    assert abs(rec.xi - T) < 1e-10
    assert abs(rec.I - T / 2) < 1e-10
    # S = -T/2 - i u0 v0 with u0 v0 = |z0|^2 = 2
    assert abs(rec.S - (-T / 2 - 2j)) < 1e-10


def test_harmonic_rotation_tangent_matrix():
    T = 0.8
    rec = evolve(HARMONIC, LaunchParams(0.3, 0.7, -0.2, 1.1, T))
    c, s = np.cos(T), np.sin(T)
    assert np.allclose(rec.m, [[c, s], [-s, c]], atol=1e-10)
    assert abs(rec.M[0, 0] - np.exp(-1j * T)) < 1e-10
    assert abs(rec.M[1, 1] - np.exp(1j * T)) < 1e-10
    assert abs(rec.M[0, 1]) < 1e-10 and abs(rec.M[1, 0]) < 1e-10


def test_zero_time_record():
    rec = evolve(QUARTIC, LaunchParams(0.1, -1.0, 0.4, -0.6, 0.0))
    u0, v0 = rec.end.u, rec.end.v
    assert abs(rec.S - (-1j * u0 * v0)) < 1e-14
    assert np.allclose(rec.n, np.eye(4))
    assert rec.xi == 0.0
    assert rec.I == 0.0


def test_quartic_bare_period_and_turning_points():
    tau, x1, x2 = period_and_turning_points(QUARTIC, 0.0, -2.0)
    x_star = np.sqrt((-5 + np.sqrt(105)) / 2)  # root of 0.5 x^2 + 0.1 x^4 = 2
    assert abs(tau - 4.7) < 0.05
    assert abs(x1 - x_star) < 1e-6
    assert abs(x2 - x_star) < 1e-6


# -- tangent-matrix conversions ----------------------------------------------


def test_n_to_m_identity_and_single_entry():
    assert np.allclose(n_to_m(np.eye(4)), np.eye(2))
    n = np.eye(4)
    n[0, 3] = 1.0
    m = n_to_m(n)
    assert m[0, 0] == 1.0 - 1.0j


def test_m_to_M_identity_and_rotation():
    assert np.allclose(m_to_M(np.eye(2, dtype=complex)), np.eye(2))
    T = 0.6
    c, s = np.cos(T), np.sin(T)
    M = m_to_M(np.array([[c, s], [-s, c]], dtype=complex))
    assert abs(M[0, 0] - np.exp(-1j * T)) < 1e-14
    assert abs(M[1, 1] - np.exp(1j * T)) < 1e-14
    assert abs(M[0, 1]) < 1e-14 and abs(M[1, 0]) < 1e-14


def test_m_to_M_preserves_determinant():
    rng = np.random.default_rng(31)
    for _ in range(50):
        # random complex symplectic 2x2: det fixed to 1 by construction
        m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        m[1, 1] = (1.0 + m[0, 1] * m[1, 0]) / m[0, 0]
        M = m_to_M(m)
        det_m = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        det_M = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        assert abs(det_M - det_m) < 1e-12


# -- invariants over ensembles -----------------------------------------------


def _random_launch_starts(n, rng, half_q=1.5, half_p=1.5):
    q1 = rng.uniform(-half_q, half_q, n)
    p1 = -2.0 + rng.uniform(-half_p, half_p, n)
    x0 = np.empty((n, 4))
    x0[:, 0] = 0.5 * q1
    x0[:, 1] = 0.5 * q1
    x0[:, 2] = -2.0 + 0.5 * (p1 + 2.0)
    x0[:, 3] = -0.5 * (p1 + 2.0)
    return x0


def test_energy_conservation_and_symplecticity_quartic():
    rng = np.random.default_rng(32)
    x0 = _random_launch_starts(60, rng)
    snap = evolve_ensemble(QUARTIC, x0, [8.5], dt=1e-3)[-1]
    assert snap.valid.all()
    q0 = x0[:, 0] + 1j * x0[:, 3]
    p0 = x0[:, 2] + 1j * x0[:, 1]
    h0 = QUARTIC.value(q0, p0)
    assert np.max(snap.h1_drift / np.maximum(1, np.abs(h0.real))) < 1e-8
    assert np.max(snap.h2_drift / np.maximum(1, np.abs(h0.imag))) < 1e-8
    # symplecticity of the real tangent matrices and unit determinant of M
    for i in range(x0.shape[0]):
        n = snap.n[i]
        assert np.max(np.abs(n.T @ J4 @ n - J4)) < 1e-8
        M = snap.M[i]
        assert abs(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0] - 1.0) < 1e-8
    assert np.max(snap.max_xi_step) < np.pi


def test_symplecticity_along_the_path():
    times = [0.5, 1.0, 2.0, 4.0, 6.0, 8.5]
    rng = np.random.default_rng(33)
    x0 = _random_launch_starts(10, rng)
    for snap in evolve_ensemble(QUARTIC, x0, times, dt=1e-3):
        for i in range(x0.shape[0]):
            n = snap.n[i]
            assert np.max(np.abs(n.T @ J4 @ n - J4)) < 1e-8
            M = snap.M[i]
            assert abs(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0] - 1.0) < 1e-8


def test_real_trajectory_closure():
    # central launches stay on the real slice for all snapshot times
    times = [1.0, 2.5, 4.5, 6.5, 8.5]
    x0 = np.array([[0.0, 0.0, -2.0, 0.0]])
    for snap in evolve_ensemble(QUARTIC, x0, times, dt=1e-3):
        q = (snap.u[0] + snap.v[0]) / np.sqrt(2)
        p = -1j * (snap.u[0] - snap.v[0]) / np.sqrt(2)
        assert abs(q.imag) < 1e-12
        assert abs(p.imag) < 1e-12
        # purely dynamical phase: Im(S + I) cancels the Gaussian norms
        re_phi = (-np.imag(snap.S[0] + snap.I[0])
                  - 0.5 * abs(CoherentLabel(0.0, -2.0).z) ** 2
                  - 0.5 * abs(snap.v[0]) ** 2)
        assert abs(re_phi) < 1e-9


def test_finite_diff_tangent_matches_variational():
    lp = LaunchParams(0.0, -2.0, 0.8, -1.4, 1.0)
    rec = evolve(QUARTIC, lp)
    fd = finite_diff_tangent(QUARTIC, lp, eps=1e-5)
    assert np.max(np.abs(fd - rec.n)) / np.max(np.abs(rec.n)) < 1e-4


def test_finite_diff_tangent_harmonic_rotation():
    lp = LaunchParams(0.0, -2.0, 0.5, -2.0, 0.7, 1e-3)
    fd = finite_diff_tangent(HARMONIC, lp, eps=1e-5)
    rec = evolve(HARMONIC, lp)
    assert np.max(np.abs(fd - rec.n)) < 1e-6
    c, s = np.cos(0.7), np.sin(0.7)
    expected = np.array([[c, 0, s, 0], [0, c, 0, -s],
                         [-s, 0, c, 0], [0, s, 0, c]])
    assert np.max(np.abs(fd - expected)) < 1e-6


def test_finite_diff_tangent_zero_time():
    lp = LaunchParams(0.0, -2.0, 0.5, -1.0, 0.0)
    fd = finite_diff_tangent(QUARTIC, lp, eps=1e-5)
    assert np.max(np.abs(fd - np.eye(4))) < 1e-9


def test_finite_diff_tangent_eps_range():
    lp = LaunchParams(0.0, -2.0, 0.5, -1.0, 0.5)
    with pytest.raises(ValueError):
        finite_diff_tangent(QUARTIC, lp, eps=1e-2)


def test_xi_continuity_steps_below_pi():
    rng = np.random.default_rng(34)
    x0 = _random_launch_starts(40, rng)
    snap = evolve_ensemble(QUARTIC, x0, [8.5], dt=1e-3)[-1]
    assert np.max(snap.max_xi_step[snap.valid]) < np.pi


def test_singular_trajectory_is_flagged_invalid():
    # a far corner of the companion grid reaches a complex-time blow-up
    snap = evolve_ensemble(QUARTIC,
                           np.array([[1.5, 1.5, 0.7, -2.7]]), [8.5], dt=1e-3)[-1]
    assert not snap.valid[0]
    rec = snap.record(0)
    assert not rec.valid
    assert not (rec.H2_drift <= H2_DRIFT_CAP)


def test_partial_final_step_lands_on_time():
    T = 2 * np.pi
    rec = evolve(HARMONIC, LaunchParams(0.0, -2.0, 0.0, -2.0, T))
    assert abs(rec.end.u - CoherentLabel(0.0, -2.0).z) < 1e-9
    assert abs(rec.xi - T) < 1e-9


def test_evolve_ensemble_worker_chunking_is_bitexact():
    rng = np.random.default_rng(35)
    x0 = _random_launch_starts(16, rng)
    s1 = evolve_ensemble(QUARTIC, x0, [1.0], dt=1e-3, workers=1)[-1]
    s3 = evolve_ensemble(QUARTIC, x0, [1.0], dt=1e-3, workers=3)[-1]
    for name in ("u", "v", "S", "I", "n", "M", "xi", "q1t", "p1t",
                 "h1_drift", "h2_drift", "max_xi_step", "valid"):
        assert np.array_equal(getattr(s1, name), getattr(s3, name),
                              equal_nan=True), name


def test_launch_grid_ordering_and_values():
    z0 = CoherentLabel(0.0, -2.0)
    grid = PhaseGridSpec(AxisSpec(-3.0, 3.0, 3), AxisSpec(-4.0, 4.0, 2))
    q1, p1, x0 = launch_grid(z0, grid)
    assert q1.shape == (6,)
    # q-major ordering: p varies fastest
    assert np.allclose(q1, [-2, -2, 0, 0, 2, 2])
    assert np.allclose(p1, [-2, 2, -2, 2, -2, 2])
    x = initial_conditions(LaunchParams(0.0, -2.0, q1[1], p1[1], 1.0))
    assert np.allclose(x0[1], x.as_array())


def test_trajectory_history_columns():
    lp = LaunchParams(0.0, -2.0, 0.5, -1.5, 0.02, 1e-3)
    hist = trajectory_history(QUARTIC, lp, stride=5)
    assert list(hist) == ["t", "Q1", "Q2", "P1", "P2", "re_S", "im_S",
                          "re_Mvv", "im_Mvv", "xi"]
    assert hist["t"][0] == 0.0
    assert hist["t"][-1] == pytest.approx(0.02)
    assert hist["re_Mvv"][0] == 1.0 and hist["im_Mvv"][0] == 0.0
    assert hist["xi"][0] == 0.0
    x = initial_conditions(lp)
    assert hist["Q1"][0] == x.Q1 and hist["P2"][0] == x.P2
