import math

import numpy as np
import pytest

from ripzz.dynamics import accumulate_phase, cz_amplitude, integrate_amplitudes
from ripzz.multimode import mode_ladder
from ripzz.optimizer import (
    PENALTY,
    DEConfig,
    OptimizationProblem,
    SlepianResponse,
    envelope_shootout,
    evaluate,
    evaluate_full,
    objective_residual,
    optimize,
    shootout_envelopes,
    with_gate_time,
)
from ripzz.pulses import REFERENCE_SLEPIAN, rescale_envelope, slepian_constraint_residual

SMALL = DEConfig(population_factor=5, generations=15, rng_seed=3)


@pytest.fixture(scope="module")
def problem(row4):
    return OptimizationProblem(row4, gate_time=100.0, ladder=mode_ladder(row4, 5))


def test_reference_coefficients_residual(problem):
    raw = OptimizationProblem(problem.device, gate_time=100.0, ladder=problem.ladder, theta_mode="penalty")
    _, res, theta = evaluate(REFERENCE_SLEPIAN, raw, dt=0.01)
    assert res < 1e-2
    assert res == pytest.approx(6.64e-3, rel=0.01)
    assert theta == pytest.approx(2.575, rel=1e-3)


def test_objective_is_deterministic(problem):
    lam = np.linspace(-0.5, 0.9, 7)
    assert objective_residual(lam, problem) == objective_residual(lam, problem)


def test_zero_amplitude(problem):
    dead = OptimizationProblem(problem.device.with_drive(amplitude=0.0), theta_weight=0.0, theta_mode="penalty")
    assert objective_residual(REFERENCE_SLEPIAN, dead) == 0.0
    guarded = OptimizationProblem(problem.device.with_drive(amplitude=0.0), theta_mode="penalty")
    assert objective_residual(REFERENCE_SLEPIAN, guarded) == pytest.approx(10 * math.pi)
    rescaled = OptimizationProblem(problem.device.with_drive(amplitude=0.0))
    assert objective_residual(REFERENCE_SLEPIAN, rescaled) == pytest.approx(10 * math.pi)


def test_integrator_abort_is_penalised(problem):
    wild = OptimizationProblem(problem.device.with_detuning(-5.0), theta_mode="penalty")
    assert objective_residual(REFERENCE_SLEPIAN, wild, dt=0.2) == PENALTY


def test_rescale_hits_pi_exactly(problem):
    score, res, theta, lam = evaluate_full(REFERENCE_SLEPIAN, problem, dt=0.01)
    assert theta == math.pi
    again = evaluate_full(lam, OptimizationProblem(problem.device, ladder=problem.ladder, theta_mode="penalty"), 0.01)
    assert again[2] == pytest.approx(math.pi, rel=1e-9)
    assert again[1] == pytest.approx(res, rel=1e-9)


@pytest.mark.parametrize("mode", ["rescale", "penalty"])
def test_fast_path_matches_direct(problem, mode):
    p = OptimizationProblem(problem.device, ladder=problem.ladder, theta_mode=mode)
    fast = SlepianResponse(p)
    rng = np.random.default_rng(7)
    for lam in [np.array(REFERENCE_SLEPIAN), *rng.uniform(-1, 1, (3, 7))]:
        a = fast.evaluate(lam)
        b = evaluate(lam, p)
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)


def test_problem_validation(row4):
    with pytest.raises(ValueError):
        OptimizationProblem(row4, gate_time=0.0)
    with pytest.raises(ValueError):
        OptimizationProblem(row4, bounds=(1.0, -1.0))
    with pytest.raises(ValueError):
        OptimizationProblem(row4, bounds=(-math.inf, 1.0))
    with pytest.raises(ValueError):
        OptimizationProblem(row4, constraint_mode="projection")
    with pytest.raises(ValueError):
        OptimizationProblem(row4, theta_mode="clip")
    with pytest.raises(ValueError):
        OptimizationProblem(row4).prepare(np.ones(3))


@pytest.mark.parametrize(
    "kw", [{"population_factor": 0}, {"mutation": 0.0}, {"mutation": 2.5}, {"crossover": 1.1}, {"generations": 0}, {"rng_seed": -1}]
)
def test_de_config_validation(kw):
    with pytest.raises(ValueError):
        DEConfig(**kw)


def test_quadratic_sanity(row4):
    p = OptimizationProblem(row4, dimension=1, bounds=(-2.0, 2.0))
    res = optimize(p, DEConfig(), objective=lambda x: (x[0] - 0.3) ** 2)
    assert abs(res.best[0] - 0.3) <= 1e-6


def test_seeded_runs_are_identical(problem):
    a = optimize(problem, SMALL)
    b = optimize(problem, SMALL)
    assert a.trace == b.trace
    np.testing.assert_array_equal(a.best, b.best)
    c = optimize(problem, SMALL, parallel=3)
    assert c.trace == a.trace


def test_trace_monotone_and_result_consistent(problem):
    res = optimize(problem, SMALL)
    assert len(res.trace) == SMALL.generations
    assert all(b <= a for a, b in zip(res.trace, res.trace[1:]))
    obj, resid, theta = evaluate(res.best, problem, dt=res.dt)
    assert obj == pytest.approx(res.objective, rel=1e-9)
    assert resid == pytest.approx(res.residual_photons, rel=1e-9)
    assert res.evaluations > 0
    assert set(res.to_dict()) >= {"best", "objective", "residual_photons", "theta", "trace"}


def test_projection_mode(problem):
    p = OptimizationProblem(problem.device, ladder=problem.ladder, constraint_mode="projection", theta_mode="penalty")
    rng = np.random.default_rng(1)
    for lam in rng.uniform(-2, 2, (20, 7)):
        assert abs(slepian_constraint_residual(p.prepare(lam))) <= 1e-12
    res = optimize(p, SMALL)
    assert abs(res.constraint_residual) <= 1e-12


def test_penalty_mode_reports_constraint(problem):
    p = OptimizationProblem(problem.device, ladder=problem.ladder, constraint_mode="penalty", constraint_weight=0.5)
    res = optimize(p, SMALL)
    assert res.constraint_residual == pytest.approx(slepian_constraint_residual(res.best))
    plain = OptimizationProblem(problem.device, ladder=problem.ladder)
    base = evaluate(res.best, plain, dt=res.dt)[0]
    assert res.objective == pytest.approx(base + 0.5 * abs(res.constraint_residual), rel=1e-9)


def test_default_budget_reaches_target(problem):
    res = optimize(problem)
    assert res.residual_photons < 1e-2
    assert res.theta == pytest.approx(math.pi, rel=1e-6)


def test_optimized_below_fixed_families(problem):
    best = optimize(problem).residual_photons
    for name, env in shootout_envelopes().items():
        if name == "slepian":
            continue
        dev = problem.device.with_envelope(rescale_envelope(env, 100.0))
        dev = cz_amplitude(dev, dt=0.05, ladder=problem.ladder)
        traj = integrate_amplitudes(dev, dt=0.01, ladder=problem.ladder)
        assert accumulate_phase(traj, dev).final_phase == pytest.approx(math.pi, rel=1e-3)
        assert best < traj.residual_photons, name


def test_shootout_families_settle(problem):
    rows = envelope_shootout(problem, gate_times=(60.0, 250.0))
    by = {}
    for r in rows:
        by.setdefault(r.variant, {})[r.gate_time] = r.residual_photons
    assert set(by) == set(shootout_envelopes())
    for name, v in by.items():
        assert v[250.0] < v[60.0], name
    with pytest.raises(ValueError):
        envelope_shootout(problem, variants={})


def test_with_gate_time(problem):
    assert with_gate_time(problem, 150.0).gate_time == 150.0
    assert problem.envelope(REFERENCE_SLEPIAN).duration == pytest.approx(100.0)
