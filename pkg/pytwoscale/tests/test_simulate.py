from pytwoscale.simulation.hazard_models import (HazardSpec,
                                                 choose_hazard_model,
                                                 gompertz_inverse, hm3,
                                                 sample_event_time)
from pytwoscale.simulation.schemes import ObservationScheme, apply_scheme
from pytwoscale.simulation import study
from pytwoscale.simulation.study import (SimConfig, run_study,
                                         simulate_complete, simulate_dataset)
from pytwoscale.utils.errors import FitError, StudyError
import numpy as np
import pandas as pd
import pytest

constant = HazardSpec.constant(0.5)
complete = pd.DataFrame({'id': ['a', 'b', 'c'],
                         'u': [5.0, 12.0, 1.0],
                         's': [25.0, 25.0, 3.0]})


def test_constant_hazard_inversion():
    s = sample_event_time(constant, u=0.0, e=0.5)
    assert(abs(s - 1.0) < 1e-9)
    slow = sample_event_time(constant, 0.0, 1.0, e=np.log(2))
    fast = sample_event_time(constant, 0.0, 2.0, e=np.log(2))
    assert(abs(fast / slow - 0.5) < 1e-9)
    return


def test_cap_when_hazard_is_too_small():
    tiny = HazardSpec.constant(1e-6)
    assert(sample_event_time(tiny, 0.0, e=1.0) == 200.0)
    assert(sample_event_time(constant, 0.0, 0.0, e=0.1) == 200.0)
    return


def test_gompertz_closed_form():
    spec = hm3()
    for u in (0.0, 7.5, 19.0):
        for e in (0.01, 0.3, 1.0, 4.0):
            s = sample_event_time(spec, u, e=e)
            assert(abs(s - gompertz_inverse(spec, u, e)) < 1e-3)
    return


def test_gompertz_empirical_survival():
    spec = hm3()
    u = 10.0
    rng = np.random.default_rng(4)
    draws = np.sort([sample_event_time(spec, u, rng=rng)
                     for _ in range(2000)])
    a = 0.002 + 0.0008 * u
    b = 0.15 - 0.003 * u
    survival = np.exp(-a * (np.exp(b * draws) - 1) / b)
    empirical = 1 - np.arange(1, len(draws) + 1) / len(draws)
    assert(np.max(np.abs(survival - empirical)) < 0.05)
    return


def test_hazard_models():
    for name in ('HM1', 'HM2', 'HM3'):
        spec = choose_hazard_model(name)
        grid = spec.grid(np.linspace(0.5, 19.5, 20), np.linspace(0.5, 20, 20))
        assert(spec.kind == name)
        assert(np.all(np.isfinite(grid)) and np.all(grid > 0))
    with pytest.raises(ValueError, match="HM1, HM2, HM3"):
        choose_hazard_model('HM4')
    return


def test_non_positive_hazard():
    bad = HazardSpec.custom(lambda u, s: 0.1 - 0.01 * s)
    with pytest.raises(ValueError, match="not positive"):
        sample_event_time(bad, 0.0, e=0.5)
    return


def test_scheme_a_and_b():
    a = apply_scheme(complete, ObservationScheme('A'))
    assert((a[0].s_out, a[0].event) == (20.0, False))
    assert((a[2].s_out, a[2].event) == (3.0, True))
    b = apply_scheme(complete, ObservationScheme('B'))
    assert((b[1].s_out, b[1].event) == (18.0, False))
    assert(b[0].s_out == 25.0 and b[0].event)
    with pytest.raises(ValueError, match="A, B, C"):
        ObservationScheme('D')
    return


def test_schemes_keep_event_times():
    config = SimConfig(n=400, seed=9)
    rng = np.random.default_rng(1)
    full = simulate_complete(config, choose_hazard_model('HM2'), rng)
    truth = dict(zip(full['id'], full['s']))
    for kind in 'ABC':
        recs = apply_scheme(full, ObservationScheme(kind),
                            np.random.default_rng(2))
        for rec in recs:
            if rec.event:
                assert(rec.s_out == truth[rec.id])
    return


def test_scheme_c_late_entries():
    config = SimConfig(n=1000, seed=12)
    spec = choose_hazard_model('HM1')
    recs, _ = simulate_dataset(config, spec, ObservationScheme('C'))
    late = [rec for rec in recs if rec.s_in > 0]
    assert(0.9 < len(recs) / config.n < 1.0)
    assert(0 < len(late) <= 200)
    assert(all(rec.s_in < 6.0 and rec.s_out > rec.s_in for rec in late))
    return


def test_simulation_is_reproducible():
    config = SimConfig(n=200, seed=7, covariates=True, replicates=3)
    spec = choose_hazard_model('HM2')
    scheme = ObservationScheme('C')
    first, names = simulate_dataset(config, spec, scheme, replicate=2)
    again, _ = simulate_dataset(config, spec, scheme, replicate=2)
    other, _ = simulate_dataset(config, spec, scheme, replicate=1)
    assert(first == again)
    assert(first != other)
    assert(names == ['x1', 'x2'])
    x2 = {rec.covariates[1] for rec in first}
    assert(x2 <= {-0.5, 0.5})
    return


def test_single_replicate_study():
    config = SimConfig(n=300, seed=3, replicates=1)
    result = run_study(config, choose_hazard_model('HM1'),
                       ObservationScheme('A'))
    assert(result.n_ok == 1)
    assert(np.array_equal(result.mean, result.estimates[0]))
    assert(np.all(np.isnan(result.mc_se)))
    frame = result.to_frame()
    assert(len(frame) == 400)
    assert(list(frame.columns) == ['u', 's', 'truth', 'mean', 'bias',
                                   'rmse', 'mc_se'])
    summary = result.summary()
    assert(summary['replicates_ok'] == 1)
    return


def test_study_fails_when_replicates_fail():
    config = SimConfig(n=1, seed=1, replicates=2)
    with pytest.raises(StudyError):
        run_study(config, HazardSpec.constant(1e-6), ObservationScheme('A'))
    return


@pytest.mark.slow
def test_hm1_recovery():
    spec = choose_hazard_model('HM1')
    scheme = ObservationScheme('A')
    big = run_study(SimConfig(n=1000, replicates=20, seed=100), spec, scheme,
                    threads=4)
    inner = big.interior()
    within = np.abs(big.bias[inner]) < 2 * big.mc_se[inner]
    assert(within.mean() >= 0.9)

    small = run_study(SimConfig(n=300, replicates=20, seed=100), spec, scheme,
                      threads=4)
    assert(big.rmse[inner].mean() < small.rmse[inner].mean())
    return


@pytest.mark.slow
@pytest.mark.parametrize("kind", ['A', 'C'])
def test_beta_recovery(kind):
    config = SimConfig(n=1000, replicates=20, seed=200, covariates=True)
    result = run_study(config, choose_hazard_model('HM1'),
                       ObservationScheme(kind), threads=4)
    table = result.beta_summary().set_index('name')
    assert(abs(table.loc['x1', 'mean'] - 0.5) < 0.05)
    assert(abs(table.loc['x2', 'mean'] - 0.7) < 0.07)
    covered = (np.abs(result.betas['beta'] -
                      result.betas['name'].map({'x1': 0.5, 'x2': 0.7})) <=
               2 * result.betas['se'])
    assert(covered.mean() >= 0.85)
    return


def flaky_fits(monkeypatch):
    """Replicate 2 fails and replicate 3 does not converge."""
    calls = []

    def fake(records, names, bins, knots, settings):
        calls.append(len(records))
        k = len(calls)
        if k == 2:
            raise FitError("no events to fit")
        return {'surface': np.full((20, 20), 0.1 * k), 'beta': np.zeros(0),
                'se': np.zeros(0), 'converged': k != 3, 'ed': 5.0}

    monkeypatch.setattr(study, 'fit_replicate', fake)
    return calls


def test_unconverged_replicates_are_left_out(monkeypatch):
    flaky_fits(monkeypatch)
    config = SimConfig(n=50, seed=3, replicates=10)
    result = run_study(config, choose_hazard_model('HM1'),
                       ObservationScheme('A'))
    assert(result.n_ok == 8)
    assert(result.failures == [(2, "no events to fit")])
    assert(result.nonconverged == [3])
    assert(not result.complete)
    # replicates 1 and 4 to 10
    assert(np.allclose(result.mean, 0.1 * (1 + 49) / 8))
    summary = result.summary()
    assert(summary['replicates_failed'] == 1)
    assert(summary['replicates_nonconverged'] == 1)
    return
