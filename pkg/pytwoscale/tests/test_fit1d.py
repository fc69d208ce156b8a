from concurrent.futures import ThreadPoolExecutor
from pytwoscale.hazard import fit1d
from pytwoscale.hazard.fit1d import fit_1d, predict_1d, select_rho_1d
from pytwoscale.lexis.binning import BinAxis, BinGrid, BinnedData1D, bin_1d
from pytwoscale.lexis.records import IndividualRecord
from pytwoscale.splines.basis import KnotGrid, build_basis
from pytwoscale.utils.errors import FitError
import numpy as np
import pytest

rate = 0.3
s_max = 20.0
axis = BinAxis(width=0.5, n=40)
knots = KnotGrid(0.0, s_max, 10)


def exponential_records(n=1000, seed=1):
    rng = np.random.default_rng(seed)
    s = rng.exponential(1 / rate, size=n)
    return [IndividualRecord(str(i), 0.0, min(x, s_max), x <= s_max)
            for i, x in enumerate(s)]


data = bin_1d(exponential_records(), axis)


def test_constant_hazard_recovered():
    fit, profile = select_rho_1d(data, knots)
    assert(len(profile) == 41)
    assert(fit.converged)
    mid = axis.midpoints
    inside = (mid > 1) & (mid < 15)
    level = fit.lambda_hat[inside].mean()
    assert(abs(level - rate) < 0.1 * rate)
    return


def test_score_and_mass_conservation():
    fit = fit_1d(data, knots, d=2, rho=10.0)
    B = build_basis(knots, axis.midpoints).values
    D = np.diff(np.eye(knots.n_basis), n=2, axis=0)
    score = B.T @ (data.y - fit.mu_hat)
    assert(np.max(np.abs(score - 10.0 * D.T @ D @ fit.alpha)) < 1e-6)
    assert(abs(fit.mu_hat.sum() - data.y.sum()) < 1e-6 * data.y.sum())
    return


def test_ed_decreases_with_rho():
    grid = np.arange(-2.0, 8.5, 0.5)
    _, profile = select_rho_1d(data, knots, log10_rho_grid=grid)
    ed = profile['ed'].to_numpy()
    assert(np.all(np.diff(ed) <= 1e-8))
    assert(ed[0] < knots.n_basis)
    return


def test_large_rho_is_linear():
    fit = fit_1d(data, knots, d=2, rho=1e10)
    assert(2.0 <= fit.ed <= 2.1)
    s = axis.midpoints
    coef = np.polyfit(s, fit.eta_hat, 1)
    assert(np.max(np.abs(np.polyval(coef, s) - fit.eta_hat)) < 1e-4)
    return


def test_fixed_rho_summary():
    fit = fit_1d(data, knots, rho=100.0)
    summary = fit.summary()
    assert(summary['rho'] == 100.0)
    assert(summary['n_coefficients'] == 13)
    assert(summary['converged'])
    assert(np.isclose(summary['aic'], fit.deviance + 2 * fit.ed))
    return


def test_cov_alpha_symmetric_positive():
    fit = fit_1d(data, knots, rho=100.0)
    assert(np.allclose(fit.cov_alpha, fit.cov_alpha.T))
    assert(np.all(np.linalg.eigvalsh(fit.cov_alpha) > 0))
    return


def test_predict_columns_and_extrapolation():
    short = [IndividualRecord(str(i), 0.0, min(x, 10.0), x <= 10.0)
             for i, x in enumerate(np.random.default_rng(3)
                                   .exponential(1 / rate, size=500))]
    part = bin_1d(short, axis)
    fit = fit_1d(part, knots, rho=100.0)
    assert(fit.support == (0.0, 10.0))
    pred = predict_1d(fit, times=[4.0, 19.5], rate_scale=365.25)
    assert(list(pred.columns) == ['time', 'eta', 'lambda', 'se_eta',
                                  'se_lambda', 'lambda_lo', 'lambda_hi',
                                  'extrapolated'])
    assert(list(pred['extrapolated']) == [False, True])
    # uncertainty grows beyond the data
    assert(pred['se_eta'][1] > pred['se_eta'][0])
    assert(np.allclose(pred['lambda'], 365.25 * np.exp(pred['eta'])))
    assert(np.all(pred['lambda_lo'] < pred['lambda']))
    assert(np.all(pred['lambda_hi'] > pred['lambda']))
    return


def test_no_events():
    empty = BinnedData1D(y=np.zeros(40), r=np.ones(40), grid=BinGrid(s=axis))
    with pytest.raises(FitError, match="no events"):
        fit_1d(empty, knots)
    return


def test_events_without_exposure():
    y = np.zeros(40)
    y[5] = 1
    r = np.ones(40)
    r[5] = 0
    bad = BinnedData1D(y=y, r=r, grid=BinGrid(s=axis))
    with pytest.raises(FitError, match="no exposure"):
        fit_1d(bad, knots)
    return


def test_invalid_rho():
    with pytest.raises(ValueError):
        fit_1d(data, knots, rho=0.0)
    with pytest.raises(ValueError):
        select_rho_1d(data, knots, log10_rho_grid=[])
    return


def test_threaded_grid_matches_sequential():
    grid = [0.0, 1.0, 2.0, 3.0]
    seq, p1 = select_rho_1d(data, knots, log10_rho_grid=grid,
                            warm_start=False)
    par, p2 = select_rho_1d(data, knots, log10_rho_grid=grid,
                            warm_start=False, threads=3)
    assert(np.array_equal(p1['aic'], p2['aic']))
    assert(seq.rho == par.rho)
    return


def test_indicator_basis_recovers_raw_rates():
    y = np.array([3.0, 5.0, 2.0, 7.0, 4.0, 6.0, 1.0, 2.0])
    r = np.array([10.0, 12.0, 9.0, 15.0, 11.0, 14.0, 6.0, 8.0])
    bins = BinnedData1D(y=y, r=r, grid=BinGrid(s=BinAxis(1.0, 8)))
    fit = fit_1d(bins, KnotGrid(0.0, 8.0, 8, degree=0), rho=1e-8)
    assert(fit.converged)
    assert(np.max(np.abs(fit.eta_hat - np.log(y / r))) < 1e-6)
    return


@pytest.mark.parametrize("rho", [1e-2, 1.0, 1e4, 1e8])
def test_constant_hazard_fit_is_flat(rho):
    r = np.full(40, 50.0)
    flat = BinnedData1D(y=0.2 * r, r=r, grid=BinGrid(s=axis))
    fit = fit_1d(flat, knots, rho=rho)
    assert(fit.converged)
    assert(np.max(np.abs(fit.eta_hat - np.log(0.2))) < 1e-3)
    return


def test_threads_switch_off_warm_start(monkeypatch):
    workers = []

    class Pool(ThreadPoolExecutor):
        def __init__(self, max_workers):
            workers.append(max_workers)
            super().__init__(max_workers=max_workers)

    monkeypatch.setattr(fit1d, 'ThreadPoolExecutor', Pool)
    grid = [0.0, 1.0, 2.0]
    _, threaded = select_rho_1d(data, knots, log10_rho_grid=grid, threads=2)
    _, cold = select_rho_1d(data, knots, log10_rho_grid=grid,
                            warm_start=False)
    assert(workers == [2])
    assert(np.array_equal(threaded['aic'], cold['aic']))
    select_rho_1d(data, knots, log10_rho_grid=grid, warm_start=True,
                  threads=2)
    assert(workers == [2])
    return
