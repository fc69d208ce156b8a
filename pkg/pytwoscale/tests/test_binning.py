from pytwoscale.hazard.fit1d import fit_1d
from pytwoscale.lexis.binning import (BinAxis, BinGrid, BinnedData1D,
                                      bin_1d, bin_2d, bin_individuals,
                                      occurrence_exposure)
from pytwoscale.lexis.records import IndividualRecord
from pytwoscale.splines.basis import KnotGrid
from pytwoscale.utils.errors import BinningError
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

s_axis = BinAxis(width=1.0, n=5)
u_axis = BinAxis(width=2.0, n=3, label='u')
grid_2d = BinGrid(s=s_axis, u=u_axis)

records = [IndividualRecord('a', u=0.5, s_in=0.0, s_out=2.5, event=True,
                            covariates=(1.0,)),
           IndividualRecord('b', u=3.0, s_in=1.5, s_out=4.0, event=False,
                            covariates=(0.0,)),
           IndividualRecord('c', u=5.9, s_in=0.0, s_out=5.0, event=True,
                            covariates=(2.0,))]


def test_axis():
    assert(np.array_equal(s_axis.breaks, [0, 1, 2, 3, 4, 5]))
    assert(np.array_equal(s_axis.midpoints, [0.5, 1.5, 2.5, 3.5, 4.5]))
    assert(list(s_axis.locate([-0.1, 0.0, 1.0, 4.99, 5.0, 5.1])) ==
           [-1, 0, 1, 4, 4, 5])
    axis = BinAxis.covering(0.0, 61.0, 30.0)
    assert(axis.n == 3)
    assert(BinAxis.covering(0.0, 60.0, 30.0).n == 2)
    return


def test_bin_1d():
    data = bin_1d(records, s_axis)
    assert(np.allclose(data.y, [0, 0, 1, 0, 1]))
    # a: 2.5, b: 2.5 from 1.5, c: 5
    assert(np.allclose(data.r, [2, 2.5, 2.5, 2, 1]))
    assert(data.n_events == 2)
    return


def test_event_on_interior_break():
    rec = [IndividualRecord('x', 0.0, 2.0, True)]
    data = bin_1d(rec, s_axis)
    assert(np.allclose(data.y, [0, 1, 0, 0, 0]))
    assert(np.allclose(data.r, [1, 1, 0, 0, 0]))
    return


def test_event_on_final_break():
    rec = [IndividualRecord('x', 0.0, 5.0, True),
           IndividualRecord('y', 0.0, 4.5, True, s_in=4.0)]
    data = bin_1d(rec, s_axis)
    assert(np.allclose(data.y, [0, 0, 0, 0, 2]))
    assert(np.allclose(data.r, [1, 1, 1, 1, 1.5]))
    assert(list(s_axis.locate_exit([0.5, 1.0, 1.5, 5.0])) == [0, 0, 1, 4])
    return


def test_events_on_breaks_can_be_fitted():
    axis = BinAxis(width=30.0, n=3)
    rng = np.random.default_rng(3)
    days = rng.integers(1, 90, size=50)
    recs = [IndividualRecord(str(i), 0.0, float(day), bool(day % 3))
            for i, day in enumerate(days)]
    recs.append(IndividualRecord('on_break', 0.0, 60.0, True))
    data = bin_1d(recs, axis)
    assert(np.all(data.r[data.y > 0] > 0))
    fit = fit_1d(data, KnotGrid(0.0, 90.0, 4), rho=10.0)
    assert(fit.converged)
    return


def test_bin_2d_rows():
    data = bin_2d(records, grid_2d)
    assert(data.Y.shape == (3, 5))
    assert(data.Y[0, 2] == 1)
    assert(data.Y[2, 4] == 1)
    assert(np.allclose(data.R[1], [0, 0.5, 1, 1, 0]))
    return


def test_bin_individuals_aggregates():
    data = bin_individuals(records, grid_2d, ['dose'])
    assert(data.n == 3)
    assert(data.p == 1)
    assert(data.covariate_names == ('dose',))
    agg = data.aggregate()
    flat = bin_2d(records, grid_2d)
    assert(np.allclose(agg.Y, flat.Y))
    assert(np.allclose(agg.R, flat.R))
    Y1, R1 = data.slice(1)
    assert(R1[1].sum() == 2.5)
    assert(R1[[0, 2]].sum() == 0)
    return


def test_records_outside_grid():
    far = records + [IndividualRecord('late', u=1.0, s_out=7.0, event=True)]
    with pytest.raises(BinningError, match="late"):
        bin_1d(far, s_axis)
    wide = records + [IndividualRecord('old', u=9.0, s_out=1.0, event=True)]
    with pytest.raises(BinningError, match="old"):
        bin_2d(wide, grid_2d)
    return


def test_occurrence_exposure():
    data = BinnedData1D(y=np.array([1.0, 0.0, 2.0]),
                        r=np.array([2.0, 0.0, 4.0]),
                        grid=BinGrid(s=BinAxis(1.0, 3)))
    rates = occurrence_exposure(data)
    assert(rates[0] == 0.5)
    assert(np.isnan(rates[1]))
    assert(rates[2] == 0.5)
    return


record_lists = st.lists(
    st.tuples(st.floats(0, 5.99), st.floats(0, 4.9), st.floats(0.01, 5),
              st.booleans()),
    min_size=1, max_size=25)


@settings(max_examples=50, deadline=None)
@given(record_lists)
def test_binning_conserves_time_and_events(rows):
    recs = []
    for i, (u, s_in, length, event) in enumerate(rows):
        s_out = min(s_in + length, 5.0)
        if s_out <= s_in:
            continue
        recs.append(IndividualRecord(str(i), u, s_out, event, s_in))
    if not recs:
        return
    data = bin_2d(recs, grid_2d)
    total = sum(rec.s_out - rec.s_in for rec in recs)
    assert(np.isclose(data.R.sum(), total))
    assert(data.Y.sum() == sum(rec.event for rec in recs))
    assert(np.all(data.R >= 0))
    assert(np.all(data.R[data.Y > 0] > 0))
    return


@settings(max_examples=30, deadline=None)
@given(record_lists, st.randoms(use_true_random=False))
def test_binning_ignores_record_order(rows, random):
    recs = [IndividualRecord(str(i), u, min(s_in + length, 5.0), event, s_in)
            for i, (u, s_in, length, event) in enumerate(rows)
            if min(s_in + length, 5.0) > s_in]
    if not recs:
        return
    shuffled = list(recs)
    random.shuffle(shuffled)
    first = bin_individuals(recs, grid_2d).aggregate()
    second = bin_individuals(shuffled, grid_2d).aggregate()
    assert(np.allclose(first.Y, second.Y))
    assert(np.allclose(first.R, second.R))
    return
