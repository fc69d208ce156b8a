from pytwoscale.lexis.records import (IndividualRecord, read_records_csv,
                                      record_from_origins, transform_ts_to_us,
                                      transform_us_to_ts, write_records_csv)
from pytwoscale.utils.errors import (CSVFormatError, HazardDomainError,
                                     RecordError)
from pytwoscale.data.library import example_records
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

header = "id,u,s_in,s_out,event,age\n"


def test_record_properties():
    rec = IndividualRecord('a', u=3.0, s_in=1.0, s_out=4.5, event=1)
    assert(rec.t_in == 4.0)
    assert(rec.t_out == 7.5)
    assert(rec.event is True)
    assert(rec.covariates == ())
    return


@pytest.mark.parametrize("kwargs", [
    dict(u=-1.0, s_out=2.0, event=True),
    dict(u=1.0, s_in=2.0, s_out=2.0, event=True),
    dict(u=1.0, s_in=-0.5, s_out=2.0, event=False),
    dict(u=np.nan, s_out=2.0, event=False),
])
def test_record_invalid(kwargs):
    with pytest.raises(RecordError):
        IndividualRecord('bad', **kwargs)


def test_transform_scalar():
    assert(transform_ts_to_us(10.0, 4.0) == (6.0, 4.0))
    assert(transform_us_to_ts(6.0, 4.0) == (10.0, 4.0))
    return


def test_transform_outside_domain():
    with pytest.raises(HazardDomainError, match="t > s"):
        transform_ts_to_us(3.0, 4.0)
    with pytest.raises(HazardDomainError):
        transform_ts_to_us([5.0, 1.0], [1.0, 2.0])
    return


@given(st.lists(st.tuples(st.floats(0, 1e4), st.floats(0, 1e4)),
                min_size=1, max_size=30))
def test_transform_round_trip(pairs):
    u = np.array([p[0] for p in pairs])
    s = np.array([p[1] for p in pairs])
    t, s2 = transform_us_to_ts(u, s)
    u2, s3 = transform_ts_to_us(t, s2)
    assert(np.allclose(u2, u, atol=1e-9 * (1 + t.max())))
    assert(np.array_equal(s3, s))


def test_record_from_origins():
    rec = record_from_origins('c1', t_origin=0.0, s_origin=120.0,
                              exit_time=500.0, event=True,
                              covariates=(1, 0), entry_time=150.0)
    assert(rec.u == 120.0)
    assert(rec.s_in == 30.0)
    assert(rec.s_out == 380.0)
    assert(rec.covariates == (1.0, 0.0))

    # entry before the origin of s counts from that origin
    early = record_from_origins('c2', 0.0, 120.0, 500.0, False,
                                entry_time=50.0)
    assert(early.s_in == 0.0)

    with pytest.raises(HazardDomainError):
        record_from_origins('c3', 100.0, 50.0, 200.0, True)
    with pytest.raises(RecordError):
        record_from_origins('c4', 0.0, 50.0, 50.0, True)
    return


def test_read_example_records():
    records, names = read_records_csv(example_records)
    assert(len(records) == 36)
    assert(names == ['treat', 'male'])
    assert(all(len(rec.covariates) == 2 for rec in records))
    assert(any(rec.s_in > 0 for rec in records))

    _, picked = read_records_csv(example_records, covariates=['male'])
    assert(picked == ['male'])
    return


def test_write_read(tmp_path):
    records = [IndividualRecord('x', 1.5, 3.25, True, 0.5, (0.1,)),
               IndividualRecord('y', 0.0, 2.0, False, 0.0, (-2.0,))]
    path = write_records_csv(records, tmp_path / 'r.csv', ['z'])
    back, names = read_records_csv(path)
    assert(names == ['z'])
    assert(back == records)
    return


def test_malformed_csv_line_numbers(tmp_path):
    path = tmp_path / 'bad.csv'
    path.write_text(header +
                    "a,1,0,5,1,30\n"
                    "b,1,0,abc,1,40\n"
                    "c,1,6,5,0,50\n"
                    "d,1,0,5,2,60\n")
    with pytest.raises(CSVFormatError) as err:
        read_records_csv(path)
    diags = err.value.diagnostics
    assert(len(diags) == 3)
    assert(diags[0].startswith("line 3:"))
    assert("s_out" in diags[0])
    assert(diags[1].startswith("line 4:"))
    assert(diags[2].startswith("line 5:"))
    return


def test_missing_columns(tmp_path):
    path = tmp_path / 'short.csv'
    path.write_text("id,u,s_out\na,1,2\n")
    with pytest.raises(CSVFormatError, match="s_in, event"):
        read_records_csv(path)
    return


def test_unknown_covariate(tmp_path):
    path = tmp_path / 'ok.csv'
    path.write_text(header + "a,1,0,5,1,30\n")
    with pytest.raises(CSVFormatError, match="weight"):
        read_records_csv(path, covariates=['weight'])
    return
