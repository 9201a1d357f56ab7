import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from eequake.errors import BarInvariantError, DataError, MissingColumnError
from eequake.timeseries import (
    PriceBar,
    PriceSeries,
    Scaler,
    apply,
    fit_scaler,
    invert,
    parse_csv,
    to_features,
)

HEADER = "Date,Open,High,Low,Close,Adj Close,Volume\n"


def csv_bytes(*rows):
    return (HEADER + "".join(r + "\n" for r in rows)).encode()


def test_three_rows_parse_in_order():
    s = parse_csv(csv_bytes(
        "2021-05-10,10,11,9,10.5,10.5,100",
        "2021-05-11,10.5,12,10,11,11,200",
        "2021-05-12,11,11.5,10.5,11.2,11.2,150",
    ))
    assert len(s) == 3
    assert s.timestamps == ("2021-05-10", "2021-05-11", "2021-05-12")
    assert_array_equal(s.close, [10.5, 11, 11.2])
    assert_array_equal(s.volume, [100, 200, 150])


def test_rows_resorted_by_timestamp():
    s = parse_csv(csv_bytes(
        "2021-05-12,11,11.5,10.5,11.2,11.2,150",
        "2021-05-10,10,11,9,10.5,10.5,100",
        "2021-05-11,10.5,12,10,11,11,200",
    ))
    assert s.timestamps == ("2021-05-10", "2021-05-11", "2021-05-12")
    assert_array_equal(s.open, [10, 10.5, 11])


def test_missing_close_column():
    data = b"Date,Open,High,Low,Volume\n2021-01-01,1,2,0.5,10\n"
    with pytest.raises(MissingColumnError) as err:
        parse_csv(data)
    assert err.value.column == "Close"


def test_low_above_open_names_the_row():
    with pytest.raises(BarInvariantError) as err:
        parse_csv(csv_bytes(
            "2021-01-01,10,11,9,10,10,1",
            "2021-01-02,10,11,10.5,10.8,10.8,1",
        ))
    assert err.value.row == 2


def test_null_rows_are_dropped_and_counted():
    s = parse_csv(csv_bytes(
        "2021-01-01,10,11,9,10,10,1",
        "2021-01-02,null,null,null,null,null,0",
        "2021-01-03,10,11,9,10.2,10.2,1",
    ))
    assert len(s) == 2
    assert s.dropped == 1


def test_duplicate_timestamp_rejected():
    with pytest.raises(DataError, match="duplicate"):
        parse_csv(csv_bytes("2021-01-01,10,11,9,10,10,1", "2021-01-01,10,11,9,10,10,1"))


def test_custom_schema_and_text_stream():
    text = "time,o,h,l,c\n1,1,2,0.5,1.5\n2,1.5,2,1,1.8\n"
    s = parse_csv(io.StringIO(text), {"date": "time", "open": "o", "high": "h", "low": "l", "close": "c"})
    assert_array_equal(s.close, [1.5, 1.8])
    assert s.volume is None


def test_bom_is_stripped(tmp_path):
    p = tmp_path / "bom.csv"
    p.write_bytes(b"\xef\xbb\xbf" + csv_bytes("2021-01-01,1,2,0.5,1,1,1", "2021-01-02,1,2,0.5,1,1,1"))
    assert len(parse_csv(p)) == 2


def test_columns_are_read_only():
    s = PriceSeries.from_close([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        s.close[0] = 5.0


def test_from_bars_round_trip():
    bars = [PriceBar("a", 1, 2, 0.5, 1.5, 10), PriceBar("b", 1.5, 2, 1, 1.8, 11)]
    assert PriceSeries.from_bars(bars).bars == bars


def test_close_features_horizon_one():
    s = PriceSeries.from_close([1.0, 2.0, 3.0, 4.0])
    fm = to_features(s, "close", 1)
    assert fm.rows.shape == (3, 1)
    assert_array_equal(fm.rows[:, 0], [1, 2, 3])
    assert_array_equal(fm.targets, [2, 3, 4])


def test_ohlc_features_dimension_four():
    s = PriceSeries(("1", "2", "3", "4"), [1, 2, 3, 4], [2, 3, 4, 5], [0.5, 1, 2, 3], [1.5, 2.5, 3.5, 4.5])
    fm = to_features(s, "ohlc", 1)
    assert fm.rows.shape == (3, 4)
    assert_array_equal(fm.rows[0], [1, 2, 0.5, 1.5])


def test_horizon_two_targets_skip_one_bar():
    s = PriceSeries.from_close([1.0, 2.0, 3.0, 4.0, 5.0])
    fm = to_features(s, "close", 2)
    assert_array_equal(fm.targets, [3, 4, 5])
    assert len(fm) == len(s) - 2


def test_series_too_short_for_horizon():
    with pytest.raises(DataError):
        to_features(PriceSeries.from_close([1.0, 2.0]), "close", 2)


def test_constant_feature_scales_to_zero():
    sc = fit_scaler(np.array([[5.0, 1.0], [5.0, 3.0]]))
    assert_array_equal(sc.apply([5.0, 2.0]), [0.0, 0.5])


def test_scaler_dimension_mismatch():
    sc = fit_scaler(np.ones((3, 2)))
    with pytest.raises(ValueError):
        apply(sc, [1.0, 2.0, 3.0])


def test_scaler_serialises():
    sc = Scaler(np.array([1.0, -2.0]), np.array([3.0, 2.0]))
    back = Scaler.from_dict(sc.to_dict())
    assert_array_equal(back.minimum, sc.minimum)
    assert_array_equal(back.maximum, sc.maximum)


rows = st.lists(
    st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=3, max_size=3), min_size=1, max_size=30
)


@settings(max_examples=60, deadline=None)
@given(rows)
def test_scaler_training_rows_in_unit_box_and_invert(data):
    x = np.array(data)
    sc = fit_scaler(x)
    z = sc.apply(x)
    assert np.all(z >= -1e-12) and np.all(z <= 1 + 1e-12)
    assert_allclose(invert(sc, z), x, rtol=1e-9, atol=1e-6)


@st.composite
def bars(draw):
    n = draw(st.integers(2, 20))
    out = []
    for i in range(n):
        o = draw(st.floats(0.01, 1e4))
        c = draw(st.floats(0.01, 1e4))
        lo = min(o, c) * draw(st.floats(0.5, 1.0))
        hi = max(o, c) * draw(st.floats(1.0, 2.0))
        out.append((f"2020-01-{i + 1:02d}" if i < 28 else f"2020-02-{i - 27:02d}", o, hi, lo, c))
    return out


@settings(max_examples=50, deadline=None)
@given(bars())
def test_parsed_bars_keep_ordering_invariants(data):
    text = "Date,Open,High,Low,Close\n" + "".join(f"{t},{o!r},{h!r},{lo!r},{c!r}\n" for t, o, h, lo, c in reversed(data))
    s = parse_csv(text.encode())
    assert list(s.timestamps) == sorted(s.timestamps)
    assert np.all(s.low <= np.minimum(s.open, s.close))
    assert np.all(np.maximum(s.open, s.close) <= s.high)
