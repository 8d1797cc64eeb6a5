import datetime
import io

import pytest

from acds.errors import (
    DomainError,
    InsufficientDataError,
    IntegrityError,
    PreconditionError,
    SchemaError,
)
from acds.records import (
    CSV_COLUMNS,
    Cohort,
    delta_frequencies,
    describe,
    filter_cohort,
    load_cohort,
    save_cohort,
)

from conftest import cohort_from_deltas, make_record

HEADER = ",".join(CSV_COLUMNS)


def test_load_empty_body_valid_header():
    cohort = load_cohort((HEADER + "\n").encode(), format="csv")
    assert len(cohort) == 0


def test_load_malformed_header():
    with pytest.raises(SchemaError):
        load_cohort(b"patient_id,foo\n", format="csv")


def test_load_out_of_range_carla_names_field():
    row = "P1,5.0,,,F,White,30,,,false,Depression,Medicaid,L01,C1,Urban,,,2008-07-01,2008-07-01"
    with pytest.raises(DomainError, match="baseline_carla"):
        load_cohort((HEADER + "\n" + row + "\n").encode(), format="csv")


def test_load_duplicate_patient_id():
    row = "P1,2.0,,,F,White,30,,,false,Depression,Medicaid,L01,C1,Urban,,,2008-07-01,2008-07-01"
    body = HEADER + "\n" + row + "\n" + row + "\n"
    with pytest.raises(IntegrityError):
        load_cohort(body.encode(), format="csv")


def test_load_unparseable_row_reports_index():
    row = "P1,not_a_number,,,F,White,30,,,false,Depression,Medicaid,L01,C1,Urban,,,2008-07-01,2008-07-01"
    with pytest.raises(SchemaError, match="row 2"):
        load_cohort((HEADER + "\n" + row + "\n").encode(), format="csv")


def test_delta_consistency_enforced():
    with pytest.raises(DomainError):
        make_record(baseline=2.0, final=2.4, delta=0.1)


def test_delta_derived_from_final():
    rec = make_record(baseline=2.0, final=2.4)
    assert rec.carla_delta == pytest.approx(0.4, abs=1e-12)


@pytest.mark.parametrize("format", ["csv", "jsonl"])
def test_round_trip_bit_exact(format, reference_cohort):
    blob = save_cohort(reference_cohort, format=format)
    again = load_cohort(blob, format=format)
    assert len(again) == len(reference_cohort)
    for a, b in zip(reference_cohort, again):
        assert a == b


def test_reference_fixture_size(reference_cohort):
    assert len(reference_cohort) == 423


def test_filter_required_fields():
    records = (
        make_record(pid="A", final=2.2),
        make_record(pid="B", final=2.4),
        make_record(pid="C"),
    )
    cohort = Cohort(records=records)
    window = (datetime.date(2008, 6, 1), datetime.date(2009, 6, 1))
    out = filter_cohort(cohort, window, required_fields=["final_carla"])
    assert [r.patient_id for r in out] == ["A", "B"]


def test_filter_new_intakes_only():
    returning = make_record(
        pid="R", first_seen_date=datetime.date(2005, 1, 1)
    )
    fresh = make_record(pid="N")
    cohort = Cohort(records=(returning, fresh))
    window = (datetime.date(2008, 6, 1), datetime.date(2009, 6, 1))
    out = filter_cohort(cohort, window, new_intakes_only=True)
    assert [r.patient_id for r in out] == ["N"]


def test_filter_identity_and_idempotent(reference_cohort):
    window = (datetime.date(2008, 6, 1), datetime.date(2009, 6, 1))
    once = filter_cohort(reference_cohort, window)
    assert len(once) == len(reference_cohort)
    twice = filter_cohort(once, window)
    assert [r.patient_id for r in twice] == [r.patient_id for r in once]


def test_filter_window_inverted():
    cohort = Cohort(records=(make_record(),))
    with pytest.raises(PreconditionError):
        filter_cohort(
            cohort, (datetime.date(2009, 6, 1), datetime.date(2008, 6, 1))
        )


def test_filter_to_empty_is_legal():
    cohort = Cohort(records=(make_record(),))
    window = (datetime.date(1999, 1, 1), datetime.date(1999, 12, 31))
    assert len(filter_cohort(cohort, window)) == 0


def test_describe_simple():
    cohort = cohort_from_deltas([ -1.0, 0.0, 1.0])
    stats = describe(cohort, "carla_delta")
    assert stats.n == 3
    assert stats.mean == pytest.approx(0.0)
    assert stats.sd == pytest.approx(1.0)


def test_describe_degenerate_pair():
    records = (
        make_record(pid="A", baseline=2.5),
        make_record(pid="B", baseline=2.5),
    )
    stats = describe(Cohort(records=records), "baseline_carla")
    assert stats.mean == 2.5
    assert stats.sd == 0.0


def test_describe_insufficient():
    with pytest.raises(InsufficientDataError):
        describe(Cohort(records=(make_record(),)), "baseline_carla")


def test_describe_non_numeric_field():
    with pytest.raises(SchemaError):
        describe(Cohort(records=(make_record(),)), "gender")


def test_delta_frequencies_basic():
    freqs = delta_frequencies(cohort_from_deltas([-1.0, 1.0]))
    assert (freqs.deteriorated, freqs.no_change, freqs.improved) == (1, 0, 1)
    assert freqs.pct_deteriorated == pytest.approx(50.0)
    assert freqs.pct_improved == pytest.approx(50.0)


def test_delta_frequencies_all_zero():
    freqs = delta_frequencies(cohort_from_deltas([0.0, 0.0, 0.0]))
    assert freqs.no_change == 3
    assert freqs.deteriorated == freqs.improved == 0


def test_delta_frequencies_missing_names_patient():
    cohort = Cohort(records=(make_record(pid="NO_DELTA"),))
    with pytest.raises(PreconditionError, match="NO_DELTA"):
        delta_frequencies(cohort)


def test_delta_frequencies_counts_sum(reference_cohort):
    freqs = delta_frequencies(reference_cohort)
    assert freqs.total == len(reference_cohort)
    assert (
        freqs.pct_deteriorated + freqs.pct_no_change + freqs.pct_improved
        == pytest.approx(100.0, abs=0.1)
    )
