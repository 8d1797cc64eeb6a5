import datetime

import numpy as np
import pytest

from acds.records import Cohort, PatientRecord


def make_record(pid="P1", baseline=2.0, final=None, delta=None, **kwargs):
    fields = dict(
        patient_id=pid,
        baseline_carla=baseline,
        final_carla=final,
        carla_delta=delta,
        gender="F",
        race="White",
        age_years=30,
        diagnosis_category="Depression",
        payer="Medicaid",
        location="L01",
        county="Davidson",
        region_type="Urban",
        intake_date=datetime.date(2008, 7, 1),
        first_seen_date=datetime.date(2008, 7, 1),
    )
    fields.update(kwargs)
    return PatientRecord(**fields)


def cohort_from_deltas(deltas, baseline=2.0):
    records = []
    for i, d in enumerate(deltas):
        records.append(
            make_record(pid=f"P{i}", baseline=baseline, final=baseline + d)
        )
    return Cohort(records=tuple(records))


@pytest.fixture(scope="session")
def reference_cohort():
    from acds.synth import make_reference_fixture

    return make_reference_fixture()
