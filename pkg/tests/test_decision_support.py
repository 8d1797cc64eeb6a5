import json
import threading
import urllib.request

import numpy as np
import pytest

from acds.bundle import save_model
from acds.cli import cli
from acds.errors import CatalogError, RegistryError, RequestError
from acds.features import (
    BASE_CATEGORICAL_FIELDS,
    BASE_NUMERIC_FIELDS,
    service_feature_names,
)
from acds.models import Dataset, ModelSpec, ProbabilisticPrediction, train
from acds.packages import (
    Recommendation,
    ServicePackage,
    load_catalog,
    save_catalog,
    score_packages,
)
from acds.records import Cohort, save_cohort
from acds.registry import ModelRegistry
from acds.service import RecommendServer, ServiceConfig, serve


class StubModel:
    """Scores 0.9 when case management is in the profile, else 0.3."""

    def __init__(self, codes=("case_management", "therapy")):
        self.service_codes = tuple(sorted(codes))
        names = list(BASE_NUMERIC_FIELDS) + list(BASE_CATEGORICAL_FIELDS)
        kinds = {n: "numeric" for n in BASE_NUMERIC_FIELDS}
        kinds.update({n: "categorical" for n in BASE_CATEGORICAL_FIELDS})
        for svc_name in service_feature_names(self.service_codes):
            names.append(svc_name)
            kinds[svc_name] = (
                "categorical" if svc_name.startswith("svc_") else "numeric"
            )
        self.feature_names = tuple(names)
        self.feature_kinds = kinds
        self.metadata = {"required_numeric": ["baseline_carla", "age_years"]}

    def predict_proba(self, row):
        p = 0.9 if row.get("svc_case_management") == "yes" else 0.3
        return ProbabilisticPrediction(p_above=p)


BASE_REQUEST = {
    "baseline_carla": 2.2,
    "age_years": 34,
    "gender": "F",
    "race": "White",
    "diagnosis_category": "Depression",
    "payer": "Medicaid",
    "location": "L01",
    "county": "Davidson",
    "region_type": "Urban",
    "prior_mobile_crisis": False,
}


def catalog_three():
    return [
        ServicePackage("pkg-a", "Therapy only", {"therapy": 8}),
        ServicePackage("pkg-b", "Therapy + case mgmt", {"therapy": 6, "case_management": 4}),
        ServicePackage("pkg-c", "Case mgmt only", {"case_management": 6}),
    ]


class TestScorePackages:
    def test_case_management_ranks_first(self):
        recs = score_packages(StubModel(), BASE_REQUEST, catalog_three())
        assert recs[0].p_above == 0.9
        assert recs[0].package_id in ("pkg-b", "pkg-c")
        assert [r.rank for r in recs] == [1, 2, 3]

    def test_single_package(self):
        recs = score_packages(StubModel(), BASE_REQUEST, catalog_three(),
                              package_ids=["pkg-a"])
        assert len(recs) == 1 and recs[0].rank == 1

    def test_tie_breaks_by_package_id(self):
        recs = score_packages(StubModel(), BASE_REQUEST, catalog_three())
        tied = [r for r in recs if r.p_above == 0.9]
        assert [r.package_id for r in tied] == sorted(r.package_id for r in tied)

    def test_unknown_service_code_is_catalog_error(self):
        bad = [ServicePackage("pkg-x", "X", {"acupuncture": 2})]
        with pytest.raises(CatalogError):
            score_packages(StubModel(), BASE_REQUEST, bad)

    def test_missing_required_field_names_it(self):
        request = dict(BASE_REQUEST)
        del request["baseline_carla"]
        with pytest.raises(RequestError, match="baseline_carla"):
            score_packages(StubModel(), request, catalog_three())

    def test_unknown_request_key_rejected(self):
        request = dict(BASE_REQUEST)
        request["final_carla"] = 3.0
        with pytest.raises(RequestError, match="final_carla"):
            score_packages(StubModel(), request, catalog_three())

    def test_out_of_range_carla_rejected(self):
        request = dict(BASE_REQUEST)
        request["baseline_carla"] = 5.0
        with pytest.raises(RequestError, match="baseline_carla"):
            score_packages(StubModel(), request, catalog_three())

    def test_catalog_round_trip(self, tmp_path):
        blob = save_catalog(catalog_three())
        packages = load_catalog(blob)
        assert [p.package_id for p in packages] == ["pkg-a", "pkg-b", "pkg-c"]
        path = tmp_path / "catalog.json"
        path.write_bytes(blob)
        assert load_catalog(str(path)) == packages

    def test_empty_package_rejected(self):
        with pytest.raises(CatalogError):
            ServicePackage("bad", "Bad", {})

    def test_zero_volume_rejected(self):
        with pytest.raises(CatalogError):
            ServicePackage("bad", "Bad", {"therapy": 0})


@pytest.fixture(scope="module")
def trained_bundle(reference_cohort):
    small = Cohort(records=reference_cohort.records[:150])
    dataset = Dataset.from_cohort(small)
    model = train(ModelSpec(method="naive_bayes", binning="caim", seed=2), dataset)
    return save_model(model), small


class TestRegistry:
    def test_put_activate_get_round_trip(self, tmp_path, trained_bundle):
        blob, cohort = trained_bundle
        registry = ModelRegistry(tmp_path / "reg")
        version = registry.put("outcome", blob)
        assert version == 1
        registry.activate("outcome", 1)
        model = registry.get_active()
        rec = cohort.records[0]
        from acds.bundle import load_model

        direct = load_model(blob)
        assert model.predict_proba(rec).p_above == direct.predict_proba(rec).p_above

    def test_versions_increment(self, tmp_path, trained_bundle):
        blob, _ = trained_bundle
        registry = ModelRegistry(tmp_path / "reg2")
        assert registry.put("m", blob) == 1
        assert registry.put("m", blob) == 2
        assert registry.listing()["models"]["m"] == [1, 2]

    def test_activate_unknown_errors(self, tmp_path):
        registry = ModelRegistry(tmp_path / "reg3")
        with pytest.raises(RegistryError):
            registry.activate("ghost", 1)

    def test_get_active_without_activation_errors(self, tmp_path):
        registry = ModelRegistry(tmp_path / "reg4")
        with pytest.raises(RegistryError):
            registry.get_active()


@pytest.fixture(scope="module")
def live_server(tmp_path_factory, trained_bundle):
    blob, cohort = trained_bundle
    root = tmp_path_factory.mktemp("svc")
    registry = ModelRegistry(root / "registry")
    version = registry.put("outcome", blob)
    registry.activate("outcome", version)
    catalog_path = root / "catalog.json"
    codes = sorted(set().union(*[set(r.service_profile) for r in cohort]))
    packages = [
        ServicePackage("pkg-a", "Therapy only", {"therapy": 8}),
        ServicePackage("pkg-b", "Mixed", {"therapy": 4, "case_management": 6}),
        ServicePackage("pkg-c", "Case mgmt", {"case_management": 6}),
    ]
    catalog_path.write_bytes(save_catalog(packages))
    config = ServiceConfig(
        registry_dir=root / "registry",
        catalog_path=catalog_path,
        host="127.0.0.1",
        port=0,  # ephemeral
    )
    server = serve(config)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server, root, catalog_path
    server.shutdown()


def http_json(server, method, path, body=None):
    host, port = server.server_address
    url = f"http://{host}:{port}{path}"
    data = json.dumps(body).encode() if body is not None else None
    req = urllib.request.Request(url, data=data, method=method)
    if data:
        req.add_header("Content-Type", "application/json")
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read()


class TestHttpService:
    def test_health(self, live_server):
        server, _, _ = live_server
        status, body = http_json(server, "GET", "/v1/health")
        assert status == 200
        payload = json.loads(body)
        assert payload["status"] == "ok"
        assert payload["active_model"]["name"] == "outcome"

    def test_packages_listing(self, live_server):
        server, _, _ = live_server
        status, body = http_json(server, "GET", "/v1/packages")
        assert status == 200
        assert len(json.loads(body)["packages"]) == 3

    def test_models_listing(self, live_server):
        server, _, _ = live_server
        status, body = http_json(server, "GET", "/v1/models")
        assert status == 200
        assert json.loads(body)["active"] == ["outcome", 1]

    def test_recommend_contract(self, live_server):
        server, _, _ = live_server
        status, body = http_json(
            server, "POST", "/v1/recommend", {"patient": BASE_REQUEST}
        )
        assert status == 200
        payload = json.loads(body)
        recs = payload["recommendations"]
        assert [r["rank"] for r in recs] == [1, 2, 3]
        probs = [r["p_above"] for r in recs]
        assert probs == sorted(probs, reverse=True)

    def test_recommend_missing_field_is_400_naming_it(self, live_server):
        server, _, _ = live_server
        patient = dict(BASE_REQUEST)
        del patient["baseline_carla"]
        status, body = http_json(
            server, "POST", "/v1/recommend", {"patient": patient}
        )
        assert status == 400
        assert json.loads(body)["error"]["field"] == "baseline_carla"

    def test_byte_identical_responses(self, live_server):
        server, _, _ = live_server
        _, body1 = http_json(server, "POST", "/v1/recommend", {"patient": BASE_REQUEST})
        _, body2 = http_json(server, "POST", "/v1/recommend", {"patient": BASE_REQUEST})
        assert body1 == body2

    def test_unknown_path_404(self, live_server):
        server, _, _ = live_server
        status, _ = http_json(server, "GET", "/v1/unknown")
        assert status == 404

    def test_custom_package_scored_alongside_catalog(self, live_server):
        server, _, _ = live_server
        body = {
            "patient": BASE_REQUEST,
            "custom_packages": [
                {"package_id": "custom-1", "name": "What if",
                 "service_volume": {"therapy": 2, "case_management": 9}},
            ],
        }
        status, raw = http_json(server, "POST", "/v1/recommend", body)
        assert status == 200
        recs = json.loads(raw)["recommendations"]
        assert len(recs) == 4
        assert any(r["package_id"] == "custom-1" for r in recs)

    def test_custom_package_unknown_code_is_400(self, live_server):
        server, _, _ = live_server
        body = {
            "patient": BASE_REQUEST,
            "custom_packages": [
                {"package_id": "custom-2", "service_volume": {"xyz": 1}},
            ],
        }
        status, raw = http_json(server, "POST", "/v1/recommend", body)
        assert status == 400

    def test_custom_package_id_collision_is_400(self, live_server):
        server, _, _ = live_server
        body = {
            "patient": BASE_REQUEST,
            "custom_packages": [
                {"package_id": "pkg-a", "service_volume": {"therapy": 1}},
            ],
        }
        status, raw = http_json(server, "POST", "/v1/recommend", body)
        assert status == 400


class TestCli:
    def test_synth_then_describe(self, tmp_path, capsys):
        out = tmp_path / "c.csv"
        assert cli(["synth", "--preset", "table123", "--n", "120",
                    "--seed", "7", "--out", str(out)]) == 0
        assert cli(["describe", "--data", str(out),
                    "--field", "carla_delta"]) == 0
        captured = capsys.readouterr().out
        assert "mean:" in captured

    def test_unknown_flag_exit_2(self):
        with pytest.raises(SystemExit) as excinfo:
            cli(["synth", "--bogus-flag", "x", "--out", "y"])
        assert excinfo.value.code == 2

    def test_train_and_recommend(self, tmp_path, capsys, trained_bundle):
        _, cohort = trained_bundle
        data = tmp_path / "train.csv"
        data.write_bytes(save_cohort(cohort))
        bundle_path = tmp_path / "m.bundle"
        assert cli(["train", "--data", str(data), "--method", "naive_bayes",
                    "--binning", "caim", "--seed", "2",
                    "--out", str(bundle_path)]) == 0
        catalog_path = tmp_path / "cat.json"
        catalog_path.write_bytes(save_catalog([
            ServicePackage("pkg-a", "Therapy", {"therapy": 8}),
            ServicePackage("pkg-b", "CaseMgmt", {"case_management": 6}),
        ]))
        patient_path = tmp_path / "p.json"
        patient_path.write_text(json.dumps(BASE_REQUEST))
        capsys.readouterr()
        assert cli(["recommend", "--model", str(bundle_path),
                    "--patient", str(patient_path),
                    "--packages", str(catalog_path)]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 2
        assert lines[0].split("\t")[0] == "1"

    def test_missing_data_file_is_single_line_error(self, capsys):
        assert cli(["describe", "--data", "/nonexistent.csv",
                    "--field", "carla_delta"]) == 1
        err = capsys.readouterr().err
        assert err.startswith("error:") and err.count("\n") == 1

    def test_cli_and_http_rankings_match(self, tmp_path, capsys, live_server):
        server, root, catalog_path = live_server
        patient_path = tmp_path / "p.json"
        patient_path.write_text(json.dumps(BASE_REQUEST))
        capsys.readouterr()
        assert cli(["recommend", "--registry", str(root / "registry"),
                    "--patient", str(patient_path),
                    "--packages", str(catalog_path), "--json"]) == 0
        cli_payload = json.loads(capsys.readouterr().out)
        _, body = http_json(server, "POST", "/v1/recommend",
                            {"patient": BASE_REQUEST})
        http_payload = json.loads(body)
        assert cli_payload["recommendations"] == http_payload["recommendations"]

    def test_evaluate_writes_report_and_figures(self, tmp_path, capsys, trained_bundle):
        _, cohort = trained_bundle
        data = tmp_path / "eval.csv"
        data.write_bytes(save_cohort(cohort))
        outdir = tmp_path / "report"
        assert cli(["evaluate", "--data", str(data),
                    "--methods", "naive_bayes,decision_tree",
                    "--binning", "caim", "--folds", "5", "--seed", "1",
                    "--out", str(outdir)]) == 0
        assert (outdir / "report.tsv").exists()
        assert (outdir / "report.json").exists()
        assert (outdir / "figures" / "roc_curves.png").exists()
        report = json.loads((outdir / "report.json").read_text())
        assert len(report["rows"]) == 2
        assert len(report["rows"][0]["pooled_scores"]) == len(cohort)
