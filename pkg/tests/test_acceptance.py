"""Acceptance criteria, one test per criterion, each printing a PASS line.

Statistical criteria run on fixed seeds so the suite is deterministic.
"""

import itertools
import json
import threading
import time
import urllib.request

import numpy as np
import pytest

from acds.bundle import save_model, load_model
from acds.ensemble import ensemble_select, vote_max_prob
from acds.errors import DiscretizationError
from acds.evaluation import (
    IN_FOLD,
    LEAKY_FULL_DATA,
    SelectorSpec,
    cross_validate,
    make_folds,
)
from acds.metrics import auc, h_measure, spearman
from acds.models import Dataset, ModelSpec, train
from acds.models.linear import logreg_loss_and_grad, mlp_loss_and_grad
from acds.preprocess import caim_criterion, caim_fit
from acds.records import Cohort, delta_frequencies, describe, save_cohort
from acds.synth import make_reference_fixture, parse_generator_spec, synthesize_cohort

PLANTED_SPEC_TEXT = """
[cohort]
n = 423
[field location]
kind = categorical
levels = L01:0.45, L02:0.35, L03:0.20
[field county]
kind = categorical
levels = Davidson:0.50, Monroe:0.30, Wilson:0.20
[field race]
kind = categorical
levels = White:0.80, Black:0.12, Unknown:0.08
[signal]
target_auc = 0.78
positive_rate = 0.5
mc_draws = 100000
predictors = baseline_carla:-0.45, toms_symptom_baseline:0.3, toms_functioning_baseline:0.3, age_years:-0.3,
    svc_case_management:1.1, svc_therapy:0.65, svc_med_management:0.6, svc_peer_support:0.5, svc_crisis:-0.45,
    diagnosis_category=Depression:0.75, payer=Medicaid:0.7, region_type=Rural:0.65,
    gender=F:0.55, prior_mobile_crisis=yes:0.55, location=L01:0.65, county=Davidson:0.6, race=White:0.35
"""


def _report(tag: str, message: str) -> None:
    print(f"[acceptance] {tag} PASS: {message}")


def test_a01_table2_fixture_frequencies():
    start = time.perf_counter()
    fixture = make_reference_fixture()
    freqs = delta_frequencies(fixture)
    elapsed = time.perf_counter() - start
    assert (freqs.deteriorated, freqs.no_change, freqs.improved) == (101, 99, 223)
    assert freqs.pct_deteriorated == pytest.approx(23.9, abs=0.1)
    assert freqs.pct_no_change == pytest.approx(23.4, abs=0.1)
    assert freqs.pct_improved == pytest.approx(52.7, abs=0.1)
    assert elapsed < 1.0
    _report("A1", f"101/99/223 with 23.9/23.4/52.7 pct in {elapsed:.2f}s")


def test_a02_table1_fixture_moments():
    fixture = make_reference_fixture()
    start = time.perf_counter()
    stats = describe(fixture, "carla_delta")
    elapsed = time.perf_counter() - start
    assert stats.mean == pytest.approx(0.175, abs=0.005)
    assert stats.sd == pytest.approx(0.419, abs=0.005)
    assert elapsed < 1.0
    _report("A2", f"delta mean {stats.mean:.4f}, sd {stats.sd:.4f} in {elapsed:.3f}s")


def test_a03_auc_matches_mann_whitney_oracle():
    def oracle(scores, labels):
        pos = scores[labels == 1]
        neg = scores[labels == 0]
        wins = (pos[:, None] > neg[None, :]).sum()
        ties = (pos[:, None] == neg[None, :]).sum()
        return (wins + 0.5 * ties) / (len(pos) * len(neg))

    rng = np.random.default_rng(0xA3)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(4, 201))
        scores = rng.choice(np.linspace(0, 1, 17), size=n)  # ties guaranteed
        labels = rng.integers(0, 2, n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        worst = max(worst, abs(auc(scores, labels) - oracle(scores, labels)))
    elapsed = time.perf_counter() - start
    assert worst <= 1e-9
    assert elapsed < 5.0
    _report("A3", f"200 sets, max |trapezoid-MW| = {worst:.2e} in {elapsed:.2f}s")


def test_a04_h_measure_properties():
    # perfect separation
    perfect = h_measure([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
    assert perfect == pytest.approx(1.0, abs=1e-6)
    # constant scores
    constant = h_measure([0.4] * 12, [1, 0] * 6)
    assert constant == pytest.approx(0.0, abs=1e-9)
    # closed form vs numeric integration
    from test_metrics import h_measure_numeric

    rng = np.random.default_rng(0xA4)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(10, 150))
        scores = rng.choice(np.linspace(0, 1, 15), size=n)
        labels = rng.integers(0, 2, n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        worst = max(
            worst,
            abs(h_measure(scores, labels) - h_measure_numeric(scores, labels)),
        )
    assert worst <= 1e-4
    # exact monotone-transform invariance
    scores = rng.random(80)
    labels = rng.integers(0, 2, 80)
    labels[:2] = [0, 1]
    assert h_measure(scores, labels) == h_measure(np.exp(2 * scores) - 0.5, labels)
    _report("A4", f"perfect=1, constant=0, |closed-numeric| max {worst:.2e}, monotone exact")


def test_a05_caim_greedy_equals_exhaustive():
    values = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    labels = ["A", "A", "A", "B", "B", "B"]
    scheme = caim_fit(values, labels)
    assert scheme.cuts == (3.5,)
    assert scheme.criterion == 3.0

    rng = np.random.default_rng(0xA5)
    checked = 0
    for _ in range(100):
        n_distinct = int(rng.integers(3, 13))
        pool = np.sort(rng.choice(60, size=n_distinct, replace=False)).astype(float)
        n = int(rng.integers(n_distinct, 36))
        vals = rng.choice(pool, size=n)
        vals[:n_distinct] = pool
        labs = rng.integers(0, 2, n)
        if labs.min() == labs.max():
            labs[0] = 1 - labs[0]
        greedy = caim_fit(vals, labs)
        distinct = np.unique(vals)
        candidates = (distinct[:-1] + distinct[1:]) / 2.0
        best = max(
            caim_criterion(list(combo), vals, labs)
            for combo in itertools.combinations(candidates, len(greedy.cuts))
        )
        assert greedy.criterion == pytest.approx(best, abs=1e-9)
        checked += 1
    _report("A5", f"greedy == exhaustive optimum on {checked} datasets; example exact")


def _noise_dataset(n, n_features, seed):
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(0xA6, seed)))
    y = rng.permutation(np.array([0, 1] * (n // 2) + [0] * (n % 2)))
    cols = {}
    kinds = {}
    for j in range(n_features):
        values = rng.integers(0, 2, n)
        cols[f"f{j}"] = np.array([str(v) for v in values], dtype=object)
        kinds[f"f{j}"] = "categorical"
    return Dataset.from_arrays(cols, kinds, deltas=y.astype(float))


def test_a06_leakage_detection():
    start = time.perf_counter()
    in_fold = []
    leaky = []
    for seed in range(10):
        dataset = _noise_dataset(423, 500, seed)
        labels = (dataset.deltas >= dataset.deltas.mean()).astype(int)
        plan = make_folds(423, 10, labels=labels, seed=seed)
        spec = ModelSpec(method="naive_bayes", binning="caim")
        selector = SelectorSpec(method="chi2", top_k=10)
        in_fold.append(
            cross_validate(
                dataset, spec, plan, selector=selector, selection_mode=IN_FOLD
            ).row.auc
        )
        leaky.append(
            cross_validate(
                dataset, spec, plan, selector=selector,
                selection_mode=LEAKY_FULL_DATA,
            ).row.auc
        )
    elapsed = time.perf_counter() - start
    mean_in_fold = float(np.mean(in_fold))
    mean_leaky = float(np.mean(leaky))
    assert 0.45 <= mean_in_fold <= 0.55
    assert mean_leaky > 0.60
    assert elapsed < 120.0
    _report(
        "A6",
        f"in-fold mean AUC {mean_in_fold:.3f} in [0.45,0.55]; "
        f"leaky mean {mean_leaky:.3f} > 0.60 in {elapsed:.0f}s",
    )


def test_a07_headline_analogue():
    start = time.perf_counter()
    spec_text = parse_generator_spec(PLANTED_SPEC_TEXT)
    metrics = {"naive_bayes": {"auc": [], "acc": []},
               "aode": {"auc": [], "acc": []}}
    for seed in range(5):
        cohort = synthesize_cohort(spec_text, seed=seed)
        dataset = Dataset.from_cohort(cohort)
        labels = (dataset.deltas >= dataset.deltas.mean()).astype(int)
        plan = make_folds(dataset.n, 10, labels=labels, seed=seed)
        for method in metrics:
            row = cross_validate(
                dataset, ModelSpec(method=method, binning="caim", seed=seed), plan
            ).row
            metrics[method]["auc"].append(row.auc)
            metrics[method]["acc"].append(row.accuracy)
    elapsed = time.perf_counter() - start
    for method, vals in metrics.items():
        mean_auc = float(np.mean(vals["auc"]))
        mean_acc = float(np.mean(vals["acc"]))
        assert 0.72 <= mean_auc <= 0.80, (method, mean_auc)
        assert 0.66 <= mean_acc <= 0.76, (method, mean_acc)
    assert elapsed < 120.0
    _report(
        "A7",
        "5-seed means on calibrated 0.78 cohorts: "
        + ", ".join(
            f"{m} AUC {np.mean(v['auc']):.3f} / acc {np.mean(v['acc']):.3f}"
            for m, v in metrics.items()
        )
        + f" in {elapsed:.0f}s",
    )


def test_a08_odds_ratio_woolf():
    from acds.feature_selection import odds_ratio_from_counts

    report = odds_ratio_from_counts(40, 10, 20, 30)
    assert report.odds_ratio == 6.0
    assert report.ci_low == pytest.approx(2.45, abs=0.01)
    assert report.ci_high == pytest.approx(14.67, abs=0.01)
    flipped = odds_ratio_from_counts(20, 30, 40, 10)
    assert flipped.odds_ratio == 1.0 / report.odds_ratio
    _report(
        "A8",
        f"OR 6.0, CI ({report.ci_low:.4f}, {report.ci_high:.4f}), flip exact",
    )


def test_a09_ensemble_and_vote():
    rng = np.random.default_rng(0xA9)
    # selection-path monotonicity on 50 random libraries
    for _ in range(50):
        n_models = int(rng.integers(2, 7))
        n_val = int(rng.integers(10, 40))
        labels = rng.integers(0, 2, n_val)
        labels[:2] = [0, 1]
        scores = rng.random((n_models, n_val))
        result = ensemble_select(scores, labels, max_steps=25)
        path = list(result.path_auc)
        assert all(a <= b + 1e-12 for a, b in zip(path, path[1:]))
    # dominance: a strictly dominant model is selected alone
    labels = np.array([1, 1, 1, 0, 0, 0])
    dominant = np.array([
        [0.9, 0.8, 0.7, 0.3, 0.2, 0.1],
        [0.2, 0.3, 0.4, 0.6, 0.7, 0.8],
    ])
    result = ensemble_select(dominant, labels)
    assert result.multiplicities[1] == 0
    # max_steps=1 degenerates to the best single model
    single = ensemble_select(dominant, labels, max_steps=1)
    assert sum(single.multiplicities) == 1 and single.multiplicities[0] == 1
    # vote equals the brute-force reference on 1000 committees
    from test_ensemble import brute_force_vote

    for _ in range(1000):
        k = int(rng.integers(1, 8))
        probs = rng.choice(np.linspace(0, 1, 11), size=k).tolist()
        outcome = vote_max_prob(probs)
        cls, conf, p = brute_force_vote(probs)
        assert (outcome.predicted_class, outcome.confidence,
                outcome.winner_p_above) == (cls, conf, p)
    _report("A9", "50 monotone paths, dominance, max_steps=1, 1000 exact votes")


def test_a10_gradient_checks():
    rng = np.random.default_rng(0xA10)
    h = 1e-5
    worst = 0.0
    for _ in range(20):
        n, d = int(rng.integers(6, 30)), int(rng.integers(2, 6))
        X = np.hstack([np.ones((n, 1)), rng.normal(size=(n, d))])
        y = rng.integers(0, 2, n).astype(float)
        w = rng.normal(scale=0.7, size=d + 1)
        _, grad = logreg_loss_and_grad(w, X, y, l2=1e-4)
        fd = np.zeros_like(w)
        for j in range(w.size):
            e = np.zeros_like(w)
            e[j] = h
            fd[j] = (
                logreg_loss_and_grad(w + e, X, y, 1e-4)[0]
                - logreg_loss_and_grad(w - e, X, y, 1e-4)[0]
            ) / (2 * h)
        rel = np.linalg.norm(grad - fd) / max(np.linalg.norm(grad), 1e-12)
        worst = max(worst, rel)
        assert rel < 1e-4
    for _ in range(20):
        n, d, hidden = int(rng.integers(5, 20)), int(rng.integers(2, 5)), 5
        X = rng.normal(size=(n, d))
        y = rng.integers(0, 2, n).astype(float)
        params = rng.uniform(-0.5, 0.5, hidden * (d + 1) + hidden + 1)
        _, grad = mlp_loss_and_grad(params, X, y, hidden)
        fd = np.zeros_like(params)
        for j in range(params.size):
            e = np.zeros_like(params)
            e[j] = h
            fd[j] = (
                mlp_loss_and_grad(params + e, X, y, hidden)[0]
                - mlp_loss_and_grad(params - e, X, y, hidden)[0]
            ) / (2 * h)
        rel = np.linalg.norm(grad - fd) / max(np.linalg.norm(grad), 1e-12)
        worst = max(worst, rel)
        assert rel < 1e-4
    _report("A10", f"40 gradient checks, worst relative error {worst:.2e}")


ALL_METHODS_A11 = [
    ("naive_bayes", "caim", {}),
    ("naive_bayes", "bin-target", {}),
    ("aode", "caim", {}),
    ("bayes_net_k2", "caim", {}),
    ("decision_tree", "bin-target", {}),
    ("random_forest", "bin-target", {"n_trees": 12}),
    ("log_regression", "bin-target", {}),
    ("knn", "caim", {}),
    ("mlp", "bin-target", {}),
    ("linear_reg_classifier", "bin-target", {}),
    ("ensemble", "caim", {}),
    ("vote", "caim", {}),
]


def test_a11_determinism_and_round_trips(tmp_path, capsys):
    fixture = make_reference_fixture()
    small = Cohort(records=fixture.records[:150])
    dataset = Dataset.from_cohort(small)
    for method, binning, hyper in ALL_METHODS_A11:
        spec = ModelSpec(method=method, binning=binning,
                         hyperparameters=hyper, seed=17)
        blob1 = save_model(train(spec, dataset))
        blob2 = save_model(train(spec, dataset))
        assert blob1 == blob2, f"{method}/{binning} bundles differ"
        model = load_model(blob1)
        original = train(spec, dataset)
        for rec in small.records[:8]:
            assert (
                model.predict_proba(rec).p_above
                == original.predict_proba(rec).p_above
            ), f"{method}/{binning} round-trip prediction differs"

    # CLI recommend and HTTP recommend agree on rankings
    from acds.cli import cli
    from acds.packages import ServicePackage, save_catalog
    from acds.registry import ModelRegistry
    from acds.service import ServiceConfig, serve
    from test_decision_support import BASE_REQUEST, http_json

    bundle = save_model(
        train(ModelSpec(method="naive_bayes", binning="caim", seed=17), dataset)
    )
    registry = ModelRegistry(tmp_path / "registry")
    version = registry.put("outcome", bundle)
    registry.activate("outcome", version)
    catalog_path = tmp_path / "catalog.json"
    catalog_path.write_bytes(save_catalog([
        ServicePackage("pkg-a", "Therapy", {"therapy": 8}),
        ServicePackage("pkg-b", "Mixed", {"therapy": 4, "case_management": 6}),
        ServicePackage("pkg-c", "CaseMgmt", {"case_management": 6}),
    ]))
    server = serve(ServiceConfig(
        registry_dir=tmp_path / "registry", catalog_path=catalog_path, port=0
    ))
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        patient_path = tmp_path / "p.json"
        patient_path.write_text(json.dumps(BASE_REQUEST))
        capsys.readouterr()
        assert cli([
            "recommend", "--registry", str(tmp_path / "registry"),
            "--patient", str(patient_path), "--packages", str(catalog_path),
            "--json",
        ]) == 0
        cli_payload = json.loads(capsys.readouterr().out)
        _, body = http_json(server, "POST", "/v1/recommend",
                            {"patient": BASE_REQUEST})
        http_payload = json.loads(body)
        assert cli_payload["recommendations"] == http_payload["recommendations"]
    finally:
        server.shutdown()
    _report("A11", "12 method configs bit-identical and round-trip; CLI == HTTP")


def test_a12_spearman_oracle():
    def brute_force(xs, ys):
        def ranks(vals):
            out = []
            for v in vals:
                smaller = sum(1 for w in vals if w < v)
                equal = sum(1 for w in vals if w == v)
                out.append(smaller + (equal + 1) / 2.0)
            return out

        rx, ry = ranks(list(xs)), ranks(list(ys))
        mx = sum(rx) / len(rx)
        my = sum(ry) / len(ry)
        sxy = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
        sxx = sum((a - mx) ** 2 for a in rx)
        syy = sum((b - my) ** 2 for b in ry)
        return sxy / (sxx * syy) ** 0.5

    assert spearman([1, 2, 3, 4], [1, 2, 4, 3]) == 0.8

    rng = np.random.default_rng(0xA12)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(3, 60))
        xs = rng.choice(np.arange(10), size=n).astype(float)
        ys = rng.choice(np.arange(10), size=n).astype(float)
        if np.all(xs == xs[0]) or np.all(ys == ys[0]):
            continue
        worst = max(worst, abs(spearman(xs, ys) - brute_force(xs, ys)))
    assert worst <= 1e-12
    _report("A12", f"100 pairs vs brute-force ranks, worst diff {worst:.2e}; example 0.8 exact")
