import math

import pytest
from fastapi.testclient import TestClient

from kaonbell.config import load_config
from kaonbell.service import app

X_STAR = (math.sqrt(17.0) - 3.0) / 2.0


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


@pytest.fixture(scope="module")
def default_payload():
    return load_config().model_dump()


def direct_R_payload(big_r_re, big_r_im=0.0, **mc_overrides):
    cfg = load_config().model_dump()
    cfg["preparation"] = {
        "R_direct": [big_r_re, big_r_im],
        "regenerator": None,
        "T_tau_s": None,
        "truncate_ss": True,
    }
    cfg["mc"].update(mc_overrides)
    return cfg


class TestInfrastructure:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"

    def test_defaults_carry_annotations(self, client):
        body = client.get("/defaults").json()
        assert "_notes" in body
        assert body["constants"]["delta_m_per_tau_s"] == pytest.approx(0.4737)

    def test_openapi_schema_builds(self, client):
        assert client.get("/openapi.json").status_code == 200


class TestPredict:
    def test_pipeline_defaults_reach_design_ratio(self, client, default_payload):
        response = client.post("/predict", json=default_payload)
        assert response.status_code == 200
        body = response.json()
        assert body["mode"] == "pipeline"
        assert body["violation_predicted"] is True
        assert body["first"]["ratio"] == pytest.approx(1.1404, abs=1e-3)
        assert body["survive_fraction"] == pytest.approx(1.9e-5, rel=0.05)

    def test_direct_R(self, client):
        response = client.post("/predict", json=direct_R_payload(-X_STAR))
        body = response.json()
        assert body["mode"] == "direct"
        assert body["survive_fraction"] is None
        assert body["first"]["ratio"] == pytest.approx(1.1404, abs=5e-4)
        assert body["first"]["violated_upper"] is True
        assert body["second"]["violated_upper"] is False

    def test_no_violation_at_zero(self, client):
        body = client.post("/predict", json=direct_R_payload(0.0)).json()
        assert body["first"]["ratio"] == pytest.approx(1.0, abs=1e-12)
        assert body["second"]["ratio"] == pytest.approx(1.0, abs=1e-12)
        assert body["violation_predicted"] is False

    def test_unknown_key_is_422(self, client, default_payload):
        payload = dict(default_payload)
        payload["surprise"] = 1
        assert client.post("/predict", json=payload).status_code == 422


class TestScan:
    def test_real_axis_peak_near_design_point(self, client):
        request = {"axis": "R", "start": -2.0, "stop": 0.0, "steps": 201}
        body = client.post("/scan", json=request).json()
        rows = body["rows"]
        assert len(rows) == 201
        values = [row["value"] for row in rows]
        assert values == sorted(values)
        best = max(rows, key=lambda row: row["ratio_first"])
        assert best["value"] == pytest.approx(-X_STAR, abs=0.01)
        assert best["violated"] is True

    def test_imaginary_axis_never_violates(self, client):
        request = {
            "axis": "R", "start": 0.0, "stop": 2.0, "steps": 41,
            "phase_deg": 90.0,
        }
        body = client.post("/scan", json=request).json()
        assert all(not row["violated"] for row in body["rows"])
        assert all(row["ratio_first"] <= 1.0 + 1e-12 for row in body["rows"])

    def test_flight_time_scan_peaks_at_design_magnitude(self, client):
        # with delta_m = 0 the coefficient stays real and the peak sits
        # where |r| e^{(gamma_s - gamma_l) T / 2} crosses the optimum
        cfg = load_config().model_dump()
        cfg["constants"]["delta_m_per_tau_s"] = 0.0
        cfg["preparation"]["regenerator"]["r_direct"] = [1.0e-3, 0.0]
        request = {
            "axis": "T", "start": 8.0, "stop": 18.0, "steps": 201, "config": cfg,
        }
        body = client.post("/scan", json=request).json()
        best = max(body["rows"], key=lambda row: row["ratio_first"])
        gap = 1.0 - 1.0 / 579.0
        t_expected = math.log(X_STAR / 1.0e-3) / (0.5 * gap)
        assert best["value"] == pytest.approx(t_expected, abs=0.06)
        assert best["ratio_first"] == pytest.approx(1.1404, abs=1e-3)

    def test_thickness_scan_requires_material(self, client, default_payload):
        request = {
            "axis": "d", "start": 0.0, "stop": 0.4, "steps": 11,
            "config": default_payload,
        }
        assert client.post("/scan", json=request).status_code == 422

    def test_thickness_scan_with_material(self, client):
        # purely imaginary delta_f gives a real r, hence real R at delta_m = 0
        cfg = load_config().model_dump()
        cfg["constants"]["delta_m_per_tau_s"] = 0.0
        cfg["preparation"]["regenerator"] = {
            "r_direct": None,
            "material": {
                "nu_per_cm3": 1.2348746137303847e23,
                "delta_f_cm": [0.0, -2.0814e-13],
                "p_k_inv_cm": 5.574503789447335e12,
                "m_k_inv_cm": 2.5217585501551617e13,
                "d_cm": 0.16,
            },
        }
        request = {
            "axis": "d", "start": 0.01, "stop": 0.5, "steps": 99, "config": cfg,
        }
        body = client.post("/scan", json=request).json()
        rows = body["rows"]
        assert len(rows) == 99
        assert any(row["violated"] for row in rows)
        # the best thickness is where |R(d)| crosses the real-axis optimum
        best = max(rows, key=lambda row: row["ratio_first"])
        per_cm = 0.014485
        gap = 1.0 - 1.0 / 579.0
        d_expected = X_STAR * math.exp(-0.5 * gap * 11.0) / per_cm
        assert best["value"] == pytest.approx(d_expected, abs=0.01)

    def test_bad_range_rejected(self, client):
        request = {"axis": "R", "start": 1.0, "stop": -1.0, "steps": 10}
        assert client.post("/scan", json=request).status_code == 422

    def test_too_few_steps_rejected(self, client):
        request = {"axis": "R", "start": -1.0, "stop": 0.0, "steps": 1}
        assert client.post("/scan", json=request).status_code == 422


class TestOptimize:
    def test_both_variants_real_axis(self, client):
        body = client.post("/optimize", json={}).json()
        assert {r["variant"] for r in body["results"]} == {"first", "second"}
        for result in body["results"]:
            assert result["ratio_star"] == pytest.approx(1.1404, abs=5e-4)
            assert abs(result["R_star"][0]) == pytest.approx(X_STAR, abs=1e-3)
            assert result["R_star"][1] == 0.0

    def test_disc_domain(self, client):
        body = client.post(
            "/optimize", json={"domain": "disc", "variant": "first"}
        ).json()
        (result,) = body["results"]
        assert abs(result["R_star"][1]) <= 1e-6
        assert result["R_star"][0] == pytest.approx(-X_STAR, abs=1e-3)

    def test_bad_domain_rejected(self, client):
        assert client.post("/optimize", json={"domain": "ring"}).status_code == 422


class TestFeasibility:
    def test_design_point(self, client, default_payload):
        body = client.post("/feasibility", json=default_payload).json()
        assert body["spacelike_ok"] is True
        assert body["T_min_tau_s"] == pytest.approx(9.75)
        assert body["spacelike_factor"] == pytest.approx(1.773, abs=3e-3)
        assert body["surviving_fraction"] == pytest.approx(1.64e-5, rel=0.01)
        assert body["initial_events_per_usable_pair"] == pytest.approx(
            61000, rel=0.01
        )
        lt = body["lifetime_response"]
        assert lt["p_true_kl_recorded_kl"] == pytest.approx(0.9905, abs=5e-4)
        assert lt["p_true_ks_recorded_ks"] == pytest.approx(0.9959, abs=5e-4)

    def test_short_flight_not_spacelike(self, client):
        cfg = load_config().model_dump()
        cfg["preparation"]["T_tau_s"] = 9.0
        body = client.post("/feasibility", json=cfg).json()
        assert body["spacelike_ok"] is False

    def test_direct_R_config_rejected(self, client):
        assert (
            client.post("/feasibility", json=direct_R_payload(-0.5)).status_code
            == 422
        )


class TestSimulate:
    def test_small_run_shape_and_agreement(self, client):
        payload = direct_R_payload(-X_STAR, n_events=200_000, seed=42)
        response = client.post("/simulate", json=payload)
        assert response.status_code == 200
        body = response.json()
        assert body["n_events"] == 200_000
        assert body["detector_applied"] is False
        assert sum(row["count"] for row in body["counts"]) == 200_000
        ratio = body["first"]["ratio"]
        se = body["first"]["se_ratio"]
        assert abs(ratio - 1.1404) < 3.5 * se
        assert body["significance_first"] > 5.0

    def test_identical_requests_identical_responses(self, client):
        payload = direct_R_payload(-X_STAR, n_events=50_000, seed=7)
        first = client.post("/simulate", json=payload).json()
        second = client.post("/simulate", json=payload).json()
        assert first == second

    def test_empty_bucket_maps_to_409(self, client):
        payload = direct_R_payload(
            -X_STAR,
            n_events=100,
            seed=1,
            setting_weights={"ss": 0.5, "sl": 0.5, "ls": 0.0, "ll": 0.0},
        )
        response = client.post("/simulate", json=payload)
        assert response.status_code == 409
        assert "setting pair" in response.json()["detail"]

    def test_degenerate_preparation_maps_to_409(self, client):
        cfg = load_config().model_dump()
        cfg["preparation"]["regenerator"]["r_direct"] = [0.0, 0.0]
        cfg["preparation"]["T_tau_s"] = 100.0
        with pytest.warns(UserWarning):
            response = client.post("/simulate", json=cfg)
        assert response.status_code == 409

    def test_detector_run_with_correction(self, client):
        payload = direct_R_payload(
            -X_STAR, n_events=200_000, seed=11, use_detector=True,
            correction_mode="corrected",
        )
        body = client.post("/simulate", json=payload).json()
        assert body["detector_applied"] is True
        lost = sum(
            row["count"]
            for row in body["counts"]
            if "Lost" in (row["left_outcome"], row["right_outcome"])
        )
        assert lost > 0
        assert body["first"]["ratio"] > 1.10
