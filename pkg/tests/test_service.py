import pytest
from fastapi.testclient import TestClient

from socdiff.service import create_app

TOY_ITEMS = "a\tX\na\tY\nb\tY\n"
TOY_SOCIAL = "a\tb\n"


@pytest.fixture
def client():
    return TestClient(create_app(), raise_server_exceptions=False)


def upload(client, items=TOY_ITEMS, social=TOY_SOCIAL, **extra):
    body = {"items_text": items, **extra}
    if social is not None:
        body["social_text"] = social
    resp = client.post("/datasets", json=body)
    assert resp.status_code == 200, resp.text
    return resp.json()


def synth(client, **overrides):
    spec = {"communities": 2, "users_per_community": 12,
            "items_per_community": 12, "intra_collect": 0.3,
            "inter_collect": 0.05, "intra_friend": 0.2,
            "inter_friend": 0.02, "seed": 5}
    spec.update(overrides)
    resp = client.post("/datasets/synth", json=spec)
    assert resp.status_code == 200, resp.text
    return resp.json()


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"
    assert body["version"]


def test_upload_reports_shape(client):
    info = upload(client)
    assert info["origin"] == "upload"
    assert info["n_users"] == 2
    assert info["n_items"] == 2
    assert info["n_links"] == 3
    assert info["n_social_links"] == 1
    assert info["mean_user_degree"] == pytest.approx(1.5)


def test_upload_is_content_addressed(client):
    a = upload(client)
    b = upload(client)
    assert a["dataset_id"] == b["dataset_id"]
    c = upload(client, items=TOY_ITEMS + "b\tX\n")
    assert c["dataset_id"] != a["dataset_id"]


def test_unknown_dataset_404(client):
    assert client.get("/datasets/doesnotexist").status_code == 404
    resp = client.post("/datasets/doesnotexist/evaluate",
                       json={"method": "md"})
    assert resp.status_code == 404


def test_degree_histograms(client):
    info = upload(client)
    did = info["dataset_id"]
    coll = client.get(f"/datasets/{did}/degrees",
                      params={"kind": "collection"}).json()
    assert coll["histogram"] == {"1": 1, "2": 1}
    pop = client.get(f"/datasets/{did}/degrees",
                     params={"kind": "popularity"}).json()
    assert pop["histogram"] == {"1": 1, "2": 1}
    soc = client.get(f"/datasets/{did}/degrees",
                     params={"kind": "social"}).json()
    assert soc["histogram"] == {"1": 2}
    bad = client.get(f"/datasets/{did}/degrees", params={"kind": "nope"})
    assert bad.status_code == 422


def test_synth_and_export_deterministic(client):
    a = synth(client)
    b = synth(client)
    assert a["dataset_id"] == b["dataset_id"]
    assert a["origin"] == "synth"
    ex_a = client.get(f"/datasets/{a['dataset_id']}/export").json()
    assert ex_a["items_text"].startswith("u")
    other = synth(client, seed=6)
    assert other["dataset_id"] != a["dataset_id"]


def evaluate_body(method="md", **extra):
    return {"method": method, "probe_fraction": 0.2, "runs": 2,
            "master_seed": 9, "top_l": 5, **extra}


def test_evaluate_md_equals_smd_p1(client):
    did = synth(client)["dataset_id"]
    md = client.post(f"/datasets/{did}/evaluate", json=evaluate_body("md"))
    smd = client.post(f"/datasets/{did}/evaluate",
                      json=evaluate_body("smd", p=1.0))
    assert md.status_code == 200 and smd.status_code == 200
    a, b = md.json(), smd.json()
    assert a["mean"] == b["mean"]
    assert a["runs"] == b["runs"]
    assert a["run_seeds"] == b["run_seeds"]
    # only the request echo differs
    assert a["config"]["method"] == "md"
    assert b["config"]["method"] == "smd"
    assert b["config"]["kernel"] == "md"


def test_worker_count_never_reaches_the_response(client):
    did = synth(client)["dataset_id"]
    one = client.post(f"/datasets/{did}/evaluate",
                      json=evaluate_body("md", workers=1)).json()
    three = client.post(f"/datasets/{did}/evaluate",
                        json=evaluate_body("md", workers=3)).json()
    assert "workers" not in one["config"]
    assert one == three


def test_sweep_endpoint(client):
    did = synth(client)["dataset_id"]
    resp = client.post(f"/datasets/{did}/sweep",
                       json=evaluate_body("smd", p=0.5, grid=[0.5, 1.0]))
    assert resp.status_code == 200, resp.text
    body = resp.json()
    assert [pt["parameter"] for pt in body["points"]] == [0.5, 1.0]
    assert body["optimal_parameter"] in (0.5, 1.0)
    assert len(body["points"][0]["runs"]) == 2


def test_coldstart_endpoint(client):
    did = synth(client)["dataset_id"]
    resp = client.post(f"/datasets/{did}/coldstart",
                       json={"method": "smd", "p": 0.5, "max_degree": 2,
                             "top_l": 5})
    assert resp.status_code == 200, resp.text
    body = resp.json()
    assert set(body["improvements"]) == {"rs", "precision", "inter_diversity",
                                         "intra_diversity", "coverage",
                                         "novelty", "congestion"}
    assert all(isinstance(u, int) for u in body["selected_users"])
    assert body["smd"]["users_evaluated"] >= 1


def test_verify_endpoint(client):
    resp = client.post("/verify", json={"seed": 0, "instances": 8})
    assert resp.status_code == 200
    body = resp.json()
    assert body["passed"] is True
    assert len(body["results"]) >= 10
    assert all(r["passed"] for r in body["results"])


def test_domain_errors_become_400(client):
    did = synth(client)["dataset_id"]
    resp = client.post(f"/datasets/{did}/evaluate",
                       json=evaluate_body("md", p=0.5))
    assert resp.status_code == 400
    assert "p is only valid with smd" in resp.json()["message"]


def test_parse_errors_become_400(client):
    resp = client.post("/datasets", json={"items_text": "broken\n"})
    assert resp.status_code == 400


def test_schema_errors_become_422(client):
    resp = client.post("/datasets", json={})
    assert resp.status_code == 422
    did = synth(client)["dataset_id"]
    resp = client.post(f"/datasets/{did}/evaluate",
                       json={"method": "teleport"})
    assert resp.status_code == 422
