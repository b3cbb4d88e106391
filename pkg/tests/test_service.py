import io
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from conftest import orthogonal_scene, smooth_scene
from hsiseg import FusionModel, save_cube, save_probability_map, SimilarityMap, generate_scene
from hsiseg.service import create_app, quantize_threshold


SCENE_SPEC = json.loads(orthogonal_scene(seed=3, height=16, width=16).to_json())


@pytest.fixture
def client():
    return TestClient(create_app())


def open_scene_session(client, spec=None):
    response = client.post("/sessions", json={"scene_spec": spec or SCENE_SPEC})
    assert response.status_code == 201, response.text
    return response.json()


def png_array(payload: bytes) -> np.ndarray:
    return np.asarray(Image.open(io.BytesIO(payload)))


def test_health(client):
    assert client.get("/health").json() == {"status": "ok"}


def test_create_from_scene_spec(client):
    meta = open_scene_session(client)
    assert meta["height"] == 16 and meta["width"] == 16
    assert meta["bands"] == SCENE_SPEC["bands"]
    assert meta["clicks"] == 0
    assert "sa" in meta["methods"] and "learned" not in meta["methods"]
    # scene generation is deterministic: a second session renders identically
    other = open_scene_session(client)
    a = client.get(f"/sessions/{meta['id']}/rgb").content
    b = client.get(f"/sessions/{other['id']}/rgb").content
    assert a == b


def test_create_from_cube_path(client, tmp_path):
    cube, _ = generate_scene(orthogonal_scene(seed=4, height=8, width=9))
    save_cube(cube, tmp_path / "c.hdr")
    response = client.post("/sessions", json={"cube_path": str(tmp_path / "c.hdr")})
    assert response.status_code == 201
    meta = response.json()
    assert (meta["height"], meta["width"]) == (8, 9)

    missing = client.post("/sessions", json={"cube_path": str(tmp_path / "nope.hdr")})
    assert missing.status_code == 404
    assert missing.json()["code"] == 404 and "message" in missing.json()


def test_create_requires_exactly_one_source(client):
    assert client.post("/sessions", json={}).status_code == 422
    both = client.post("/sessions", json={"cube_path": "x", "scene_spec": SCENE_SPEC})
    assert both.status_code == 422


def test_rgb_endpoint_dimensions(client):
    meta = open_scene_session(client)
    response = client.get(f"/sessions/{meta['id']}/rgb")
    assert response.status_code == 200
    img = png_array(response.content)
    assert img.shape == (16, 16, 3)


def test_click_lifecycle(client):
    sid = open_scene_session(client)["id"]
    r1 = client.post(f"/sessions/{sid}/clicks", json={"row": 4, "col": 5})
    assert r1.status_code == 200 and r1.json()["clicks"] == 1
    hash_one = r1.json()["state_hash"]

    out = client.post(f"/sessions/{sid}/clicks", json={"row": 99, "col": 0})
    assert out.status_code == 422

    dup = client.post(f"/sessions/{sid}/clicks", json={"row": 4, "col": 5, "polarity": "negative"})
    assert dup.status_code == 409

    r2 = client.post(f"/sessions/{sid}/clicks", json={"row": 6, "col": 6})
    assert r2.json()["clicks"] == 2

    undo = client.delete(f"/sessions/{sid}/clicks/last")
    assert undo.status_code == 200 and undo.json()["clicks"] == 1
    assert undo.json()["state_hash"] == hash_one

    redo = client.post(f"/sessions/{sid}/clicks", json={"row": 6, "col": 6})
    assert redo.json()["clicks"] == 2

    client.delete(f"/sessions/{sid}/clicks/last")
    under = client.delete(f"/sessions/{sid}/clicks/last")
    assert under.status_code == 200
    empty = client.delete(f"/sessions/{sid}/clicks/last")
    assert empty.status_code == 409


def test_undo_redo_restores_identical_map(client):
    sid = open_scene_session(client)["id"]
    client.post(f"/sessions/{sid}/clicks", json={"row": 4, "col": 5})
    first = client.get(f"/sessions/{sid}/map", params={"method": "sa"}).content
    client.post(f"/sessions/{sid}/clicks", json={"row": 8, "col": 8})
    client.delete(f"/sessions/{sid}/clicks/last")
    again = client.get(f"/sessions/{sid}/map", params={"method": "sa"}).content
    assert first == again


def test_map_self_similarity_and_stats(client):
    sid = open_scene_session(client)["id"]
    client.post(f"/sessions/{sid}/clicks", json={"row": 4, "col": 5})
    response = client.get(f"/sessions/{sid}/map", params={"method": "sa"})
    assert response.status_code == 200
    values = png_array(response.content)
    assert values.dtype == np.uint16
    assert values[4, 5] == 65535
    assert 0.0 <= float(response.headers["X-Map-Min"]) <= 1.0
    assert float(response.headers["X-Map-Max"]) == 1.0


def test_repeated_requests_byte_identical(client):
    sid = open_scene_session(client)["id"]
    client.post(f"/sessions/{sid}/clicks", json={"row": 4, "col": 5})
    a = client.get(f"/sessions/{sid}/map", params={"method": "pcc_eq"})
    b = client.get(f"/sessions/{sid}/map", params={"method": "pcc_eq"})
    assert a.content == b.content
    assert a.headers["X-Map-Mean"] == b.headers["X-Map-Mean"]


def test_intersection_consistent_with_branches(client):
    sid = open_scene_session(client)["id"]
    client.post(f"/sessions/{sid}/clicks", json={"row": 4, "col": 5})
    rgb = png_array(client.get(f"/sessions/{sid}/map", params={"method": "rgb"}).content)
    sa_eq = png_array(client.get(f"/sessions/{sid}/map", params={"method": "sa_eq"}).content)
    inter = png_array(client.get(f"/sessions/{sid}/map", params={"method": "intersection"}).content)
    recomputed = np.rint((rgb / 65535.0) * (sa_eq / 65535.0) * 65535.0)
    assert np.abs(inter.astype(np.int64) - recomputed.astype(np.int64)).max() <= 1


def test_threshold_matches_client_side_binarization(client):
    sid = open_scene_session(client)["id"]
    client.post(f"/sessions/{sid}/clicks", json={"row": 4, "col": 5})
    full = png_array(client.get(f"/sessions/{sid}/map", params={"method": "sa"}).content)
    for threshold in (0.0, 0.25, 0.5, 0.503, 1.0):
        masked = client.get(
            f"/sessions/{sid}/map", params={"method": "sa", "threshold": threshold}
        )
        mask = png_array(masked.content)
        assert mask.dtype == bool
        expected = full >= quantize_threshold(threshold)
        assert np.array_equal(mask, expected)
    assert quantize_threshold(0.5) == 32768

    bad = client.get(f"/sessions/{sid}/map", params={"method": "sa", "threshold": 1.5})
    assert bad.status_code == 422


def test_map_raw_is_smap(client, tmp_path):
    sid = open_scene_session(client)["id"]
    client.post(f"/sessions/{sid}/clicks", json={"row": 4, "col": 5})
    raw = client.get(f"/sessions/{sid}/map.raw", params={"method": "sa"})
    assert raw.status_code == 200
    assert raw.content[:4] == b"SMAP"
    from hsiseg import load_probability_map

    (tmp_path / "m.smap").write_bytes(raw.content)
    m = load_probability_map(tmp_path / "m.smap")
    full = png_array(client.get(f"/sessions/{sid}/map", params={"method": "sa"}).content)
    assert np.abs(m.data - full / 65535.0).max() < 1e-4


def test_method_errors(client):
    sid = open_scene_session(client)["id"]
    unknown = client.get(f"/sessions/{sid}/map", params={"method": "wavelet"})
    assert unknown.status_code == 404
    no_clicks = client.get(f"/sessions/{sid}/map", params={"method": "sa"})
    assert no_clicks.status_code == 409
    learned = client.get(f"/sessions/{sid}/map", params={"method": "learned"})
    assert learned.status_code == 404  # no model loaded


def test_learned_method_available_with_model(tmp_path):
    model = FusionModel(weights=np.array([1.0, 1.0, 0.0, -1.0]))
    client = TestClient(create_app(model=model))
    meta = open_scene_session(client)
    assert "learned" in meta["methods"]
    client.post(f"/sessions/{meta['id']}/clicks", json={"row": 4, "col": 5})
    response = client.get(f"/sessions/{meta['id']}/map", params={"method": "learned"})
    assert response.status_code == 200


def test_external_rgb_map_served_without_clicks(tmp_path):
    client = TestClient(create_app())
    cube, _ = generate_scene(orthogonal_scene(seed=5, height=8, width=8))
    save_cube(cube, tmp_path / "c.hdr")
    values = np.linspace(0, 1, 64).reshape(8, 8)
    save_probability_map(SimilarityMap(values), tmp_path / "ext.smap")
    response = client.post("/sessions", json={
        "cube_path": str(tmp_path / "c.hdr"),
        "rgb_map_path": str(tmp_path / "ext.smap"),
    })
    sid = response.json()["id"]
    m = png_array(client.get(f"/sessions/{sid}/map", params={"method": "rgb"}).content)
    assert np.array_equal(m, np.rint(values.astype(np.float32).astype(np.float64) * 65535))


def test_sessions_are_isolated(client):
    # broad prototypes plus noise make every pixel's spectral direction unique
    noisy = json.loads(smooth_scene(seed=6, height=16, width=16, noise=0.1).to_json())
    a = open_scene_session(client, noisy)["id"]
    b = open_scene_session(client, noisy)["id"]
    client.post(f"/sessions/{a}/clicks", json={"row": 4, "col": 5})
    client.post(f"/sessions/{b}/clicks", json={"row": 10, "col": 2})
    map_a = client.get(f"/sessions/{a}/map", params={"method": "sa"}).content
    map_b = client.get(f"/sessions/{b}/map", params={"method": "sa"}).content
    assert map_a != map_b
    assert client.get(f"/sessions/{a}").json()["clicks"] == 1


def test_idle_eviction():
    clock = {"now": 0.0}
    app = create_app(idle_seconds=100.0, time_fn=lambda: clock["now"])
    client = TestClient(app)
    sid = open_scene_session(client)["id"]
    clock["now"] = 50.0
    assert client.get(f"/sessions/{sid}").status_code == 200  # refreshed
    clock["now"] = 140.0
    assert client.get(f"/sessions/{sid}").status_code == 200
    clock["now"] = 260.0
    gone = client.get(f"/sessions/{sid}")
    assert gone.status_code == 404
