import pytest
from fastapi.testclient import TestClient

from medaide.chunking import ChunkParams
from medaide.gateway.config import ServiceConfig
from medaide.gateway.service import create_app

TOKEN = "test-token-1"
AUTH = {"Authorization": f"Bearer {TOKEN}"}

TINY_DOCS = {
    "cardiology": "aspirin thins the blood and can reduce the risk of heart attack in adults",
    "orthopedics": "a bone fracture usually needs a cast immobilization and several weeks of rest",
    "virology": "influenza spreads in winter and causes fever cough and muscle aches",
    "allergy": "antihistamines relieve hay fever sneezing and itchy eyes in most patients",
    "nutrition": "a balanced diet with vegetables and fiber supports long term heart health",
}


def make_config(tmp_path, **overrides) -> ServiceConfig:
    defaults = dict(
        data_dir=tmp_path / "data",
        auth_tokens=[TOKEN],
        chunk_params=ChunkParams(size_chars=200, overlap_chars=20),
        embedder_dims=64,
    )
    defaults.update(overrides)
    return ServiceConfig(**defaults)


def write_docs(config: ServiceConfig, docs=TINY_DOCS) -> None:
    config.ensure_dirs()
    for doc_id, text in docs.items():
        (config.docs_dir / f"{doc_id}.txt").write_text(text, encoding="utf-8")


@pytest.fixture
def service(tmp_path):
    """A TestClient over a service with the tiny corpus indexed."""
    config = make_config(tmp_path)
    write_docs(config)
    app = create_app(config)
    with TestClient(app) as client:
        response = client.post("/api/v1/index/rebuild", json={}, headers=AUTH)
        assert response.status_code == 200, response.text
        yield client
