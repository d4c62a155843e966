"""Training loop behavior, adapter persistence, and the /predict server."""

import json
import threading

import pytest
import requests
from adapter_testkit import free_port, planted_rows, write_sft

from sft_adapter.config import SftConfig
from sft_adapter.data import load_sft_file
from sft_adapter.errors import DataFormatError
from sft_adapter.serve import make_server
from sft_adapter.train import finetune, load_adapter, reproduction_rate, save_adapter


class TestFinetune:
    def test_loss_drops_and_model_memorizes(self, small_adapter, tmp_path):
        losses = small_adapter.epoch_losses
        assert losses[-1] < losses[0] / 10
        path = tmp_path / "sft.jsonl"
        write_sft(path, planted_rows(32, seed=11))
        assert reproduction_rate(small_adapter, load_sft_file(str(path))) == 1.0

    def test_rejects_target_without_task_token(self, tmp_path):
        rows = planted_rows(4, seed=2)
        rows[2]["assistant"] = "The answer is: maybe"
        path = write_sft(tmp_path / "bad.jsonl", rows)
        with pytest.raises(DataFormatError):
            finetune(SftConfig(task="injury", epochs=1), path)

    def test_same_seed_same_adapter(self, tmp_path):
        path = write_sft(tmp_path / "sft.jsonl", planted_rows(8, seed=3))
        config = SftConfig(task="injury", epochs=2, seed=77)
        a = finetune(config, path)
        b = finetune(config, path)
        assert a.epoch_losses == b.epoch_losses
        ex = load_sft_file(path)[0]
        assert a.predict_text(ex.system, ex.user) == \
            b.predict_text(ex.system, ex.user)


class TestPersistence:
    def test_save_load_round_trip_preserves_predictions(self, small_adapter,
                                                        tmp_path):
        path = tmp_path / "adapter.pt"
        save_adapter(small_adapter, str(path))
        loaded = load_adapter(str(path))
        assert loaded.config == small_adapter.config
        assert loaded.epoch_losses == small_adapter.epoch_losses
        for row in planted_rows(6, seed=55):
            assert loaded.predict_text(row["system"], row["user"]) == \
                small_adapter.predict_text(row["system"], row["user"])


@pytest.fixture(scope="module")
def served(small_adapter):
    port = free_port()
    server = make_server(small_adapter, port)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{port}"
    server.shutdown()
    server.server_close()


def predict_payload(user_text="A severe crash on a wet road segment."):
    return {
        "task": "injury",
        "system": "Read the description and answer with one token.",
        "user": user_text,
        "case_id": "CASE0001",
    }


class TestServer:
    def test_valid_request_returns_a_token(self, served, small_adapter):
        response = requests.post(f"{served}/predict", json=predict_payload(),
                                 timeout=10)
        assert response.status_code == 200
        body = response.json()
        assert body["label"] in small_adapter.config.special_tokens
        assert isinstance(body["raw"], str)

    def test_empty_user_text_is_400(self, served):
        response = requests.post(f"{served}/predict",
                                 json=predict_payload(user_text="  "),
                                 timeout=10)
        assert response.status_code == 400

    def test_missing_user_text_is_400(self, served):
        payload = predict_payload()
        del payload["user"]
        response = requests.post(f"{served}/predict", json=payload, timeout=10)
        assert response.status_code == 400

    def test_malformed_body_is_400(self, served):
        response = requests.post(f"{served}/predict", data=b"not json",
                                 timeout=10)
        assert response.status_code == 400

    def test_wrong_task_is_400(self, served):
        payload = predict_payload()
        payload["task"] = "severity"
        response = requests.post(f"{served}/predict", json=payload, timeout=10)
        assert response.status_code == 400

    def test_unknown_path_is_404(self, served):
        response = requests.post(f"{served}/nope", json=predict_payload(),
                                 timeout=10)
        assert response.status_code == 404

    def test_repeat_requests_are_deterministic(self, served):
        first = requests.post(f"{served}/predict", json=predict_payload(),
                              timeout=10).json()
        second = requests.post(f"{served}/predict", json=predict_payload(),
                               timeout=10).json()
        assert first == second


class TestServerAuth:
    def test_bearer_token_gate(self, small_adapter):
        port = free_port()
        server = make_server(small_adapter, port, auth_token="sesame")
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            url = f"http://127.0.0.1:{port}/predict"
            denied = requests.post(url, json=predict_payload(), timeout=10)
            assert denied.status_code == 401
            allowed = requests.post(
                url, json=predict_payload(), timeout=10,
                headers={"Authorization": "Bearer sesame"})
            assert allowed.status_code == 200
        finally:
            server.shutdown()
            server.server_close()
