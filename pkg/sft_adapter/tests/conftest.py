"""One small trained adapter shared across server tests."""

import pytest

from adapter_testkit import planted_rows, write_sft
from sft_adapter.config import SftConfig
from sft_adapter.train import finetune


@pytest.fixture(scope="session")
def small_adapter(tmp_path_factory):
    """A quickly-trained injury adapter over 32 planted examples."""
    path = tmp_path_factory.mktemp("small") / "sft.jsonl"
    write_sft(path, planted_rows(32, seed=11))
    config = SftConfig(task="injury", epochs=80, batch_size=8,
                       learning_rate=5e-3, seed=100)
    return finetune(config, str(path))
