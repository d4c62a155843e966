"""Masked-loss LoRA fine-tuning reference plus a /predict HTTP server."""

__version__ = "0.1.0"

from sft_adapter.config import ANCHOR, TASK_TOKENS, SftConfig, load_config
from sft_adapter.errors import AdapterError, ConfigError, DataFormatError, TokenCollision
from sft_adapter.model import extend_vocabulary, masked_loss
from sft_adapter.serve import make_server
from sft_adapter.tokenizer import WordTokenizer
from sft_adapter.train import Adapter, finetune, load_adapter, save_adapter

__all__ = [
    "ANCHOR", "TASK_TOKENS", "SftConfig", "load_config",
    "AdapterError", "ConfigError", "DataFormatError", "TokenCollision",
    "extend_vocabulary", "masked_loss", "make_server", "WordTokenizer",
    "Adapter", "finetune", "load_adapter", "save_adapter",
    "__version__",
]
