"""Training configuration and the shared answer-token vocabulary.

The token strings are part of the wire protocol with the prompt-producing
toolkit: requests carry them, SFT targets end with them, and the served
reply must be one of them. They are re-declared here verbatim rather than
imported so the two packages stay decoupled.
"""

import dataclasses
import json
from dataclasses import dataclass

from sft_adapter.errors import ConfigError

ANCHOR = "The answer is:"

TASK_TOKENS: dict[str, tuple[str, ...]] = {
    "injury": ("<ZERO>", "<ONE>", "<TWO>", "<THREE OR MORE>"),
    "severity": (
        "<NO APPARENT INJURY>", "<POSSIBLE INJURY>", "<MINOR INJURY>",
        "<SERIOUS INJURY>", "<FATAL>",
    ),
    "accident_type": (
        "<SINGLE VEHICLE WITH OBJECT>", "<ANGLE IMPACTS_RIGHT>", "<OTHER>",
        "<SIDESWIPES_LEFT>", "<FRONT END COLLISIONS>", "<REAR END COLLISIONS>",
        "<OVERTURN>", "<ANIMAL COLLISIONS>", "<PEDESTRIAN COLLISIONS>",
        "<SIDESWIPES_RIGHT>", "<PEDALCYCLIST COLLISIONS>",
        "<HEAD ON COLLISIONS>", "<OFF ROAD>", "<ANGLE IMPACTS_LEFT>",
    ),
}

# The only base models that train in this repository. Hub-scale presets
# below are documented shapes, not runnable here.
BUILTIN_MODELS: dict[str, dict] = {
    "tiny-64": dict(d_model=64, n_layers=2, n_heads=4, d_ff=128, max_len=448),
    "tiny-128": dict(d_model=128, n_layers=4, n_heads=4, d_ff=256, max_len=448),
}

DEFAULT_SEED = 20220101


@dataclass(frozen=True)
class SftConfig:
    task: str
    base_model_id: str = "tiny-64"
    special_tokens: tuple[str, ...] = ()
    lora_rank: int = 8
    lora_alpha: float = 16.0
    epochs: int = 40
    learning_rate: float = 5e-3
    batch_size: int = 8
    stop_loss: float = 1e-3
    load_4bit: bool = False
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.task not in TASK_TOKENS:
            raise ConfigError(f"unknown task {self.task!r}")
        expected = TASK_TOKENS[self.task]
        if not self.special_tokens:
            object.__setattr__(self, "special_tokens", expected)
        elif tuple(self.special_tokens) != expected:
            raise ConfigError(
                f"special_tokens must match the {self.task} vocabulary exactly")
        if self.lora_rank < 1:
            raise ConfigError("lora_rank must be >= 1")
        if self.lora_alpha <= 0:
            raise ConfigError("lora_alpha must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["special_tokens"] = list(self.special_tokens)
        return out


def load_config(path: str) -> SftConfig:
    """Read a config file (JSON object of SftConfig fields)."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    known = {f.name for f in dataclasses.fields(SftConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "task" not in raw:
        raise ConfigError("config needs a task")
    if "special_tokens" in raw:
        raw["special_tokens"] = tuple(raw["special_tokens"])
    return SftConfig(**raw)


# Documented hub-scale shapes mirroring the per-task adapters the method
# targets at full scale. They are presets only: this repository bundles no
# hub weights and never trains them in tests.
HUB_PRESETS: dict[str, dict] = {
    "llama-7b": dict(base_model_id="meta-llama/Llama-2-7b-hf", load_4bit=True),
    "llama-13b": dict(base_model_id="meta-llama/Llama-2-13b-hf", load_4bit=True),
    "llama-70b": dict(base_model_id="meta-llama/Llama-2-70b-hf", load_4bit=True),
}
