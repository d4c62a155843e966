"""Loading and encoding of SFT export files.

The input format is the producing toolkit's export: one JSON object per
line with string keys case_id / system / user / assistant, the assistant
text starting with the shared answer anchor.
"""

import json
from dataclasses import dataclass

import torch

from sft_adapter.config import ANCHOR
from sft_adapter.errors import DataFormatError
from sft_adapter.model import IGNORE_INDEX
from sft_adapter.tokenizer import BOS, EOS, PAD, WordTokenizer

REQUIRED_KEYS = ("case_id", "system", "user", "assistant")


@dataclass(frozen=True)
class SftExample:
    case_id: str
    system: str
    user: str
    assistant: str


def load_sft_file(path: str) -> list[SftExample]:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"line {lineno}: not JSON: {exc}") from exc
            if not isinstance(raw, dict):
                raise DataFormatError(f"line {lineno}: expected an object")
            for key in REQUIRED_KEYS:
                if not isinstance(raw.get(key), str):
                    raise DataFormatError(f"line {lineno}: missing key {key!r}")
            if not raw["assistant"].startswith(ANCHOR):
                raise DataFormatError(
                    f"line {lineno}: assistant text must start with {ANCHOR!r}")
            examples.append(SftExample(
                case_id=raw["case_id"], system=raw["system"],
                user=raw["user"], assistant=raw["assistant"]))
    if not examples:
        raise DataFormatError(f"{path} holds no examples")
    return examples


def render_prompt(system: str, user: str) -> str:
    return f"{system}\n{user}"


def encode_example(tokenizer: WordTokenizer, example: SftExample,
                   max_len: int) -> tuple[list[int], list[int]]:
    """Return (ids, labels): BOS + prompt + assistant + EOS, with labels
    carrying IGNORE_INDEX over BOS and every prompt position."""
    prompt_ids = [BOS] + tokenizer.encode(render_prompt(example.system, example.user))
    target_ids = tokenizer.encode(example.assistant) + [EOS]
    ids = prompt_ids + target_ids
    if len(ids) > max_len:
        raise DataFormatError(
            f"case {example.case_id}: {len(ids)} tokens exceeds max_len {max_len}")
    labels = [IGNORE_INDEX] * len(prompt_ids) + list(target_ids)
    return ids, labels


def loss_mask(labels: list[int]) -> list[int]:
    """1 where a position contributes to the loss, 0 where masked."""
    return [0 if label == IGNORE_INDEX else 1 for label in labels]


def collate(encoded: list[tuple[list[int], list[int]]]) -> tuple[torch.Tensor, torch.Tensor]:
    """Pad a batch to its longest row; padding labels are masked."""
    width = max(len(ids) for ids, _ in encoded)
    ids_out = torch.full((len(encoded), width), PAD, dtype=torch.long)
    labels_out = torch.full((len(encoded), width), IGNORE_INDEX, dtype=torch.long)
    for row, (ids, labels) in enumerate(encoded):
        ids_out[row, :len(ids)] = torch.tensor(ids, dtype=torch.long)
        labels_out[row, :len(labels)] = torch.tensor(labels, dtype=torch.long)
    return ids_out, labels_out
