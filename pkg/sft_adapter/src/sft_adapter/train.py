"""Fine-tuning loop and the trained-adapter bundle.

finetune() builds the tokenizer from the SFT file (answer tokens stripped
from the base vocabulary, then added as fresh ids), applies low-rank
adapters, and optimizes only adapter and embedding parameters with the
masked next-token loss.
"""

from dataclasses import dataclass, field

import torch
from torch import nn

from sft_adapter.config import ANCHOR, BUILTIN_MODELS, SftConfig
from sft_adapter.data import SftExample, collate, encode_example, load_sft_file, render_prompt
from sft_adapter.errors import ConfigError, DataFormatError
from sft_adapter.model import (
    IGNORE_INDEX,
    TinyCausalLM,
    apply_lora,
    build_model,
    extend_vocabulary,
    generate,
    masked_loss,
    trainable_parameters,
)
from sft_adapter.tokenizer import BOS, WordTokenizer


def extract_token(text: str, specials: tuple[str, ...]) -> str | None:
    """First answer token appearing after the anchor, or None."""
    anchor_at = text.find(ANCHOR)
    if anchor_at < 0:
        return None
    tail = text[anchor_at + len(ANCHOR):]
    best: tuple[int, str] | None = None
    for token in specials:
        at = tail.find(token)
        if at >= 0 and (best is None or at < best[0]):
            best = (at, token)
    return best[1] if best else None


@dataclass
class Adapter:
    """Everything needed to serve: config, tokenizer, weights, history."""

    config: SftConfig
    tokenizer: WordTokenizer
    model: TinyCausalLM
    epoch_losses: list[float] = field(default_factory=list)

    @property
    def max_len(self) -> int:
        return self.model.max_len

    def predict_text(self, system: str, user: str,
                     max_new_tokens: int = 8) -> str:
        """Greedy completion of the prompt, decoded to text."""
        prompt_ids = [BOS] + self.tokenizer.encode(render_prompt(system, user))
        budget = self.max_len - max_new_tokens
        if len(prompt_ids) > budget:
            # out-of-contract long prompt: keep the tail, which holds the
            # most recent paragraphs and the answer cue
            prompt_ids = prompt_ids[-budget:]
        out = generate(self.model, prompt_ids, max_new_tokens=max_new_tokens)
        return self.tokenizer.decode(out)

    def predict_token(self, system: str, user: str) -> tuple[str | None, str]:
        """(answer token or None, raw generated text)."""
        text = self.predict_text(system, user)
        return extract_token(text, self.config.special_tokens), text


def _validate_targets(examples: list[SftExample], config: SftConfig) -> None:
    for ex in examples:
        token = extract_token(ex.assistant, config.special_tokens)
        if token is None:
            raise DataFormatError(
                f"case {ex.case_id}: assistant text carries no {config.task} token")


def finetune(config: SftConfig, sft_path: str,
             log=None) -> Adapter:
    """Train adapters on one SFT export; returns the serving bundle.

    Stops early once the epoch-average loss falls below config.stop_loss.
    """
    examples = load_sft_file(sft_path)
    _validate_targets(examples, config)

    texts = [render_prompt(ex.system, ex.user) for ex in examples]
    texts += [ex.assistant for ex in examples]
    tokenizer = WordTokenizer.fit(texts, strip=config.special_tokens)

    model = build_model(config, tokenizer.vocab_size)
    extend_vocabulary(model, tokenizer, config.special_tokens)
    apply_lora(model, config.lora_rank, config.lora_alpha)

    max_len = BUILTIN_MODELS[config.base_model_id]["max_len"]
    encoded = [encode_example(tokenizer, ex, max_len) for ex in examples]
    batches = [collate(encoded[i:i + config.batch_size])
               for i in range(0, len(encoded), config.batch_size)]

    optimizer = torch.optim.AdamW(trainable_parameters(model),
                                  lr=config.learning_rate)
    losses: list[float] = []
    model.train()
    for epoch in range(config.epochs):
        total, count = 0.0, 0
        for ids, labels in batches:
            optimizer.zero_grad()
            loss = masked_loss(model(ids), labels)
            loss.backward()
            optimizer.step()
            n = int((labels[:, 1:] != IGNORE_INDEX).sum())
            total += float(loss.detach()) * n
            count += n
        losses.append(total / count)
        if log:
            log(f"epoch {epoch + 1}: loss {losses[-1]:.6f}")
        if losses[-1] < config.stop_loss:
            break
    return Adapter(config=config, tokenizer=tokenizer, model=model,
                   epoch_losses=losses)


def reproduction_rate(adapter: Adapter, examples: list[SftExample]) -> float:
    """Fraction of examples whose greedy completion equals the target
    byte-exactly."""
    hits = 0
    for ex in examples:
        if adapter.predict_text(ex.system, ex.user) == ex.assistant:
            hits += 1
    return hits / len(examples)


def token_accuracy(adapter: Adapter, examples: list[SftExample]) -> float:
    """Fraction answered with the example's own answer token."""
    hits = 0
    for ex in examples:
        want = extract_token(ex.assistant, adapter.config.special_tokens)
        got, _ = adapter.predict_token(ex.system, ex.user)
        hits += int(got == want)
    return hits / len(examples)


def save_adapter(adapter: Adapter, path: str) -> None:
    torch.save({
        "config": adapter.config.as_dict(),
        "tokenizer": adapter.tokenizer.to_dict(),
        "state": adapter.model.state_dict(),
        "epoch_losses": adapter.epoch_losses,
    }, path)


def load_adapter(path: str) -> Adapter:
    try:
        payload = torch.load(path, weights_only=True)
    except Exception as exc:
        raise ConfigError(f"cannot load adapter {path}: {exc}") from exc
    raw_config = dict(payload["config"])
    raw_config["special_tokens"] = tuple(raw_config["special_tokens"])
    config = SftConfig(**raw_config)
    tokenizer = WordTokenizer.from_dict(payload["tokenizer"])
    model = build_model(config, tokenizer.vocab_size - len(tokenizer.specials))
    model = _resize_like(model, tokenizer.vocab_size)
    apply_lora(model, config.lora_rank, config.lora_alpha)
    model.load_state_dict(payload["state"])
    model.eval()
    return Adapter(config=config, tokenizer=tokenizer, model=model,
                   epoch_losses=list(payload.get("epoch_losses", [])))


def _resize_like(model: TinyCausalLM, vocab_size: int) -> TinyCausalLM:
    d_model = model.tok_emb.embedding_dim
    n_new = vocab_size - model.tok_emb.num_embeddings
    if n_new <= 0:
        return model
    model.tok_emb.weight = nn.Parameter(
        torch.cat([model.tok_emb.weight.data, torch.zeros(n_new, d_model)]))
    model.tok_emb.num_embeddings = vocab_size
    model.head.weight = nn.Parameter(
        torch.cat([model.head.weight.data, torch.zeros(n_new, d_model)]))
    model.head.out_features = vocab_size
    return model
