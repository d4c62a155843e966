"""A small causal transformer plus the two surgery operations:
vocabulary extension (new rows in both embedding matrices, marked
trainable) and low-rank adaptation of every linear projection.

The bundled model is deliberately tiny so the whole reference path
(train, memorize, serve) runs on one CPU. Input and output embeddings
are separate matrices because both must be independently trainable.
"""

import math

import torch
import torch.nn.functional as F
from torch import nn

from sft_adapter.config import BUILTIN_MODELS, SftConfig
from sft_adapter.errors import ConfigError, TokenCollision
from sft_adapter.tokenizer import EOS, WordTokenizer

IGNORE_INDEX = -100


class Block(nn.Module):
    def __init__(self, d_model: int, n_heads: int, d_ff: int):
        super().__init__()
        self.n_heads = n_heads
        self.ln1 = nn.LayerNorm(d_model)
        self.qkv = nn.Linear(d_model, 3 * d_model)
        self.proj = nn.Linear(d_model, d_model)
        self.ln2 = nn.LayerNorm(d_model)
        self.fc1 = nn.Linear(d_model, d_ff)
        self.fc2 = nn.Linear(d_ff, d_model)

    def forward(self, x):
        b, t, d = x.shape
        h = self.ln1(x)
        q, k, v = self.qkv(h).chunk(3, dim=-1)
        shape = (b, t, self.n_heads, d // self.n_heads)
        q = q.view(shape).transpose(1, 2)
        k = k.view(shape).transpose(1, 2)
        v = v.view(shape).transpose(1, 2)
        attn = F.scaled_dot_product_attention(q, k, v, is_causal=True)
        attn = attn.transpose(1, 2).reshape(b, t, d)
        x = x + self.proj(attn)
        return x + self.fc2(F.gelu(self.fc1(self.ln2(x))))


class TinyCausalLM(nn.Module):
    def __init__(self, vocab_size: int, d_model: int, n_layers: int,
                 n_heads: int, d_ff: int, max_len: int):
        super().__init__()
        self.max_len = max_len
        self.tok_emb = nn.Embedding(vocab_size, d_model)
        self.pos_emb = nn.Embedding(max_len, d_model)
        self.blocks = nn.ModuleList(
            Block(d_model, n_heads, d_ff) for _ in range(n_layers))
        self.ln_f = nn.LayerNorm(d_model)
        self.head = nn.Linear(d_model, vocab_size, bias=False)

    @property
    def vocab_size(self) -> int:
        return self.tok_emb.num_embeddings

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        b, t = ids.shape
        if t > self.max_len:
            raise ConfigError(f"sequence length {t} exceeds max_len {self.max_len}")
        pos = torch.arange(t, device=ids.device)
        x = self.tok_emb(ids) + self.pos_emb(pos)[None, :, :]
        for block in self.blocks:
            x = block(x)
        return self.head(self.ln_f(x))


def build_model(config: SftConfig, vocab_size: int) -> TinyCausalLM:
    if config.base_model_id not in BUILTIN_MODELS:
        raise ConfigError(
            f"base model {config.base_model_id!r} is not bundled; "
            f"runnable models: {', '.join(sorted(BUILTIN_MODELS))}")
    torch.manual_seed(config.seed)
    return TinyCausalLM(vocab_size, **BUILTIN_MODELS[config.base_model_id])


def extend_vocabulary(model: TinyCausalLM, tokenizer: WordTokenizer,
                      tokens: tuple[str, ...]) -> TinyCausalLM:
    """Add answer tokens: one fresh id each, new rows in both embeddings.

    Both embedding matrices are marked trainable; rejects any token already
    known to the tokenizer before changing anything.
    """
    for token in tokens:
        if token in tokenizer:
            raise TokenCollision(f"token {token!r} already in vocabulary")
    for token in tokens:
        tokenizer.add_special(token)
    n_new = len(tokens)
    d_model = model.tok_emb.embedding_dim
    new_rows_in = torch.empty(n_new, d_model).normal_(0.0, 0.02)
    new_rows_out = torch.empty(n_new, d_model).normal_(0.0, 0.02)
    model.tok_emb.weight = nn.Parameter(
        torch.cat([model.tok_emb.weight.data, new_rows_in]))
    model.tok_emb.num_embeddings = model.tok_emb.weight.shape[0]
    model.head.weight = nn.Parameter(
        torch.cat([model.head.weight.data, new_rows_out]))
    model.head.out_features = model.head.weight.shape[0]
    model.tok_emb.weight.requires_grad_(True)
    model.head.weight.requires_grad_(True)
    return model


class LoraLinear(nn.Module):
    """base(x) + (alpha/rank) * B A x, with the base weights frozen."""

    def __init__(self, base: nn.Linear, rank: int, alpha: float):
        super().__init__()
        self.base = base
        self.scale = alpha / rank
        self.lora_a = nn.Parameter(torch.empty(rank, base.in_features).normal_(0.0, 0.02))
        self.lora_b = nn.Parameter(torch.zeros(base.out_features, rank))

    def forward(self, x):
        return self.base(x) + self.scale * F.linear(F.linear(x, self.lora_a), self.lora_b)


def apply_lora(model: TinyCausalLM, rank: int, alpha: float) -> TinyCausalLM:
    """Wrap every block linear with an adapter; freeze everything else
    except the two embedding matrices."""
    for p in model.parameters():
        p.requires_grad_(False)
    for block in model.blocks:
        for name in ("qkv", "proj", "fc1", "fc2"):
            setattr(block, name, LoraLinear(getattr(block, name), rank, alpha))
    model.tok_emb.weight.requires_grad_(True)
    model.head.weight.requires_grad_(True)
    return model


def trainable_parameters(model: TinyCausalLM):
    return [p for p in model.parameters() if p.requires_grad]


def masked_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Next-token cross entropy over positions whose label is not masked.

    logits[t] scores labels[t + 1]; prompt and padding positions carry
    IGNORE_INDEX and contribute nothing, so perturbing logits at positions
    that feed only masked labels cannot change the value.
    """
    shifted = logits[:, :-1, :].reshape(-1, logits.shape[-1])
    targets = labels[:, 1:].reshape(-1)
    return F.cross_entropy(shifted, targets, ignore_index=IGNORE_INDEX)


@torch.no_grad()
def generate(model: TinyCausalLM, prompt_ids: list[int],
             max_new_tokens: int = 8) -> list[int]:
    """Greedy continuation (temperature 0); stops at EOS. Deterministic."""
    model.eval()
    ids = list(prompt_ids)
    out: list[int] = []
    for _ in range(max_new_tokens):
        window = ids[-model.max_len:]
        logits = model(torch.tensor([window], dtype=torch.long))
        next_id = int(logits[0, -1].argmax())
        if next_id == EOS:
            break
        out.append(next_id)
        ids.append(next_id)
    return out
