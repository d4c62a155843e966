"""Whitespace word tokenizer with atomic special tokens.

Words are split on whitespace; registered special tokens match as single
units even when they contain spaces. Decoding joins pieces with single
spaces, so any single-spaced string of known words round-trips byte-exactly.
"""

import re

from sft_adapter.errors import TokenCollision

PAD, UNK, BOS, EOS = 0, 1, 2, 3
_STRUCTURAL = ("<pad>", "<unk>", "<bos>", "<eos>")


class WordTokenizer:
    def __init__(self, words: list[str]):
        self._vocab: dict[str, int] = {}
        for word in _STRUCTURAL:
            self._vocab[word] = len(self._vocab)
        for word in words:
            if word and word not in self._vocab:
                self._vocab[word] = len(self._vocab)
        self._specials: list[str] = []
        self._special_re: re.Pattern | None = None
        self._rebuild_reverse()

    def _rebuild_reverse(self):
        self._reverse = {i: w for w, i in self._vocab.items()}

    @classmethod
    def fit(cls, texts: list[str], strip: tuple[str, ...] = ()) -> "WordTokenizer":
        """Build a base vocabulary from texts, sorted for determinism.

        Strings in ``strip`` are removed before word collection so reserved
        answer tokens never leak into the base vocabulary.
        """
        seen = set()
        for text in texts:
            for needle in strip:
                text = text.replace(needle, " ")
            seen.update(text.split())
        return cls(sorted(seen))

    @property
    def vocab_size(self) -> int:
        return len(self._vocab)

    @property
    def specials(self) -> tuple[str, ...]:
        return tuple(self._specials)

    def __contains__(self, word: str) -> bool:
        return word in self._vocab

    def add_special(self, token: str) -> int:
        """Register one atomic special token; its id is brand new."""
        if token in self._vocab:
            raise TokenCollision(f"token {token!r} already in vocabulary")
        token_id = len(self._vocab)
        self._vocab[token] = token_id
        self._specials.append(token)
        # longest-first so overlapping specials cannot shadow each other
        ordered = sorted(self._specials, key=len, reverse=True)
        self._special_re = re.compile("|".join(re.escape(s) for s in ordered))
        self._rebuild_reverse()
        return token_id

    def token_id(self, word: str) -> int:
        return self._vocab.get(word, UNK)

    def encode(self, text: str) -> list[int]:
        ids: list[int] = []
        pos = 0
        for match in (self._special_re.finditer(text) if self._special_re else ()):
            for word in text[pos:match.start()].split():
                ids.append(self._vocab.get(word, UNK))
            ids.append(self._vocab[match.group()])
            pos = match.end()
        for word in text[pos:].split():
            ids.append(self._vocab.get(word, UNK))
        return ids

    def decode(self, ids: list[int]) -> str:
        pieces = []
        for i in ids:
            if i in (PAD, BOS, EOS):
                continue
            pieces.append(self._reverse.get(i, "<unk>"))
        return " ".join(pieces)

    def to_dict(self) -> dict:
        base = [w for w, i in sorted(self._vocab.items(), key=lambda kv: kv[1])
                if w not in _STRUCTURAL and w not in self._specials]
        return {"words": base, "specials": list(self._specials)}

    @classmethod
    def from_dict(cls, payload: dict) -> "WordTokenizer":
        tok = cls(list(payload["words"]))
        for special in payload["specials"]:
            tok.add_special(special)
        return tok
