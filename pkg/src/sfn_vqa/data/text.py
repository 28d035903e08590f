"""Question tokenization, answer normalization and the word vocabulary."""

from typing import Dict, Iterable, List, Sequence

from sfn_vqa.core.exceptions import DatasetError

PUNCTUATION = ".,?!;:\"'()[]"
_STRIP_TABLE = str.maketrans({ch: " " for ch in PUNCTUATION})

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_INDEX = 0
UNK_INDEX = 1

BINARY_ANSWERS = ("yes", "no")


def preprocess_question(raw: str) -> List[str]:
    """Lowercase, replace punctuation with spaces, split on whitespace."""
    return raw.lower().translate(_STRIP_TABLE).split()


def normalize_answer(raw: str) -> str:
    """Trim and lowercase; nothing else is cleaned up."""
    return raw.strip().lower()


class Vocabulary:
    """Bijective token <-> index map with <pad>=0 and <unk>=1."""

    def __init__(self, tokens: Iterable[str] = ()):
        self._token_to_index: Dict[str, int] = {PAD_TOKEN: PAD_INDEX, UNK_TOKEN: UNK_INDEX}
        self._index_to_token: List[str] = [PAD_TOKEN, UNK_TOKEN]
        for token in tokens:
            self.add(token)

    def add(self, token: str) -> int:
        if token not in self._token_to_index:
            self._token_to_index[token] = len(self._index_to_token)
            self._index_to_token.append(token)
        return self._token_to_index[token]

    def __len__(self) -> int:
        return len(self._index_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self._token_to_index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self._index_to_token == other._index_to_token

    @property
    def tokens(self) -> List[str]:
        return list(self._index_to_token)

    @property
    def content_tokens(self) -> List[str]:
        return self._index_to_token[2:]

    def encode(self, tokens: Sequence[str]) -> List[int]:
        return [self._token_to_index.get(t, UNK_INDEX) for t in tokens]

    def decode(self, index: int) -> str:
        if not 0 <= index < len(self._index_to_token):
            raise IndexError(f"Vocabulary index {index} out of range [0, {len(self)})")
        return self._index_to_token[index]

    def to_list(self) -> List[str]:
        return list(self._index_to_token)

    @classmethod
    def from_list(cls, tokens: Sequence[str]) -> "Vocabulary":
        if list(tokens[:2]) != [PAD_TOKEN, UNK_TOKEN]:
            raise DatasetError("Vocabulary must start with the <pad> and <unk> tokens")
        vocab = cls(tokens[2:])
        if len(vocab) != len(tokens):
            raise DatasetError("Vocabulary contains duplicate tokens")
        return vocab


def build_vocabulary(train) -> Vocabulary:
    """All distinct question tokens of the training split, in first-occurrence order."""
    if len(train) == 0:
        raise DatasetError("Cannot build a vocabulary from an empty training split")
    vocab = Vocabulary()
    for sample in train:
        for token in sample.tokens:
            vocab.add(token)
    return vocab
