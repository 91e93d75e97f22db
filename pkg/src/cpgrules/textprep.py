"""Sentence splitting, tokenization, stemming and lexicon POS tagging.

Everything here is a pure function over immutable records, so documents can
be processed in parallel without coordination.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

from nltk.stem.porter import PorterStemmer

#: Universal 12-tag set.
TAGSET = ("ADJ", "ADP", "ADV", "CONJ", "DET", "NOUN", "NUM", "PRON", "PRT", "VERB", ".", "X")

#: Sentence classes, in the fixed order used by every classifier.
LABELS = ("C-A", "C-C", "A", "NA")

DEFAULT_ABBREVIATIONS = ("e.g.", "i.e.", "et al.", "vs.", "dr.", "fig.", "approx.", "no.", "cf.")

_BOUNDARY = re.compile(r"[.?!]+[\"')\]]*(?=\s+[\"'(\[]?[A-Z0-9])")
_TOKEN = re.compile(
    r"\d+(?:[.,/:]\d+)*(?![^\W\d_])"   # 130, 140.5, 150/90, 1,000
    r"|\w+(?:[-'/]\w+)*"               # thiazide-type, mg/dl, hba1c
    r"|[^\w\s]"                        # punctuation and symbols such as < ≥
)
_NUMERIC = re.compile(r"^\d+(?:[.,/:]\d+)*$")
_PUNCT = re.compile(r"^[^\w\s]+$")

_stemmer = PorterStemmer()


@dataclass(frozen=True)
class Document:
    id: str
    text: str

    def __post_init__(self):
        if not self.id:
            raise ValueError("document id must be non-empty")


@dataclass(frozen=True)
class Token:
    surface: str
    normalized: str
    stem: str
    index: int
    start: int = 0
    end: int = 0
    pos: Optional[str] = None

    @property
    def is_punct(self) -> bool:
        return bool(_PUNCT.match(self.surface))

    @property
    def is_numeric(self) -> bool:
        return bool(_NUMERIC.match(self.surface))


@dataclass(frozen=True)
class SentenceRecord:
    doc_id: str
    sent_index: int
    raw: str
    tokens: tuple[Token, ...] = ()
    label: Optional[str] = None
    start: int = 0
    end: int = 0

    def __post_init__(self):
        if self.label is not None and self.label not in LABELS:
            raise ValueError(f"unknown sentence label {self.label!r}")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def normalized(self) -> list[str]:
        return [t.normalized for t in self.tokens]


# ---------------------------------------------------------------- resources

def _data_path(name: str) -> Path:
    return Path(str(resources.files("cpgrules") / "data" / name))


def read_lines(path) -> list[str]:
    """Non-empty, non-comment lines of a UTF-8 resource file."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n").rstrip("\r")
            if line.strip() and not line.lstrip().startswith("#"):
                out.append(line)
    return out


def load_stopwords(path=None) -> frozenset[str]:
    path = path or _data_path("stopwords.txt")
    return frozenset(line.strip().lower() for line in read_lines(path))


def load_tag_lexicon(path=None) -> dict[str, str]:
    path = path or _data_path("tag_lexicon.tsv")
    lexicon = {}
    for line in read_lines(path):
        word, _, tag = line.partition("\t")
        tag = tag.strip()
        if tag not in TAGSET:
            raise ValueError(f"{path}: tag {tag!r} for {word!r} is not in the tagset")
        lexicon[word.strip().lower()] = tag
    return lexicon


@lru_cache(maxsize=None)
def default_stopwords() -> frozenset[str]:
    return load_stopwords()


@lru_cache(maxsize=None)
def default_tag_lexicon() -> dict[str, str]:
    return load_tag_lexicon()


# ---------------------------------------------------------------- operations

def split_sentences(doc: Document, abbreviations: Sequence[str] = DEFAULT_ABBREVIATIONS) -> list[SentenceRecord]:
    """Split a document on terminal punctuation followed by a capital or digit.

    The returned records keep character offsets into ``doc.text``; the text
    between consecutive records is whitespace only.
    """
    text = doc.text
    abbrevs = tuple(a.lower() for a in abbreviations)
    cuts = []
    for m in _BOUNDARY.finditer(text):
        head = text[: m.end()].lower()
        if any(head.endswith(a) and (len(head) == len(a) or not head[-len(a) - 1].isalnum()) for a in abbrevs):
            continue
        cuts.append(m.end())
    cuts.append(len(text))

    records = []
    begin = 0
    for cut in cuts:
        chunk = text[begin:cut]
        stripped = chunk.strip()
        if stripped:
            start = begin + (len(chunk) - len(chunk.lstrip()))
            records.append(SentenceRecord(doc.id, len(records), stripped, start=start, end=start + len(stripped)))
        begin = cut
    return records


def tokenize(sentence: SentenceRecord, stop_words: bool = False, stemming: bool = True,
             stoplist: Optional[Iterable[str]] = None) -> SentenceRecord:
    """Fill ``sentence.tokens`` from its raw text.

    With ``stop_words=True`` tokens whose lowercase form is in the stop list
    are dropped and the survivors re-indexed from 0.
    """
    stops = frozenset(stoplist) if stoplist is not None else default_stopwords()
    tokens = []
    for m in _TOKEN.finditer(sentence.raw):
        surface = m.group()
        norm = surface.lower()
        if stop_words and norm in stops:
            continue
        stem = _stemmer.stem(norm) if stemming and norm.isalpha() else norm
        tokens.append(Token(surface, norm, stem, len(tokens), m.start(), m.end()))
    return replace(sentence, tokens=tuple(tokens))


def tag_word(word: str, lexicon: Optional[dict[str, str]] = None) -> str:
    lexicon = default_tag_lexicon() if lexicon is None else lexicon
    w = word.lower()
    if _PUNCT.match(w):
        return "."
    if _NUMERIC.match(w):
        return "NUM"
    if w in lexicon:
        return lexicon[w]
    if w.endswith("ly"):
        return "ADV"
    if w.endswith(("ing", "ed")):
        return "VERB"
    if w.endswith(("ous", "ive", "ic", "able", "ible")):
        return "ADJ"
    return "NOUN"


def pos_tag(sentence: SentenceRecord, lexicon: Optional[dict[str, str]] = None) -> SentenceRecord:
    tokens = tuple(replace(t, pos=tag_word(t.normalized, lexicon)) for t in sentence.tokens)
    return replace(sentence, tokens=tokens)


def bigrams(sentence: SentenceRecord) -> list[str]:
    words = sentence.normalized
    return [f"{a} {b}" for a, b in zip(words, words[1:])]


def preprocess(doc: Document, stop_words: bool = False, stemming: bool = True,
               stoplist=None, tag_lexicon=None) -> list[SentenceRecord]:
    """Split, tokenize and tag a document in one call."""
    return [
        pos_tag(tokenize(s, stop_words=stop_words, stemming=stemming, stoplist=stoplist), tag_lexicon)
        for s in split_sentences(doc)
    ]


def prepare_sentence(text: str, doc_id: str = "inline", sent_index: int = 0, label=None,
                     stop_words: bool = False) -> SentenceRecord:
    """Tokenize and tag a single sentence given as a string."""
    record = SentenceRecord(doc_id, sent_index, text, label=label, end=len(text))
    return pos_tag(tokenize(record, stop_words=stop_words))
