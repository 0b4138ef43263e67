"""Automatic linguistic tagging of sentence pairs.

Tags are boolean and independent; several may hold for one pair. Keyword and
suffix lists below are documented fixtures: corpus-level tag counts are
cross-checks, not contracts.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

logger = logging.getLogger(__name__)

AUTO_TAGS = (
    "SYNONYM",
    "ANTONYM",
    "QUANTIFIER",
    "PRONOUN",
    "DIFF_TENSE",
    "SUPERLATIVE",
    "BARE_NP",
    "NEGATION",
    "LONG",
)

NEGATION_KEYWORDS = frozenset({"no", "not", "n't", "never", "nobody", "nothing", "none"})

LONG_PREMISE_OVER = 30
LONG_HYPOTHESIS_OVER = 16

QUANTIFIER_WORDS = frozenset(
    {"all", "some", "every", "each", "any", "many", "much", "few",
     "several", "most", "both", "half"}
)

_PRONOUN_TAGS = frozenset({"PRP", "PRP$", "WP", "WP$"})
_SUPERLATIVE_TAGS = frozenset({"JJS", "RBS"})
_QUANTIFIER_TAGS = frozenset({"PDT", "CD"})
_PAST_TAGS = frozenset({"VBD", "VBN"})
_NONPAST_TAGS = frozenset({"VB", "VBP", "VBZ", "VBG"})
_VERB_TAGS = _PAST_TAGS | _NONPAST_TAGS
_NOUN_TAGS = frozenset({"NN", "NNS", "NNP", "NNPS"})


class TaggingError(ValueError):
    """Raised when tags cannot be produced for the given inputs."""


@dataclass
class TagSet:
    """Automatic flags for one pair, plus optional ingested manual tags."""

    flags: dict
    manual: set = field(default_factory=set)

    def __post_init__(self):
        unknown = set(self.flags) - set(AUTO_TAGS)
        if unknown:
            raise TaggingError(f"unknown tags {sorted(unknown)}")
        for tag in AUTO_TAGS:
            self.flags.setdefault(tag, False)

    def __getitem__(self, tag: str) -> bool:
        return self.flags[tag]

    def active(self) -> list:
        return [tag for tag in AUTO_TAGS if self.flags[tag]]


class LexicalResource:
    """Symmetric lemma-pair lookup: (word, word) → "syn" | "ant"."""

    def __init__(self, pairs: Optional[dict] = None):
        self._pairs = {}
        for key, relation in (pairs or {}).items():
            a, b = key
            self._add(a, b, relation)

    def _add(self, a: str, b: str, relation: str) -> None:
        if relation not in ("syn", "ant"):
            raise TaggingError(f"unknown lexical relation {relation!r}")
        self._pairs[frozenset((a.lower(), b.lower()))] = relation

    @classmethod
    def load(cls, path) -> "LexicalResource":
        """Fixture format: word1 TAB word2 TAB {syn|ant}, one pair per line."""
        resource = cls()
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise TaggingError(
                        f"{path}:{line_no}: expected 'word1 TAB word2 TAB relation'"
                    )
                try:
                    resource._add(*parts)
                except TaggingError as exc:
                    raise TaggingError(f"{path}:{line_no}: {exc}") from exc
        return resource

    def relation(self, a: str, b: str) -> Optional[str]:
        return self._pairs.get(frozenset((a.lower(), b.lower())))


_IRREGULAR_PAST = frozenset(
    {"was", "were", "had", "did", "went", "ran", "saw", "ate", "sat",
     "stood", "took", "came", "got", "made", "said", "held", "wore"}
)
_PRESENT_SINGULAR = frozenset({"is", "has", "does"})
_PRESENT_PLURAL = frozenset({"are", "am", "do", "have"})
_PRONOUN_WORDS = frozenset(
    {"i", "you", "he", "she", "it", "we", "they", "me", "him", "her",
     "us", "them", "who", "whom"}
)
_POSSESSIVE_PRONOUNS = frozenset(
    {"my", "your", "his", "its", "our", "their", "hers", "whose", "mine", "yours", "theirs"}
)
_IRREGULAR_SUPERLATIVES = frozenset({"best", "worst", "least", "furthest", "farthest"})


class RuleTagger:
    """Minimal fallback tagger covering only the classes the tags need.

    Everything unrecognized is tagged NN, which keeps noun-dependent patterns
    usable and never fabricates verbs or pronouns.
    """

    def tag(self, token: str) -> str:
        lower = token.lower()
        if lower in _PRONOUN_WORDS:
            return "PRP"
        if lower in _POSSESSIVE_PRONOUNS:
            return "PRP$"
        if lower in QUANTIFIER_WORDS:
            return "PDT"
        if lower in ("a", "an", "the", "this", "that", "these", "those"):
            return "DT"
        if lower in _IRREGULAR_PAST:
            return "VBD"
        if lower in _PRESENT_SINGULAR:
            return "VBZ"
        if lower in _PRESENT_PLURAL:
            return "VBP"
        if lower in _IRREGULAR_SUPERLATIVES or (
            len(lower) > 4 and lower.endswith("est")
        ):
            return "JJS"
        if lower.isdigit():
            return "CD"
        if len(lower) > 4 and lower.endswith("ing"):
            return "VBG"
        if len(lower) > 3 and lower.endswith("ed"):
            return "VBD"
        if not any(ch.isalnum() for ch in lower):
            return "."
        return "NN"

    def tags_for(self, tokens: Iterable) -> list:
        return [self.tag(t) for t in tokens]


class LexiconTagger:
    """Tags from a token TAB tag lookup file, with optional rule fallback."""

    def __init__(self, lookup: dict, fallback: Optional[RuleTagger] = None):
        self._lookup = {token.lower(): tag for token, tag in lookup.items()}
        self._fallback = fallback

    @classmethod
    def load(cls, path, fallback: Optional[RuleTagger] = None) -> "LexiconTagger":
        lookup = {}
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise TaggingError(f"{path}:{line_no}: expected 'token TAB tag'")
                lookup[parts[0]] = parts[1]
        return cls(lookup, fallback)

    def tags_for(self, tokens: Iterable) -> list:
        out = []
        for token in tokens:
            tag = self._lookup.get(token.lower())
            if tag is None:
                if self._fallback is None:
                    raise TaggingError(
                        f"no POS tag for token {token!r} and fallback tagging disabled"
                    )
                tag = self._fallback.tag(token)
            out.append(tag)
        return out


def _tense_categories(tags: Iterable) -> frozenset:
    present = set()
    for tag in tags:
        if tag in _PAST_TAGS:
            present.add("past")
        elif tag in _NONPAST_TAGS:
            present.add("non-past")
    return frozenset(present)


def auto_tag(
    record,
    lexicon: Optional[LexicalResource] = None,
    tagger=None,
    manual: Optional[set] = None,
) -> TagSet:
    """Compute the automatic tags for one premise/hypothesis record.

    ``tagger`` must provide tags_for(tokens); when omitted the built-in rule
    tagger is used. ``lexicon`` drives SYNONYM/ANTONYM; without one those
    flags stay False.
    """
    premise = list(record.premise)
    hypothesis = list(record.hypothesis)
    if tagger is None:
        tagger = RuleTagger()
    p_tags = tagger.tags_for(premise)
    h_tags = tagger.tags_for(hypothesis)

    flags = dict.fromkeys(AUTO_TAGS, False)

    if lexicon is not None:
        for p_tok in premise:
            for h_tok in hypothesis:
                relation = lexicon.relation(p_tok, h_tok)
                if relation == "syn":
                    flags["SYNONYM"] = True
                elif relation == "ant":
                    flags["ANTONYM"] = True

    all_tokens = [t.lower() for t in premise + hypothesis]
    all_tags = p_tags + h_tags

    flags["NEGATION"] = any(t in NEGATION_KEYWORDS for t in all_tokens)
    flags["LONG"] = (
        len(premise) > LONG_PREMISE_OVER or len(hypothesis) > LONG_HYPOTHESIS_OVER
    )
    flags["PRONOUN"] = any(tag in _PRONOUN_TAGS for tag in all_tags)
    flags["SUPERLATIVE"] = any(tag in _SUPERLATIVE_TAGS for tag in all_tags)
    flags["QUANTIFIER"] = any(
        tag in _QUANTIFIER_TAGS or (tag == "DT" and tok in QUANTIFIER_WORDS)
        for tok, tag in zip(all_tokens, all_tags)
    )
    # A hypothesis with nominal content but no verb reads as a bare NP.
    flags["BARE_NP"] = (
        any(tag in _NOUN_TAGS for tag in h_tags)
        and not any(tag in _VERB_TAGS for tag in h_tags)
    )
    flags["DIFF_TENSE"] = _tense_categories(p_tags) != _tense_categories(h_tags)

    return TagSet(flags=flags, manual=set(manual or ()))


def tag_records(records: Iterable, lexicon=None, tagger=None) -> dict:
    """pair_id → TagSet for every record."""
    return {r.pair_id: auto_tag(r, lexicon, tagger) for r in records}


def write_tag_csv(tags_by_pair: dict, path) -> None:
    """CSV rows (pair_id, tag, value) with value ∈ {0, 1} for every tag."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pair_id", "tag", "value"])
        for pair_id in sorted(tags_by_pair):
            tag_set = tags_by_pair[pair_id]
            for tag in AUTO_TAGS:
                writer.writerow([pair_id, tag, int(tag_set.flags[tag])])


def read_tag_csv(path) -> dict:
    """Inverse of write_tag_csv; unknown tag names are rejected."""
    tags_by_pair = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["pair_id", "tag", "value"]:
            raise TaggingError(f"unexpected tag CSV header {header!r}")
        for row_no, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise TaggingError(f"{path}:{row_no}: expected three columns")
            pair_id, tag, value = row
            if tag not in AUTO_TAGS:
                raise TaggingError(f"{path}:{row_no}: unknown tag {tag!r}")
            if value not in ("0", "1"):
                raise TaggingError(f"{path}:{row_no}: value must be 0 or 1")
            flags = tags_by_pair.setdefault(pair_id, dict.fromkeys(AUTO_TAGS, False))
            flags[tag] = value == "1"
    return {pair_id: TagSet(flags=flags) for pair_id, flags in tags_by_pair.items()}
