"""Caption analysis for text-conditioned augmentation.

Color-word detection gates color jittering; positional-keyword detection and
the left/right caption rewrite make horizontal flipping safe. Matching is
whole-token only: words that merely contain "left"/"right" as substrings
("bright", "leftover", "copyright") are never rewritten.
"""

from __future__ import annotations

import enum
import json
import re
import string
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

from .data import CharSpan, GroundingSample, PhraseAnnotation
from .errors import AnnotationParseError, ContractViolation

DEFAULT_COLORS = frozenset(
    {
        "red", "orange", "yellow", "green", "blue", "purple", "pink", "brown",
        "black", "white", "gray", "grey", "tan", "beige", "gold", "golden",
        "silver", "maroon", "navy", "teal", "violet", "crimson", "turquoise",
        "olive",
    }
)
DEFAULT_COLOR_SUFFIXES = frozenset({"ish"})

DEFAULT_POSITIONAL_PREFIXES = frozenset(
    {"upper", "top", "bottom", "far", "lower", "center", "middle"}
)
DEFAULT_POSITIONAL_SUFFIXES = frozenset({"most", "side", "iest", "middle", "hand"})
DEFAULT_POSITIONAL_CLOSED_FORMS = frozenset({"leftmost", "rightmost"})

_STEMS = ("left", "right")
_SWAP = {"left": "right", "right": "left"}

# trimmed from token edges; internal hyphens survive ("upper-left" stays whole)
_EDGE_PUNCT = string.punctuation


@dataclass(frozen=True)
class Token:
    text: str
    byte_start: int
    byte_end: int


def tokenize(caption: str) -> List[Token]:
    """Whitespace tokens with leading/trailing ASCII punctuation trimmed,
    positioned by byte offset into the UTF-8 caption."""
    tokens = []
    for m in re.finditer(r"\S+", caption):
        word = m.group()
        start_c, end_c = m.start(), m.end()
        lead = len(word) - len(word.lstrip(_EDGE_PUNCT))
        trail = len(word) - len(word.rstrip(_EDGE_PUNCT))
        if lead + trail >= len(word):
            continue
        start_c += lead
        end_c -= trail
        b_start = len(caption[:start_c].encode("utf-8"))
        b_end = b_start + len(caption[start_c:end_c].encode("utf-8"))
        tokens.append(Token(caption[start_c:end_c], b_start, b_end))
    return tokens


@dataclass(frozen=True)
class ColorLexicon:
    terms: frozenset
    suffix_variants: frozenset = DEFAULT_COLOR_SUFFIXES

    def __post_init__(self):
        if not self.terms:
            raise ContractViolation("color lexicon must be non-empty")
        for t in self.terms:
            if t != t.lower() or any(c.isspace() for c in t):
                raise ContractViolation(f"color term {t!r} must be lowercase, no whitespace")

    def matches(self, word: str) -> bool:
        w = word.lower()
        if w in self.terms:
            return True
        for suffix in self.suffix_variants:
            if not w.endswith(suffix):
                continue
            base = w[: -len(suffix)]
            if base in self.terms:
                return True
            # doubled final consonant ("reddish") or dropped final 'e' ("purplish")
            if len(base) >= 2 and base[-1] == base[-2] and base[:-1] in self.terms:
                return True
            if (base + "e") in self.terms:
                return True
        return False


def default_color_lexicon() -> ColorLexicon:
    return ColorLexicon(terms=DEFAULT_COLORS)


class PositionalLexicon:
    """Left/right keyword table: bare stems, prefix/suffix variants (both
    hyphenated and closed spellings), and explicit closed forms.

    The swap map sends each form to its mirror by substituting the stem, so
    swap(swap(w)) == w for every registered word.
    """

    def __init__(
        self,
        prefixes: Iterable[str] = DEFAULT_POSITIONAL_PREFIXES,
        suffixes: Iterable[str] = DEFAULT_POSITIONAL_SUFFIXES,
        closed_forms: Iterable[str] = DEFAULT_POSITIONAL_CLOSED_FORMS,
    ):
        self.prefixes = frozenset(p.strip("-").lower() for p in prefixes)
        self.suffixes = frozenset(s.strip("-").lower() for s in suffixes)
        self.closed_forms = frozenset(c.lower() for c in closed_forms)
        swap = {}
        for stem in _STEMS:
            other = _SWAP[stem]
            swap[stem] = other
            for s in self.suffixes:
                swap[stem + s] = other + s
                swap[f"{stem}-{s}"] = f"{other}-{s}"
            for p in self.prefixes:
                swap[f"{p}-{stem}"] = f"{p}-{other}"
                swap[p + stem] = p + other
        for form in self.closed_forms:
            if "left" in form:
                swap.setdefault(form, form.replace("left", "right"))
            elif "right" in form:
                swap.setdefault(form, form.replace("right", "left"))
            else:
                raise ContractViolation(f"closed form {form!r} contains no left/right stem")
        self.swap_map = swap

    def swap(self, form: str) -> str:
        return self.swap_map[form.lower()]

    def __contains__(self, form: str) -> bool:
        return form.lower() in self.swap_map


def default_positional_lexicon() -> PositionalLexicon:
    return PositionalLexicon()


def load_lexicon_overrides(path) -> Tuple[ColorLexicon, PositionalLexicon]:
    """Read a lexicon override JSON file; merged additively with the defaults
    unless the file sets {"replace": true}."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise AnnotationParseError(f"{path}: expected a JSON object")
    replace = bool(doc.get("replace", False))

    def merged(key, defaults):
        extra = frozenset(str(v).lower() for v in doc.get(key, []))
        return extra if (replace and key in doc) else defaults | extra

    colors = ColorLexicon(
        terms=merged("colors", DEFAULT_COLORS),
        suffix_variants=merged("color_suffixes", DEFAULT_COLOR_SUFFIXES),
    )
    positional = PositionalLexicon(
        prefixes=merged("positional_prefixes", DEFAULT_POSITIONAL_PREFIXES),
        suffixes=merged("positional_suffixes", DEFAULT_POSITIONAL_SUFFIXES),
        closed_forms=merged("positional_closed_forms", DEFAULT_POSITIONAL_CLOSED_FORMS),
    )
    return colors, positional


def contains_color_words(caption: str, lex: Optional[ColorLexicon] = None) -> bool:
    lex = lex or default_color_lexicon()
    return any(lex.matches(tok.text) for tok in tokenize(caption))


@dataclass(frozen=True)
class TermMatch:
    span: CharSpan
    matched_form: str
    replacement: str


def find_positional_terms(
    caption: str, lex: Optional[PositionalLexicon] = None
) -> List[TermMatch]:
    """All whole-token lexicon matches, left to right, with their mirror forms."""
    lex = lex or default_positional_lexicon()
    matches = []
    for tok in tokenize(caption):
        low = tok.text.lower()
        if low in lex.swap_map:
            matches.append(
                TermMatch(
                    span=CharSpan(tok.byte_start, tok.byte_end),
                    matched_form=low,
                    replacement=lex.swap_map[low],
                )
            )
    return matches


class FlipKind(enum.Enum):
    FREELY_FLIPPABLE = "freely_flippable"
    REWRITABLE_FLIP = "rewritable_flip"
    NOT_FLIPPABLE = "not_flippable"


@dataclass(frozen=True)
class FlipClassification:
    kind: FlipKind
    matches: Tuple[TermMatch, ...] = ()


def _bears_stem(token_lower: str) -> bool:
    """True when a left/right stem sits delimited by token edges or hyphens,
    i.e. the token is built around the stem rather than merely containing it
    ("upper-left" yes, "leftover"/"bright"/"copyright" no)."""
    for stem in _STEMS:
        start = 0
        while True:
            idx = token_lower.find(stem, start)
            if idx < 0:
                break
            before_ok = idx == 0 or token_lower[idx - 1] == "-"
            after = idx + len(stem)
            after_ok = after == len(token_lower) or token_lower[after] == "-"
            if before_ok and after_ok:
                return True
            start = idx + 1
    return False


def classify_flippability(
    caption: str, lex: Optional[PositionalLexicon] = None
) -> FlipClassification:
    """Decide whether a caption can be flipped freely, flipped with a
    left/right rewrite, or must not be flipped at all."""
    lex = lex or default_positional_lexicon()
    matches = []
    saw_unknown = False
    for tok in tokenize(caption):
        low = tok.text.lower()
        if low in lex.swap_map:
            matches.append(
                TermMatch(
                    span=CharSpan(tok.byte_start, tok.byte_end),
                    matched_form=low,
                    replacement=lex.swap_map[low],
                )
            )
        elif _bears_stem(low):
            saw_unknown = True
    if saw_unknown:
        return FlipClassification(FlipKind.NOT_FLIPPABLE)
    if matches:
        return FlipClassification(FlipKind.REWRITABLE_FLIP, tuple(matches))
    return FlipClassification(FlipKind.FREELY_FLIPPABLE)


@dataclass(frozen=True)
class RewriteResult:
    """Rewritten caption plus the byte-offset remapping its edits induce.

    ``edits`` is a sorted tuple of (old_start, old_end, new_length); offsets
    outside edited regions shift by the cumulative length delta, and spans
    reaching inside an edit snap to the replacement's full extent.
    """

    new_caption: str
    edits: Tuple[Tuple[int, int, int], ...]

    def map_offset(self, pos: int, is_end: bool = False) -> int:
        delta = 0
        for old_start, old_end, new_len in self.edits:
            if pos <= old_start:
                break
            if pos < old_end:
                return old_start + delta + (new_len if is_end else 0)
            delta += new_len - (old_end - old_start)
        return pos + delta

    def map_span(self, span: CharSpan) -> CharSpan:
        return CharSpan(self.map_offset(span.start), self.map_offset(span.end, is_end=True))


def _apply_capitalization(original: str, replacement: str) -> str:
    if original[:1].isupper():
        return replacement[:1].upper() + replacement[1:]
    return replacement


def rewrite_caption(caption: str, matches: Sequence[TermMatch]) -> RewriteResult:
    """Replace each matched positional word with its mirror form, preserving
    first-letter capitalization, and report the span remapping."""
    raw = caption.encode("utf-8")
    prev_end = -1
    for m in sorted(matches, key=lambda m: m.span.start):
        if m.span.start < prev_end:
            raise ContractViolation("overlapping term matches")
        if m.span.end > len(raw):
            raise ContractViolation(f"match span {m.span.as_list()} outside caption")
        original = raw[m.span.start : m.span.end].decode("utf-8")
        if original.lower() != m.matched_form:
            raise ContractViolation(
                f"caption text {original!r} does not equal matched form {m.matched_form!r}"
            )
        prev_end = m.span.end

    out = bytearray()
    edits = []
    cursor = 0
    for m in sorted(matches, key=lambda m: m.span.start):
        out += raw[cursor : m.span.start]
        original = raw[m.span.start : m.span.end].decode("utf-8")
        replacement = _apply_capitalization(original, m.replacement).encode("utf-8")
        out += replacement
        edits.append((m.span.start, m.span.end, len(replacement)))
        cursor = m.span.end
    out += raw[cursor:]
    return RewriteResult(new_caption=out.decode("utf-8"), edits=tuple(edits))


def rewrite_sample_caption(
    sample: GroundingSample, matches: Sequence[TermMatch]
) -> Tuple[GroundingSample, RewriteResult]:
    """Rewrite a sample's caption and remap every annotation span through it."""
    result = rewrite_caption(sample.caption, matches)
    annotations = [
        PhraseAnnotation(
            spans=[result.map_span(sp) for sp in ann.spans],
            boxes=ann.boxes,
        )
        for ann in sample.annotations
    ]
    rewritten = GroundingSample(
        image_id=sample.image_id,
        image_path=sample.image_path,
        width=sample.width,
        height=sample.height,
        caption=result.new_caption,
        annotations=annotations,
    )
    return rewritten, result
