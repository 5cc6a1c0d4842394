"""Capture layer: accept transcripts and corpus documents, scrub PII,
normalize, and chunk.

The pipeline order is fixed: normalize -> scrub_pii -> chunk. Scrubbing is
rule-based (regex classes plus a name dictionary) so the result is
deterministic and auditable.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from datetime import date
from typing import Optional, Protocol

from .errors import BadWindow, InvalidDuration, InvalidEncoding
from .model import Modality, TranscriptChunk

DEFAULT_WINDOW = 512
DEFAULT_OVERLAP = 64

INTERVIEW_MIN_MINUTES = 60
INTERVIEW_MAX_MINUTES = 90

_TOKEN_RE = re.compile(r"\S+")


@dataclass(frozen=True)
class CaptureSession:
    session_id: str
    expert_id: str
    modality: Modality
    scheduled_minutes: int
    consent_id: str

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "expert_id": self.expert_id,
            "modality": self.modality.value,
            "scheduled_minutes": self.scheduled_minutes,
            "consent_id": self.consent_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CaptureSession":
        return cls(
            session_id=d["session_id"],
            expert_id=d["expert_id"],
            modality=Modality(d["modality"]),
            scheduled_minutes=d["scheduled_minutes"],
            consent_id=d["consent_id"],
        )


def check_session_duration(modality: Modality, scheduled_minutes: int) -> None:
    """Interviews run in fixed-length blocks; other modalities are free."""
    if modality is Modality.INTERVIEW and not (
        INTERVIEW_MIN_MINUTES <= scheduled_minutes <= INTERVIEW_MAX_MINUTES
    ):
        raise InvalidDuration(
            f"interview sessions must be {INTERVIEW_MIN_MINUTES}-{INTERVIEW_MAX_MINUTES} "
            f"minutes, got {scheduled_minutes}"
        )


@dataclass(frozen=True)
class RedactionRule:
    rule_id: str
    pattern: re.Pattern
    replacement: str  # always of the form [REDACTED:<CLASS>]


class RedactionRuleSet:
    """Ordered redaction rules, applied in order, left-to-right, non-overlapping."""

    def __init__(self, rules: list[RedactionRule]):
        for rule in rules:
            if not re.fullmatch(r"\[REDACTED:[A-Z]+\]", rule.replacement):
                raise ValueError(f"bad replacement token {rule.replacement!r}")
        self.rules = list(rules)

    @classmethod
    def builtin(cls, name_dictionary: Optional[list[str]] = None) -> "RedactionRuleSet":
        """R1 email, R2 phone, R3 national-id-like digit runs, R4 name dictionary."""
        rules = [
            RedactionRule(
                "R1",
                re.compile(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}"),
                "[REDACTED:EMAIL]",
            ),
            RedactionRule(
                "R2",
                # Separator-joined digit groups: +CC or (area) prefixes need two
                # groups, bare sequences need three; ISO dates are exempt.
                re.compile(
                    r"(?<![\w.])(?!\d{4}-\d{2}-\d{2}(?![\d-]))"
                    r"(?:(?:\+\d{1,3}[ .-]?)?\(\d{1,4}\)[ .-]?\d{2,4}(?:[ .-]\d{2,4})+"
                    r"|\+\d{1,3}[ .-]?\d{2,4}(?:[ .-]\d{2,4})+"
                    r"|\d{2,4}(?:[ .-]\d{2,4}){2,})(?![\w.-])"
                ),
                "[REDACTED:PHONE]",
            ),
            RedactionRule(
                "R3",
                # Bare digit runs of 8+ look like national ids or account numbers.
                re.compile(r"(?<!\d)\d{8,}(?!\d)"),
                "[REDACTED:ID]",
            ),
        ]
        names = [n.strip() for n in (name_dictionary or []) if n.strip()]
        if names:
            alternatives = "|".join(re.escape(n) for n in sorted(names, key=len, reverse=True))
            rules.append(
                RedactionRule(
                    "R4",
                    re.compile(rf"\b(?:{alternatives})\b", re.IGNORECASE),
                    "[REDACTED:NAME]",
                )
            )
        else:
            rules.append(RedactionRule("R4", re.compile(r"(?!x)x"), "[REDACTED:NAME]"))
        return cls(rules)


def load_name_dictionary(path: str) -> list[str]:
    """One name per line, UTF-8."""
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def scrub_pii(text: str, rules: RedactionRuleSet) -> tuple[str, dict[str, int]]:
    """Replace every rule match; returns scrubbed text and per-rule counts.

    No substring of the output matches any rule pattern, so a second pass is
    a no-op.
    """
    counts: dict[str, int] = {rule.rule_id: 0 for rule in rules.rules}
    for rule in rules.rules:
        text, n = rule.pattern.subn(rule.replacement, text)
        counts[rule.rule_id] = n
    return text, counts


def normalize(text: str) -> str:
    """Unicode NFC, all line endings to LF, space/tab runs collapsed to one
    space, each line stripped. Idempotent."""
    if not isinstance(text, str):
        raise InvalidEncoding("normalize expects str input")
    text = unicodedata.normalize("NFC", text)
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    lines = []
    for line in text.split("\n"):
        line = re.sub(r"[ \t]+", " ", line).strip()
        lines.append(line)
    return "\n".join(lines)


def decode_utf8(data: bytes) -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InvalidEncoding(str(exc)) from exc


def tokenize(text: str) -> list[tuple[int, int]]:
    """Character spans of whitespace-delimited tokens."""
    return [m.span() for m in _TOKEN_RE.finditer(text)]


def chunk(
    text: str,
    doc_id: str,
    new_id,
    window: int = DEFAULT_WINDOW,
    overlap: int = DEFAULT_OVERLAP,
) -> list[TranscriptChunk]:
    """Split into token windows with a fixed stride of window - overlap.

    Chunk i starts at token i*(window-overlap); emission stops once a chunk
    reaches the final token, so the last chunk is the remainder.
    """
    if not 0 <= overlap < window:
        raise BadWindow(f"overlap {overlap} must satisfy 0 <= overlap < window {window}")
    spans = tokenize(text)
    n = len(spans)
    chunks: list[TranscriptChunk] = []
    stride = window - overlap
    start_tok = 0
    seq = 0
    while start_tok < n:
        end_tok = min(start_tok + window, n)
        char_start = spans[start_tok][0]
        char_end = spans[end_tok - 1][1]
        chunks.append(
            TranscriptChunk(
                chunk_id=new_id(),
                doc_id=doc_id,
                seq=seq,
                token_span=(start_tok, end_tok),
                text=text[char_start:char_end],
            )
        )
        if end_tok == n:
            break
        start_tok += stride
        seq += 1
    return chunks


def reconstruct_tokens(chunks: list[TranscriptChunk], overlap: int = DEFAULT_OVERLAP) -> list[str]:
    """Concatenate chunk tokens with the shared overlap removed (test oracle
    counterpart lives in the test suite)."""
    tokens: list[str] = []
    for i, c in enumerate(sorted(chunks, key=lambda c: c.seq)):
        chunk_tokens = c.text.split()
        tokens.extend(chunk_tokens if i == 0 else chunk_tokens[overlap:])
    return tokens


FRONT_MATTER_KEYS = ("expert", "modality", "capture_date")


@dataclass(frozen=True)
class FrontMatter:
    expert: str
    modality: Modality
    capture_date: date
    domain: Optional[str]
    body: str


def parse_front_matter(content: str) -> FrontMatter:
    """Corpus upload header: `expert:`, `modality:`, `capture_date:` plus an
    optional `domain:`, terminated by a blank line."""
    lines = content.split("\n")
    fields: dict[str, str] = {}
    body_start = None
    for i, line in enumerate(lines):
        if line.strip() == "":
            body_start = i + 1
            break
        if ":" not in line:
            raise ValueError(f"bad front-matter line {line!r}")
        key, _, value = line.partition(":")
        fields[key.strip().lower()] = value.strip()
    if body_start is None:
        raise ValueError("front matter not terminated by a blank line")
    missing = [k for k in FRONT_MATTER_KEYS if k not in fields]
    if missing:
        raise ValueError(f"front matter missing keys: {', '.join(missing)}")
    return FrontMatter(
        expert=fields["expert"],
        modality=Modality(fields["modality"]),
        capture_date=date.fromisoformat(fields["capture_date"]),
        domain=fields.get("domain"),
        body="\n".join(lines[body_start:]),
    )


class TranscriptionBackend(Protocol):
    """Replaceable ASR seam; the mock reads a sidecar text file."""

    languages: tuple[str, ...]

    def transcribe(self, audio_ref: str) -> str: ...


class SidecarTranscriptionBackend:
    """Deterministic mock: returns the contents of `<audio_ref>.txt`."""

    languages = ("en", "es")

    def transcribe(self, audio_ref: str) -> str:
        with open(audio_ref + ".txt", encoding="utf-8") as fh:
            return fh.read()
