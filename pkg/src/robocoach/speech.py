"""Constrained speech interaction and scripted phrase pools.

Real speech recognition is out of scope; a prompt listens on a text
token channel under the same contract the session runs on: one-word
vocabularies with synonym sets, a capped listening window (2 s unless
overridden), and a spoken tactile fallback after silence.  A configurable
false-negative probability can drop otherwise-matching tokens to exercise
the fallback path the way flaky recognition would.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

from . import kvfile
from .catalog import ActivityId, Catalog

DEFAULT_WINDOW_MS = 2_000

# Synonym sets for the stock one-word prompts.
GO_WORDS = ("go", "start", "ready")
YES_WORDS = ("yes", "yeah", "sure", "okay", "yep")
NO_WORDS = ("no", "nope", "nah")

_TOKEN_RE = re.compile(r"[a-z']+")


@dataclass(frozen=True)
class SpeechPrompt:
    """What the session is listening for and how long."""

    vocabulary: dict                     # canonical token -> tuple of synonyms
    window_ms: int | None = DEFAULT_WINDOW_MS    # None: wait indefinitely
    fallback_script: str = ""
    accept_any: bool = False             # open question: any utterance resolves

    def __post_init__(self):
        if not self.vocabulary:
            raise ValueError("prompt vocabulary must not be empty")

    def match(self, text: str) -> str | None:
        """Canonical token for ``text``, or None if nothing matches."""
        words = _TOKEN_RE.findall(text.lower())
        for canonical, synonyms in self.vocabulary.items():
            wanted = {canonical.lower(), *(s.lower() for s in synonyms)}
            if any(w in wanted for w in words):
                return canonical
        if self.accept_any and words:
            return words[0]
        return None


def go_prompt(fallback_script: str, window_ms: int | None = DEFAULT_WINDOW_MS) -> SpeechPrompt:
    return SpeechPrompt(
        vocabulary={"go": GO_WORDS}, window_ms=window_ms, fallback_script=fallback_script
    )


def open_prompt(window_ms: int = DEFAULT_WINDOW_MS) -> SpeechPrompt:
    return SpeechPrompt(
        vocabulary={"good": ("good", "great", "fine", "happy"), "bad": ("bad", "sad", "tired")},
        window_ms=window_ms,
        accept_any=True,
    )


class SpeechOutcome(str, Enum):
    MATCHED = "Matched"
    TIMED_OUT = "TimedOut"
    FELL_BACK_TO_TACTILE = "FellBackToTactile"


@dataclass(frozen=True)
class PromptResult:
    outcome: SpeechOutcome
    at: int
    token: str | None = None
    fallback_spoken: str | None = None


def run_speech_prompt(
    prompt: SpeechPrompt,
    inputs: list,
    started_at: int = 0,
    false_negative: float = 0.0,
    rng: random.Random | None = None,
) -> PromptResult:
    """Resolve one prompt against a scripted input channel.

    ``inputs`` is a list of (at_ms, payload) where payload is a spoken
    string or the sentinel ``"<tap>"`` for a tactile confirmation.
    Exactly one outcome is produced: the first in-window match or tap,
    or a timeout at exactly ``window_ms`` after ``started_at`` (which
    also returns the fallback script to speak once).
    """
    rng = rng or random.Random(0)
    deadline = None if prompt.window_ms is None else started_at + prompt.window_ms
    for at, payload in sorted(inputs, key=lambda item: item[0]):
        if at < started_at:
            continue
        if deadline is not None and at >= deadline:
            break
        if payload == "<tap>":
            return PromptResult(SpeechOutcome.FELL_BACK_TO_TACTILE, at)
        token = prompt.match(str(payload))
        if token is None:
            continue
        if false_negative > 0 and rng.random() < false_negative:
            continue                     # heard nothing, as far as the session knows
        return PromptResult(SpeechOutcome.MATCHED, at, token=token)
    if deadline is None:
        raise ValueError("unbounded prompt never resolved by the scripted inputs")
    return PromptResult(
        SpeechOutcome.TIMED_OUT, deadline, fallback_spoken=prompt.fallback_script or None
    )


# ---------------------------------------------------------------------------
# Phrase pools


@dataclass(frozen=True)
class PhrasePools:
    motivational: tuple[str, ...]
    instructional: dict = field(default_factory=dict)   # ActivityId -> tuple[str, ...]

    @classmethod
    def load_default(cls, catalog: Catalog) -> "PhrasePools":
        text = resources.files("robocoach").joinpath("data/phrases.cfg").read_text("utf-8")
        return cls.from_text(text, catalog)

    @classmethod
    def from_text(cls, text: str, catalog: Catalog) -> "PhrasePools":
        doc = kvfile.parse(text)
        sections = {s.name: s for s in doc.sections}
        pool_sec = sections.get("motivational")
        if pool_sec is None or not pool_sec.records:
            raise ValueError("phrase file needs a non-empty [motivational] section")
        motivational = tuple(rec.value for rec in pool_sec.records)
        instructional = {
            spec.id: spec.instructional_phrases
            for spec in catalog.specs.values()
            if spec.instructional_phrases
        }
        return cls(motivational=motivational, instructional=instructional)


def pick_utterance(pool: tuple, previous: str | None, rng: random.Random) -> str:
    """Uniform pick that never repeats the immediately previous phrase.

    Singleton pools are exempt (there is nothing else to say).
    """
    if not pool:
        raise ValueError("empty phrase pool")
    if len(pool) == 1:
        return pool[0]
    choices = [p for p in pool if p != previous]
    return choices[rng.randrange(len(choices))]


class PhrasePicker:
    """Stateful no-repeat selection over the loaded pools."""

    def __init__(self, pools: PhrasePools, rng: random.Random):
        self.pools = pools
        self.rng = rng
        self._last: dict = {}

    def motivational(self) -> str:
        return self._pick("motivational", self.pools.motivational)

    def instructional(self, activity: ActivityId) -> str:
        return self._pick(f"instructional:{activity.value}", self.pools.instructional[activity])

    def _pick(self, key: str, pool: tuple) -> str:
        phrase = pick_utterance(pool, self._last.get(key), self.rng)
        self._last[key] = phrase
        return phrase
