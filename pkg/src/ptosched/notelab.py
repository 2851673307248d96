"""Free-text scheduling notes to binary availability signals, with an audit trail.

The default classifier is a lexicon rule engine. An external classifier can
be plugged in over HTTP (JSON in, JSON out); any transport or contract
failure falls back to the rule engine for the affected batch.
"""

from __future__ import annotations

import json
import logging
import re
import threading
import urllib.error
import urllib.request
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

RULE_ENGINE = "rule-engine"
EXTERNAL = "external"

# Lexicon order matters only for which rationale is reported; conflicts win.
CONFLICT_TERMS = (
    "pto",
    "paid-time-off",
    "vacation",
    "sick",
    "illness",
    "conference",
    "interview",
    "or coverage",
    "covering or",
    "icu",
)
OVERTIME_TERMS = (
    "overtime",
    "stayed late",
    "extended clinic",
    "extra hours",
    "can cover",
)

_PUNCT = re.compile(r"[^\w\s]|_")
_SPACE = re.compile(r"\s+")


def normalize(text: str) -> str:
    """Lowercase, turn punctuation into spaces, collapse whitespace, trim."""
    text = _PUNCT.sub(" ", (text or "").lower())
    return _SPACE.sub(" ", text).strip()


_CONFLICT = tuple((normalize(t), "conflict:" + t.replace(" ", "-")) for t in CONFLICT_TERMS)
_OVERTIME = tuple((normalize(t), "overtime:" + t.replace(" ", "-")) for t in OVERTIME_TERMS)


def _contains(norm: str, term: str) -> bool:
    # substring test padded to token boundaries so "icu" misses "particular"
    return f" {term} " in f" {norm} "


def classify_note(text: str) -> tuple[int | None, str]:
    """``(0, rationale)`` for a conflict, ``(1, rationale)`` for overtime, ``(None, "neutral")`` otherwise."""
    norm = normalize(text)
    if not norm:
        return None, "neutral"
    for term, tag in _CONFLICT:
        if _contains(norm, term):
            return 0, tag
    for term, tag in _OVERTIME:
        if _contains(norm, term):
            return 1, tag
    return None, "neutral"


@dataclass(frozen=True)
class NoteSignal:
    clinician: int
    date: str
    signal: int
    rationale: str
    source: str
    normalized_text: str
    created_at_month: str = ""

    def __post_init__(self):
        if self.signal not in (0, 1):
            raise ValueError(f"signal must be 0 or 1, got {self.signal!r}")
        if not self.rationale:
            raise ValueError("rationale must be nonempty")


@dataclass(frozen=True)
class AuditEntry:
    clinician_id: int
    date: str
    normalized_text: str
    rationale: str
    signal: int | None
    source: str
    timestamp: str
    fallback: bool = False


class AuditTrail:
    """Append-only audit log; appends are serialized through one lock."""

    def __init__(self):
        self._entries: list[AuditEntry] = []
        self._lock = threading.Lock()

    def append(self, entry: AuditEntry) -> None:
        with self._lock:
            self._entries.append(entry)

    @property
    def entries(self) -> list[AuditEntry]:
        return list(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(e), sort_keys=True) + "\n" for e in self._entries)

    def write(self, path) -> None:
        Path(path).write_text(self.to_jsonl())


def _month_key(note) -> str:
    m = getattr(note, "created_at_month", "")
    if isinstance(m, tuple):
        return f"{m[0]:04d}-{m[1]:02d}"
    return str(m)


@dataclass(frozen=True)
class Classified:
    """A note with its classifier output; ``signal is None`` means neutral."""

    note: object
    signal: int | None
    rationale: str
    source: str
    normalized_text: str

    def as_signal(self) -> NoteSignal | None:
        if self.signal is None:
            return None
        n = self.note
        return NoteSignal(n.clinician, n.date, int(self.signal), self.rationale, self.source,
                          self.normalized_text, _month_key(n))


def classify_notes(notes: Iterable, audit: AuditTrail | None = None) -> list[Classified]:
    """Rule-engine classification of note records, one audit entry per note."""
    out = []
    for n in notes:
        sig, why = classify_note(n.text)
        c = Classified(n, sig, why, RULE_ENGINE, normalize(n.text))
        out.append(c)
        if audit is not None:
            audit.append(_audit_entry(c))
    return out


def _audit_entry(c: Classified, fallback: bool = False) -> AuditEntry:
    n = c.note
    # deterministic timestamp: the note's submission month
    return AuditEntry(int(n.clinician), str(n.date), c.normalized_text, c.rationale, c.signal,
                      c.source, _month_key(n), fallback)


def resolve_multi(classified: Sequence[Classified]) -> NoteSignal | None:
    """Combine all notes on one clinician-day.

    Any conflict gives 0. Otherwise the most recent positive note (latest
    submission month, then latest position) gives 1. Otherwise neutral.
    """
    if not classified:
        return None
    keys = {(c.note.clinician, c.note.date) for c in classified}
    if len(keys) > 1:
        raise ValueError(f"notes span several clinician-days: {sorted(keys)}")
    for c in classified:
        if c.signal == 0:
            return c.as_signal()
    positives = [(_month_key(c.note), k, c) for k, c in enumerate(classified) if c.signal == 1]
    if not positives:
        return None
    return max(positives, key=lambda t: (t[0], t[1]))[2].as_signal()


def resolve_all(classified: Iterable[Classified]) -> dict[tuple[int, str], NoteSignal]:
    """Resolved signal per ``(clinician, date)``; neutral cells are omitted."""
    groups: dict[tuple[int, str], list[Classified]] = {}
    for c in classified:
        groups.setdefault((int(c.note.clinician), str(c.note.date)), []).append(c)
    out = {}
    for key in sorted(groups):
        sig = resolve_multi(groups[key])
        if sig is not None:
            out[key] = sig
    return out


def fuse_labels(y_struct: int, signal: int | None) -> int:
    """Structured label times the note signal when one exists; unchanged otherwise."""
    if y_struct not in (0, 1):
        raise ValueError(f"structured label must be 0 or 1, got {y_struct!r}")
    if signal is None:
        return int(y_struct)
    if signal not in (0, 1):
        raise ValueError(f"note signal must be 0, 1 or None, got {signal!r}")
    return int(y_struct) * int(signal)


# --- external classifier --------------------------------------------------------


@dataclass
class EndpointConfig:
    url: str
    timeout_ms: int = 2000
    headers: dict = field(default_factory=dict)


def _post_json(cfg: EndpointConfig, payload: dict) -> dict:
    data = json.dumps(payload).encode()
    req = urllib.request.Request(
        cfg.url, data=data, method="POST",
        headers={"Content-Type": "application/json", **cfg.headers},
    )
    with urllib.request.urlopen(req, timeout=cfg.timeout_ms / 1000.0) as resp:
        return json.loads(resp.read().decode())


def _parse_labels(resp, ids: list[str]) -> dict[str, tuple[int | None, str]]:
    if not isinstance(resp, dict) or not isinstance(resp.get("labels"), list):
        raise ValueError("response lacks a labels list")
    got = {}
    for item in resp["labels"]:
        nid = str(item["id"])
        sig = item.get("signal")
        if sig not in (0, 1, None):
            raise ValueError(f"bad signal {sig!r} for note {nid}")
        got[nid] = (sig, str(item.get("rationale") or ("neutral" if sig is None else "external")))
    missing = [i for i in ids if i not in got]
    if missing:
        raise ValueError(f"response missing notes {missing[:5]}")
    return got


def external_classify(
    notes: Sequence, endpoint: EndpointConfig, audit: AuditTrail | None = None
) -> list[Classified]:
    """Classify a batch through an external HTTP classifier.

    Request ``{"notes": [{"id", "text"}]}``, response
    ``{"labels": [{"id", "signal": 0|1|null, "rationale"}]}``. Timeouts,
    connection errors and malformed responses fall back to the rule engine
    and are marked in the audit trail.
    """
    ids = [str(k) for k in range(len(notes))]
    payload = {"notes": [{"id": i, "text": n.text} for i, n in zip(ids, notes)]}
    try:
        labels = _parse_labels(_post_json(endpoint, payload), ids)
    except (urllib.error.URLError, OSError, ValueError, KeyError, TypeError) as exc:
        log.warning("external classifier failed (%s); falling back to rule engine", exc)
        out = []
        for n in notes:
            sig, why = classify_note(n.text)
            c = Classified(n, sig, why, RULE_ENGINE, normalize(n.text))
            out.append(c)
            if audit is not None:
                audit.append(_audit_entry(c, fallback=True))
        return out
    out = []
    for i, n in zip(ids, notes):
        sig, why = labels[i]
        c = Classified(n, sig, why, EXTERNAL, normalize(n.text))
        out.append(c)
        if audit is not None:
            audit.append(_audit_entry(c))
    return out
