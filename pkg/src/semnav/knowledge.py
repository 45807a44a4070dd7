"""Per-target knowledge base: similar-object lists, fusion confidence
thresholds, and likely rooms.

The shipped profiles are static files; a live language-model service could
sit behind the same records, so the request/response shapes are defined
here as plain dataclasses with no transport attached.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path


class KnowledgeError(ValueError):
    """Malformed or out-of-contract knowledge entry."""


@dataclass(frozen=True)
class ObjectKnowledge:
    target: str
    similar: tuple[str, ...]
    c_th: float
    room: str


@dataclass
class KnowledgeBase:
    profile: str
    c_th_range: tuple[float, float]
    similar_range: tuple[int, int]
    entries: dict[str, ObjectKnowledge]

    def __contains__(self, target: str) -> bool:
        return target in self.entries

    def get(self, target: str) -> ObjectKnowledge:
        if target not in self.entries:
            raise KnowledgeError(f"unknown target label: {target!r}")
        return self.entries[target]

    def targets(self) -> list[str]:
        return list(self.entries)


@dataclass(frozen=True)
class ReasoningRequest:
    """Shape of a live object-reasoning query (offline in this artifact)."""

    label: str
    c_th_range: tuple[float, float] = (0.25, 0.65)


@dataclass(frozen=True)
class ReasoningResponse:
    similar: tuple[str, ...]
    c_th: float
    room: str


def _parse_header(lines):
    meta = {"profile": "custom",
            "c_th_range": (0.25, 0.65),
            "similar_range": (3, 5)}
    body = []
    for line in lines:
        raw = line.strip()
        if not raw or raw.startswith("#"):
            continue
        if ":" in raw:
            key, val = raw.split(":", 1)
            key = key.strip()
            if key == "profile":
                meta["profile"] = val.strip()
                continue
            if key == "c_th_range":
                lo, hi = val.split()
                meta["c_th_range"] = (float(lo), float(hi))
                continue
            if key == "similar_range":
                lo, hi = val.split()
                meta["similar_range"] = (int(lo), int(hi))
                continue
        body.append(raw)
    return meta, body


def parse_knowledge(text: str, source: str = "<string>") -> KnowledgeBase:
    meta, body = _parse_header(text.splitlines())
    lo, hi = meta["c_th_range"]
    smin, smax = meta["similar_range"]
    entries: dict[str, ObjectKnowledge] = {}
    for raw in body:
        if ":" not in raw:
            raise KnowledgeError(f"{source}: malformed record {raw!r}")
        label, rest = raw.split(":", 1)
        label = label.strip()
        parts = [p.strip() for p in rest.split("|")]
        if len(parts) != 3:
            raise KnowledgeError(
                f"{source}: entry {label!r} needs 'similar | c_th | room'")
        similar = tuple(s.strip() for s in parts[0].split(",") if s.strip())
        try:
            c_th = float(parts[1])
        except ValueError as exc:
            raise KnowledgeError(
                f"{source}: entry {label!r} has non-numeric threshold") from exc
        room = parts[2]
        if not (lo <= c_th <= hi):
            raise KnowledgeError(
                f"{source}: entry {label!r} threshold {c_th} outside "
                f"[{lo}, {hi}]")
        if not (smin <= len(similar) <= smax):
            raise KnowledgeError(
                f"{source}: entry {label!r} has {len(similar)} similar labels, "
                f"expected {smin}..{smax}")
        if not room:
            raise KnowledgeError(f"{source}: entry {label!r} missing room")
        if label in entries:
            raise KnowledgeError(f"{source}: duplicate entry {label!r}")
        entries[label] = ObjectKnowledge(label, similar, c_th, room)
    return KnowledgeBase(meta["profile"], (lo, hi), (smin, smax), entries)


def load_knowledge(path) -> KnowledgeBase:
    """Load and validate a knowledge file."""
    p = Path(path)
    return parse_knowledge(p.read_text(encoding="utf-8"), source=str(p))


def load_profile(name: str = "hm3d") -> KnowledgeBase:
    """Load one of the bundled dataset profiles ('hm3d' or 'mp3d')."""
    ref = resources.files("semnav.data").joinpath(f"knowledge_{name}.txt")
    return parse_knowledge(ref.read_text(encoding="utf-8"),
                           source=f"profile:{name}")


def object_list(kb: KnowledgeBase, target: str,
                include_similar: bool = True) -> list[str]:
    """Detection label list for a target, the target itself always first."""
    entry = kb.get(target)
    if not include_similar:
        return [target]
    return [target, *entry.similar]
