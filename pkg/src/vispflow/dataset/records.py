from __future__ import annotations

import json
from dataclasses import dataclass, field

from .. import CATEGORIES
from ..render import Canvas

# categories whose canvas carries a source image to preserve (task indicator = 1)
EDIT_CATEGORIES = frozenset({"TIE", "TBE", "VME", "DE", "FU", "TU"})

_CORE_KEYS = ("category", "instruction", "annotations", "root_id")


class RecordError(ValueError):
    pass


@dataclass(eq=False)
class PairRecord:
    """One instruction canvas and its target image."""

    input: Canvas
    target: Canvas
    category: str
    instruction: str = ""
    annotations: list = field(default_factory=list)
    root_id: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise RecordError(f"unknown category {self.category!r}")
        if self.input.pixels.shape != self.target.pixels.shape:
            raise RecordError(
                f"input {self.input.width}x{self.input.height} and target "
                f"{self.target.width}x{self.target.height} differ in size")
        clash = set(self.extra) & set(_CORE_KEYS)
        if clash:
            raise RecordError(f"extra metadata shadows core keys: {sorted(clash)}")

    @property
    def i_edit(self) -> int:
        return int(self.category in EDIT_CATEGORIES)

    def meta(self) -> dict:
        return {"category": self.category, "instruction": self.instruction,
                "annotations": self.annotations, "root_id": self.root_id, **self.extra}

    def meta_bytes(self) -> bytes:
        return encode_meta(self.meta())

    @classmethod
    def from_meta(cls, meta: dict, input: Canvas, target: Canvas) -> "PairRecord":
        extra = {k: v for k, v in meta.items() if k not in _CORE_KEYS}
        return cls(input, target, meta["category"], meta.get("instruction", ""),
                   meta.get("annotations", []), meta.get("root_id", ""), extra)

    def __eq__(self, other):
        return (isinstance(other, PairRecord) and self.input == other.input
                and self.target == other.target and self.meta() == other.meta())


def encode_meta(meta: dict) -> bytes:
    # canonical form so a read-write cycle reproduces the same bytes
    return json.dumps(meta, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
