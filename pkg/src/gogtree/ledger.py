"""Named numeric constants with provenance, cited by every report."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

PROVENANCE = ("computed", "configured", "measured")


@dataclass(frozen=True)
class Entry:
    value: object
    provenance: str
    note: str = ""


def _jsonable(x):
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else float(x)
    if isinstance(x, (list, tuple)):
        return [_jsonable(y) for y in x]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    return x


class ConstantsLedger:
    def __init__(self):
        self._entries: dict[str, Entry] = {}

    def record(self, name: str, value, provenance: str, note: str = ""):
        if provenance not in PROVENANCE:
            raise ValueError(f"provenance must be one of {PROVENANCE}, got {provenance!r}")
        self._entries[name] = Entry(value, provenance, note)
        return value

    def get(self, name: str, default=None):
        e = self._entries.get(name)
        return default if e is None else e.value

    def __contains__(self, name) -> bool:
        return name in self._entries

    def __getitem__(self, name) -> Entry:
        return self._entries[name]

    def names(self) -> list[str]:
        return sorted(self._entries)

    def cite(self, name: str) -> dict:
        e = self._entries[name]
        return {"ledger": name, "value": _jsonable(e.value), "provenance": e.provenance}

    def snapshot(self) -> dict:
        return {n: {"value": _jsonable(e.value), "provenance": e.provenance, "note": e.note}
                for n, e in sorted(self._entries.items())}


def record_vertex_deltas(ledger: ConstantsLedger, gog) -> None:
    """delta_v: 0 for free fibers (trees), the diameter for finite fibers."""
    for name, V in zip(gog.vertices, gog.vgroups):
        if V.kind == "free":
            ledger.record(f"delta_{name}", 0, "computed", "free fiber is a tree")
        else:
            ledger.record(f"delta_{name}", 1 if V.table.order > 1 else 0, "computed",
                          "finite fiber, full element generating set")
