"""Turning model output text into legal in-range actions.

The contract: a clean response is a bare integer. Anything else is
salvaged when possible (first integer token, clamped into range) and
flagged so the round record shows what happened; a text with no integer
at all falls back to the range midpoint.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

_STRICT_INT = re.compile(r"^[+-]?\d+$")
_ANY_INT = re.compile(r"[+-]?\d+")

FLAG_OUT_OF_RANGE = "out_of_range"
FLAG_FORMAT_VIOLATION = "format_violation"
FLAG_UNPARSEABLE = "unparseable"


@dataclass
class ParsedAction:
    value: int
    flags: list[str] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.flags


def validate_action_text(text: str, legal_range: tuple[int, int]) -> ParsedAction:
    """Parse an action from response text.

    Bare in-range integer -> clean. Out-of-range integer -> clamped with a
    flag. Prose containing integers -> first one, flagged (and clamped if
    needed). No integer anywhere -> range midpoint, flagged. Callers use a
    non-clean result to trigger their single re-prompt before accepting it.
    """
    lo, hi = legal_range
    stripped = text.strip()
    if _STRICT_INT.fullmatch(stripped):
        return _clamped(int(stripped), lo, hi, [])
    found = _ANY_INT.search(stripped)
    if found:
        return _clamped(int(found.group()), lo, hi, [FLAG_FORMAT_VIOLATION])
    return ParsedAction(value=(lo + hi) // 2, flags=[FLAG_UNPARSEABLE])


def _clamped(v: int, lo: int, hi: int, flags: list[str]) -> ParsedAction:
    if v < lo:
        return ParsedAction(value=lo, flags=flags + [FLAG_OUT_OF_RANGE])
    if v > hi:
        return ParsedAction(value=hi, flags=flags + [FLAG_OUT_OF_RANGE])
    return ParsedAction(value=v, flags=flags)
