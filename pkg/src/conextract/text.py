"""Small text helpers shared by the corpus, extraction and metrics modules."""

from __future__ import annotations


def collapse(text: str) -> str:
    """Case-fold and collapse whitespace runs to single spaces, trimming the ends."""
    return " ".join(text.casefold().split())


def normalize_with_map(text: str, casefold: bool = True) -> tuple[str, list[int]]:
    """Normalize ``text`` like :func:`collapse` and keep a char-level back-map.

    ``index_map[i]`` is the offset in ``text`` of the character that produced
    position ``i`` of the normalized string.
    """
    out: list[str] = []
    index_map: list[int] = []
    pending_space = -1
    for i, ch in enumerate(text):
        if ch.isspace():
            if out and pending_space < 0:
                pending_space = i
            continue
        if pending_space >= 0:
            out.append(" ")
            index_map.append(pending_space)
            pending_space = -1
        folded = ch.casefold() if casefold else ch
        for piece in folded:
            out.append(piece)
            index_map.append(i)
    return "".join(out), index_map
