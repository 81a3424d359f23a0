"""Byte prefix tree over token byte strings."""

from __future__ import annotations

from typing import Iterable


class Trie:
    """Prefix tree whose terminal nodes carry ``(token_id, rank)``.

    ``rank`` is the merge rank for merged tokens and ``-1`` for base bytes and
    other non-merge entries. Nodes live in flat lists; node 0 is the root.
    """

    __slots__ = ("_children", "_terminal")

    def __init__(self):
        self._children: list[dict[int, int]] = [{}]
        self._terminal: list[tuple[int, int] | None] = [None]

    def insert(self, key: bytes, token_id: int, rank: int = -1) -> None:
        node = 0
        for byte in key:
            nxt = self._children[node].get(byte)
            if nxt is None:
                nxt = len(self._children)
                self._children[node][byte] = nxt
                self._children.append({})
                self._terminal.append(None)
            node = nxt
        self._terminal[node] = (token_id, rank)

    def get(self, key: bytes) -> tuple[int, int] | None:
        node = 0
        for byte in key:
            node = self._children[node].get(byte)
            if node is None:
                return None
        return self._terminal[node]

    def longest_match(self, data: bytes, start: int = 0) -> tuple[int, int] | None:
        """Return ``(token_id, length)`` of the longest token starting at ``data[start]``.

        Runs in time proportional to the match length; ``None`` if nothing matches.
        """
        node, best = 0, None
        children, terminal = self._children, self._terminal
        for pos in range(start, len(data)):
            node = children[node].get(data[pos])
            if node is None:
                break
            hit = terminal[node]
            if hit is not None:
                best = (hit[0], pos - start + 1)
        return best

    def __len__(self) -> int:
        return sum(t is not None for t in self._terminal)


def build_trie(vocab: dict[bytes, int], merges: Iterable) -> Trie:
    """Trie over every token byte string; merged tokens record their rank."""
    ranks = {m.result_id: m.rank for m in merges}
    trie = Trie()
    for token, token_id in vocab.items():
        trie.insert(token, token_id, ranks.get(token_id, -1))
    return trie
