"""Reserved control tokens and the public/internal id translation."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigError

# Public ids 0-12 (5-7 unassigned). Internally the whole block of 13 slots sits
# at the top of the id space so the single-byte tokens can keep ids 0-255.
DEFAULT_SPECIAL_TOKENS: dict[str, int] = {
    "<pad>": 0,
    "<unk>": 1,
    "<s>": 2,
    "</s>": 3,
    "<mask>": 4,
    "<|system|>": 8,
    "<|user|>": 9,
    "<|assistant|>": 10,
    "<|tool_call|>": 11,
    "<|tool_response|>": 12,
}
RESERVED_SLOTS = 13


@dataclass(frozen=True)
class SpecialTokenTable:
    """Maps special literals to their public ids and to internal ids.

    ``internal_id = vocab_size - RESERVED_SLOTS + public_id``.
    """

    vocab_size: int
    entries: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_SPECIAL_TOKENS))

    def __post_init__(self):
        public = list(self.entries.values())
        if len(set(public)) != len(public):
            raise ConfigError("special-token public ids must be unique")
        if any(not 0 <= p < RESERVED_SLOTS for p in public):
            raise ConfigError(f"special-token public ids must lie in [0, {RESERVED_SLOTS})")
        if any(not lit for lit in self.entries):
            raise ConfigError("special-token literals must be non-empty")
        object.__setattr__(self, "_by_internal", {
            self.base + p: lit.encode("utf-8") for lit, p in self.entries.items()
        })

    @property
    def base(self) -> int:
        return self.vocab_size - RESERVED_SLOTS

    def internal_id(self, literal: str) -> int:
        return self.base + self.entries[literal]

    def literal_bytes(self, internal_id: int) -> bytes | None:
        return self._by_internal.get(internal_id)

    def is_special(self, internal_id: int) -> bool:
        return internal_id in self._by_internal

    def to_public(self, internal_id: int) -> int:
        """Translate one id to the public numbering (specials become 0-12)."""
        if internal_id in self._by_internal:
            return internal_id - self.base
        return internal_id

    def literals_by_internal(self) -> dict[bytes, int]:
        return {lit: i for i, lit in self._by_internal.items()}
