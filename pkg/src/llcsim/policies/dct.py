"""Per-line decay: lines idle for a full decay interval are switched off."""

from dataclasses import dataclass, field

from .base import BlockTurnoff, NoChange


@dataclass
class DctState:
    decay_interval: float
    last_access: dict = field(default_factory=dict)   # (set, way) -> cycle

    def __post_init__(self):
        if not self.decay_interval > 0:
            raise ValueError("decay interval must be positive")


def dct_observe(line, current_cycle, state):
    """Record an access to ``line`` (a ``(set, way)`` pair); it is now on."""
    state.last_access[line] = current_cycle


def dct_tick(current_cycle, state):
    """Turn off every tracked line idle for at least the decay interval."""
    expired = tuple(sorted(line for line, last in state.last_access.items()
                           if current_cycle - last >= state.decay_interval))
    for line in expired:
        del state.last_access[line]
    return BlockTurnoff(expired) if expired else NoChange()
