"""Slack-aware color count control for a single managed application.

Two modes share one candidate search.  The absolute mode spends a fixed time
budget; the percentage mode keeps cumulative slowdown under a bound.  Both
track ``t``, the accumulated extra time over an estimated full-cache
baseline, and ``T``, the measured elapsed time.
"""

from dataclasses import dataclass, field

from .base import (NewAllocation, NoChange, allocation_energy, move_penalty_cycles,
                   scaled_time)


@dataclass
class CashierState:
    n_colors: int
    slack_seconds: float = 0.0      # absolute mode budget
    slack_pct: float = 5.0          # percentage mode bound
    delta_pct: float = 0.3
    reserve_fraction: float = 0.1
    horizon: int = 10
    reach: int = 8
    min_fraction: float = 1 / 16
    t: float = 0.0
    elapsed: float = 0.0
    history: list = field(default_factory=list)

    @property
    def min_colors(self):
        return max(1, int(self.n_colors * self.min_fraction))

    @property
    def slowdown_pct(self):
        base = self.elapsed - self.t
        return self.t * 100.0 / base if base > 0 else 0.0


def account(domain, current, state, frequency):
    """Fold this interval into ``t`` and ``elapsed``; returns the delta in seconds.

    The current configuration's cycles are the measured ones, so the delta also
    absorbs flush penalties and algorithm overhead.
    """
    delta = (domain.measured_cycles - domain.est_cycles(state.n_colors)) / frequency
    state.t += delta
    state.elapsed += domain.measured_cycles / frequency
    state.history.append(delta)
    return delta


def _search(domain, current, ctx, state, admissible, spent):
    """``admissible(extra_cycles)`` judges a candidate's estimated extra cycles over
    the full cache; once the slack is ``spent`` the allocation only grows."""
    m = state.n_colors
    lo = max(state.min_colors, current - state.reach)
    hi = min(m, current + state.reach)
    base = domain.est_cycles(m)
    survivors = [] if spent else [
        c for c in range(lo, hi + 1)
        if admissible(domain.est_cycles(c) - base
                      + move_penalty_cycles(domain, current, c))]
    if not survivors:
        fallback = min(current + state.reach, m)
        return (NoChange() if fallback == current else NewAllocation((fallback,)))
    evaluated = []
    for colors in survivors:
        time = scaled_time(ctx, domain, colors, current)
        evaluated.append(((colors,), allocation_energy(ctx, [domain], [colors], time)))
    (best,), _ = min(evaluated, key=lambda item: (item[1], item[0]))
    if best == current:
        return NoChange(candidates=tuple(evaluated))
    return NewAllocation((best,), candidates=tuple(evaluated))


def cashier_msm(domain, current, ctx, state):
    """Absolute-slack mode: spread the unreserved remaining slack over a horizon."""
    f = ctx.params.frequency
    account(domain, current, state, f)
    usable = state.slack_seconds * (1 - state.reserve_fraction)
    allowance = max(0.0, usable - state.t) / state.horizon
    return _search(domain, current, ctx, state, lambda extra: extra / f <= allowance,
                   spent=allowance <= 0)


def cashier_psm(domain, current, ctx, state):
    """Percentage-slack mode: keep cumulative slowdown below ``slack_pct - delta_pct``."""
    account(domain, current, state, ctx.params.frequency)
    allowance = max(0.0, state.slack_pct - state.delta_pct - state.slowdown_pct)
    base = domain.est_cycles(state.n_colors)

    def admissible(extra):
        return extra <= 0 if base <= 0 else extra * 100.0 / base <= allowance

    return _search(domain, current, ctx, state, admissible, spent=allowance <= 0)
