"""Single-application color count search with even-color granularity."""

from dataclasses import dataclass

from ..profiler import mcu
from .base import NewAllocation, NoChange, allocation_energy, gain_band, scaled_time


@dataclass(frozen=True)
class PaletteParams:
    candidates: int = 11
    min_fraction: float = 1 / 16
    granularity: int = 2
    thresholds: tuple = (50, 200, 300, 1000)
    # (below, above) counts per gain band; each pair sums to candidates - 1
    skew: tuple = ((8, 2), (6, 4), (5, 5), (4, 6), (2, 8))

    def min_colors(self, n_colors):
        return max(self.granularity, int(n_colors * self.min_fraction))


def palette_candidates(domain, current, n_colors, params=PaletteParams()):
    floor = params.min_colors(n_colors)
    g = params.granularity
    down = [v for v in range(current - 1, floor - 1, -1) if v % g == 0]
    up = [v for v in range(current + 1, n_colors + 1) if v % g == 0]
    below, above = params.skew[gain_band(mcu(domain.curve, current), params.thresholds)]
    take_down = min(below, len(down))
    take_up = min(above, len(up))
    spare = params.candidates - 1 - take_down - take_up
    if spare > 0:
        extra_up = min(spare, len(up) - take_up)
        take_up += extra_up
        take_down += min(spare - extra_up, len(down) - take_down)
    return sorted(down[:take_down] + [current] + up[:take_up])


def palette_esa(domain, current, ctx, params=PaletteParams()):
    evaluated = []
    for colors in palette_candidates(domain, current, ctx.n_colors, params):
        time = scaled_time(ctx, domain, colors, current)
        evaluated.append(((colors,), allocation_energy(ctx, [domain], [colors], time)))
    (best,), _ = min(evaluated, key=lambda item: (item[1], item[0]))
    if best == current:
        return NoChange(candidates=tuple(evaluated))
    return NewAllocation((best,), candidates=tuple(evaluated))
