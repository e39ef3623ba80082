"""Experiment presets: electrode layout and initial droplets."""

from __future__ import annotations

from dataclasses import dataclass

from ..mesh import Electrode
from ..scheme import Circle, Ellipse

PRESET_NAMES = ("move", "split", "merge", "custom")


@dataclass(frozen=True)
class Preset:
    segments: tuple[tuple[float, float], ...]  # bottom-plate electrode intervals
    droplets: tuple
    delta_full: float = 0.05

    def electrodes(self, V00: float) -> tuple[Electrode, ...]:
        return tuple(Electrode("bottom", a, b, V00) for a, b in self.segments)


PRESETS = {
    "move": Preset(((0.0, 5.0),), (Circle(0.0, 0.0, 0.5),)),
    "split": Preset(((-5.0, -1.5), (1.5, 5.0)), (Ellipse(0.0, 0.0, 2.5, 0.5),)),
    "merge": Preset(((-0.5, 0.5),), (Circle(-0.7, 0.0, 0.5), Circle(0.7, 0.0, 0.5)), delta_full=0.01),
    "custom": Preset((), ()),
}

# desk scale: coarse uniform mesh and a wider interface
DESK = {"nx": 40, "ny_fluid": 8, "ny_plate": 2, "delta": 0.1}
# full scale: uniform mesh at the finest interface resolution of the published runs
FULL = {"nx": 320, "ny_fluid": 32, "ny_plate": 16}


def scale_defaults(preset: str, desk_scale: bool) -> dict:
    if desk_scale:
        return dict(DESK)
    return dict(FULL, delta=PRESETS[preset].delta_full)
