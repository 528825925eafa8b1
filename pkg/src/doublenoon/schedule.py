"""Compilation of the protocol into an ordered list of timed segments."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

from .analytic import step_durations
from .device import DeviceParams

__all__ = ["Segment", "Schedule", "compile_schedule", "total_time", "SEGMENT_KINDS"]

SEGMENT_KINDS = ("bell-prep", "pulse-gf", "pulse-ge", "interact", "gap")
_HAMILTONIAN_OF = {"interact": 1, "pulse-gf": 2, "pulse-ge": 3, "bell-prep": "bell", "gap": None}


@dataclass(frozen=True)
class Segment:
    """One timed piece of the protocol.

    ``hamiltonian`` is the composite phase index (1 interaction, 2 g-f pulse,
    3 g-e pulse), ``"bell"`` or ``None`` for idle gaps.
    """

    kind: str
    duration: float
    label: str = ""
    noise_active: bool = True

    def __post_init__(self):
        if self.kind not in SEGMENT_KINDS:
            raise ValueError(f"unknown segment kind {self.kind!r}")
        if self.duration < 0 or (self.duration == 0 and self.kind != "gap"):
            raise ValueError(f"{self.kind} segment needs a positive duration")

    @property
    def hamiltonian(self):
        return _HAMILTONIAN_OF[self.kind]


@dataclass(frozen=True)
class Schedule:
    segments: tuple[Segment, ...]
    params: DeviceParams
    N: int
    include_bell: bool = False
    include_gaps: bool = False

    def __iter__(self):
        return iter(self.segments)

    def __len__(self) -> int:
        return len(self.segments)

    def kinds(self) -> list[str]:
        return [s.kind for s in self.segments]

    def to_csv(self) -> str:
        """Segment table: index, kind, label, duration, start and end times (s)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "kind", "label", "duration_s", "start_s", "end_s", "noise_active"])
        t = 0.0
        for i, seg in enumerate(self.segments):
            end = t + seg.duration
            w.writerow([i, seg.kind, seg.label, repr(seg.duration), repr(t), repr(end), int(seg.noise_active)])
            t = end
        return buf.getvalue()


def compile_schedule(
    N: int,
    params: DeviceParams,
    include_bell: bool = False,
    include_gaps: bool = False,
) -> Schedule:
    """Unroll the protocol for target photon number ``N``.

    Order: ``[bell-prep] [gap] [gap] pulse-gf (interact t_j, pulse-gf) x (N-1)
    [gap] pulse-ge interact t_N [gap]``.  The four gaps sit after Bell
    preparation, before the first pulse, before the final step and at the end;
    their position only matters when gap noise is enabled.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    d = step_durations(N, params)
    gap_noise = params.gap_noise
    segs: list[Segment] = []

    def gap(label):
        if include_gaps:
            segs.append(Segment("gap", d.gap, label, gap_noise))

    if include_bell:
        if d.bell is None:
            raise ValueError("Bell preparation requested but mu is not set")
        segs.append(Segment("bell-prep", d.bell, "bell"))
    gap("post-bell")
    gap("pre-first-pulse")
    segs.append(Segment("pulse-gf", d.gf_pulse, "gf-1"))
    for j in range(1, N):
        segs.append(Segment("interact", d.interactions[j - 1], f"t{j}"))
        segs.append(Segment("pulse-gf", d.gf_pulse, f"gf-{j + 1}"))
    gap("pre-final-step")
    segs.append(Segment("pulse-ge", d.ge_pulse, "ge"))
    segs.append(Segment("interact", d.interactions[N - 1], f"t{N}"))
    gap("post-final")
    return Schedule(tuple(segs), params, N, include_bell, include_gaps)


def total_time(schedule: Schedule) -> float:
    return math.fsum(s.duration for s in schedule.segments)
