"""Phase-space states, PSK constellations, quadrant labels, encoding rules.

A modulated coherent state is represented by its phase-space point (q, p)
in shot-noise units. Constellations place states on a ring of radius
alpha = sqrt(V_m / 2); each state carries the set of quadrant labels
{L1..L4} of the quadrant(s) whose closure contains it. Bit encoding is a
per-state lookup table that may be public or private and may assign bit
strings of different lengths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .errors import InvalidParameterError

N_LABELS = 4

# Adjacent quadrant pairs, the only two-label sets a state on an axis can carry
ADJACENT_PAIRS = (
    frozenset({1, 2}),
    frozenset({2, 3}),
    frozenset({3, 4}),
    frozenset({4, 1}),
)


class ModulationKind(str, Enum):
    QPSK = "qpsk"
    PSK8 = "8psk"


class RuleVisibility(str, Enum):
    PUBLIC = "public"
    PRIVATE = "private"


@dataclass(frozen=True)
class PhasePoint:
    """A point (q, p) in phase space, shot-noise units."""

    q: float
    p: float

    def __post_init__(self):
        if not (math.isfinite(self.q) and math.isfinite(self.p)):
            raise InvalidParameterError(f"phase point must be finite, got ({self.q}, {self.p})")


def labels_of(point: PhasePoint) -> frozenset[int]:
    """Quadrant label set of a phase-space point.

    Interior points get the single label of their quadrant, points on an
    axis get the two labels of the adjacent quadrants, and the origin gets
    all four (the closure of every quadrant contains it).
    """
    q, p = point.q, point.p
    if q == 0.0 and p == 0.0:
        return frozenset({1, 2, 3, 4})
    if q == 0.0:
        return frozenset({1, 2}) if p > 0 else frozenset({3, 4})
    if p == 0.0:
        return frozenset({4, 1}) if q > 0 else frozenset({2, 3})
    if q > 0:
        return frozenset({1}) if p > 0 else frozenset({4})
    return frozenset({2}) if p > 0 else frozenset({3})


@dataclass(frozen=True)
class ConstellationState:
    """One constellation state: index k, ring angle, point, label set."""

    index: int
    angle: float
    point: PhasePoint
    labels: frozenset[int]


# Exact (cos, sin) pairs for angles k*pi/4, k = 1..8, so axis states land
# exactly on the axes and labels_of agrees with the stored label sets.
_HALF_SQRT2 = math.sqrt(2.0) / 2.0
_OCTANT_COS_SIN = {
    1: (_HALF_SQRT2, _HALF_SQRT2),
    2: (0.0, 1.0),
    3: (-_HALF_SQRT2, _HALF_SQRT2),
    4: (-1.0, 0.0),
    5: (-_HALF_SQRT2, -_HALF_SQRT2),
    6: (0.0, -1.0),
    7: (_HALF_SQRT2, -_HALF_SQRT2),
    8: (1.0, 0.0),
}


@dataclass(frozen=True)
class ModulationScheme:
    """A PSK constellation with amplitude alpha = sqrt(V_m / 2)."""

    kind: ModulationKind
    modulation_variance: float
    alpha: float
    states: tuple[ConstellationState, ...]

    @property
    def n_states(self) -> int:
        return len(self.states)

    def state(self, index: int) -> ConstellationState:
        for s in self.states:
            if s.index == index:
                return s
        raise InvalidParameterError(f"no state with index {index} in {self.kind.value}")

    def state_for_labels(self, labels: frozenset[int]) -> ConstellationState | None:
        """The unique state carrying exactly this label set, if any."""
        for s in self.states:
            if s.labels == labels:
                return s
        return None

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "modulation_variance": self.modulation_variance,
            "alpha": self.alpha,
            "states": [
                {
                    "index": s.index,
                    "angle": s.angle,
                    "q": s.point.q,
                    "p": s.point.p,
                    "labels": sorted(s.labels),
                }
                for s in self.states
            ],
        }


def build_scheme(kind: ModulationKind | str, modulation_variance: float) -> ModulationScheme:
    """Build a QPSK or 8PSK constellation for the given modulation variance.

    QPSK places 4 states at angles (2k-1)*pi/4, all in quadrant interiors
    with one label each. 8PSK places 8 states at angles k*pi/4; odd k are
    interior single-label states, even k sit on the axes and carry the two
    labels of the adjacent quadrants.
    """
    kind = ModulationKind(kind)
    if not (modulation_variance > 0 and math.isfinite(modulation_variance)):
        raise InvalidParameterError(f"modulation variance must be positive, got {modulation_variance}")
    alpha = math.sqrt(modulation_variance / 2.0)

    states = []
    if kind is ModulationKind.QPSK:
        for k in range(1, 5):
            octant = 2 * k - 1
            c, s = _OCTANT_COS_SIN[octant]
            point = PhasePoint(alpha * c, alpha * s)
            states.append(
                ConstellationState(
                    index=k,
                    angle=octant * math.pi / 4.0,
                    point=point,
                    labels=labels_of(point),
                )
            )
    else:
        for k in range(1, 9):
            c, s = _OCTANT_COS_SIN[k]
            point = PhasePoint(alpha * c, alpha * s)
            states.append(
                ConstellationState(
                    index=k,
                    angle=k * math.pi / 4.0,
                    point=point,
                    labels=labels_of(point),
                )
            )
    return ModulationScheme(
        kind=kind,
        modulation_variance=modulation_variance,
        alpha=alpha,
        states=tuple(states),
    )


@dataclass(frozen=True)
class EncodingRule:
    """A state-index -> bit-string lookup. Strings may differ in length."""

    rule_id: str
    visibility: RuleVisibility
    mapping: Mapping[int, str] = field(hash=False)

    def __post_init__(self):
        for k, bits in self.mapping.items():
            if not bits or any(c not in "01" for c in bits):
                raise InvalidParameterError(f"rule {self.rule_id}: state {k} maps to non-bit-string {bits!r}")

    def bits_for(self, index: int) -> str:
        try:
            return self.mapping[index]
        except KeyError:
            raise InvalidParameterError(f"rule {self.rule_id} has no entry for state index {index}") from None

    def to_json_dict(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "visibility": self.visibility.value,
            "mapping": {str(k): v for k, v in sorted(self.mapping.items())},
        }


def encode(rule: EncodingRule, index: int) -> str:
    """Bits Alice publishes into her key for sending state `index`."""
    return rule.bits_for(index)


def decode(rule: EncodingRule, index: int) -> str:
    """Bits a receiver writes down after classifying a state as `index`.

    Encoding and decoding are the same lookup; a mismatch between the
    encoder's and decoder's rules is what produces divergent keys.
    """
    return rule.bits_for(index)


# The three rules of the changeable-encoding demonstration. Rule 1 is the
# fixed public assignment; rules 2 and 3 are private refreshes, the second
# with deliberately variable length.
RULE_PUBLIC_8PSK = EncodingRule(
    rule_id="rule1",
    visibility=RuleVisibility.PUBLIC,
    mapping={1: "000", 2: "001", 3: "010", 4: "011", 5: "100", 6: "101", 7: "110", 8: "111"},
)

RULE_PRIVATE_LEARNING_1 = EncodingRule(
    rule_id="rule2",
    visibility=RuleVisibility.PRIVATE,
    mapping={1: "111", 2: "110", 3: "101", 4: "100", 5: "011", 6: "010", 7: "001", 8: "000"},
)

RULE_PRIVATE_LEARNING_2 = EncodingRule(
    rule_id="rule3",
    visibility=RuleVisibility.PRIVATE,
    mapping={1: "00", 2: "10101", 3: "11", 4: "1", 5: "1001", 6: "01", 7: "1011", 8: "101"},
)

NAMED_RULES = {
    "rule1": RULE_PUBLIC_8PSK,
    "rule2": RULE_PRIVATE_LEARNING_1,
    "rule3": RULE_PRIVATE_LEARNING_2,
}
