"""Symbolic vacuum expectations of normal-form field words.

A word (phi-)^m (phi+)^n is expanded into its perfect matchings between
creators and annihilators; each pair (c, a) stands for the contraction
<0|phi-(a) phi+(c)|0>. A truncated-Fock-space evaluator serves as the
independent oracle.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

__all__ = [
    "PointLabel",
    "OperatorFactor",
    "OperatorWord",
    "PairingTerm",
    "WickExpansion",
    "BruteForceResult",
    "TAGS",
    "annihilate",
    "create",
    "vacuum_expectation_symbolic",
    "collapse_repeated_labels",
    "classify_terms",
    "evaluate_expansion",
    "mode_contraction",
    "brute_force_vev",
    "teleportation_word",
    "tagged_weights",
    "ideal_teleportation_expansion",
    "INTRA_PAIR_DOUBLING",
]

TAGS = ("teleport_direct", "teleport_exchange", "parasitic", "untagged")
ANNIHILATION = "annihilation"
CREATION = "creation"


@dataclass(frozen=True, order=True)
class PointLabel:
    """Spacetime point symbol; ``offset`` shifts the base point in space."""

    base: str
    offset: tuple = ()
    time: float = 0.0

    def __post_init__(self):
        if not self.base:
            raise ValueError("label base must be non-empty")
        object.__setattr__(self, "offset", tuple(float(v) for v in self.offset))

    def __str__(self) -> str:
        s = self.base
        if any(self.offset):
            s += "+(" + ",".join(f"{v:g}" for v in self.offset) + ")"
        if self.time:
            s += f"@{self.time:g}"
        return s

    def to_dict(self) -> dict:
        return {"base": self.base, "offset": list(self.offset), "time": self.time}

    @classmethod
    def from_dict(cls, d) -> "PointLabel":
        return cls(d["base"], tuple(d.get("offset", ())), float(d.get("time", 0.0)))


@dataclass(frozen=True)
class OperatorFactor:
    kind: str
    label: PointLabel

    def __post_init__(self):
        if self.kind not in (ANNIHILATION, CREATION):
            raise ValueError(f"kind must be {ANNIHILATION!r} or {CREATION!r}")


def annihilate(label) -> OperatorFactor:
    return OperatorFactor(ANNIHILATION, _label(label))


def create(label) -> OperatorFactor:
    return OperatorFactor(CREATION, _label(label))


def _label(x) -> PointLabel:
    return x if isinstance(x, PointLabel) else PointLabel(str(x))


@dataclass(frozen=True)
class OperatorWord:
    """Ordered operator product; the leftmost factor acts last."""

    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))

    def is_normal_form(self) -> bool:
        seen_creator = False
        for f in self.factors:
            if f.kind == CREATION:
                seen_creator = True
            elif seen_creator:
                return False
        return True

    @property
    def annihilators(self) -> tuple:
        return tuple(f.label for f in self.factors if f.kind == ANNIHILATION)

    @property
    def creators(self) -> tuple:
        return tuple(f.label for f in self.factors if f.kind == CREATION)


@dataclass(frozen=True)
class PairingTerm:
    """Perfect matching written as sorted (creator, annihilator) pairs."""

    pairs: tuple
    multiplicity: int = 1
    tag: str = "untagged"

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(sorted((c, a) for c, a in self.pairs)))
        if self.multiplicity < 1:
            raise ValueError("multiplicity must be >= 1")
        if self.tag not in TAGS:
            raise ValueError(f"unknown tag {self.tag!r}")

    def partner(self, label: PointLabel):
        """Annihilator paired with creator ``label`` (first match)."""
        for c, a in self.pairs:
            if c == label:
                return a
        return None

    def key(self):
        return tuple((str(c), str(a)) for c, a in self.pairs)


@dataclass(frozen=True)
class WickExpansion:
    terms: tuple
    source_word: OperatorWord = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(sorted(self.terms, key=PairingTerm.key)))

    @property
    def total_multiplicity(self) -> int:
        return sum(t.multiplicity for t in self.terms)

    def weights_by_tag(self) -> dict:
        out = {}
        for t in self.terms:
            out[t.tag] = out.get(t.tag, 0) + t.multiplicity
        return out

    def to_json_obj(self) -> list:
        return [
            {"pairs": [[str(c), str(a)] for c, a in t.pairs], "multiplicity": t.multiplicity, "tag": t.tag}
            for t in self.terms
        ]

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)


def vacuum_expectation_symbolic(word: OperatorWord) -> WickExpansion:
    """All perfect matchings of a normal-form word (phi-)^m (phi+)^n.

    Raises
    ------
    ValueError
        If some creator stands left of an annihilator; such words would need
        commutator reordering, which is not supported.
    """
    if not word.is_normal_form():
        raise ValueError(
            "word is not in normal form (all annihilators left of all creators); "
            "reorder it with the commutation relations first"
        )
    ann, cre = word.annihilators, word.creators
    if len(ann) != len(cre):
        return WickExpansion((), word)
    terms = [PairingTerm(tuple(zip(cre, perm))) for perm in itertools.permutations(ann)]
    return WickExpansion(tuple(terms), word)


def collapse_repeated_labels(exp: WickExpansion, identify: Mapping | None = None) -> WickExpansion:
    """Rename labels by ``identify`` and merge terms whose pair sets coincide.

    Without ``identify`` only literally identical pair sets are merged.
    """
    identify = dict(identify or {})
    merged: dict = {}
    for t in exp.terms:
        pairs = tuple(sorted((identify.get(c, c), identify.get(a, a)) for c, a in t.pairs))
        key = (pairs, t.tag)
        merged[key] = merged.get(key, 0) + t.multiplicity
    terms = tuple(PairingTerm(p, m, tag) for (p, tag), m in merged.items())
    out = WickExpansion(terms, exp.source_word)
    assert out.total_multiplicity == exp.total_multiplicity
    return out


def classify_terms(exp: WickExpansion, packet_label, epr_labels, output_label, measurement_labels) -> WickExpansion:
    """Tag terms by where the packet creator is absorbed.

    Parasitic when the packet is paired with the output point, direct when it
    meets the first measurement slot and exchange when it meets the second.
    """
    epr = set(epr_labels)
    meas = tuple(measurement_labels)
    if len(meas) != 2:
        raise ValueError("expected two measurement labels (direct slot, exchange slot)")
    roles = [{packet_label}, epr, {output_label}, set(meas)]
    flat = [lab for r in roles for lab in r]
    if len(flat) != len(set(flat)):
        raise ValueError("role sets overlap")
    labels = set()
    for t in exp.terms:
        for c, a in t.pairs:
            labels.update((c, a))
    # collapsed EPR labels may have disappeared, so only coverage is required
    if not labels <= set(flat):
        raise ValueError(f"labels without a role: {sorted(map(str, labels - set(flat)))}")
    out = []
    for t in exp.terms:
        a = t.partner(packet_label)
        if a == output_label:
            tag = "parasitic"
        elif a == meas[0]:
            tag = "teleport_direct"
        elif a == meas[1]:
            tag = "teleport_exchange"
        else:
            raise ValueError(f"packet paired with unexpected label {a}")
        out.append(PairingTerm(t.pairs, t.multiplicity, tag))
    return WickExpansion(tuple(out), exp.source_word)


def evaluate_expansion(exp: WickExpansion, contraction: Callable[[PointLabel, PointLabel], complex]) -> complex:
    """sum_terms multiplicity * prod_pairs contraction(creator, annihilator)."""
    total = 0j
    for t in exp.terms:
        prod = complex(t.multiplicity)
        for c, a in t.pairs:
            prod *= contraction(c, a)
        total += prod
    return total


def mode_contraction(assignment: Mapping) -> Callable[[PointLabel, PointLabel], complex]:
    """Discrete contraction <0|phi-(a) phi+(c)|0> = sum_j conj(u_a[j]) u_c[j]."""

    def contraction(c, a):
        return complex(np.vdot(np.asarray(assignment[a]), np.asarray(assignment[c])))

    return contraction


@dataclass(frozen=True)
class BruteForceResult:
    value: complex
    truncated: bool

    @property
    def reliable(self) -> bool:
        return not self.truncated

    def __complex__(self) -> complex:
        return self.value


def _ladder(cap: int):
    """Single-mode lowering matrix on occupations 0..cap."""
    return np.diag(np.sqrt(np.arange(1, cap + 1, dtype=float)), k=1)


def brute_force_vev(word: OperatorWord, modes: int, occupancy_cap: int, assignment: Mapping) -> BruteForceResult:
    """Vacuum expectation by explicit ladder matrices on a truncated Fock space.

    phi+(label) = sum_j u[j] a_j^dagger and phi-(label) = sum_j conj(u[j]) a_j,
    with u = assignment[label]. Factors act right to left on the vacuum.
    ``truncated`` is set when a creation operator pushed weight past the cap.
    """
    if not 1 <= modes <= 6 or not 1 <= occupancy_cap <= 4:
        raise ValueError("brute force is limited to modes <= 6 and occupancy_cap <= 4")
    shape = (occupancy_cap + 1,) * modes
    lower = _ladder(occupancy_cap)
    raise_ = lower.T
    state = np.zeros(shape, dtype=complex)
    state[(0,) * modes] = 1.0
    truncated = False
    for f in reversed(word.factors):
        u = np.asarray(assignment[f.label], dtype=complex)
        if u.shape != (modes,):
            raise ValueError(f"assignment for {f.label} must have {modes} components")
        new = np.zeros_like(state)
        for j in range(modes):
            if u[j] == 0:
                continue
            if f.kind == CREATION:
                top = np.take(state, occupancy_cap, axis=j)
                if np.any(np.abs(top) > 0):
                    truncated = True
                op, coef = raise_, u[j]
            else:
                op, coef = lower, np.conj(u[j])
            new += coef * np.moveaxis(np.tensordot(op, state, axes=([1], [j])), 0, j)
        state = new
    return BruteForceResult(complex(state[(0,) * modes]), truncated)


def teleportation_word(xi0: float = 0.0, t_out: float = 0.0, pair_time: float = 0.0, t0: float = 0.0):
    """The three-particle word <0| phi-(xi) phi-(xi - X) phi-(x) phi+(x1) phi+(x2) phi+(x') |0>.

    Measurement labels stay symbolic in X so that xi and xi - X remain
    distinct at X = 0. Returns the word and a role dictionary.
    """
    xi = PointLabel("xi", (), xi0)
    xi_X = PointLabel("xi-X", (), xi0)
    out = PointLabel("x", (), t_out)
    x1 = PointLabel("x1", (), pair_time)
    x2 = PointLabel("x2", (), pair_time)
    packet = PointLabel("x'", (), t0)
    word = OperatorWord(
        (annihilate(xi), annihilate(xi_X), annihilate(out), create(x1), create(x2), create(packet))
    )
    roles = {
        "packet_label": packet,
        "epr_labels": (x1, x2),
        "output_label": out,
        "measurement_labels": (xi, xi_X),
    }
    return word, roles


# The parasitic pairing is counted once more for the exchange of the two
# particles inside the pair; raw Wick collapse does not produce this factor.
INTRA_PAIR_DOUBLING = {"parasitic": 2}


def tagged_weights(exp: WickExpansion, intra_pair_doubling: bool = True) -> dict:
    """Weights per tag, optionally with the intra-pair exchange doubling."""
    raw = exp.weights_by_tag()
    if not intra_pair_doubling:
        return raw
    return {tag: w * INTRA_PAIR_DOUBLING.get(tag, 1) for tag, w in raw.items()}


def ideal_teleportation_expansion(xi0: float = 0.0, t_out: float = 0.0, pair_time: float = 0.0, t0: float = 0.0):
    """Expanded, ideal-pair collapsed and classified three-particle word."""
    word, roles = teleportation_word(xi0, t_out, pair_time, t0)
    x1, x2 = roles["epr_labels"]
    exp = collapse_repeated_labels(vacuum_expectation_symbolic(word), {x2: x1})
    return classify_terms(exp, **roles), roles
