"""k-anonymity, entropy l-diversity and t-closeness over attribute tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .attributes import (
    AttributeTable,
    ClassKey,
    EquivalenceClass,
    key_as_dict,
    marginal_distribution,
    partition_equivalence_classes,
    value_counts,
)
from .emd import DiscreteDistribution, GroundDistance, emd
from .errors import ConfigurationError, SchemaError, UndefinedDistributionError

REPORT_FORMAT = "facepriv.privacy_report"


def _classes(table: AttributeTable, quasi_ids: Iterable[str]) -> List[EquivalenceClass]:
    if not table.records:
        raise UndefinedDistributionError("metrics are undefined on an empty table")
    return partition_equivalence_classes(table, quasi_ids)


def _check_sensitive(table: AttributeTable, quasi_ids: Sequence[str], sensitive_attr: str) -> None:
    table.schema.index(sensitive_attr)
    if sensitive_attr in set(quasi_ids):
        raise ConfigurationError(f"sensitive attribute {sensitive_attr!r} is also a quasi-identifier")


def entropy(counts: Sequence[int]) -> float:
    """Shannon entropy (nats) of a count vector, with 0 ln 0 = 0."""
    total = sum(counts)
    return -math.fsum((c / total) * math.log(c / total) for c in counts if c)


def k_anonymity(table: AttributeTable, quasi_ids: Iterable[str]) -> int:
    return min(len(c) for c in _classes(table, quasi_ids))


def _entropy_l(table, classes, sensitive_attr) -> Tuple[float, ClassKey]:
    best = None
    for cls in classes:
        h = entropy(value_counts(table, sensitive_attr, cls.member_indices))
        # classes arrive key-sorted, so strict < keeps the smallest key on ties
        if best is None or h < best[0]:
            best = (h, cls.key)
    return math.exp(best[0]), best[1]


def entropy_l_diversity(table: AttributeTable, quasi_ids: Iterable[str], sensitive_attr: str) -> float:
    """Largest ``l`` for which the table is entropy l-diverse.

    That is ``exp(min_E Entropy(E))`` with natural-log entropy, so the
    comparison ``Entropy(E) >= log l`` holds for every class exactly when
    ``l`` is at most the returned value.
    """
    quasi_ids = list(quasi_ids)
    _check_sensitive(table, quasi_ids, sensitive_attr)
    return _entropy_l(table, _classes(table, quasi_ids), sensitive_attr)[0]


def class_distribution(table: AttributeTable, attribute: str, members: Sequence[int]) -> DiscreteDistribution:
    col = table.schema.index(attribute)
    return DiscreteDistribution.from_counts(range(table.schema.arity[col]),
                                            value_counts(table, attribute, members))


def _t_closeness(table, classes, sensitive_attr, d) -> Tuple[float, ClassKey]:
    global_dist = marginal_distribution(table, sensitive_attr)
    worst = None
    for cls in classes:
        dist = emd(global_dist, class_distribution(table, sensitive_attr, cls.member_indices), d)
        if worst is None or dist > worst[0]:
            worst = (dist, cls.key)
    return worst


def t_closeness_max_distance(table: AttributeTable, quasi_ids: Iterable[str], sensitive_attr: str,
                             d: GroundDistance = GroundDistance.BINARY) -> Tuple[float, ClassKey]:
    """Largest EMD between the table marginal of ``sensitive_attr`` and any class's distribution.

    Returns ``(distance, key of the worst class)``; the table is t-close for
    every ``t`` at or above the distance.
    """
    quasi_ids = list(quasi_ids)
    _check_sensitive(table, quasi_ids, sensitive_attr)
    return _t_closeness(table, _classes(table, quasi_ids), sensitive_attr, GroundDistance(d))


@dataclass(frozen=True)
class SensitiveEntry:
    attribute: str
    l_value: float
    t_value: float
    worst_class_key: Dict[str, int]
    l_worst_class_key: Dict[str, int]

    def to_json(self) -> dict:
        return {
            "attribute": self.attribute,
            "l_value": self.l_value,
            "t_value": self.t_value,
            "worst_class_key": dict(self.worst_class_key),
            "l_worst_class_key": dict(self.l_worst_class_key),
        }


@dataclass(frozen=True)
class PrivacyReport:
    quasi_ids: Tuple[str, ...]
    k: int
    class_count: int
    table_size: int
    ground_distance: str
    sensitive: Tuple[SensitiveEntry, ...] = field(default_factory=tuple)

    def entry(self, attribute: str) -> SensitiveEntry:
        for e in self.sensitive:
            if e.attribute == attribute:
                return e
        raise SchemaError(f"no report entry for {attribute!r}")

    def to_json(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "quasi_ids": list(self.quasi_ids),
            "k": self.k,
            "class_count": self.class_count,
            "table_size": self.table_size,
            "ground_distance": self.ground_distance,
            "sensitive": [e.to_json() for e in self.sensitive],
        }

    def to_text(self) -> str:
        lines = [
            f"quasi-identifiers: {', '.join(self.quasi_ids)}",
            f"records: {self.table_size}  classes: {self.class_count}  k-anonymity: {self.k}",
        ]
        for e in self.sensitive:
            lines.append(f"  {e.attribute}: entropy l = {e.l_value:.6g}  t (EMD, {self.ground_distance}) = "
                         f"{e.t_value:.6g}  worst class {e.worst_class_key}")
        return "\n".join(lines)


def privacy_report(table: AttributeTable, quasi_ids: Iterable[str], sensitive_attrs: Iterable[str] = (),
                   d: GroundDistance = GroundDistance.BINARY) -> PrivacyReport:
    quasi_ids = list(quasi_ids)
    d = GroundDistance(d)
    classes = _classes(table, quasi_ids)
    ordered_q = tuple(table.schema.names[c] for c in table.schema.indices(quasi_ids))
    entries = []
    for s in sensitive_attrs:
        _check_sensitive(table, quasi_ids, s)
        l_value, l_key = _entropy_l(table, classes, s)
        t_value, t_key = _t_closeness(table, classes, s, d)
        entries.append(SensitiveEntry(s, l_value, t_value,
                                      key_as_dict(table, quasi_ids, t_key),
                                      key_as_dict(table, quasi_ids, l_key)))
    return PrivacyReport(
        quasi_ids=ordered_q,
        k=min(len(c) for c in classes),
        class_count=len(classes),
        table_size=len(table),
        ground_distance=d.value,
        sensitive=tuple(entries),
    )
