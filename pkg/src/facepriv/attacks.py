"""Simulated adversaries: quasi-identifier linkage and the homogeneity attack."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .attributes import AttributeTable, ClassKey, key_as_dict, partition_equivalence_classes
from .errors import AlignmentError, ConfigurationError, ParameterError, SchemaError
from .rng import as_source

SUMMARY_FORMAT = "facepriv.attack_summary"


@dataclass(frozen=True)
class AdversaryKnowledge:
    """What the adversary knows about one target.

    ``target`` is the index of the target's record, used only for scoring.
    When it is ``None`` the known values are assumed to be the target's own,
    so any non-empty candidate set contains it.
    """

    known: Mapping[str, int]
    target: Optional[int] = None


@dataclass(frozen=True)
class AttackOutcome:
    candidates: Tuple[int, ...]
    success_probability: float
    disclosed_sensitive: Tuple[Tuple[str, int], ...] = ()


def _known_columns(table: AttributeTable, known: Mapping[str, int]):
    cols = [table.schema.index(name) for name in known]
    return cols, [int(v) for v in known.values()]


def linkage_attack(table: AttributeTable, knowledge: AdversaryKnowledge,
                   sensitive: Iterable[str] = ()) -> AttackOutcome:
    """Match the known values against every record and guess uniformly among matches.

    Any attribute in ``sensitive`` on which all candidates agree is reported
    as disclosed.
    """
    cols, vals = _known_columns(table, knowledge.known)
    m = table.matrix
    mask = np.ones(len(table), dtype=bool)
    for c, v in zip(cols, vals):
        mask &= m[:, c] == v
    candidates = tuple(int(i) for i in np.flatnonzero(mask))
    if not candidates:
        hit = False
    elif knowledge.target is None:
        hit = True
    else:
        hit = knowledge.target in candidates
    prob = 1.0 / len(candidates) if hit else 0.0

    disclosed = []
    if candidates:
        for s in sensitive:
            column = m[list(candidates), table.schema.index(s)]
            if np.all(column == column[0]):
                disclosed.append((s, int(column[0])))
    return AttackOutcome(candidates, prob, tuple(disclosed))


def homogeneity_attack_check(table: AttributeTable, quasi_ids: Iterable[str],
                             sensitive_attr: str) -> List[Tuple[ClassKey, int]]:
    """Classes whose members all share one value of ``sensitive_attr``, with that value."""
    quasi_ids = list(quasi_ids)
    col = table.schema.index(sensitive_attr)
    if sensitive_attr in quasi_ids:
        raise ConfigurationError(f"sensitive attribute {sensitive_attr!r} is also a quasi-identifier")
    out = []
    for cls in partition_equivalence_classes(table, quasi_ids):
        values = table.matrix[list(cls.member_indices), col]
        if np.all(values == values[0]):
            out.append((cls.key, int(values[0])))
    return out


class KnowledgeSource(str, enum.Enum):
    ORIGINAL = "original"
    PUBLISHED = "published"


@dataclass(frozen=True)
class SubsetSummary:
    attributes: Tuple[str, ...]
    n_adversaries: int
    mean_success_before: float
    mean_success_after: float

    def to_json(self) -> dict:
        return {
            "attributes": list(self.attributes),
            "n_adversaries": self.n_adversaries,
            "mean_success_before": self.mean_success_before,
            "mean_success_after": self.mean_success_after,
        }


@dataclass(frozen=True)
class AttackSummary:
    n_adversaries: int
    mean_success_before: float
    mean_success_after: float
    knowledge: str
    per_subset: Tuple[SubsetSummary, ...] = field(default_factory=tuple)

    def to_json(self) -> dict:
        return {
            "format": SUMMARY_FORMAT,
            "n_adversaries": self.n_adversaries,
            "mean_success_before": self.mean_success_before,
            "mean_success_after": self.mean_success_after,
            "knowledge": self.knowledge,
            "per_subset": [s.to_json() for s in self.per_subset],
        }

    def to_text(self) -> str:
        lines = [f"adversaries: {self.n_adversaries} (know {self.knowledge} values)",
                 f"mean re-identification success: before {self.mean_success_before:.4f}  "
                 f"after {self.mean_success_after:.4f}"]
        for s in self.per_subset:
            lines.append(f"  {{{', '.join(s.attributes)}}}: {s.mean_success_before:.4f} -> "
                         f"{s.mean_success_after:.4f}  ({s.n_adversaries} adversaries)")
        return "\n".join(lines)


def check_aligned(before: AttributeTable, after: AttributeTable) -> None:
    if before.schema != after.schema:
        raise AlignmentError("tables have different schemas")
    if len(before) != len(after):
        raise AlignmentError(f"tables have {len(before)} and {len(after)} records")
    for i, (a, b) in enumerate(zip(before.records, after.records)):
        if a.image_id != b.image_id or a.identity_id != b.identity_id:
            raise AlignmentError(f"record {i} differs: {a.image_id}/{a.identity_id} vs "
                                 f"{b.image_id}/{b.identity_id}")


def reidentification_rate(table_before: AttributeTable, table_after: AttributeTable,
                          adversary_attr_subsets: Sequence[Sequence[str]], rng=None,
                          targets_per_subset: Optional[int] = None,
                          knowledge: KnowledgeSource = KnowledgeSource.ORIGINAL) -> AttackSummary:
    """Compare linkage-attack success on a table before and after obfuscation.

    Each adversary knows one attribute subset of one target. Against the
    before table the known values are the target's original values. Against
    the after table they are the original values (``knowledge="original"``)
    or the published ones (``"published"``). With ``targets_per_subset`` unset
    every record is attacked once per subset; otherwise targets are drawn
    uniformly with replacement from ``rng``.
    """
    check_aligned(table_before, table_after)
    knowledge = KnowledgeSource(knowledge)
    if not adversary_attr_subsets:
        raise ParameterError("need at least one adversary attribute subset")
    if len(table_before) == 0:
        raise ParameterError("cannot attack an empty table")
    source = as_source(rng)
    n = len(table_before)
    per_subset = []
    all_before: List[float] = []
    all_after: List[float] = []
    for s_idx, subset in enumerate(adversary_attr_subsets):
        subset = tuple(subset)
        for name in subset:
            table_before.schema.index(name)
        if targets_per_subset is None:
            targets = range(n)
        else:
            if targets_per_subset < 1:
                raise ParameterError("targets_per_subset must be >= 1")
            targets = source.child(s_idx).generator.integers(0, n, size=targets_per_subset).tolist()
        before, after = [], []
        for target in targets:
            orig = {a: table_before.records[target].values[table_before.schema.index(a)] for a in subset}
            before.append(linkage_attack(table_before, AdversaryKnowledge(orig, target)).success_probability)
            if knowledge is KnowledgeSource.ORIGINAL:
                known = orig
            else:
                known = {a: table_after.records[target].values[table_after.schema.index(a)] for a in subset}
            after.append(linkage_attack(table_after, AdversaryKnowledge(known, target)).success_probability)
        per_subset.append(SubsetSummary(subset, len(before), float(np.mean(before)), float(np.mean(after))))
        all_before += before
        all_after += after
    return AttackSummary(len(all_before), float(np.mean(all_before)), float(np.mean(all_after)),
                         knowledge.value, tuple(per_subset))


def all_subsets(names: Sequence[str], size: int) -> List[Tuple[str, ...]]:
    return list(itertools.combinations(names, size))
