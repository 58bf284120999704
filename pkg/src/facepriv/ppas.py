"""Privacy-preserving attribute selection (PPAS) and randomization mechanisms.

For each record and each binary attribute ``E`` the selector compares a
reference distribution ``S`` of ``E`` with the distribution ``S_E`` of ``E``
among the records the adversary cannot tell apart from this one. The value is
kept when ``EMD(S, S_E) <= t`` and negated otherwise. The selected vector is
then passed through binary randomized response with budget ``epsilon`` per
attribute.

``S_E`` is chosen by :class:`QuasiPolicy`:

``all-attributes`` (default)
    records matching this record on every attribute. ``E`` is part of the
    match, so ``S_E`` is the point mass at the record's current value and
    the test reduces to ``|S(1) - value| <= t``.
``all-other-attributes``
    records matching on every attribute except ``E``.
``fixed``
    records matching on ``PpasConfig.quasi_ids``.
``global-vs-reference``
    the whole-table marginal of ``E``, compared against a supplied reference.

``S`` is ``reference_dists[E]`` when supplied, else the current table marginal.

With ``update="sequential"`` (default) records are processed in table order
and every flip is visible to the decisions that follow, both for ``S`` and
``S_E``. With ``update="simultaneous"`` every decision reads the input table.
Simultaneous updates cannot make two records that differ in one attribute
agree: both sides see mirror-image distributions and flip together.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ._numeric import round_half_away
from .attributes import AttributeTable, Record
from .emd import DiscreteDistribution, GroundDistance, emd
from .errors import ConfigurationError, DomainError, ParameterError, PersonSpecificError, SchemaError
from .rng import RandomSource, as_source

INF = math.inf

log = logging.getLogger(__name__)


class QuasiPolicy(str, enum.Enum):
    ALL_ATTRIBUTES = "all-attributes"
    ALL_OTHER = "all-other-attributes"
    FIXED = "fixed"
    GLOBAL_VS_REFERENCE = "global-vs-reference"


class UpdateMode(str, enum.Enum):
    SEQUENTIAL = "sequential"
    SIMULTANEOUS = "simultaneous"


def parse_epsilon(value) -> float:
    """Accept a positive number, or ``None``/"inf" meaning no perturbation."""
    if value is None:
        return INF
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity", "+inf", "none"):
            return INF
        try:
            value = float(value)
        except ValueError:
            raise ParameterError(f"epsilon {value!r} is not a number") from None
    eps = float(value)
    if math.isnan(eps) or eps <= 0:
        raise ParameterError(f"epsilon must be > 0 (or inf), got {value!r}")
    return eps


@dataclass(frozen=True)
class PpasConfig:
    t: float
    epsilon: float = INF
    quasi_policy: QuasiPolicy = QuasiPolicy.ALL_ATTRIBUTES
    quasi_ids: Optional[Tuple[str, ...]] = None
    reference_dists: Optional[Mapping[str, DiscreteDistribution]] = None
    ground_distance: GroundDistance = GroundDistance.BINARY
    update: UpdateMode = UpdateMode.SEQUENTIAL

    def __post_init__(self):
        t = float(self.t)
        if math.isnan(t) or t < 0:
            raise ParameterError(f"t must be >= 0, got {self.t!r}")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "epsilon", parse_epsilon(self.epsilon))
        object.__setattr__(self, "quasi_policy", QuasiPolicy(self.quasi_policy))
        object.__setattr__(self, "ground_distance", GroundDistance(self.ground_distance))
        object.__setattr__(self, "update", UpdateMode(self.update))
        if self.quasi_ids is not None:
            object.__setattr__(self, "quasi_ids", tuple(self.quasi_ids))
        if self.quasi_policy is QuasiPolicy.FIXED and not self.quasi_ids:
            raise ConfigurationError("quasi_policy 'fixed' needs quasi_ids")
        if self.quasi_policy is QuasiPolicy.GLOBAL_VS_REFERENCE and not self.reference_dists:
            raise ConfigurationError("quasi_policy 'global-vs-reference' needs reference_dists")

    @classmethod
    def from_json(cls, obj: Mapping) -> "PpasConfig":
        known = {"t", "epsilon", "quasi_policy", "quasi_ids", "reference_dists", "ground_distance",
                 "update", "seed"}
        extra = set(obj) - known
        if extra:
            raise ConfigurationError(f"unknown config keys: {sorted(extra)}")
        if "t" not in obj:
            raise ConfigurationError("config needs 't'")
        refs = obj.get("reference_dists")
        if refs is not None:
            refs = {name: _reference_from_json(v) for name, v in refs.items()}
        return cls(
            t=obj["t"],
            epsilon=obj.get("epsilon"),
            quasi_policy=obj.get("quasi_policy", QuasiPolicy.ALL_ATTRIBUTES.value),
            quasi_ids=obj.get("quasi_ids"),
            reference_dists=refs,
            ground_distance=obj.get("ground_distance", GroundDistance.BINARY.value),
            update=obj.get("update", UpdateMode.SEQUENTIAL.value),
        )

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "epsilon": "inf" if math.isinf(self.epsilon) else self.epsilon,
            "quasi_policy": self.quasi_policy.value,
            "quasi_ids": list(self.quasi_ids) if self.quasi_ids is not None else None,
            "reference_dists": ({k: v.to_json() for k, v in sorted(self.reference_dists.items())}
                                if self.reference_dists else None),
            "ground_distance": self.ground_distance.value,
            "update": self.update.value,
        }


def _reference_from_json(v) -> DiscreteDistribution:
    # either {"support": [...], "masses": [...]} or a bare P(value = 1)
    if isinstance(v, (int, float)):
        p = float(v)
        if not 0 <= p <= 1:
            raise ConfigurationError(f"reference probability {p} outside [0, 1]")
        return DiscreteDistribution((0, 1), (1 - p, p))
    try:
        return DiscreteDistribution.from_json(v)
    except (KeyError, TypeError, DomainError) as exc:
        raise ConfigurationError(f"bad reference distribution: {exc}") from None


@dataclass(frozen=True)
class AttributeDecision:
    attribute: str
    d: float
    kept: bool
    perturbed: bool = False

    def to_json(self) -> dict:
        return {"attribute": self.attribute, "d": self.d, "kept": self.kept, "perturbed": self.perturbed}


@dataclass(frozen=True)
class RecordTrace:
    index: int
    image_id: str
    decisions: Tuple[AttributeDecision, ...]
    epsilon_per_attribute: float
    epsilon_total: float

    @property
    def branch_mask(self) -> np.ndarray:
        """1 where the selection branch negated the attribute."""
        return np.array([0 if dec.kept else 1 for dec in self.decisions], dtype=np.int64)

    def to_json(self) -> dict:
        def eps(x):
            return "inf" if math.isinf(x) else x
        return {
            "index": self.index,
            "image_id": self.image_id,
            "epsilon_per_attribute": eps(self.epsilon_per_attribute),
            "epsilon_total": eps(self.epsilon_total),
            "attributes": [dec.to_json() for dec in self.decisions],
        }


def flip_probability(epsilon: float) -> float:
    """Randomized-response flip probability ``1 / (1 + e^epsilon)``."""
    epsilon = parse_epsilon(epsilon)
    if math.isinf(epsilon):
        return 0.0
    return 1.0 / (1.0 + math.exp(epsilon)) if epsilon < 700 else 0.0


def randomized_response(values: Sequence[int], epsilon, rng) -> np.ndarray:
    """Flip each bit independently with probability ``1 / (1 + e^epsilon)``.

    The likelihood ratio of any output under two different inputs is at most
    ``e^epsilon`` per bit. ``epsilon = inf`` returns the input unchanged.
    """
    values = np.asarray(values, dtype=np.int64)
    if np.any((values != 0) & (values != 1)):
        raise DomainError("randomized response needs binary values")
    p = flip_probability(epsilon)
    if p == 0.0:
        return values.copy()
    flips = as_source(rng).uniform(values.shape) < p
    return np.where(flips, 1 - values, values)


class _Selector:
    """Working state for one PPAS pass over a table."""

    def __init__(self, table: AttributeTable, config: PpasConfig):
        table.schema.require_binary()
        self.table = table
        self.config = config
        self.names = table.schema.names
        self.values = np.array(table.matrix, dtype=np.int64)
        self.ones = self.values.sum(axis=0)
        self.n_records = len(table)
        refs = config.reference_dists or {}
        unknown = set(refs) - set(self.names)
        if unknown:
            raise SchemaError(f"reference distributions for unknown attributes {sorted(unknown)}")
        for name, dist in refs.items():
            if dist.support != (0, 1):
                raise DomainError(f"reference for {name!r} must have support (0, 1)")
        self.refs = refs
        self.fixed_cols = (table.schema.indices(config.quasi_ids)
                           if config.quasi_policy is QuasiPolicy.FIXED else ())

    def _bernoulli(self, ones: int, total: int) -> DiscreteDistribution:
        return DiscreteDistribution((0, 1), (1 - ones / total, ones / total))

    def reference(self, col: int) -> DiscreteDistribution:
        name = self.names[col]
        if name in self.refs:
            return self.refs[name]
        return self._bernoulli(int(self.ones[col]), self.n_records)

    def class_mask(self, r: int, col: int, diff: np.ndarray) -> np.ndarray:
        policy = self.config.quasi_policy
        if policy is QuasiPolicy.ALL_ATTRIBUTES:
            return ~diff.any(axis=1)
        if policy is QuasiPolicy.ALL_OTHER:
            others = np.delete(diff, col, axis=1)
            return ~others.any(axis=1)
        return ~diff[:, list(self.fixed_cols)].any(axis=1)

    def decide(self, r: int, live: bool) -> List[AttributeDecision]:
        t = self.config.t
        row = self.values[r]
        diff = self.values != row
        decisions = []
        for col, name in enumerate(self.names):
            S = self.reference(col)
            if self.config.quasi_policy is QuasiPolicy.GLOBAL_VS_REFERENCE:
                S_E = self._bernoulli(int(self.ones[col]), self.n_records)
            else:
                members = self.class_mask(r, col, diff)
                S_E = self._bernoulli(int(self.values[members, col].sum()), int(members.sum()))
            dist = emd(S, S_E, self.config.ground_distance)
            keep = dist <= t
            decisions.append(AttributeDecision(name, dist, bool(keep)))
            if not keep and live:
                self.values[r, col] = 1 - self.values[r, col]
                self.ones[col] += 1 if self.values[r, col] else -1
                diff[:, col] = self.values[:, col] != self.values[r, col]
        return decisions


def _record_index(table: AttributeTable, record: Union[int, Record]) -> int:
    if isinstance(record, Record):
        try:
            return table.records.index(record)
        except ValueError:
            raise SchemaError(f"record {record.image_id!r} is not in the table") from None
    idx = int(record)
    if not 0 <= idx < len(table):
        raise SchemaError(f"record index {idx} out of range")
    return idx


def _perturb(values: np.ndarray, decisions, epsilon, rng) -> Tuple[np.ndarray, List[AttributeDecision]]:
    out = randomized_response(values, epsilon, rng)
    changed = out != values
    return out, [AttributeDecision(d.attribute, d.d, d.kept, bool(c)) for d, c in zip(decisions, changed)]


def _trace(index, table, decisions, epsilon) -> RecordTrace:
    total = epsilon * len(decisions) if not math.isinf(epsilon) else INF
    return RecordTrace(index, table.records[index].image_id, tuple(decisions), epsilon, total)


def ppas_select_record(record: Union[int, Record], table: AttributeTable, config: PpasConfig,
                       rng: Optional[RandomSource] = None) -> Tuple[np.ndarray, RecordTrace]:
    """Run PPAS for one record against ``table``'s distributions.

    Returns the obfuscated value vector and the per-attribute trace. Later
    attributes of the same record see earlier flips unless ``config.update``
    is ``simultaneous``.
    """
    idx = _record_index(table, record)
    selector = _Selector(table, config)
    decisions = selector.decide(idx, live=config.update is UpdateMode.SEQUENTIAL)
    selected = np.array(table.matrix[idx]) ^ np.array([0 if d.kept else 1 for d in decisions])
    if math.isinf(config.epsilon):
        return selected, _trace(idx, table, decisions, config.epsilon)
    out, decisions = _perturb(selected, decisions, config.epsilon, as_source(rng))
    return out, _trace(idx, table, decisions, config.epsilon)


@dataclass(frozen=True)
class PpasResult:
    table: AttributeTable
    selected: AttributeTable
    traces: Tuple[RecordTrace, ...] = field(repr=False)


def ppas_apply_table(table: AttributeTable, config: PpasConfig, rng) -> PpasResult:
    """Apply PPAS to every record.

    Selection runs first over the whole table (see ``config.update``); the
    perturbation of record ``i`` then draws from ``rng.child(i)``, so output
    depends only on the table, the config and the seed.
    """
    rng = as_source(rng)
    selector = _Selector(table, config)
    sequential = config.update is UpdateMode.SEQUENTIAL
    all_decisions = [selector.decide(r, live=sequential) for r in range(len(table))]
    if sequential:
        selected = selector.values
    else:
        masks = np.array([[0 if d.kept else 1 for d in ds] for ds in all_decisions],
                         dtype=np.int64).reshape(selector.values.shape)
        selected = selector.values ^ masks

    final = selected.copy()
    traces = []
    for r, decisions in enumerate(all_decisions):
        if not math.isinf(config.epsilon):
            final[r], decisions = _perturb(selected[r], decisions, config.epsilon, rng.child(r))
        traces.append(_trace(r, table, decisions, config.epsilon))
    return PpasResult(_rebuild(table, final), _rebuild(table, selected), tuple(traces))


def _rebuild(table: AttributeTable, values: np.ndarray) -> AttributeTable:
    if np.array_equal(values, table.matrix):
        return table
    try:
        return table.with_values(values)
    except PersonSpecificError:
        log.warning("obfuscation merged images of one identity; output is not person-specific")
        return table.with_values(values, person_specific=False)


def gaussian_feature_randomize(features: Sequence[float], gamma: float, sigma: float, rng) -> np.ndarray:
    """Add ``N(0, sigma)`` noise to ``floor(gamma * len)`` features chosen without replacement.

    ``sigma`` is the standard deviation.
    """
    x = np.asarray(features, dtype=np.float64)
    if not 0 <= gamma <= 1:
        raise ParameterError(f"gamma must lie in [0, 1], got {gamma}")
    if sigma < 0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    out = x.copy()
    count = int(math.floor(gamma * x.size))
    if count == 0 or sigma == 0:
        return out
    rng = as_source(rng)
    idx = rng.choice(x.size, count)
    flat = out.reshape(-1)
    flat[idx] += rng.normal(sigma, count)
    return out


def synthesize_noisy_sample(pixels: Sequence[int], sigma: float, rng) -> np.ndarray:
    """New sample from an existing one: ``x -> clamp(round(255 - x + N(0, sigma)), 0, 255)``.

    Works on any array shape; rounding is half away from zero.
    """
    x = np.asarray(pixels)
    if x.size and (x.min() < 0 or x.max() > 255):
        raise ParameterError("pixel values must lie in [0, 255]")
    if sigma < 0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    inverted = 255.0 - x.astype(np.float64)
    if sigma > 0:
        inverted = inverted + as_source(rng).normal(sigma, x.shape)
    return np.clip(round_half_away(inverted), 0, 255).astype(np.uint8)
