"""Privacy metrics, attribute obfuscation and adversarial perturbation for face datasets."""

__version__ = "0.1.0"

from .attributes import (
    AttributeSchema,
    AttributeTable,
    EquivalenceClass,
    Record,
    build_table,
    marginal_distribution,
    parse_celeba_attrs,
    parse_identity_map,
    partition_equivalence_classes,
)
from .emd import DiscreteDistribution, GroundDistance, emd
from .metrics import PrivacyReport, entropy_l_diversity, k_anonymity, privacy_report, t_closeness_max_distance
from .ppas import PpasConfig, ppas_apply_table, ppas_select_record, randomized_response
from .rng import RandomSource

__all__ = [
    "AttributeSchema", "AttributeTable", "EquivalenceClass", "Record", "build_table",
    "marginal_distribution", "parse_celeba_attrs", "parse_identity_map", "partition_equivalence_classes",
    "DiscreteDistribution", "GroundDistance", "emd", "PrivacyReport", "entropy_l_diversity",
    "k_anonymity", "privacy_report", "t_closeness_max_distance", "PpasConfig", "ppas_apply_table",
    "ppas_select_record", "randomized_response", "RandomSource",
]
