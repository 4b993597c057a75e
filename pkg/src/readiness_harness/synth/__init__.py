"""Synthetic ticket generation, filtering, auditing and splitting."""

from .bank import DEFAULT_BANK, TemplateBank
from .generator import QuotaSpec, SyntheticTicket, augment, default_quotas, generate
from .quality import FilterResult, QualityReport, audit, filter_tickets, js_divergence, quality_score
from .splits import SplitResult, stratified_split, write_dataset_card, write_splits

__all__ = [
    "DEFAULT_BANK",
    "FilterResult",
    "QualityReport",
    "QuotaSpec",
    "SplitResult",
    "SyntheticTicket",
    "TemplateBank",
    "audit",
    "augment",
    "default_quotas",
    "filter_tickets",
    "generate",
    "js_divergence",
    "quality_score",
    "stratified_split",
    "write_dataset_card",
    "write_splits",
]
