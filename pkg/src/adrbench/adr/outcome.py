"""Common result container for the inference methods."""

from __future__ import annotations

from dataclasses import dataclass, field

from adrbench.dist import DomainDistribution
from adrbench.policy import Policy


@dataclass
class IterationResult:
    """One reportable point: distribution, policy, and target return."""

    iteration: int
    inferred: DomainDistribution | None
    policy: Policy | None
    raw_return: float
    transitions_used: int


@dataclass
class AdrOutcome:
    """Per-iteration results of one inference run, plus method-specific extras."""

    method: str
    iterations: list[IterationResult] = field(default_factory=list)
    extras: dict = field(default_factory=dict)
