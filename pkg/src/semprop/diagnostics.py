"""Counters that make silent numerical policies visible in reports."""

from dataclasses import dataclass, field


@dataclass
class Diagnostics:
    """Mutable counters threaded through update pipelines.

    beta_floor_clamps counts shape parameters lifted to the floor so that
    second and fourth variance moments exist; singular_fallbacks counts
    components whose projection denominator collapsed and whose parameters
    were carried over from the pre-update prior; psi_out_of_range counts
    converted measurements beyond the configured sanity bound.
    """

    beta_floor_clamps: int = 0
    singular_fallbacks: int = 0
    psi_out_of_range: int = 0
    notes: list = field(default_factory=list)

    def merge(self, other):
        self.beta_floor_clamps += other.beta_floor_clamps
        self.singular_fallbacks += other.singular_fallbacks
        self.psi_out_of_range += other.psi_out_of_range
        self.notes.extend(other.notes)

    def as_dict(self):
        return {
            "beta_floor_clamps": self.beta_floor_clamps,
            "singular_fallbacks": self.singular_fallbacks,
            "psi_out_of_range": self.psi_out_of_range,
        }
