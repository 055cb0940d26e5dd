"""Memory-rate tradeoff of the modified coded caching scheme under
nonuniform file popularity."""

from mccs.model import Placement, ProblemInstance, new_instance, validate_placement, zipf_popularity

__version__ = "0.1.0"

__all__ = ["Placement", "ProblemInstance", "new_instance", "validate_placement", "zipf_popularity"]
