"""Campus epidemic models: dorm room occupancy and online-class cutoffs."""

__version__ = "1.0.0"
