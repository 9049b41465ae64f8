"""Urban intersection simulator co-training a self-driving car with
trait-driven jaywalking pedestrians, plus trajectory-level metrics for the
behavior gap between crosswalk crossings and jaywalking."""

__version__ = "0.1.0"
