"""tendonsim: trial-to-trial motion refinement for tendon-driven robots."""

__version__ = "0.1.0"
