"""Flying-agent hide-and-seek: simulator, sensors, curriculum and self-play training."""

__version__ = "0.1.0"
