"""Queryable edge/fog video pipeline: body-region extraction, color clustering,
and operator match reports, without shipping raw video off the camera."""

__version__ = "0.1.0"
