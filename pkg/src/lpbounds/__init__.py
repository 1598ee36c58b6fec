"""Linear programming bounds for spherical codes and sphere packings."""

__version__ = "0.1.0"
