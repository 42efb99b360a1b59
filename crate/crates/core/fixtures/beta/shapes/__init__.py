from .base import *
from .circle import Circle

__all__ = ["Shape", "Circle", "UNIT"]
