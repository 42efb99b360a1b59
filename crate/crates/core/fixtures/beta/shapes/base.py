__all__ = ["Shape", "UNIT"]

UNIT = 1.0
_PRIVATE = 2


class Shape:
    name = "shape"

    def area(self):
        return 0

    def describe(self):
        return self.name
