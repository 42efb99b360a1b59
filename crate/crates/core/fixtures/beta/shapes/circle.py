from .base import Shape, UNIT


class Circle(Shape):
    def __init__(self, radius):
        self.radius = radius * UNIT

    def area(self):
        return 3.14 * self.radius ** 2

    def label(self):
        return self.name + "/circle"
