RATE = 0.5


class Base:
    def __init__(self):
        self.x = 1

    def run(self):
        return self.x


class Engine(Base):
    def run(self):
        return "engine running"

    def stop(self):
        return "engine stopped"


def helper():
    return RATE * 2
