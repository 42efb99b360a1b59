class P(Q):
    pass


class Q(P):
    def q(self):
        return 1
