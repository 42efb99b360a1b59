class A:
    x = 1

    def m(self):
        return "A"


class B(A):
    pass


class C(A):
    def m(self):
        return "C"


class D(B, C):
    pass
