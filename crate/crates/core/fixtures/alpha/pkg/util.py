def helper2(value):
    return value + 2
