def score(x):
    return x * 3 + 1


def label(x):
    return "L%d" % x
