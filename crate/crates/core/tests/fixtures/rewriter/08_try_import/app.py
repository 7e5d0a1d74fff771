try:
    import heavy
except ImportError:
    heavy = None

if heavy is not None:
    import other


def handler(x):
    if heavy is None:
        return x
    return heavy.run(x), other.run(x)
