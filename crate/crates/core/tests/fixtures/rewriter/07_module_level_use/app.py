import heavy
import light

BANNER = "heavy " + heavy.VERSION


def handler(x):
    return heavy.run(x), light.run(x)


def banner():
    return BANNER
