import heavy.codec as hc
import heavy as hv


def encode(s):
    return hc.encode(s)


def name():
    return hv.NAME.title()


def both(s):
    return hv.NAME + ":" + hc.encode(s)
