import sys
from heavy.drawing.colors import (
    Palette,
    blend as mix,
)


def render(n):
    return ",".join(Palette(n).colors())


def combine(a, b):
    return mix(a, b)


def version():
    return sys.version_info[0]
