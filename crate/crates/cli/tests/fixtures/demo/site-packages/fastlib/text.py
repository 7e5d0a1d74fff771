import re

_WORD = re.compile(r"[a-z0-9]+")


def normalize(text):
    return _WORD.findall(text.lower())
