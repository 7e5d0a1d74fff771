"""Service with several consumers of one heavy library."""
import os
import heavy

DEFAULT = 4


def total(values):
    return sum(heavy.score(v) for v in values)


def describe(x):
    # comment before the first statement stays put
    name = heavy.label(x)
    return name.lower()


class Service:
    prefix = "svc"

    def handle(self, x):
        return "%s:%s" % (self.prefix, heavy.label(x))

    def plain(self):
        return self.prefix.upper()


def unrelated():
    return os.sep
