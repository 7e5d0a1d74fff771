import time

time.sleep(0.01)


def describe(text):
    return "parse(%s)" % text
