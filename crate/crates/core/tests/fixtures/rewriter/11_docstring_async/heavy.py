async def fetch(x):
    return "fetched-%s" % x


def info():
    return "info"
