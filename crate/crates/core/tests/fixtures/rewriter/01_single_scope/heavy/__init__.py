import time

LOADED_AT = time.monotonic()


def run(event):
    return {"echo": event, "n": len(str(event))}
