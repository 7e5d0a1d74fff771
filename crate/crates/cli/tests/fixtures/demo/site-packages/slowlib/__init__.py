import time

# Stands in for a library with an expensive import (model loading, plugin
# discovery and the like).
time.sleep(0.2)

from slowlib.render import render  # noqa: E402
