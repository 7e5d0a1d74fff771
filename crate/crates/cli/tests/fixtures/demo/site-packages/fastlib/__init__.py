from fastlib.text import normalize
