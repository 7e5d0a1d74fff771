def run(x):
    return x + 100
