def pos_tag(tokens):
    return [(t, "NN") for t in tokens]
