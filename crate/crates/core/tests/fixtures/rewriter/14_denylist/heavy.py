def run():
    return "heavy"
