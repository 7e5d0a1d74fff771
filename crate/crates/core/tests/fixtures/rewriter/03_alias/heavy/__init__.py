NAME = "heavy"
