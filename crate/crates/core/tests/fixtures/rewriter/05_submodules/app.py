import nltk
from nltk.tokenize import word_tokenize
from nltk import sem
import nltk.stem as stem
from nltk import parse as nparse
from nltk.tag import pos_tag


def sentiment(text):
    return len(word_tokenize(text))


def entities(text):
    return sem.describe(text)


def analyse(text):
    words = word_tokenize(text)
    return [stem.describe(w) for w in words] + [nparse.describe(text)]


def tags(text):
    return pos_tag(word_tokenize(text))


def version():
    return nltk.__version__
