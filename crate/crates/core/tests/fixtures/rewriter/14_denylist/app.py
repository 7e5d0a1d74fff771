import plugins
import heavy


def registered():
    return sorted(plugins.REGISTRY)


def handler():
    return heavy.run()
