import asyncio
import heavy


async def handler(x):
    """Fetch one item.

    The docstring spans lines.
    """
    return await heavy.fetch(x)


def documented():
    "Only a docstring before the use."
    return heavy.info()


def run(x):
    return asyncio.run(handler(x))
