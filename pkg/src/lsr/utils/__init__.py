from . import parallel, singleton

__all__ = [
    "parallel",
    "singleton",
]
