"""Thread-safe singleton metaclass used for process-wide runtime state."""

import threading


class SingletonMeta(type):
    """Metaclass that keeps one instance per class.

    The instance map is guarded by a class-level lock so concurrent first calls
    from worker threads still construct a single object.

    Example:
        class Budget(metaclass=SingletonMeta):
            def __init__(self):
                self.threads = 1

        assert Budget() is Budget()
    """

    _instances = {}
    _lock = threading.Lock()

    def __call__(cls, *args, **kwargs):
        with cls._lock:
            if cls not in cls._instances:
                cls._instances[cls] = super().__call__(*args, **kwargs)
        return cls._instances[cls]

    def reset(cls) -> None:
        """Drop the cached instance so the next call builds a fresh one."""
        with cls._lock:
            cls._instances.pop(cls, None)
