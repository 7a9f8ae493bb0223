"""Runs the test_* functions of a test module when it is executed as a script."""

import sys
import traceback
from typing import Callable, Dict, Type


def raises(error: Type[BaseException], fn: Callable, *args, **kwargs) -> BaseException:
    """Call fn and return the expected exception; fail if it is not raised."""
    try:
        fn(*args, **kwargs)
    except error as exc:
        return exc
    raise AssertionError(f"{getattr(fn, '__name__', fn)} did not raise {error.__name__}")


def run_tests(namespace: Dict[str, object], title: str) -> None:
    print(f"🧪 {title}")
    print("=" * 50)
    failures = 0
    tests = [(name, fn) for name, fn in namespace.items()
             if name.startswith("test_") and callable(fn) and getattr(fn, "__test__", True)]
    for name, fn in tests:
        try:
            fn()
            print(f"✅ {name}")
        except Exception:
            failures += 1
            print(f"❌ {name}")
            traceback.print_exc()
    print("-" * 50)
    print(f"{len(tests) - failures}/{len(tests)} passed")
    sys.exit(1 if failures else 0)
