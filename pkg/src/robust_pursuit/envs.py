"""Shipped example environments and path resolution for the CLI."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .geometry import Environment, load_environment

_FIXTURES = ("convex", "lshape", "comb", "rooms")


def fixture_names() -> tuple[str, ...]:
    return _FIXTURES


def fixture_path(name: str) -> Path:
    if name not in _FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; available: {', '.join(_FIXTURES)}")
    return Path(str(resources.files("robust_pursuit").joinpath("data", f"{name}.json")))


def load_fixture(name: str) -> Environment:
    return load_environment(fixture_path(name))


def resolve_environment(spec: str) -> Environment:
    """Load from a filesystem path, or by shipped fixture name."""
    p = Path(spec)
    if p.exists():
        return load_environment(p)
    if spec in _FIXTURES:
        return load_fixture(spec)
    raise FileNotFoundError(f"no such environment file or fixture: {spec}")
