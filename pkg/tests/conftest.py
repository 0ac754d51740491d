from __future__ import annotations

import pytest

from robocoach.catalog import Catalog
from robocoach.config import parse_config
from robocoach.speech import PhrasePools


@pytest.fixture(scope="session")
def catalog() -> Catalog:
    return Catalog.load_default()


@pytest.fixture(scope="session")
def pools(catalog) -> PhrasePools:
    return PhrasePools.load_default(catalog)


def make_config(activities: list[str], seed: int = 7, engine: str = "", header: str = "") -> str:
    """Build a session config text from compact activity specs.

    Each entry is e.g. "StaticQuads 3x10 fast", "ToyRelay rounds=2",
    "FarewellDance", "IntroSpeech".
    """
    lines = [
        "format_version = 1",
        "patient = Alex",
        "carer = Jo",
        f"seed = {seed}",
    ]
    if header:
        lines.append(header)
    if engine:
        lines += ["", "[engine]", engine]
    for item in activities:
        parts = item.split()
        lines += ["", "[activity]", f"name = {parts[0]}"]
        for part in parts[1:]:
            if "x" in part and part[0].isdigit():
                sets, reps = part.split("x")
                lines += [f"sets = {sets}", f"reps = {reps}"]
            elif part.startswith("rounds="):
                lines.append(f"rounds = {part.split('=')[1]}")
            else:
                lines.append(f"speed = {part}")
    return "\n".join(lines) + "\n"


def parsed(activities: list[str], seed: int = 7, engine: str = ""):
    return parse_config(make_config(activities, seed=seed, engine=engine))
