"""Shared fixtures: synthetic populations with known group provenance.

The "standard" fixture is a biased pool at benchmark scale: a four-mode
minority (20% of images) far from a unimodal majority (80%), with the
target drawn fresh from the minority mixture. Group membership is encoded
in identity attrs, so tests can check where selections came from.
"""

from __future__ import annotations

import numpy as np
import pytest

from fidsearch.features_io import FeatureTable, IdentityIndex
from fidsearch.synth import GroupSpec, PopulationSpec, generate

STANDARD_DIM = 64
MINORITY_GAP = 6.0
MODE_OFFSET = 2.5

# acceptance-criterion results, printed as a terminal summary section
_CRITERIA: list[tuple[str, bool, str]] = []


def record_criterion(name: str, ok: bool, detail: str = "") -> None:
    _CRITERIA.append((name, bool(ok), detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _CRITERIA:
        status = "PASS" if ok else "FAIL"
        suffix = f"  [{detail}]" if detail else ""
        terminalreporter.write_line(f"{status}  {name}{suffix}")


def _mode_offsets(dim: int) -> dict[str, np.ndarray]:
    e0 = np.zeros(dim)
    e0[0] = MODE_OFFSET
    e1 = np.zeros(dim)
    e1[1] = MODE_OFFSET
    return {"a": e0, "b": -e0, "c": e1, "d": -e1}


def biased_pool(
    dim: int = STANDARD_DIM,
    seed: int = 101,
    minority_identities_per_mode: int = 200,
    majority_identities: int = 3200,
) -> tuple[FeatureTable, IdentityIndex]:
    """Pool with a multi-modal minority far from a large unimodal majority."""
    delta = np.full(dim, MINORITY_GAP / np.sqrt(dim))
    offsets = _mode_offsets(dim)
    minority_frac = 0.2 / 4
    groups = [
        GroupSpec(
            name=f"minority-{m}",
            proportion=minority_frac,
            mean=delta + offsets[m],
            cov=np.eye(dim),
            identities=minority_identities_per_mode,
            images_per_identity=2,
        )
        for m in "abcd"
    ]
    groups.append(
        GroupSpec(
            name="majority",
            proportion=0.8,
            mean=np.zeros(dim),
            cov=np.eye(dim),
            identities=majority_identities,
            images_per_identity=2,
        )
    )
    return generate(PopulationSpec(groups=groups, dim=dim, seed=seed))


def minority_target(dim: int = STANDARD_DIM, seed: int = 202) -> FeatureTable:
    """300 fresh images from the minority mixture (not in the pool)."""
    delta = np.full(dim, MINORITY_GAP / np.sqrt(dim))
    offsets = _mode_offsets(dim)
    groups = [
        GroupSpec(
            name=f"target-{m}",
            proportion=0.25,
            mean=delta + offsets[m],
            cov=np.eye(dim),
            identities=n,
            images_per_identity=2,
        )
        for m, n in zip("abcd", (38, 38, 37, 37))
    ]
    return generate(PopulationSpec(groups=groups, dim=dim, seed=seed))[0]


@pytest.fixture(scope="session")
def standard_pool() -> tuple[FeatureTable, IdentityIndex]:
    return biased_pool()


@pytest.fixture(scope="session")
def standard_target() -> FeatureTable:
    return minority_target()


@pytest.fixture(scope="session")
def small_pool() -> tuple[FeatureTable, IdentityIndex]:
    """Cheap two-group variant for unit tests: d=8, 200 identities."""
    dim = 8
    delta = np.full(dim, 6.0 / np.sqrt(dim))
    groups = [
        GroupSpec("minority", 0.25, delta, np.eye(dim), identities=50, images_per_identity=2),
        GroupSpec("majority", 0.75, np.zeros(dim), np.eye(dim), identities=150, images_per_identity=2),
    ]
    return generate(PopulationSpec(groups=groups, dim=dim, seed=11))


@pytest.fixture(scope="session")
def small_target() -> FeatureTable:
    dim = 8
    delta = np.full(dim, 6.0 / np.sqrt(dim))
    groups = [GroupSpec("target", 1.0, delta, np.eye(dim), identities=40, images_per_identity=2)]
    return generate(PopulationSpec(groups=groups, dim=dim, seed=12))[0]
