"""Shared fixtures and the run cache used by the long acceptance experiments.

The acceptance suite drives optimization runs that take minutes to hours.
Each run is deterministic given its resolved config, so completed run
directories are cached under tests/_cache keyed by a hash of the resolved
config (plus a manual cache-format version).  Delete the cache directory, or
set SPINVMC_TEST_CACHE=off, to force everything to recompute from scratch.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
from pathlib import Path

import numpy as np
import pytest

from spinvmc.runner import RunConfig, resolve_config, run_experiment

CACHE_VERSION = "v1"


def _cache_root() -> Path | None:
    env = os.environ.get("SPINVMC_TEST_CACHE", "")
    if env.lower() == "off":
        return None
    if env:
        return Path(env)
    return Path(__file__).parent / "_cache"


def cached_run(raw_config: dict) -> Path:
    """Run an experiment once per resolved config; reuse the directory after.

    A run is only considered complete when its done-marker exists, so an
    interrupted run recomputes.
    """
    config = resolve_config(raw_config)
    root = _cache_root()
    if root is None:
        out = Path(os.environ.get("PYTEST_TMP", "/tmp")) / "spinvmc-nocache"
        out.mkdir(parents=True, exist_ok=True)
        return run_experiment(config, out / hashlib.sha256(repr(sorted(raw_config.items())).encode()).hexdigest()[:16])
    payload = json.dumps(
        {"cache": CACHE_VERSION, "config": config.resolved_dict()}, sort_keys=True
    )
    key = hashlib.sha256(payload.encode()).hexdigest()[:20]
    out = root / key
    marker = out / ".complete"
    if marker.exists():
        return out
    if out.exists():
        shutil.rmtree(out)
    run_experiment(config, out)
    if (out / "failure.json").exists():
        raise RuntimeError(
            f"run failed mid-way: {(out / 'failure.json').read_text()}"
        )
    marker.write_text(payload + "\n")
    return out


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
