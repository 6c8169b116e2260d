# Copyright (c) 2026 tinyvsr contributors
# SPDX-License-Identifier: Apache-2.0
"""Locates the CMake-built _core module and CLI binary for the smoke tests.

TINYVSR_BUILD_DIR (set by ctest) points at the build tree; a source checkout
with ./build works out of the box.
"""
import os
import sys
from pathlib import Path

import pytest

_HERE = Path(__file__).resolve()
_REPO = _HERE.parents[2]
_BUILD = Path(os.environ.get("TINYVSR_BUILD_DIR", _REPO / "build"))

if str(_BUILD) not in sys.path:
    sys.path.insert(0, str(_BUILD))
if str(_REPO / "python") not in sys.path:
    sys.path.insert(0, str(_REPO / "python"))


@pytest.fixture(scope="session")
def cli_path():
    for candidate in (_BUILD / "tools" / "tinyvsr", _BUILD / "tinyvsr"):
        if candidate.exists():
            return str(candidate)
    pytest.skip("tinyvsr CLI binary not found; build the project first")


@pytest.fixture(scope="session")
def build_dir():
    return _BUILD
