from __future__ import annotations

import pytest

from corpusfixtures import ClusteredFixture, make_clustered_fixture


@pytest.fixture
def clustered_fixture() -> ClusteredFixture:
    return make_clustered_fixture()
