from __future__ import annotations

from datetime import date, datetime, timezone

import pytest

from expertkb.model import Modality
from expertkb.runtime import FixedClock, SeededIdGenerator
from expertkb.store import KnowledgeStore

FIXED_NOW = datetime(2026, 1, 5, 9, 0, 0, tzinfo=timezone.utc)


@pytest.fixture
def clock():
    return FixedClock(FIXED_NOW)


@pytest.fixture
def store(tmp_path, clock):
    return KnowledgeStore(
        data_dir=str(tmp_path / "data"),
        clock=clock,
        ids=SeededIdGenerator(7),
        name_dictionary=["Janet Torres", "Omar Haddad"],
    )


@pytest.fixture
def expert(store):
    return store.register_expert("T. Reyes", {"pump_maintenance"})


@pytest.fixture
def consent(store, expert):
    return store.grant_consent(
        expert_id=expert.expert_id,
        scope_domain_tags={"pump_maintenance"},
        scope_modalities=set(Modality),
        authorized_principals={"analyst-1", expert.expert_id},
        retention_until=date(2030, 1, 1),
    )
