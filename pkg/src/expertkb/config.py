"""Service configuration: a single JSON file.

The token table stands in for enterprise auth: each bearer token maps to a
principal id and role. Tokens are hashed at load; only hashes are kept in
memory. `id_seed` and `fixed_time` exist for reproducible fixtures and
differential tests.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .ingestion import load_name_dictionary
from .runtime import Clock, FixedClock, IdGenerator, SeededIdGenerator, parse_timestamp

ROLES = ("Expert", "Engineer", "Admin")


@dataclass(frozen=True)
class Principal:
    principal_id: str
    role: str
    token_hash: str  # sha256; the clear token is never stored

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")


def hash_token(token: str) -> str:
    return hashlib.sha256(token.encode("utf-8")).hexdigest()


@dataclass
class Config:
    listen_address: str = "127.0.0.1:8080"
    data_dir: str = "./data"
    k_default: int = 8
    token_budget: int = 2048
    sla_window_hours: int = 72
    embedding_dimension: int = 64
    name_dictionary: Optional[str] = None
    principals_by_hash: dict[str, Principal] = field(default_factory=dict)
    id_seed: Optional[int] = None
    fixed_time: Optional[str] = None
    cli_principal: str = "local-admin"
    cli_token: Optional[str] = None

    @classmethod
    def from_file(cls, path: str) -> "Config":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls.from_dict(raw, base_dir=Path(path).parent)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Optional[Path] = None) -> "Config":
        def resolve(p: Optional[str]) -> Optional[str]:
            if p is None or base_dir is None:
                return p
            candidate = Path(p)
            return str(candidate if candidate.is_absolute() else base_dir / candidate)

        principals = {}
        for token, spec in raw.get("tokens", {}).items():
            principal = Principal(
                principal_id=spec["principal_id"],
                role=spec["role"],
                token_hash=hash_token(token),
            )
            principals[principal.token_hash] = principal
        return cls(
            listen_address=raw.get("listen_address", "127.0.0.1:8080"),
            data_dir=resolve(raw.get("data_dir", "./data")),
            k_default=raw.get("k_default", 8),
            token_budget=raw.get("token_budget", 2048),
            sla_window_hours=raw.get("sla_window_hours", 72),
            embedding_dimension=raw.get("embedding_dimension", 64),
            name_dictionary=resolve(raw.get("name_dictionary")),
            principals_by_hash=principals,
            id_seed=raw.get("id_seed"),
            fixed_time=raw.get("fixed_time"),
            cli_principal=raw.get("cli_principal", "local-admin"),
            cli_token=raw.get("cli_token"),
        )

    def lookup_token(self, token: str) -> Optional[Principal]:
        return self.principals_by_hash.get(hash_token(token))

    def make_clock(self) -> Clock:
        if self.fixed_time:
            return FixedClock(parse_timestamp(self.fixed_time))
        return Clock()

    def make_ids(self) -> IdGenerator:
        if self.id_seed is not None:
            return SeededIdGenerator(self.id_seed)
        return IdGenerator()

    def load_names(self) -> Optional[list]:
        if self.name_dictionary and Path(self.name_dictionary).exists():
            return load_name_dictionary(self.name_dictionary)
        return None


def open_store(config: Config):
    """Build a KnowledgeStore from configuration and load any persisted state."""
    from .store import KnowledgeStore

    store = KnowledgeStore(
        data_dir=config.data_dir,
        embedding_dimension=config.embedding_dimension,
        clock=config.make_clock(),
        ids=config.make_ids(),
        name_dictionary=config.load_names(),
        sla_window_hours=config.sla_window_hours,
    )
    store.load()
    return store
