"""Exact flat vector index with metadata filtering and bit-exact persistence.

Records hold a unit vector (stored as float32, matching the file format) and
exactly five metadata fields. Search is an exact cosine scan; erasure
physically removes records so a flushed file retains no trace of them.

File layout (all integers little-endian):
    magic ``XMND`` | version u16 | dimension u16 | record count u64 |
    per record: artifact_id (16 raw bytes) | vector (d float32) |
    metadata block (u32 length + canonical JSON of the five fields) |
    trailing CRC-32C over everything before it (u32).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from datetime import date
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import CorruptFile, DimensionMismatch, NotValidated, VersionMismatch
from .model import ArtifactState, ArtifactType

MAGIC = b"XMND"
FORMAT_VERSION = 1

_CRC32C_POLY = 0x82F63B78
_CRC32C_TABLE: list[int] = []
for _i in range(256):
    _crc = _i
    for _ in range(8):
        _crc = (_crc >> 1) ^ _CRC32C_POLY if _crc & 1 else _crc >> 1
    _CRC32C_TABLE.append(_crc)


def crc32c(data: bytes, crc: int = 0) -> int:
    crc ^= 0xFFFFFFFF
    for b in data:
        crc = _CRC32C_TABLE[(crc ^ b) & 0xFF] ^ (crc >> 8)
    return crc ^ 0xFFFFFFFF


METADATA_FIELDS = ("doc_id", "capture_date", "artifact_type", "confidence", "domain_tag")


@dataclass(frozen=True)
class RecordMetadata:
    doc_id: str
    capture_date: date
    artifact_type: ArtifactType
    confidence: float
    domain_tag: str

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "capture_date": self.capture_date.isoformat(),
            "artifact_type": self.artifact_type.value,
            "confidence": self.confidence,
            "domain_tag": self.domain_tag,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RecordMetadata":
        return cls(
            doc_id=d["doc_id"],
            capture_date=date.fromisoformat(d["capture_date"]),
            artifact_type=ArtifactType(d["artifact_type"]),
            confidence=d["confidence"],
            domain_tag=d["domain_tag"],
        )


@dataclass(frozen=True)
class EmbeddingRecord:
    artifact_id: str
    vector: np.ndarray  # float32, unit norm up to float32 rounding
    metadata: RecordMetadata


@dataclass(frozen=True)
class MetadataFilter:
    """Conjunction of optional predicates; the empty filter matches everything."""

    artifact_types: Optional[frozenset[ArtifactType]] = None
    domain_tags: Optional[frozenset[str]] = None
    capture_date_range: Optional[tuple[date, date]] = None  # inclusive bounds
    min_confidence: Optional[float] = None

    def matches(self, metadata: RecordMetadata) -> bool:
        if self.artifact_types is not None and metadata.artifact_type not in self.artifact_types:
            return False
        if self.domain_tags is not None and metadata.domain_tag not in self.domain_tags:
            return False
        if self.capture_date_range is not None:
            lo, hi = self.capture_date_range
            if not lo <= metadata.capture_date <= hi:
                return False
        if self.min_confidence is not None and metadata.confidence < self.min_confidence:
            return False
        return True

    def to_dict(self) -> dict:
        d: dict = {}
        if self.artifact_types is not None:
            d["artifact_types"] = sorted(t.value for t in self.artifact_types)
        if self.domain_tags is not None:
            d["domain_tags"] = sorted(self.domain_tags)
        if self.capture_date_range is not None:
            d["capture_date_range"] = [x.isoformat() for x in self.capture_date_range]
        if self.min_confidence is not None:
            d["min_confidence"] = self.min_confidence
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetadataFilter":
        return cls(
            artifact_types=(
                frozenset(ArtifactType(t) for t in d["artifact_types"])
                if d.get("artifact_types") is not None
                else None
            ),
            domain_tags=(
                frozenset(d["domain_tags"]) if d.get("domain_tags") is not None else None
            ),
            capture_date_range=(
                (
                    date.fromisoformat(d["capture_date_range"][0]),
                    date.fromisoformat(d["capture_date_range"][1]),
                )
                if d.get("capture_date_range") is not None
                else None
            ),
            min_confidence=d.get("min_confidence"),
        )


# States whose vectors may legitimately sit in the index.
_INDEXABLE_STATES = {ArtifactState.VALIDATED, ArtifactState.INDEXED}


class VectorIndex:
    """Exact cosine index; no approximation, desk-scale corpora."""

    def __init__(self, dimension: int):
        self.dimension = dimension
        self._records: dict[str, EmbeddingRecord] = {}

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, artifact_id: str) -> bool:
        return artifact_id in self._records

    def get(self, artifact_id: str) -> Optional[EmbeddingRecord]:
        return self._records.get(artifact_id)

    def records(self) -> Iterable[EmbeddingRecord]:
        return self._records.values()

    def upsert(self, record: EmbeddingRecord, artifact_state: ArtifactState) -> None:
        """Insert or replace; only validated (or already indexed) artifacts
        may enter the index."""
        if artifact_state not in _INDEXABLE_STATES:
            raise NotValidated(
                f"artifact {record.artifact_id} in state {artifact_state.value} cannot be indexed"
            )
        vec = np.asarray(record.vector, dtype=np.float32)
        if vec.shape != (self.dimension,):
            raise DimensionMismatch(f"expected dimension {self.dimension}, got {vec.shape}")
        self._records[record.artifact_id] = EmbeddingRecord(
            artifact_id=record.artifact_id, vector=vec, metadata=record.metadata
        )

    def search(
        self,
        query_vector: np.ndarray,
        k: int,
        metadata_filter: Optional[MetadataFilter] = None,
        extra_predicate: Optional[Callable[[str, RecordMetadata], bool]] = None,
    ) -> list[tuple[str, float]]:
        """Top-k by cosine similarity among records passing the filter.

        Descending similarity, ties broken by ascending artifact_id; fewer
        than k results when the filtered set is smaller. ``extra_predicate``
        lets callers intersect consent scopes with the metadata filter.

        Similarities are quantized to 1e-12 before ranking so the ordering
        does not depend on summation order or FMA use in the float pipeline;
        differences below that resolution fall through to the id tie-break.
        """
        q = np.asarray(query_vector, dtype=np.float64)
        if q.shape != (self.dimension,):
            raise DimensionMismatch(f"expected dimension {self.dimension}, got {q.shape}")
        if k <= 0:
            return []
        q_norm = float(np.linalg.norm(q))
        if q_norm == 0.0:
            raise DimensionMismatch("query vector must be nonzero")

        # Canonical candidate order: float matmul results can vary at one ulp
        # with row order (BLAS blocking), which would make results depend on
        # insertion history instead of content.
        candidates = sorted(
            (
                r
                for r in self._records.values()
                if (metadata_filter is None or metadata_filter.matches(r.metadata))
                and (extra_predicate is None or extra_predicate(r.artifact_id, r.metadata))
            ),
            key=lambda r: r.artifact_id,
        )
        if not candidates:
            return []
        matrix = np.stack([r.vector for r in candidates]).astype(np.float64)
        norms = np.linalg.norm(matrix, axis=1)
        sims = np.round((matrix @ q) / (norms * q_norm), 12)
        ranked = sorted(
            zip((r.artifact_id for r in candidates), sims.tolist()),
            key=lambda pair: (-pair[1], pair[0]),
        )
        return ranked[:k]

    def delete_ids(self, artifact_ids: Iterable[str]) -> int:
        removed = 0
        for artifact_id in list(artifact_ids):
            if self._records.pop(artifact_id, None) is not None:
                removed += 1
        return removed

    def delete_by_expert(self, expert_id: str, owner_of_doc: Callable[[str], Optional[str]]) -> int:
        """Physically remove every record whose source document belongs to the
        expert. The record keeps no expert field, so ownership is resolved
        through the document store."""
        doomed = [
            r.artifact_id
            for r in self._records.values()
            if owner_of_doc(r.metadata.doc_id) == expert_id
        ]
        return self.delete_ids(doomed)

    # -- persistence ---------------------------------------------------------

    def flush(self, path: str) -> None:
        payload = bytearray()
        payload += MAGIC
        payload += struct.pack("<HHQ", FORMAT_VERSION, self.dimension, len(self._records))
        for artifact_id in sorted(self._records):
            record = self._records[artifact_id]
            payload += bytes.fromhex(artifact_id)
            payload += record.vector.astype("<f4").tobytes()
            meta = json.dumps(
                record.metadata.to_dict(), sort_keys=True, separators=(",", ":")
            ).encode("utf-8")
            payload += struct.pack("<I", len(meta))
            payload += meta
        payload += struct.pack("<I", crc32c(bytes(payload)))
        with open(path, "wb") as fh:
            fh.write(payload)

    @classmethod
    def load(cls, path: str) -> "VectorIndex":
        with open(path, "rb") as fh:
            blob = fh.read()
        if len(blob) < 20 or blob[:4] != MAGIC:
            raise CorruptFile("bad magic")
        expected_crc = struct.unpack("<I", blob[-4:])[0]
        if crc32c(blob[:-4]) != expected_crc:
            raise CorruptFile("checksum mismatch")
        version, dimension, count = struct.unpack("<HHQ", blob[4:16])
        if version != FORMAT_VERSION:
            raise VersionMismatch(f"file version {version}, supported {FORMAT_VERSION}")
        index = cls(dimension)
        offset = 16
        vec_bytes = dimension * 4
        try:
            for _ in range(count):
                artifact_id = blob[offset : offset + 16].hex()
                offset += 16
                vector = np.frombuffer(blob[offset : offset + vec_bytes], dtype="<f4").copy()
                offset += vec_bytes
                (meta_len,) = struct.unpack("<I", blob[offset : offset + 4])
                offset += 4
                metadata = RecordMetadata.from_dict(
                    json.loads(blob[offset : offset + meta_len].decode("utf-8"))
                )
                offset += meta_len
                index._records[artifact_id] = EmbeddingRecord(
                    artifact_id=artifact_id, vector=vector, metadata=metadata
                )
        except (struct.error, json.JSONDecodeError, ValueError, KeyError) as exc:
            raise CorruptFile(f"truncated or malformed record: {exc}") from exc
        if offset != len(blob) - 4:
            raise CorruptFile("trailing bytes after last record")
        return index
