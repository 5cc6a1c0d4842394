from __future__ import annotations

import math
import random
from datetime import date, timedelta

import numpy as np
import pytest

from expertkb.embedding import HashingEmbeddingBackend, mock_embed
from expertkb.errors import (
    CorruptFile,
    DimensionMismatch,
    EmptyInput,
    NotValidated,
    VersionMismatch,
)
from expertkb.index import (
    EmbeddingRecord,
    MetadataFilter,
    RecordMetadata,
    VectorIndex,
    crc32c,
)
from expertkb.model import ArtifactState, ArtifactType


# Independent FNV-1a oracle, written before the embedding backend.
def fnv1a64_oracle(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) % (1 << 64)
    return h


def test_crc32c_check_value():
    # standard CRC-32C check value for "123456789"
    assert crc32c(b"123456789") == 0xE3069283


class TestMockEmbed:
    def test_pump_single_component(self):
        # oracle: fnv1a64("pump") = 0x6c270f0e2716312b -> index 43, top bit 0
        h = fnv1a64_oracle(b"pump")
        assert h == 0x6C270F0E2716312B
        vec = mock_embed("pump")
        nonzero = np.nonzero(vec)[0]
        assert list(nonzero) == [h % 64] == [43]
        assert vec[43] == 1.0
        assert abs(np.linalg.norm(vec) - 1.0) < 1e-9

    def test_repetition_invariant(self):
        assert np.array_equal(mock_embed("pump pump"), mock_embed("pump"))

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            mock_embed("")
        with pytest.raises(EmptyInput):
            mock_embed("!!! ---")

    def test_unit_norm_random_texts(self):
        rng = random.Random(5)
        for _ in range(200):
            words = " ".join(
                "".join(rng.choice("abcdefghij") for _ in range(rng.randrange(1, 8)))
                for _ in range(rng.randrange(1, 30))
            )
            assert abs(np.linalg.norm(mock_embed(words)) - 1.0) < 1e-9

    def test_sign_from_top_bit(self):
        backend = HashingEmbeddingBackend(64)
        for token in ["cavitation", "turbine", "relay", "breaker"]:
            h = fnv1a64_oracle(token.encode())
            vec = backend.embed(token)
            expected_sign = 1.0 if (h >> 63) == 0 else -1.0
            assert vec[h % 64] == expected_sign


def make_metadata(rng: random.Random) -> RecordMetadata:
    return RecordMetadata(
        doc_id=f"{rng.getrandbits(128):032x}",
        capture_date=date(2024, 1, 1) + timedelta(days=rng.randrange(0, 700)),
        artifact_type=rng.choice(list(ArtifactType)),
        confidence=round(rng.uniform(0.5, 1.0), 3),
        domain_tag=rng.choice(["pumps", "turbines", "grid", "valves"]),
    )


def random_record(rng: random.Random, dim: int = 64) -> EmbeddingRecord:
    words = " ".join(
        "".join(rng.choice("abcdefghijklmnop") for _ in range(rng.randrange(2, 9)))
        for _ in range(rng.randrange(2, 14))
    )
    return EmbeddingRecord(
        artifact_id=f"{rng.getrandbits(128):032x}",
        vector=mock_embed(words, dim),
        metadata=make_metadata(rng),
    )


def random_filter(rng: random.Random) -> MetadataFilter:
    kwargs = {}
    if rng.random() < 0.5:
        kwargs["artifact_types"] = frozenset(
            rng.sample(list(ArtifactType), rng.randrange(1, 3))
        )
    if rng.random() < 0.5:
        kwargs["domain_tags"] = frozenset(
            rng.sample(["pumps", "turbines", "grid", "valves"], rng.randrange(1, 3))
        )
    if rng.random() < 0.4:
        lo = date(2024, 1, 1) + timedelta(days=rng.randrange(0, 400))
        kwargs["capture_date_range"] = (lo, lo + timedelta(days=rng.randrange(30, 400)))
    if rng.random() < 0.4:
        kwargs["min_confidence"] = round(rng.uniform(0.5, 0.95), 2)
    return MetadataFilter(**kwargs)


def brute_force_search(records, query, k, metadata_filter):
    """Independent oracle: pure-python cosine against every record, ranked at
    the same documented 1e-12 resolution."""
    q = [float(x) for x in query]
    qn = math.sqrt(sum(x * x for x in q))
    scored = []
    for r in records:
        if metadata_filter is not None and not metadata_filter.matches(r.metadata):
            continue
        v = [float(x) for x in r.vector]
        vn = math.sqrt(sum(x * x for x in v))
        sim = round(sum(a * b for a, b in zip(q, v)) / (qn * vn), 12)
        scored.append((r.artifact_id, sim))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]


def assert_same_ranking(actual, expected):
    """ids and order must match exactly; similarity values agree to 1e-9
    (summation order differs between numpy and the pure-python oracle)."""
    assert [a for a, _ in actual] == [e for e, _ in expected]
    for (_, sa), (_, se) in zip(actual, expected):
        assert abs(sa - se) < 1e-9


def populate(index: VectorIndex, n: int, seed: int) -> list[EmbeddingRecord]:
    rng = random.Random(seed)
    records = []
    for _ in range(n):
        record = random_record(rng, index.dimension)
        index.upsert(record, ArtifactState.VALIDATED)
        records.append(index.get(record.artifact_id))
    return records


class TestSearch:
    def test_k_zero(self):
        index = VectorIndex(64)
        populate(index, 3, 1)
        assert index.search(mock_embed("anything"), 0) == []

    def test_self_similarity_one(self):
        index = VectorIndex(64)
        (record,) = populate(index, 1, 2)
        results = index.search(np.asarray(record.vector, dtype=np.float64), 1)
        assert results[0][0] == record.artifact_id
        assert abs(results[0][1] - 1.0) < 1e-9

    def test_matches_brute_force_oracle(self):
        index = VectorIndex(64)
        records = populate(index, 300, 3)
        rng = random.Random(4)
        for _ in range(40):
            query = mock_embed(
                " ".join(
                    "".join(rng.choice("abcdefghijklmnop") for _ in range(rng.randrange(2, 9)))
                    for _ in range(rng.randrange(1, 10))
                )
            )
            flt = random_filter(rng)
            k = rng.randrange(1, 20)
            assert_same_ranking(
                index.search(query, k, flt), brute_force_search(records, query, k, flt)
            )

    def test_filter_soundness(self):
        index = VectorIndex(64)
        populate(index, 120, 6)
        flt = MetadataFilter(domain_tags=frozenset({"pumps"}), min_confidence=0.7)
        for artifact_id, sim in index.search(mock_embed("abc def"), 50, flt):
            metadata = index.get(artifact_id).metadata
            assert flt.matches(metadata)
            assert -1.0 <= sim <= 1.0

    def test_dimension_mismatch(self):
        index = VectorIndex(64)
        with pytest.raises(DimensionMismatch):
            index.search(np.ones(32), 5)


class TestUpsert:
    def test_not_validated(self):
        index = VectorIndex(64)
        rng = random.Random(1)
        record = random_record(rng)
        with pytest.raises(NotValidated):
            index.upsert(record, ArtifactState.EXTRACTED)

    def test_replace_semantics(self):
        index = VectorIndex(64)
        rng = random.Random(1)
        record = random_record(rng)
        index.upsert(record, ArtifactState.VALIDATED)
        replacement = EmbeddingRecord(
            artifact_id=record.artifact_id,
            vector=mock_embed("completely different"),
            metadata=record.metadata,
        )
        index.upsert(replacement, ArtifactState.INDEXED)
        assert len(index) == 1
        stored = index.get(record.artifact_id)
        assert np.allclose(stored.vector, mock_embed("completely different").astype(np.float32))


class TestDelete:
    def test_delete_by_expert_removes_all(self):
        index = VectorIndex(64)
        records = populate(index, 30, 9)
        owners = {}
        for i, record in enumerate(records):
            owners[record.metadata.doc_id] = "alice" if i < 12 else "bob"
        removed = index.delete_by_expert("alice", owners.get)
        assert removed == 12
        assert len(index) == 18
        results = index.search(mock_embed("abc"), 50)
        alice_docs = {d for d, owner in owners.items() if owner == "alice"}
        for artifact_id, _ in results:
            assert index.get(artifact_id).metadata.doc_id not in alice_docs

    def test_unknown_expert_zero(self):
        index = VectorIndex(64)
        populate(index, 5, 10)
        assert index.delete_by_expert("nobody", lambda doc_id: "someone") == 0

    def test_deleted_ids_absent_from_flushed_bytes(self, tmp_path):
        index = VectorIndex(64)
        records = populate(index, 10, 11)
        doomed = records[0]
        index.delete_ids([doomed.artifact_id])
        path = tmp_path / "index.xmnd"
        index.flush(str(path))
        blob = path.read_bytes()
        assert bytes.fromhex(doomed.artifact_id) not in blob
        assert doomed.artifact_id.encode() not in blob


class TestPersistence:
    def test_empty_round_trip(self, tmp_path):
        index = VectorIndex(64)
        path = str(tmp_path / "index.xmnd")
        index.flush(path)
        loaded = VectorIndex.load(path)
        assert len(loaded) == 0 and loaded.dimension == 64

    def test_round_trip_bit_exact(self, tmp_path):
        index = VectorIndex(64)
        populate(index, 200, 12)
        path = str(tmp_path / "index.xmnd")
        index.flush(path)
        loaded = VectorIndex.load(path)
        assert len(loaded) == len(index)
        for record in index.records():
            twin = loaded.get(record.artifact_id)
            assert twin.metadata == record.metadata
            assert record.vector.tobytes() == twin.vector.tobytes()

    def test_search_results_identical_after_reload(self, tmp_path):
        index = VectorIndex(64)
        populate(index, 150, 13)
        path = str(tmp_path / "index.xmnd")
        index.flush(path)
        loaded = VectorIndex.load(path)
        rng = random.Random(14)
        for _ in range(25):
            query = mock_embed(
                " ".join(
                    "".join(rng.choice("abcdefgh") for _ in range(3))
                    for _ in range(rng.randrange(1, 6))
                )
            )
            flt = random_filter(rng)
            assert index.search(query, 10, flt) == loaded.search(query, 10, flt)

    def test_truncated_file_corrupt(self, tmp_path):
        index = VectorIndex(64)
        populate(index, 5, 15)
        path = tmp_path / "index.xmnd"
        index.flush(str(path))
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 7])
        with pytest.raises(CorruptFile):
            VectorIndex.load(str(path))

    def test_bad_magic_corrupt(self, tmp_path):
        path = tmp_path / "index.xmnd"
        path.write_bytes(b"NOPE" + b"\x00" * 40)
        with pytest.raises(CorruptFile):
            VectorIndex.load(str(path))

    def test_version_mismatch(self, tmp_path):
        import struct

        index = VectorIndex(8)
        path = tmp_path / "index.xmnd"
        index.flush(str(path))
        blob = bytearray(path.read_bytes())
        blob[4:6] = struct.pack("<H", 99)
        # re-seal the checksum so only the version differs
        blob[-4:] = struct.pack("<I", crc32c(bytes(blob[:-4])))
        path.write_bytes(bytes(blob))
        with pytest.raises(VersionMismatch):
            VectorIndex.load(str(path))
