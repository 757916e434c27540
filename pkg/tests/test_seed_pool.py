import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_union
from fuzzsched.coverage import Branch, SeedCoverage, canonical_payload, content_hash
from fuzzsched.seed_pool import SeedPool


def cand(*branches, tag=b""):
    cov = SeedCoverage.of(None, branches)
    return canonical_payload(cov.branches) + tag, cov


@pytest.fixture
def pool():
    return SeedPool()


@pytest.fixture
def six_seed_pool(pool):
    """Global pool holding S1..S6, each with its own branch."""
    pool.merge([cand((0, i)) for i in range(1, 7)], fuzzer=0, round_no=1)
    return pool


class TestMerge:
    def test_accepts_new_coverage(self, pool):
        accepted = pool.merge([cand((0, 1), (1, 2))], fuzzer=3, round_no=7)
        assert len(accepted) == 1
        rec = accepted[0]
        assert (rec.seed_id, rec.origin_fuzzer, rec.discovered_round) == (1, 3, 7)
        assert pool.branch_union == {Branch(0, 1), Branch(1, 2)}

    def test_duplicate_content_rejected(self, pool):
        pool.merge([cand((0, 1))], 0, 1)
        assert pool.merge([cand((0, 1))], 1, 2) == []

    def test_no_new_branch_rejected(self, pool):
        pool.merge([cand((0, 1), (1, 2))], 0, 1)
        assert pool.merge([cand((0, 1), tag=b"other bytes")], 0, 2) == []

    def test_first_of_two_claimants_wins(self, pool):
        first, second = cand((0, 1)), cand((0, 1), tag=b"x")
        accepted = pool.merge([first, second], 0, 1)
        assert [r.content_hash for r in accepted] == [content_hash(first[0])]

    def test_duplicate_branches_rejected_with_diagnostic(self, pool):
        bad = (b"dup", SeedCoverage(None, (Branch(0, 1), Branch(0, 1))))
        assert pool.merge([bad], 2, 4) == []
        assert pool.rejections and "duplicate" in pool.rejections[0]

    def test_payloads_written_to_storage(self, tmp_path):
        pool = SeedPool(tmp_path / "global_queue")
        payload, cov = cand((0, 1))
        (rec,) = pool.merge([(payload, cov)], 0, 1)
        assert rec.payload_ref == tmp_path / "global_queue" / f"000001_{rec.content_hash[:16]}"
        assert rec.read_payload() == payload


class TestDiff:
    def test_missing_seeds_in_id_order(self, six_seed_pool):
        hashes = sorted(six_seed_pool.records.values(), key=lambda r: r.seed_id)
        local = {r.content_hash for r in hashes[:3]}
        assert [r.seed_id for r in six_seed_pool.diff(local)] == [4, 5, 6]

    def test_superset_local_needs_nothing(self, six_seed_pool):
        assert six_seed_pool.diff(set(six_seed_pool.records) | {"extra"}) == []

    def test_empty_pool(self, pool):
        assert pool.diff(set()) == []

    def test_snapshot(self, pool):
        assert pool.snapshot_hashes() == frozenset()
        a, b = cand((0, 1)), cand((0, 2))
        pool.merge([a, b], 0, 1)
        assert pool.snapshot_hashes() == {content_hash(a[0]), content_hash(b[0])}


class TestPoolProperties:
    seeds = st.lists(
        st.lists(st.tuples(st.integers(0, 15), st.integers(0, 15)), min_size=1, max_size=5, unique=True),
        max_size=25,
    )

    @settings(max_examples=150)
    @given(st.lists(seeds, max_size=6))
    def test_union_matches_brute_force(self, batches):
        pool = SeedPool()
        for t, batch in enumerate(batches, 1):
            pool.merge([cand(*b) for b in batch], fuzzer=t % 3, round_no=t)
            assert pool.branch_union == brute_union(pool.records.values())
            assert len({r.seed_id for r in pool.records.values()}) == len(pool)

    @settings(max_examples=150)
    @given(seeds)
    def test_every_accepted_seed_added_a_branch(self, batch):
        pool = SeedPool()
        union = set()
        for payload, cov in [cand(*b) for b in batch]:
            got = pool.merge([(payload, cov)], 0, 1)
            if got:
                assert not set(cov.branches) <= union
            union |= set(r for rec in got for r in rec.coverage.branches)
        assert union == pool.branch_union
