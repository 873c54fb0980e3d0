import io
import json
import warnings

import numpy as np
import pytest

from dsecting.core import (
    BudgetError,
    ContractError,
    DSpec,
    Family,
    FamilyFormatError,
    FamilyKind,
    SubsetMask,
    complement_members,
    dsects,
    dumps_compact,
    dumps_family,
    generate_family,
    imbalance,
    imbalance_vector,
    loads_family,
    read_family,
    verify_dsecting,
    write_family,
)

from oracles import imb as ref_imb
from oracles import subsets


def S(elements, n):
    return SubsetMask.from_elements(elements, n)


EXAMPLE = Family.from_sets([[1, 2, 3], [1, 2, 4], [1, 3, 5]], 6)


class TestSubsetMask:
    def test_bits_and_elements(self):
        m = S([1, 3, 6], 6)
        assert m.bits == 0b100101
        assert m.elements() == [1, 3, 6]
        assert m.cardinality == 3
        assert 3 in m and 2 not in m and 7 not in m

    def test_out_of_range(self):
        with pytest.raises(ContractError):
            S([7], 6)
        with pytest.raises(ContractError):
            SubsetMask(1 << 6, 6)
        with pytest.raises(ContractError):
            SubsetMask(0, 0)

    def test_complement_and_vectors(self):
        m = S([2, 3], 4)
        assert m.complement().elements() == [1, 4]
        assert m.zero_one_vector().tolist() == [0, 1, 1, 0]
        assert m.pm_vector().tolist() == [-1, 1, 1, -1]

    def test_blocks_wide(self):
        m = S([1, 65, 130], 130)
        assert m.blocks() == (1, 1, 2)


class TestImbalance:
    def test_examples(self):
        assert imbalance(S([1, 2, 3, 4], 6), S([1, 2, 3], 6)) == 2
        a = S([2, 4, 5], 6)
        assert imbalance(a, SubsetMask.empty(6)) == -3
        assert imbalance(S([1, 3, 5], 6), SubsetMask.full(6)) == 3

    def test_matches_dot_product(self):
        a, b = S([1, 2, 5], 5), S([2, 3, 5], 5)
        assert imbalance(a, b) == int(a.zero_one_vector() @ b.pm_vector())

    def test_ground_mismatch(self):
        with pytest.raises(ContractError):
            imbalance(S([1], 3), S([1], 4))

    def test_multiword_agrees(self):
        rng = np.random.default_rng(5)
        for n in (64, 65, 200):
            for _ in range(20):
                a = S([j + 1 for j in np.flatnonzero(rng.integers(0, 2, n))], n)
                b = S([j + 1 for j in np.flatnonzero(rng.integers(0, 2, n))], n)
                ref = ref_imb(frozenset(a.elements()), frozenset(b.elements()))
                assert imbalance(a, b, multiword=True) == ref
                if n <= 64:
                    assert imbalance(a, b, multiword=False) == ref

    def test_vector_paths_agree(self):
        fam = generate_family(6, "all")
        b = S([1, 4, 5], 6)
        ref = [ref_imb(frozenset(s), frozenset([1, 4, 5])) for s in fam.sets()]
        assert imbalance_vector(fam, b).tolist() == ref
        assert imbalance_vector(fam, b, multiword=True).tolist() == ref


class TestDSpec:
    def test_membership(self):
        assert DSpec.interval(1).values() == [-1, 0, 1]
        assert 2 in DSpec.singleton(2) and -2 not in DSpec.singleton(2)

    def test_zero_identity(self):
        assert DSpec.interval(0) == DSpec.singleton(0)
        assert hash(DSpec.interval(0)) == hash(DSpec.singleton(0))

    def test_symmetric(self):
        assert DSpec.interval(3).symmetric
        assert DSpec.singleton(0).symmetric
        assert not DSpec.singleton(1).symmetric

    def test_parse(self):
        assert DSpec.parse("interval:2") == DSpec.interval(2)
        assert DSpec.parse("singleton:1") == DSpec.singleton(1)
        assert str(DSpec.parse("singleton:3")) == "singleton:3"
        for bad in ("interval", "range:1", "interval:-1", "singleton:x"):
            with pytest.raises((ValueError, ContractError)):
                DSpec.parse(bad)

    def test_dsects_examples(self):
        a = S([1, 2, 3, 4], 6)
        assert dsects(a, S([1, 2], 6), DSpec.interval(1))
        # |A & B| = 3 for both of these, so the imbalance is 2
        assert not dsects(a, S([1, 2, 4], 6), DSpec.interval(1))
        assert not dsects(a, S([1, 2, 3], 6), DSpec.interval(1))
        assert dsects(SubsetMask.empty(6), S([2, 5], 6), DSpec.interval(0))


class TestVerify:
    def test_worked_example(self):
        fam = generate_family(6, "all:4")
        assert verify_dsecting(fam, EXAMPLE, DSpec.singleton(0)).ok

    def test_pair_bisected(self):
        assert verify_dsecting(Family.from_sets([[1, 2]], 2), Family.from_sets([[1]], 2), DSpec.interval(1)).ok

    def test_failure_witness(self):
        fam = Family.from_sets([[1, 2]], 2)
        res = verify_dsecting(fam, Family.from_sets([[1, 2]], 2), DSpec.singleton(0))
        assert not res.ok
        assert res.witness.elements() == [1, 2] and res.index == 0 and res.uncovered == 1

    def test_first_uncovered_in_family_order(self):
        fam = Family.from_sets([[1], [1, 2, 3], [2, 3]], 3)
        res = verify_dsecting(fam, Family.from_sets([[1]], 3), DSpec.singleton(0))
        # {1} has imbalance +1; {1,2,3} has -1; {2,3} has -2 and is the only even one
        assert res.index == 0 and res.uncovered == 3

    def test_empty_secting(self):
        fam = Family.from_sets([[2], [1]], 2)
        res = verify_dsecting(fam, Family(2, ()), DSpec.interval(5))
        assert not res.ok and res.witness.elements() == [2]

    def test_empty_family(self):
        assert verify_dsecting(Family(3, ()), Family(3, ()), DSpec.singleton(1)).ok

    def test_multiword_forced_agrees(self):
        fam = Family.from_sets([[1, 64], [2, 3], [10, 20, 30, 40]], 64)
        sect = Family.from_sets([[1], [2], [10, 20]], 64)
        d = DSpec.interval(0)
        a, b = verify_dsecting(fam, sect, d), verify_dsecting(fam, sect, d, multiword=True)
        assert (a.ok, a.index, a.uncovered) == (b.ok, b.index, b.uncovered)


class TestComplementMembers:
    def test_identity(self):
        assert complement_members(EXAMPLE, [0, 0, 0]) == EXAMPLE

    def test_flip(self):
        fam = Family.from_sets([[1, 2, 3]], 6)
        assert complement_members(fam, [1]).sets() == [[4, 5, 6]]

    def test_length_mismatch(self):
        with pytest.raises(ContractError):
            complement_members(EXAMPLE, [1])


class TestGenerate:
    def test_counts(self):
        assert len(generate_family(6, "all:4")) == 15
        assert len(generate_family(4, "odd")) == 8
        assert len(generate_family(5, "uppertail:4")) == 6
        assert len(generate_family(5, "all")) == 31
        assert len(generate_family(7, "pairs")) == 21
        assert len(generate_family(6, "parity:2")) == 15 + 15 + 1

    def test_colex_order_and_content(self):
        fam = generate_family(5, "parity:3")
        assert list(fam.masks) == sorted(fam.masks)
        ref = {frozenset(s) for s in subsets(5, [3, 5])}
        assert {frozenset(s) for s in fam.sets()} == ref

    def test_wide_layer_path(self):
        fam = generate_family(30, "all:2")
        assert len(fam) == 435 and list(fam.masks) == sorted(fam.masks)

    def test_budget(self, monkeypatch):
        with pytest.raises(BudgetError):
            generate_family(10, "all", budget=100)
        monkeypatch.setenv("DSECTING_MAX_MEMBERS", "10")
        with pytest.raises(BudgetError):
            generate_family(6, "pairs")

    def test_parse_kinds(self):
        assert FamilyKind.parse("all_k_subsets:3") == FamilyKind("all", 3)
        with pytest.raises(ValueError):
            FamilyKind.parse("parity")
        with pytest.raises(ValueError):
            FamilyKind.parse("triples")
        with pytest.raises(ValueError):
            generate_family(4, "all:5")


class TestSerialization:
    def test_json_round_trip(self):
        text = dumps_family(EXAMPLE)
        assert text == '{"n":6,"sets":[[1,2,3],[1,2,4],[1,3,5]]}\n'
        assert loads_family(text) == EXAMPLE
        buf = io.StringIO()
        write_family(EXAMPLE, buf)
        buf.seek(0)
        assert read_family(buf) == EXAMPLE

    def test_compact_round_trip(self):
        text = dumps_compact(EXAMPLE, "made by hand")
        assert text == "# made by hand\nn=6\n7\nb\n15\n"
        assert loads_family(text) == EXAMPLE

    def test_wide_compact(self):
        fam = Family.from_sets([[1, 70], [5]], 70)
        assert loads_family(dumps_compact(fam)) == fam

    def test_element_out_of_range(self):
        with pytest.raises(FamilyFormatError) as info:
            loads_family('{"n": 6,\n "sets": [[1, 2], [3, 7]]}')
        assert info.value.line == 2 and "7" in str(info.value)

    def test_duplicate_element(self):
        with pytest.raises(FamilyFormatError):
            loads_family('{"n": 3, "sets": [[1, 1]]}')

    def test_malformed_json(self):
        with pytest.raises(FamilyFormatError) as info:
            loads_family('{"n": 3, "sets": [[1,]]}')
        assert info.value.line == 1

    def test_empty_member_list(self):
        fam = loads_family('{"n": 4, "sets": []}')
        assert fam.n == 4 and len(fam) == 0

    def test_extra_keys_tolerated(self):
        fam = loads_family(json.dumps({"n": 2, "sets": [[1]], "construction": {"name": "x"}}))
        assert fam.sets() == [[1]]

    def test_duplicates_removed_with_warning(self):
        with pytest.warns(UserWarning, match="duplicate"):
            fam = loads_family('{"n": 3, "sets": [[1], [2], [1]]}')
        assert fam.sets() == [[1], [2]] and fam.dedup

    def test_no_warning_without_duplicates(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert not loads_family('{"n": 3, "sets": [[1], [2]]}').dedup

    def test_compact_errors(self):
        with pytest.raises(FamilyFormatError) as info:
            loads_family("n=4\n3\nZ1\n")
        assert (info.value.line, info.value.column) == (3, 1)
        with pytest.raises(FamilyFormatError):
            loads_family("n=3\n10\n")
        with pytest.raises(FamilyFormatError):
            loads_family("3\n")
