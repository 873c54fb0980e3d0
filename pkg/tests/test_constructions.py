import math

import numpy as np
import pytest

from dsecting.constructions import (
    BUILDERS,
    ImproperColoringError,
    binary_code_family,
    bipartite_cover,
    bipartite_trace,
    chain_family,
    greedy_coloring,
    hadamard_matrix,
    hadamard_system,
    hadamard_trace,
    interval_swap_family,
    singleton_one_family,
    upper_tail_family,
)
from dsecting.core import ContractError, Family, generate_family

from oracles import covers, subsets


def as_sets(fam):
    return [frozenset(s) for s in fam.sets()]


def sym_diff(a, b):
    return (a ^ b).bit_count()


class TestIntervalSwap:
    def test_n8_i2(self):
        tr = interval_swap_family(8, 2)
        assert tr.family.sets() == [[1, 2, 3, 4], [1, 2, 5, 6]]
        assert tr.verify().ok

    def test_n2_i1(self):
        assert interval_swap_family(2, 1).family.sets() == [[1]]

    def test_n12_i1_against_oracle(self):
        tr = interval_swap_family(12, 1)
        assert len(tr.family) == 6
        assert covers(subsets(12, range(1, 13)), as_sets(tr.family), {-1, 0, 1})

    @pytest.mark.parametrize("n", range(1, 17))
    def test_all_sizes_verify(self, n):
        for i in range(1, n + 1):
            tr = interval_swap_family(n, i)
            assert len(tr.family) == math.ceil(n / (2 * i))
            assert tr.verify().ok, (n, i)

    def test_steps_swap_2i(self):
        for n in range(2, 21):
            for i in range(1, n + 1):
                m = interval_swap_family(n, i).family.masks
                for a, b in zip(m, m[1:]):
                    assert sym_diff(a, b) == 2 * i, (n, i)

    def test_bad_params(self):
        with pytest.raises(ValueError):
            interval_swap_family(3, 4)


class TestSingletonOne:
    def test_small(self):
        assert singleton_one_family(2).family.sets() == [[1, 2]]
        assert singleton_one_family(6).family.sets() == [[1, 2, 3, 4], [1, 2, 3, 5], [1, 2, 5, 6]]

    def test_odd_n9(self):
        tr = singleton_one_family(9)
        assert len(tr.family) == 5
        assert covers(subsets(9, range(1, 10, 2)), as_sets(tr.family), {1})

    @pytest.mark.parametrize("n", range(1, 15))
    def test_verify(self, n):
        tr = singleton_one_family(n)
        assert len(tr.family) == math.ceil(n / 2)
        assert tr.verify().ok


class TestChain:
    def test_examples(self):
        assert chain_family(5, 2).family.sets() == [[1, 2], [1, 2, 3], [1, 2, 3, 4], [1, 2, 3, 4, 5]]
        assert chain_family(3, 3).family.sets() == [[1, 2, 3]]
        tr = chain_family(8, 3)
        assert len(tr.family) == 6
        assert covers(subsets(8, range(3, 9, 2)), as_sets(tr.family), {3})

    def test_one_element_steps(self):
        m = chain_family(10, 3).family.masks
        assert all(sym_diff(a, b) == 1 for a, b in zip(m, m[1:]))

    @pytest.mark.parametrize("n", range(2, 13))
    def test_verify(self, n):
        for i in range(1, n + 1):
            assert chain_family(n, i).verify().ok


class TestUpperTail:
    def test_examples(self):
        tr = upper_tail_family(6, 4)
        assert tr.family.sets() == [[1, 2], [1, 2, 5], [1, 2, 5, 6]]
        assert covers(subsets(6, range(4, 7)), as_sets(tr.family), {-1, 0, 1})
        assert upper_tail_family(7, 7).family.sets() == [[1, 2, 3, 4]]
        tr = upper_tail_family(10, 8)
        assert len(tr.family) == 3 and len(tr.target_family()) == 56 and tr.verify().ok

    def test_one_element_steps(self):
        m = upper_tail_family(12, 3).family.masks
        assert all(sym_diff(a, b) == 1 for a, b in zip(m, m[1:]))

    @pytest.mark.parametrize("n", range(2, 13))
    def test_verify(self, n):
        for k in range(1, n + 1):
            tr = upper_tail_family(n, k)
            assert len(tr.family) == n - k + 1
            assert tr.verify().ok


class TestBinaryCode:
    def test_examples(self):
        assert binary_code_family(4).family.sets() == [[2, 4], [3, 4]]
        assert binary_code_family(2).family.sets() == [[2]]
        fam = binary_code_family(8).family
        assert fam.sizes() == [4, 4, 4]
        assert covers(subsets(8, [2]), as_sets(fam), {-1, 0, 1})

    def test_sizes(self):
        for n in range(2, 40):
            tr = binary_code_family(n)
            assert len(tr.family) == math.ceil(math.log2(n)) and tr.verify().ok


class TestBipartiteCover:
    def test_triangle(self):
        edges = Family.from_sets([[1, 2], [1, 3], [2, 3]], 3)
        cuts = bipartite_cover(edges, [0, 1, 2])
        assert len(cuts) == 2
        assert covers(as_sets(edges), [frozenset(c.elements()) for c in cuts], {0})

    def test_single_edge(self):
        assert len(bipartite_cover(Family.from_sets([[1, 2]], 2))) == 1

    def test_complete_graph(self):
        edges = generate_family(8, "pairs")
        assert greedy_coloring(8, edges) == list(range(8))
        tr = bipartite_trace(edges)
        assert len(tr.family) == 3 and tr.verify().ok

    def test_mapping_coloring(self):
        edges = Family.from_sets([[1, 2], [2, 3]], 3)
        cuts = bipartite_cover(edges, {1: "red", 2: "blue", 3: "red"})
        assert [c.elements() for c in cuts] == [[2]]

    def test_improper(self):
        edges = Family.from_sets([[1, 2], [2, 3]], 3)
        with pytest.raises(ImproperColoringError, match=r"\{2,3\}"):
            bipartite_cover(edges, [0, 1, 1])

    def test_not_edges(self):
        with pytest.raises(ContractError):
            bipartite_cover(Family.from_sets([[1, 2, 3]], 3))


class TestHadamard:
    def test_matrix_orthogonal(self):
        for k in range(5):
            h = hadamard_matrix(k)
            assert (h @ h.T == (1 << k) * np.eye(1 << k, dtype=np.int64)).all()
            assert (h[0] == 1).all() and (h[:, 0] == 1).all()

    def test_k1(self):
        hf, bis = hadamard_system(1)
        assert hf.sets() == [[1, 2], [1]]

    def test_k2(self):
        hf, bis = hadamard_system(2)
        assert hf.sets() == [[1, 2, 3, 4], [1, 3], [1, 2], [1, 4]]
        assert bis.sets() == [[1, 2], [1]]

    @pytest.mark.parametrize("k", range(1, 8))
    def test_sizes_and_verify(self, k):
        hf, bis = hadamard_system(k)
        assert hf.sizes()[0] == 1 << k
        assert all(s == 1 << (k - 1) for s in hf.sizes()[1:])
        assert hadamard_trace(k).verify().ok


def test_builders_registered():
    assert set(BUILDERS) == {"interval-swap", "singleton-one", "chain", "upper-tail", "binary-code", "hadamard"}


def test_trace_header():
    assert chain_family(5, 2).header() == "construction=chain n=5 i=2 size=4 D=singleton:2 target=parity:2"
