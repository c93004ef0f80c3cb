import pytest
from hypothesis import given, settings, strategies as st

from walklln.groups import (Element, FreeGroup, GroupError, Lattice, canonical_decode, canonical_encode,
                            compose, identity, inverse, make_group, reduce_word)

F2 = FreeGroup(2)
F3 = FreeGroup(3)
Z3 = Lattice(3)


def free_words(rank):
    letter = st.integers(1, rank).flatmap(lambda i: st.sampled_from([i, -i]))
    return st.lists(letter, max_size=12).map(lambda w: FreeGroup(rank).word(w))


lattice_points = st.tuples(*[st.integers(-10**6, 10**6)] * 3).map(Z3.element)


@pytest.mark.parametrize("group,elements", [(F3, free_words(3)), (Z3, lattice_points)])
def test_group_axioms(group, elements):
    @settings(max_examples=200, deadline=None)
    @given(elements, elements, elements)
    def check(a, b, c):
        assert group.compose(group.compose(a, b), c) == group.compose(a, group.compose(b, c))
        assert group.compose(a, group.identity()) == a == group.compose(group.identity(), a)
        assert group.compose(a, group.inverse(a)) == group.identity()
        assert group.decode(group.encode(a)) == a
        assert (group.encode(a) == group.encode(b)) == (a == b)

    check()


@given(st.lists(st.integers(1, 2).flatmap(lambda i: st.sampled_from([i, -i])), max_size=30))
def test_reduce_word_idempotent_and_reduced(w):
    r = reduce_word(w)
    assert reduce_word(r) == r
    assert all(x != -y for x, y in zip(r, r[1:]))


def test_free_examples():
    a, b = F2.parse("a"), F2.parse("b")
    assert F2.compose(F2.parse("ab"), F2.parse("Ba")) == F2.parse("aa")
    assert F2.format(F2.compose(a, F2.inverse(a))) == "e"
    assert F2.inverse(F2.parse("abA")) == F2.parse("aBA")
    assert F2.compose(a, b) != F2.compose(b, a)
    assert len(F2.generators()) == 4


def test_lattice_examples():
    x = Z3.parse("(1,0,0)")
    assert Z3.compose(x, Z3.parse("(0,-2,5)")) == Z3.element((1, -2, 5))
    assert Z3.inverse(x) == Z3.element((-1, 0, 0))
    assert len(Z3.generators()) == 6
    assert Z3.format(Z3.identity()) == "(0,0,0)"


def test_encoding_layout():
    assert Z3.encode(Z3.element((1, -1, 0))) == (1).to_bytes(8, "little") + (-1).to_bytes(8, "little", signed=True) + bytes(8)
    assert F2.encode(F2.parse("aB")) == bytes([2, 0, 0, 0, 1, 0, 0, 0]) + (-2).to_bytes(4, "little", signed=True)
    with pytest.raises(GroupError):
        F2.decode(bytes([2, 0, 0, 0, 1, 0, 0, 0, 255, 255, 255, 255]))  # a A is not reduced
    with pytest.raises(GroupError):
        Z3.decode(b"\x00" * 5)


def test_module_functions_dispatch():
    g = make_group("free", 2)
    a = g.parse("ab")
    assert compose(g, a, inverse(g, a)) == identity(g)
    assert canonical_decode(g, canonical_encode(g, a)) == a


@pytest.mark.parametrize("kind,size", [("free", 1), ("free", 0), ("lattice", 0), ("torus", 3)])
def test_invalid_groups(kind, size):
    with pytest.raises(GroupError):
        make_group(kind, size)


def test_foreign_elements_rejected():
    with pytest.raises(GroupError):
        F2.compose(F2.identity(), Element("free", (3,)))
    with pytest.raises(GroupError):
        Z3.compose(Z3.identity(), Element("lattice", (1, 2)))
    with pytest.raises(GroupError):
        F2.parse("c")


def test_lattice_overflow_detected():
    big = Z3.element((2**63 - 1, 0, 0))
    with pytest.raises(OverflowError):
        Z3.compose(big, Z3.parse("(1,0,0)"))
