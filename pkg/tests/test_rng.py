from collections import Counter

from frcom.rng import RngStream


def test_reproducible():
    a = RngStream(42, "chain", 0)
    b = RngStream(42, "chain", 0)
    assert [a.random() for _ in range(100)] == [b.random() for _ in range(100)]
    assert [a.randint(7) for _ in range(100)] == [b.randint(7) for _ in range(100)]


def test_substreams_differ():
    a = RngStream(42, "chain", 0)
    b = RngStream(42, "chain", 1)
    c = RngStream(43, "chain", 0)
    xs = [a.random() for _ in range(50)]
    assert xs != [b.random() for _ in range(50)]
    assert xs != [c.random() for _ in range(50)]


def test_spawn_matches_direct_construction():
    parent = RngStream(7, "ladder-rung", 3)
    child = parent.spawn("steps")
    direct = RngStream(7, "ladder-rung", 3, "steps")
    assert [child.random() for _ in range(20)] == [direct.random() for _ in range(20)]


def test_spawn_does_not_disturb_parent():
    a = RngStream(9, "x")
    b = RngStream(9, "x")
    a.spawn("child")
    assert a.random() == b.random()


def test_randint_range_and_coverage():
    rng = RngStream(11, "cover")
    counts = Counter(rng.randint(5) for _ in range(20_000))
    assert set(counts) == {0, 1, 2, 3, 4}
    assert all(abs(c / 20_000 - 0.2) < 0.02 for c in counts.values())


def test_choice():
    rng = RngStream(12)
    seq = ["a", "b", "c"]
    assert all(rng.choice(seq) in seq for _ in range(50))
