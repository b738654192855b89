import pytest

from amkit.suite import FAMILIES, run_family


@pytest.mark.parametrize("family", sorted(FAMILIES))
def test_family_gradients(family):
    rows = run_family(family, 10, 7)
    assert len(rows) == 10
    assert max(r.relative_error for r in rows) < 1e-6


def test_family_draws_are_reproducible():
    assert run_family("lse", 3, 1) == run_family("lse", 3, 1)
    assert run_family("lse", 3, 1) != run_family("lse", 3, 2)
