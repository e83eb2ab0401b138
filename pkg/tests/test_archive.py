import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pglo.archive import DesignArchive


class TestDesignArchive:
    def test_welford_matches_numpy(self, rng):
        arch = DesignArchive(2)
        vals = rng.normal(3.0, 2.0, 57)
        for chunk in np.array_split(vals, 5):
            arch.add([0.1, 0.2], chunk)
        assert arch.total_points == 1
        assert arch.replications[0] == 57
        assert arch.means[0] == pytest.approx(vals.mean(), rel=1e-12)
        assert arch.variances[0] == pytest.approx(vals.var(ddof=1), rel=1e-10)

    def test_duplicate_locations_merge(self):
        arch = DesignArchive(1)
        i = arch.add([0.5], [1.0])
        j = arch.add(np.array([0.5]), [3.0])
        assert i == j
        assert arch.total_points == 1
        assert arch.total_evaluations == 2
        assert arch.means[0] == 2.0

    def test_single_replication_has_zero_variance(self):
        arch = DesignArchive(1)
        arch.add([0.0], [4.0])
        assert arch.variances[0] == 0.0

    def test_best_index_ties_go_low(self):
        arch = DesignArchive(1)
        for x, v in [(0.0, 2.0), (1.0, 1.0), (2.0, 1.0)]:
            arch.add([x], [v])
        assert arch.best_index() == 1

    def test_new_point_needs_values(self):
        with pytest.raises(ValueError):
            DesignArchive(1).add([0.0], [])

    def test_wrong_dimension(self):
        with pytest.raises(ValueError):
            DesignArchive(2).add([0.0], [1.0])

    def test_roundtrip_and_digest(self, rng):
        arch = DesignArchive(2)
        for _ in range(6):
            arch.add(rng.random(2), rng.normal(size=3), region_id=1)
        back = DesignArchive.from_dict(arch.to_dict())
        assert back.digest() == arch.digest()
        np.testing.assert_array_equal(back.means, arch.means)
        np.testing.assert_array_equal(back.regions, arch.regions)

    def test_copy_is_independent(self):
        arch = DesignArchive(1)
        arch.add([0.0], [1.0])
        dup = arch.copy()
        dup.add([0.0], [5.0])
        assert arch.total_evaluations == 1


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40))
def test_incremental_stats_property(values):
    arch = DesignArchive(1)
    for v in values:
        arch.add([0.0], [v])
    assert arch.means[0] == pytest.approx(np.mean(values), abs=1e-9 * (1 + np.max(np.abs(values))))
    assert arch.variances[0] == pytest.approx(np.var(values, ddof=1), rel=1e-7, abs=1e-7)
