import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robust_pursuit import geometry as geo
from robust_pursuit import shadows as sh


def label(bits: str) -> sh.ShadowLabel:
    return sh.ShadowLabel.from_string(bits)


def labels(size: int):
    return st.integers(min_value=0, max_value=(1 << size) - 1).map(
        lambda m: sh.ShadowLabel(size=size, mask=m)
    )


class TestShadowLabel:
    def test_string_roundtrip(self):
        for bits in ("", "0", "1", "010", "011", "1100"):
            assert str(label(bits)) == bits

    def test_leftmost_char_is_shadow_zero(self):
        l = label("100")
        assert l.bit(0) == 1 and l.bit(1) == 0 and l.bit(2) == 0
        assert l.contaminated_indices() == (0,)

    def test_constructors(self):
        assert sh.ShadowLabel.all_contaminated(3).mask == 0b111
        assert sh.ShadowLabel.all_clear(3).is_clear
        assert sh.ShadowLabel.all_contaminated(0).is_clear

    def test_invalid(self):
        with pytest.raises(ValueError):
            sh.ShadowLabel(size=2, mask=0b100)
        with pytest.raises(ValueError):
            sh.ShadowLabel.from_string("01x")


class TestDominance:
    def test_worked_example(self):
        assert sh.dominates(label("010"), label("011"))
        assert not sh.dominates(label("011"), label("010"))

    def test_irreflexive(self):
        assert not sh.dominates(label("010"), label("010"))

    def test_clear_dominates_everything_else(self):
        for bits in ("001", "010", "100", "111"):
            assert sh.dominates(label("000"), label(bits))

    def test_incomparable(self):
        assert not sh.dominates(label("01"), label("10"))
        assert not sh.dominates(label("10"), label("01"))

    def test_length_mismatch(self):
        with pytest.raises(sh.LengthMismatch):
            sh.dominates(label("01"), label("011"))

    @given(labels(6), labels(6))
    def test_antisymmetric(self, a, b):
        assert not (sh.dominates(a, b) and sh.dominates(b, a))

    @given(labels(6), labels(6), labels(6))
    def test_transitive(self, a, b, c):
        if sh.dominates(a, b) and sh.dominates(b, c):
            assert sh.dominates(a, c)

    @given(labels(6))
    def test_irreflexive_fuzz(self, a):
        assert not sh.dominates(a, a)


class TestInfluenceRelation:
    def test_identity(self):
        rel = sh.InfluenceRelation.identity(3)
        assert rel.to_strings() == ["100", "010", "001"]
        l = label("010")
        assert sh.propagate(l, rel) == l

    def test_propagate_or_of_rows(self):
        rel = sh.InfluenceRelation.from_matrix(
            np.array([[1, 1, 0], [0, 0, 1]], dtype=bool)
        )
        assert str(sh.propagate(label("10"), rel)) == "110"
        assert str(sh.propagate(label("01"), rel)) == "001"
        assert str(sh.propagate(label("11"), rel)) == "111"
        assert sh.propagate(label("00"), rel).is_clear

    def test_propagate_size_mismatch(self):
        rel = sh.InfluenceRelation.identity(2)
        with pytest.raises(sh.LengthMismatch):
            sh.propagate(label("011"), rel)

    def test_eq_hash(self):
        a = sh.InfluenceRelation.from_matrix(np.eye(2, dtype=bool))
        b = sh.InfluenceRelation.identity(2)
        assert a == b and hash(a) == hash(b)

    @given(labels(5), labels(5))
    def test_propagate_monotone(self, a, b):
        """Cleaner sources propagate to cleaner (or equal) destinations."""
        rng = np.random.default_rng(a.mask * 37 + b.mask)
        rel = sh.InfluenceRelation.from_matrix(rng.random((5, 4)) < 0.4)
        pa, pb = sh.propagate(a, rel), sh.propagate(b, rel)
        if sh.dominates(a, b):
            assert pa == pb or sh.dominates(pa, pb)


class TestClassifyEvents:
    def _set(self, env, pts):
        return geo.shadow_set(env, pts)

    def test_persisted(self, lshape_env):
        prev = self._set(lshape_env, [(0.5, 1.8)])
        next_ = self._set(lshape_env, [(0.5, 1.7)])
        events = sh.classify_events(prev, next_)
        assert [e.kind for e in events] == ["persisted"]
        assert events[0].sources == (0,)

    def test_appeared_and_disappeared(self, lshape_env):
        # moving across the diagonal kills the old shadow and births a new
        # one on the other side; at this distance they share no overlap
        prev = self._set(lshape_env, [(0.3, 1.9)])
        next_ = self._set(lshape_env, [(1.9, 0.3)])
        kinds = sorted(e.kind for e in sh.classify_events(prev, next_))
        assert kinds == ["appeared", "disappeared"]

    def test_empty_sets(self, convex_env):
        prev = self._set(convex_env, [(2.0, 2.0)])
        next_ = self._set(convex_env, [(2.1, 2.0)])
        assert sh.classify_events(prev, next_) == []


class TestInfluenceRelationEndToEnd:
    def test_zero_length_edge_is_identity(self, lshape_env):
        p = [(0.5, 1.8)]
        ss = geo.shadow_set(lshape_env, p)
        rel = sh.influence_relation(
            lshape_env, p, p, src_set=ss, dst_set=ss
        )
        assert rel == sh.InfluenceRelation.identity(1)

    def test_persisting_shadow_carries_contamination(self, lshape_env):
        a, b = [(0.5, 1.8)], [(0.5, 1.2)]
        rel = sh.influence_relation(
            lshape_env, a, b,
            src_set=geo.shadow_set(lshape_env, a),
            dst_set=geo.shadow_set(lshape_env, b),
        )
        assert rel.to_strings() == ["1"]

    def test_grazing_sweep_clears(self, lshape_env):
        # sliding past the reflex corner: the old shadow collapses exactly
        # when the new one opens, so nothing flows across
        a, b = [(0.4, 1.6)], [(1.6, 0.4)]
        rel = sh.influence_relation(
            lshape_env, a, b,
            src_set=geo.shadow_set(lshape_env, a),
            dst_set=geo.shadow_set(lshape_env, b),
        )
        assert rel.to_strings() == ["0"]

    def test_infeasible_edge_raises(self, lshape_env):
        a, b = [(0.5, 1.8)], [(1.8, 0.5)]
        with pytest.raises(sh.InfeasibleEdge):
            sh.influence_relation(
                lshape_env, a, b,
                src_set=geo.shadow_set(lshape_env, a),
                dst_set=geo.shadow_set(lshape_env, b),
            )

    def test_point_count_mismatch_raises(self, lshape_env):
        a = [(0.5, 1.8)]
        b = [(0.5, 1.2), (0.6, 0.5)]
        with pytest.raises(sh.InfeasibleEdge):
            sh.influence_relation(
                lshape_env, a, b,
                src_set=geo.shadow_set(lshape_env, a),
                dst_set=geo.shadow_set(lshape_env, b),
            )

    def test_reverse_is_transpose(self, comb_env):
        rng = np.random.default_rng(5)
        from conftest import random_interior_point

        done = 0
        while done < 6:
            a = random_interior_point(comb_env, rng)
            b = random_interior_point(comb_env, rng)
            if not geo.contains_segment(comb_env, a, b):
                continue
            sa = geo.shadow_set(comb_env, [a])
            sb = geo.shadow_set(comb_env, [b])
            try:
                fwd = sh.influence_relation(
                    comb_env, [a], [b], src_set=sa, dst_set=sb
                )
                rev = sh.influence_relation(
                    comb_env, [b], [a], src_set=sb, dst_set=sa
                )
            except sh.AmbiguousCorrespondence:
                continue
            assert np.array_equal(rev.matrix, fwd.matrix.T)
            done += 1

    def test_shared_cache_matches_uncached(self, lshape_env):
        a, b = [(0.3, 1.9)], [(0.9, 0.4)]
        sa = geo.shadow_set(lshape_env, a)
        sb = geo.shadow_set(lshape_env, b)
        cache: dict = {}
        with_cache = sh.influence_relation(
            lshape_env, a, b, src_set=sa, dst_set=sb, shadow_cache=cache
        )
        without = sh.influence_relation(
            lshape_env, a, b, src_set=sa, dst_set=sb
        )
        assert with_cache == without
        assert cache  # the cache was actually populated

    def test_diagnostics_counter(self, lshape_env):
        a, b = [(0.5, 1.8)], [(0.5, 1.2)]
        diag = sh.StepDiagnostics()
        sh.influence_relation(
            lshape_env, a, b,
            src_set=geo.shadow_set(lshape_env, a),
            dst_set=geo.shadow_set(lshape_env, b),
            diagnostics=diag,
        )
        assert diag.shadow_sets_computed > 0

    def test_deadline(self, comb_env):
        import time

        a, b = [(0.2, 0.5)], [(2.0, 9.5)]
        with pytest.raises(sh.DeadlineExceeded):
            sh.influence_relation(
                comb_env, a, b,
                src_set=geo.shadow_set(comb_env, [a[0]]),
                dst_set=geo.shadow_set(comb_env, [b[0]]),
                deadline=time.monotonic() - 1.0,
            )
