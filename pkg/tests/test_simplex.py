"""Block families and convergence verdicts for the singular simplex integrals."""

import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from localtime_lab.errors import LabError
from localtime_lab.simplex import (
    EXTREMAL_FAMILIES,
    BlockFamily,
    Verdict,
    accepted_families,
    accepted_permutations,
    block_integral,
    blocks_from_permutation,
    clamped_integral,
    clamped_integral_plain,
    convergence_verdict,
    dominates,
    enumeration_check,
    extremal_bound,
)


@pytest.fixture(scope="module")
def accepted():
    return accepted_permutations()


class TestBlocks:
    def test_identity_hand_trace(self):
        fam = blocks_from_permutation(range(1, 9))
        assert fam.blocks == ((1, 7), (1, 8), (2, 7), (2, 8))

    def test_rejects_ordering_outside_domain(self):
        # x5 before x1 breaks x1 < x5
        assert blocks_from_permutation([5, 1, 2, 3, 4, 6, 7, 8]) is None

    def test_not_a_permutation(self):
        with pytest.raises(LabError):
            blocks_from_permutation([1, 1, 2, 3, 4, 5, 6, 7])

    def test_count(self, accepted):
        assert len(accepted) == 2520 == math.factorial(8) // 2**4

    def test_count_matches_brute_force(self):
        n = sum(
            all(p.index(i) < p.index(i + 4) for i in range(1, 5))
            for p in itertools.permutations(range(1, 9))
        )
        assert n == 2520

    def test_all_families_valid(self, accepted):
        for _, fam in accepted:
            sets = [set(range(m, n + 1)) for m, n in fam.blocks]
            assert all(len(s) >= 4 for s in sets)
            assert all(len(a | b) >= 6 for a, b in itertools.combinations(sets, 2))
            assert fam.is_valid()

    def test_every_family_has_extremal(self):
        names = {extremal_bound(BlockFamily(k)) for k in accepted_families()}
        assert names == set(EXTREMAL_FAMILIES)

    def test_extremals_map_to_themselves(self):
        for name, fam in EXTREMAL_FAMILIES.items():
            if fam.is_valid():
                assert extremal_bound(fam) == name

    def test_b1_is_a_bound_not_a_family(self):
        # {1..4} and {2..5} cover only five ranks, so B1 cannot arise from D
        assert EXTREMAL_FAMILIES["B1"].violations() == ["two blocks cover fewer than 6 points"]
        assert [f.case() for f in EXTREMAL_FAMILIES.values()] == [1, 2, 2, 3, 3]

    def test_case_three_example(self):
        fam = BlockFamily.of((1, 8), (1, 8), (2, 6), (3, 7))
        assert fam.case() == 3
        assert extremal_bound(fam) in ("B3", "B4")

    def test_invalid_rejected(self):
        with pytest.raises(LabError):
            extremal_bound(BlockFamily.of((1, 3), (1, 8), (4, 8), (2, 8)))
        with pytest.raises(LabError):
            BlockFamily.of((2, 2), (1, 8), (1, 8), (1, 8))

    @given(st.permutations(list(range(1, 9))))
    def test_mirror_of_accepted_is_accepted(self, perm):
        fam = blocks_from_permutation(perm)
        if fam is not None:
            keys = accepted_families()
            assert fam.mirrored().key in keys

    def test_dominates_is_reflexive(self):
        for fam in EXTREMAL_FAMILIES.values():
            assert dominates(fam, fam)


class TestBlockIntegral:
    def test_alpha_zero_is_volume(self):
        est = block_integral(0.0, EXTREMAL_FAMILIES["B0"], 1e-2, n_mc=1000)
        assert est.value == pytest.approx(1 / math.factorial(8), rel=1e-12)
        assert est.stderr < 1e-15

    def test_beta_moment_oracle(self):
        # four copies of the full block: (x8 - x1)^{-4 alpha} with x8 - x1 ~ Beta(7, 2)
        fam = BlockFamily.of((1, 8), (1, 8), (1, 8), (1, 8))
        est = block_integral(1.0, fam, 1e-6, n_mc=400_000, seed=4)
        exact = (1 / 12) / (1 / 56) / math.factorial(8)
        assert abs(est.value - exact) < 4 * est.stderr

    def test_nonincreasing_in_eps(self):
        fam = EXTREMAL_FAMILIES["B4"]
        vals = [block_integral(1.5, fam, e, n_mc=50_000, seed=2).value for e in (1e-1, 1e-2, 1e-3)]
        assert vals[0] <= vals[1] <= vals[2]

    def test_domination_on_sampled_families(self):
        keys = sorted(accepted_families())
        for key in random.Random(7).sample(keys, 20):
            fam = BlockFamily(key)
            ext = EXTREMAL_FAMILIES[extremal_bound(fam)]
            a = block_integral(1.5, fam, 1e-2, n_mc=40_000, seed=11)
            mir = block_integral(1.5, ext, 1e-2, n_mc=40_000, seed=11)
            alt = block_integral(1.5, ext.mirrored(), 1e-2, n_mc=40_000, seed=11)
            assert a.value <= max(mir.value, alt.value) + 3 * math.hypot(a.stderr, mir.stderr)

    def test_deterministic(self):
        fam = EXTREMAL_FAMILIES["B2"]
        assert block_integral(1.0, fam, 1e-2, 5000, 3) == block_integral(1.0, fam, 1e-2, 5000, 3)

    @pytest.mark.parametrize("kw", [dict(alpha=-1.0), dict(eps=0.0), dict(n_mc=0)])
    def test_rejects(self, kw):
        args = dict(alpha=1.0, fam=EXTREMAL_FAMILIES["B0"], eps=1e-2, n_mc=100)
        args.update(kw)
        with pytest.raises(LabError):
            block_integral(**args)

    def test_enumeration_completeness(self):
        blocks, direct = enumeration_check(1.2, 1e-2, n_mc=200_000, seed=5)
        assert abs(blocks.value - direct.value) < 3 * math.hypot(blocks.stderr, direct.stderr)


class TestClampedIntegral:
    def test_radial_matches_plain(self):
        vals, errs = clamped_integral("sing3", 0.05, [1e-2], n_mc=200_000, seed=1)
        plain = clamped_integral_plain("sing3", 0.05, 1e-2, n_mc=400_000, seed=2)
        assert abs(vals[0] - plain.value) < 4 * math.hypot(errs[0], plain.stderr)

    def test_nondecreasing_as_eps_shrinks(self):
        vals, _ = clamped_integral("sing2", 0.3, [1e-1, 1e-2, 1e-3, 1e-4], n_mc=20_000)
        assert np.all(np.diff(vals) >= 0)

    @pytest.mark.parametrize("args", [("sing4", 0.2, [1e-2]), ("sing1", 0.0, [1e-2]), ("sing1", 0.2, [0.0])])
    def test_rejects(self, args):
        with pytest.raises(LabError):
            clamped_integral(*args)


class TestVerdict:
    @pytest.mark.parametrize("iid,delta,status", [("sing1", 0.20, "converges"), ("sing3", 0.30, "diverges"),
                                                  ("sing3", 0.25, "diverges")])
    def test_examples(self, iid, delta, status):
        assert convergence_verdict(iid, delta).status == status

    @pytest.mark.parametrize("iid", ["sing1", "sing2", "sing3"])
    def test_stable_below_threshold(self, iid):
        v = convergence_verdict(iid, 0.15)
        (_, a), (_, b) = v.evidence[-2:]
        assert abs(b / a - 1) < 0.01

    @pytest.mark.parametrize("iid", ["sing1", "sing2", "sing3"])
    def test_growth_above_threshold(self, iid):
        v = convergence_verdict(iid, 0.30)
        assert v.fitted_growth > 0
        assert v.fitted_growth / v.growth_stderr > 5

    def test_boundary_is_logarithmic(self):
        v = convergence_verdict("sing2", 0.25)
        assert v.model == "log"
        assert abs(v.fitted_growth) < 0.05

    def test_evidence_order_enforced(self):
        with pytest.raises(LabError):
            Verdict("sing1", 0.2, "converges", -1.0, 0.1, ((1e-2, 1.0), (1e-1, 1.0)))

    def test_needs_decades(self):
        with pytest.raises(LabError):
            convergence_verdict("sing1", 0.2, decades=3)
