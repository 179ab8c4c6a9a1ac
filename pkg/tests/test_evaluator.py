"""Evaluator: exact probabilities, histogram oracles, judgment."""

from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from envseal.core import DiscriminatorId, KeyMaterial, ValidationError
from envseal.evaluator import (
    EXACT_PROFILE,
    LEARNED_PROFILE,
    EvaReport,
    EvaThresholds,
    KeyHistogram,
    judge,
    p_acc,
    p_in_typed,
    p_in_unique,
    p_out,
    p_sta,
)


def km(value: int) -> KeyMaterial:
    return KeyMaterial.from_int(value, 128, DiscriminatorId.TYPICAL_HASH)


def brute_force_sta(items: list[KeyMaterial | None]) -> tuple[Fraction, KeyMaterial | None]:
    """Exhaustive recount oracle; None marks a failed derivation."""
    real = [k.bits for k in items if k is not None]
    if not real:
        return Fraction(0), None
    counts = Counter(real)
    best = max(counts.items(), key=lambda kv: (kv[1], [0xFF - b for b in kv[0]]))
    return Fraction(best[1], len(items)), km(int.from_bytes(best[0], "big"))


def brute_force_acc(items: list[KeyMaterial | None], key: KeyMaterial) -> Fraction:
    hits = sum(1 for k in items if k is not None and k.bits == key.bits)
    return Fraction(hits, len(items))


def hist_of(items: list[KeyMaterial | None]) -> KeyHistogram:
    hist = KeyHistogram()
    for k in items:
        hist.add_failure() if k is None else hist.add(k)
    return hist


class TestPIn:
    def test_power_of_two_space(self):
        assert p_in_unique(2**128) == Fraction(1, 2**128)

    def test_single_sample_space(self):
        assert p_in_unique(1) == 1

    def test_small_space(self):
        assert p_in_unique(4) == Fraction(1, 4)

    def test_zero_rejected(self):
        with pytest.raises(ValidationError):
            p_in_unique(0)

    def test_typed_huge(self):
        assert p_in_typed(1, 2**128) == Fraction(1, 2**128)

    def test_typed_equal(self):
        assert p_in_typed(7, 7) == 1

    def test_typed_one_of_eight(self):
        assert p_in_typed(1, 8) == Fraction(1, 8)

    def test_typed_ordering(self):
        with pytest.raises(ValidationError):
            p_in_typed(9, 8)


class TestPOut:
    def test_exact_values(self):
        assert p_out(128) == Fraction(1, 2**128)
        assert p_out(256) == Fraction(1, 2**256)

    def test_both_satisfy_learned_bound(self):
        assert p_out(128) <= Fraction(1, 2**128)
        assert p_out(256) <= Fraction(1, 2**128)
        assert p_out(256) < p_out(128)

    def test_unsupported_width(self):
        with pytest.raises(ValidationError):
            p_out(192)


class TestPSta:
    def test_three_of_four(self):
        sta, key = p_sta(hist_of([km(1), km(1), km(1), km(2)]))
        assert sta == Fraction(3, 4)
        assert key.bits == km(1).bits

    def test_unanimous(self):
        sta, key = p_sta(hist_of([km(9)] * 5))
        assert sta == 1 and key.bits == km(9).bits

    def test_tie_breaks_to_smallest_bits(self):
        sta, key = p_sta(hist_of([km(7), km(3), km(7), km(3)]))
        assert sta == Fraction(1, 2)
        assert key.bits == km(3).bits

    def test_failures_count_against_stability(self):
        sta, key = p_sta(hist_of([km(1), km(1), None, None]))
        assert sta == Fraction(1, 2)

    def test_all_failed(self):
        sta, key = p_sta(hist_of([None, None]))
        assert sta == 0 and key is None

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            p_sta(KeyHistogram())


class TestPAcc:
    def test_no_accessible_negative(self):
        assert p_acc(hist_of([km(2), km(3), km(4)]), km(1)) == 0

    def test_half_accessible(self):
        assert p_acc(hist_of([km(1), km(2)]), km(1)) == Fraction(1, 2)

    def test_failures_never_accessible(self):
        assert p_acc(hist_of([None, km(1)]), km(1)) == Fraction(1, 2)

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            p_acc(KeyHistogram(), km(1))


@given(
    st.lists(
        st.one_of(st.none(), st.integers(0, 6).map(km)), min_size=1, max_size=200
    ),
)
@settings(max_examples=200)
def test_histogram_matches_brute_force(items):
    hist = hist_of(items)
    sta, chosen = p_sta(hist)
    oracle_sta, oracle_key = brute_force_sta(items)
    assert sta == oracle_sta
    assert (chosen is None) == (oracle_key is None)
    if chosen is not None:
        assert chosen.bits == oracle_key.bits
        assert p_acc(hist, chosen) == brute_force_acc(items, chosen)


@given(st.lists(st.integers(0, 4).map(km), min_size=1, max_size=100))
def test_sta_plus_rest_is_one(keys):
    hist = hist_of(keys)
    sta, chosen = p_sta(hist)
    rest = sum(
        (Fraction(c, hist.total) for k, c in hist.counts.items() if k.bits != chosen.bits),
        Fraction(0),
    )
    assert sta + rest == 1 or len(hist.counts) == 1 and sta == 1


class TestJudge:
    def test_exact_profile_passes_perfect_run(self):
        report = judge(
            Fraction(1, 2**128), p_out(128), Fraction(1), Fraction(0), EXACT_PROFILE
        )
        assert report.passed

    def test_learned_profile_passes_published_figures(self):
        # a trained run reported 98.5% stability and zero accessibility
        report = judge(
            Fraction(1, 2**128), p_out(128), Fraction(985, 1000), Fraction(0),
            LEARNED_PROFILE,
        )
        assert report.passed

    def test_stability_threshold_violation_fails(self):
        report = judge(
            Fraction(1, 2**128), p_out(128), Fraction(94, 100), Fraction(0),
            LEARNED_PROFILE,
        )
        assert not report.passed

    def test_monotone_improvement_never_flips_to_fail(self):
        base = dict(
            p_in_value=Fraction(1, 2**128),
            p_out_value=p_out(128),
            p_sta_value=Fraction(96, 100),
            p_acc_value=Fraction(1, 1000),
        )
        assert judge(thresholds=LEARNED_PROFILE, **base).passed
        better = dict(base, p_sta_value=Fraction(99, 100), p_acc_value=Fraction(0))
        assert judge(thresholds=LEARNED_PROFILE, **better).passed

    def test_threshold_validation(self):
        with pytest.raises(ValidationError):
            EvaThresholds(Fraction(0), Fraction(1), Fraction(1), Fraction(0))


class TestReportSerialization:
    def make_report(self) -> EvaReport:
        return judge(
            Fraction(1, 2**128), p_out(128), Fraction(63, 64), Fraction(0),
            LEARNED_PROFILE,
            discriminator=DiscriminatorId.BDNN,
            chosen_key=km(5),
            positives=64, negatives=80,
        )

    def test_record_roundtrip_is_exact(self):
        report = self.make_report()
        back = EvaReport.from_record(report.to_record())
        assert back.p_sta == report.p_sta
        assert back.p_in == Fraction(1, 2**128)
        assert back.chosen_key.bits == km(5).bits
        assert back.passed == report.passed

    def test_text_report_field_order(self):
        text = self.make_report().to_text()
        names = [line.split()[0] for line in text.splitlines()[1:]]
        assert names[:5] == [
            "discriminator", "positives", "negatives", "positive_failures",
            "negative_failures",
        ]
        assert "pass" in names
