"""ROUGE-1, greedy sentence attribution, and position profiles.

oracle_rouge1 and oracle_greedy below are independent reimplementations
(string.punctuation tokenizer, explicit set-union loop, restart-scan greedy)
used to cross-check the library versions on randomized fixtures.
"""

from __future__ import annotations

import random
import string
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from argcov import (
    ALL_ROLES,
    GREEDY_REFERENCE,
    IndexOutOfRange,
    NoSalientArguments,
    PositionProfile,
    Sentence,
    SummaryRecord,
    extract_salient,
    greedy_select,
    mean_salient_position,
    position_bin,
    position_profile,
    relative_position,
    relevance_eq,
    rouge1,
    unit_positions,
)

from conftest import make_doc

_STRIP = str.maketrans("", "", string.punctuation)


def oracle_tokens(text: str) -> list[str]:
    return text.lower().translate(_STRIP).split()


def oracle_rouge1(candidate: str, target: str) -> float:
    cand = oracle_tokens(candidate)
    targ = oracle_tokens(target)
    if not cand or not targ:
        return 0.0
    overlap = 0
    for tok in set(cand) | set(targ):
        overlap += min(cand.count(tok), targ.count(tok))
    if overlap == 0:
        return 0.0
    p = overlap / len(cand)
    r = overlap / len(targ)
    return 2 * p * r / (p + r)


def oracle_greedy(sentences, target_text, allowed):
    """Step-by-step maximizer, recomputing ROUGE from raw strings each step."""
    texts = {s.idx: s.text for s in sentences}
    selected: list[int] = []
    current = 0.0
    steps: list[float] = []
    while True:
        best, best_score = None, current
        for idx in sorted(allowed):
            if idx in selected:
                continue
            candidate = " ".join(texts[i] for i in selected + [idx])
            score = oracle_rouge1(candidate, target_text)
            if score > best_score:
                best, best_score = idx, score
        if best is None:
            return selected, steps
        selected.append(best)
        steps.append(best_score)
        current = best_score


# --- rouge1 -------------------------------------------------------------------


def test_rouge1_hand_cases():
    assert rouge1("a b c", "a b c") == 1.0
    assert rouge1("a b c", "x y z") == 0.0
    # oracle: overlap 2, |cand| = |targ| = 3 → P = R = F1 = 2/3
    assert rouge1("a b c", "a b d") == pytest.approx(2 / 3)
    # multiset clipping: "a a b" vs "a b b" → min-counts 1 + 1 = 2 → 2/3
    assert rouge1("a a b", "a b b") == pytest.approx(2 / 3)
    assert rouge1("", "a b") == 0.0
    assert rouge1("a b", "") == 0.0


def test_rouge1_ignores_case_and_punctuation_only():
    assert rouge1("The Court ruled.", "the court ruled") == 1.0
    # no stemming: ruled != ruling
    assert rouge1("ruled", "ruling") == 0.0
    # no stopword removal: "the" counts as a token
    assert rouge1("the", "the cat") == pytest.approx(2 / 3)


@given(
    st.lists(st.sampled_from("the cat dog sat mat ran big".split()), max_size=12),
    st.lists(st.sampled_from("the cat dog sat mat ran big".split()), max_size=12),
)
def test_rouge1_matches_oracle(c, t):
    assert rouge1(" ".join(c), " ".join(t)) == pytest.approx(
        oracle_rouge1(" ".join(c), " ".join(t))
    )


def test_rouge1_is_symmetric_in_f1():
    a, b = "alpha beta gamma", "alpha beta delta epsilon"
    assert rouge1(a, b) == pytest.approx(rouge1(b, a))


# --- greedy attribution -----------------------------------------------------------


VOCAB = "court appeal rent lease tenant landlord child custody judge panel".split()


def random_doc_and_summary(rng):
    sentences = []
    for i in range(6):
        words = [rng.choice(VOCAB) for _ in range(rng.randint(3, 8))]
        sentences.append(Sentence(i, " ".join(words) + "."))
    n_sum = rng.randint(3, 10)
    summary = " ".join(rng.choice(VOCAB) for _ in range(n_sum)) + "."
    return sentences, SummaryRecord.make("sys", summary)


def test_greedy_matches_independent_maximizer_on_random_fixtures():
    rng = random.Random(4452)
    for trial in range(200):
        sentences, summary = random_doc_and_summary(rng)
        result = greedy_select(sentences, summary, doc_id="d")
        want_sel, want_steps = oracle_greedy(sentences, summary.text, range(6))
        assert list(result.selected_indices) == want_sel, trial
        assert result.step_scores == pytest.approx(tuple(want_steps)), trial


def test_greedy_steps_strictly_increase():
    rng = random.Random(99)
    for _ in range(50):
        sentences, summary = random_doc_and_summary(rng)
        result = greedy_select(sentences, summary)
        steps = result.step_scores
        assert all(a < b for a, b in zip(steps, steps[1:]))
        if steps:
            assert result.final_rouge1 == steps[-1]


def test_greedy_exact_reproduction_selects_everything_relevant():
    sentences = [
        Sentence(0, "the tenant paid rent."),
        Sentence(1, "the landlord objected loudly."),
        Sentence(2, "irrelevant filler words here."),
    ]
    target = SummaryRecord.make("s", "the tenant paid rent. the landlord objected loudly.")
    result = greedy_select(sentences, target)
    assert set(result.selected_indices) == {0, 1}
    assert result.final_rouge1 == pytest.approx(1.0, abs=1e-12)


def test_greedy_tie_breaks_to_lowest_index():
    sentences = [
        Sentence(0, "cat dog."),
        Sentence(1, "cat dog."),  # identical content
        Sentence(2, "bird tree."),
    ]
    target = SummaryRecord.make("s", "cat dog")
    result = greedy_select(sentences, target)
    assert result.selected_indices == (0,)


def test_greedy_stops_when_nothing_improves():
    sentences = [Sentence(0, "alpha beta."), Sentence(1, "wholly unrelated.")]
    target = SummaryRecord.make("s", "alpha beta")
    result = greedy_select(sentences, target)
    assert result.selected_indices == (0,)
    assert len(result.step_scores) == 1


def test_greedy_restriction_excludes_outside_sentences():
    sentences = [
        Sentence(0, "the verdict was appealed."),
        Sentence(1, "the verdict was appealed immediately."),  # better match, excluded
        Sentence(2, "unrelated padding."),
    ]
    target = SummaryRecord.make("s", "the verdict was appealed immediately")
    unrestricted = greedy_select(sentences, target)
    restricted = greedy_select(sentences, target, restrict_to=[0, 2])
    assert unrestricted.selected_indices == (1,)
    assert restricted.selected_indices == (0,)


def test_greedy_restriction_is_invariant_to_outside_noise():
    rng = random.Random(7)
    for _ in range(30):
        sentences, summary = random_doc_and_summary(rng)
        allowed = [0, 2, 4]
        base = greedy_select(sentences, summary, restrict_to=allowed)
        noisy = sentences + [
            Sentence(6, summary.text)  # a perfect match outside the restriction
        ]
        again = greedy_select(noisy, summary, restrict_to=allowed)
        assert again.selected_indices == base.selected_indices
        assert again.step_scores == base.step_scores


def test_greedy_rejects_unknown_restrict_index():
    with pytest.raises(IndexOutOfRange):
        greedy_select([Sentence(0, "a.")], SummaryRecord.make("s", "a"), restrict_to=[3])


def test_greedy_empty_overlap_selects_nothing():
    result = greedy_select(
        [Sentence(0, "alpha."), Sentence(1, "beta.")],
        SummaryRecord.make("s", "gamma delta"),
    )
    assert result.selected_indices == ()
    assert result.final_rouge1 == 0.0
    assert result.step_scores == ()


# --- positions and bins ------------------------------------------------------------


def test_relative_position_values():
    assert relative_position(0, 1) == 0.5
    assert relative_position(0, 11) == 0.0
    assert relative_position(10, 11) == 1.0
    assert relative_position(3, 11) == pytest.approx(0.3)
    with pytest.raises(IndexOutOfRange):
        relative_position(5, 5)
    with pytest.raises(IndexOutOfRange):
        relative_position(-1, 5)


def test_position_bin_exact_boundaries():
    # (10 * idx) // (n - 1) with the top bin closed; n=11 puts idx k in bin k
    assert [position_bin(k, 11) for k in range(11)] == [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9]
    assert position_bin(0, 1) == 5  # single sentence: middle bin
    assert position_bin(1, 6) == 2  # 0.2 lands in [0.2, 0.3)
    assert position_bin(4, 5) == 9
    with pytest.raises(IndexOutOfRange):
        position_bin(9, 9)


@given(st.integers(1, 400).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n - 1))))
def test_position_bin_agrees_with_float_binning_off_boundaries(case):
    n, idx = case
    b = position_bin(idx, n)
    assert 0 <= b <= 9
    pos = relative_position(idx, n)
    # exact integer binning must contain the float position
    assert b * 0.1 <= pos + 1e-12 and pos - 1e-12 <= (b + 1) * 0.1


def test_position_profile_per_role_and_overall():
    items = [
        (0, 11, "issue"),
        (5, 11, "reason"),
        (10, 11, "conclusion"),
        (2, 11, None),  # overall only
    ]
    profiles = position_profile(items)
    assert set(profiles) == {"overall", "issue", "reason", "conclusion"}
    assert profiles["overall"].histogram == (1, 0, 1, 0, 0, 1, 0, 0, 0, 1)
    assert profiles["issue"].positions == (0.0,)
    assert profiles["overall"].mean_position == pytest.approx((0 + 0.5 + 1 + 0.2) / 4)
    assert profiles["overall"].bin_share(9) == Fraction(1, 4)


def test_position_profile_is_order_invariant():
    items = [(0, 11, "issue"), (5, 11, "reason"), (10, 11, None), (3, 11, "issue")]
    fwd = position_profile(items)
    rev = position_profile(list(reversed(items)))
    assert fwd == rev


def test_position_profile_histogram_sums():
    rng = random.Random(11)
    items = []
    for _ in range(100):
        n = rng.randint(1, 40)
        idx = rng.randrange(n)
        items.append((idx, n, rng.choice(["issue", "reason", None])))
    profiles = position_profile(items)
    assert sum(profiles["overall"].histogram) == 100
    role_total = sum(
        sum(p.histogram) for name, p in profiles.items() if name != "overall"
    )
    assert role_total == sum(1 for _, _, r in items if r is not None)


def test_position_profile_validation():
    with pytest.raises(ValueError):
        PositionProfile(positions=(0.5,), histogram=(1,) * 9)
    with pytest.raises(ValueError):
        PositionProfile(positions=(0.5,), histogram=(0,) * 10)
    with pytest.raises(NoSalientArguments):
        _ = PositionProfile(positions=(), histogram=(0,) * 10).mean_position


# --- mean salient position -----------------------------------------------------------


def test_unit_positions_average_over_merged_sentences(legal_corpus):
    doc = legal_corpus[0]  # 5 sentences; reason unit covers 1 and 2
    units = extract_salient(doc, ALL_ROLES)
    positions = unit_positions(doc, units)
    assert positions == [0.0, pytest.approx((0.25 + 0.5) / 2), 1.0]


def test_mean_salient_position_extraction_policy(legal_corpus):
    # oracle: positions 0, 3/8, 1 → mean 11/24
    doc = legal_corpus[0]
    assert mean_salient_position(doc, ALL_ROLES) == pytest.approx(11 / 24)


def test_mean_salient_position_relevance_policy(sci_corpus):
    # paper-001: relevance-5 role sentences at idx 0 and 1 of 4 → mean 1/6
    assert mean_salient_position(sci_corpus[0], relevance_eq(5)) == pytest.approx(1 / 6)


def test_mean_salient_position_greedy_reference():
    doc = make_doc(
        "g",
        [
            ("the issue is rent.", ["issue"]),
            "wholly irrelevant filler.",
            ("the court awarded rent arrears.", ["conclusion"]),
        ],
        references=[("reference", "the issue is rent. the court awarded rent arrears.")],
    )
    # greedy over role sentences {0, 2} picks both → positions 0 and 1
    assert mean_salient_position(doc, GREEDY_REFERENCE) == pytest.approx(0.5)


def test_mean_salient_position_greedy_requires_selection():
    doc = make_doc(
        "g2",
        [("alpha beta.", ["issue"]), "gamma delta."],
        references=[("reference", "epsilon zeta")],  # zero overlap
    )
    with pytest.raises(NoSalientArguments):
        mean_salient_position(doc, GREEDY_REFERENCE)


def test_mean_salient_position_no_units(legal_corpus):
    bare = make_doc("bare", ["nothing here.", "or here."])
    with pytest.raises(NoSalientArguments):
        mean_salient_position(bare, ALL_ROLES)
