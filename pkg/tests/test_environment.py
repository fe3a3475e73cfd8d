import pytest
from hypothesis import given
from hypothesis import strategies as st

from erw import (
    CookieEnvironment,
    DomainError,
    SpeedSign,
    Transience,
    classify,
    delta,
    mirror,
)

probs = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
open_probs = st.floats(min_value=1e-9, max_value=1 - 1e-9, allow_nan=False)


@pytest.mark.parametrize(
    "p, expected",
    [((0.9, 0.9, 0.9), 2.4), ((0.5, 0.5, 0.5), 0.0), ((1, 1, 1), 3.0)],
)
def test_delta_examples(p, expected):
    assert delta(CookieEnvironment(p)) == pytest.approx(expected, abs=1e-15)


def test_delta_exact_for_dyadic_inputs():
    assert delta(CookieEnvironment((0.75, 0.625, 1.0))) == 1.75


@pytest.mark.parametrize(
    "p, transience, sign",
    [
        ((0.9, 0.9, 0.9), Transience.TRANSIENT_RIGHT, SpeedSign.POSITIVE),
        ((0.5, 0.5, 0.5), Transience.RECURRENT, SpeedSign.ZERO),
        ((0.1, 0.1, 0.1), Transience.TRANSIENT_LEFT, SpeedSign.NEGATIVE),
        ((0.9, 0.8, 0.7), Transience.TRANSIENT_RIGHT, SpeedSign.ZERO),
    ],
)
def test_classify_examples(p, transience, sign):
    c = classify(CookieEnvironment(p))
    assert (c.transience, c.speed_sign) == (transience, sign)


@pytest.mark.parametrize(
    "p, transience, sign",
    [
        ((1.0, 0.5), Transience.RECURRENT, SpeedSign.ZERO),  # delta = 1
        ((0.0, 0.5), Transience.RECURRENT, SpeedSign.ZERO),  # delta = -1
        ((1.0, 1.0), Transience.TRANSIENT_RIGHT, SpeedSign.ZERO),  # delta = 2
        ((0.0, 0.0), Transience.TRANSIENT_LEFT, SpeedSign.ZERO),  # delta = -2
    ],
)
def test_classify_boundaries_are_closed(p, transience, sign):
    c = classify(CookieEnvironment(p))
    assert (c.transience, c.speed_sign) == (transience, sign)


def test_mirror_examples():
    assert mirror(CookieEnvironment((0.5, 0.5, 0.5))).p == (0.5, 0.5, 0.5)
    assert mirror(CookieEnvironment((0.9, 0.8, 0.7))).p == pytest.approx((0.1, 0.2, 0.3))
    env = CookieEnvironment((0.75, 0.5, 0.25))
    assert mirror(mirror(env)) == env


def test_validation_and_parsing():
    env = CookieEnvironment.from_string("0.9, 0.8,0.7")
    assert env.M == 3 and env.p == (0.9, 0.8, 0.7)
    assert env.strict and not CookieEnvironment((1, 0.5)).strict
    with pytest.raises(DomainError):
        CookieEnvironment((1.2, 0.5))
    with pytest.raises(DomainError):
        CookieEnvironment(())
    with pytest.raises(DomainError):
        CookieEnvironment((0.5, 0.5), M=3)
    with pytest.raises(DomainError):
        CookieEnvironment.from_string("0.9,,0.1")
    with pytest.raises(DomainError):
        CookieEnvironment.from_string("0.9,abc")


@given(st.lists(probs, min_size=1, max_size=8))
def test_mirror_negates_delta(p):
    env = CookieEnvironment(p)
    assert delta(mirror(env)) == pytest.approx(-delta(env), abs=1e-12)


@given(st.lists(open_probs, min_size=1, max_size=2))
def test_fewer_than_three_cookies_have_zero_speed(p):
    assert classify(CookieEnvironment(p)).speed_sign is SpeedSign.ZERO


@given(st.lists(probs, min_size=1, max_size=6), st.randoms())
def test_classification_depends_only_on_delta(p, rnd):
    shuffled = list(p)
    rnd.shuffle(shuffled)
    assert classify(CookieEnvironment(p)) == classify(CookieEnvironment(shuffled))


@given(st.lists(probs, min_size=1, max_size=6))
def test_sign_implies_transience(p):
    c = classify(CookieEnvironment(p))
    if c.speed_sign is SpeedSign.POSITIVE:
        assert c.transience is Transience.TRANSIENT_RIGHT
    if c.speed_sign is SpeedSign.NEGATIVE:
        assert c.transience is Transience.TRANSIENT_LEFT
