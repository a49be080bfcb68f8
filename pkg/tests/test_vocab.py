import numpy as np
import pytest
from scipy import stats

from alpha_embed.errors import DomainError, ParseError, SizeError
from alpha_embed.vocab import (
    EOS_ID,
    PAD_ID,
    SOS_ID,
    Renaming,
    Vocabulary,
    apply_renaming,
    default_interchangeable_name,
    enumerate_renamings,
    extend_vocabulary,
    identity_renaming,
    invert_renaming,
    renaming_count,
    sample_renaming,
)


def small_vocab(m: int = 5) -> Vocabulary:
    return Vocabulary(["<pad>", "<s>", "</s>"], m)


def test_special_ids():
    v = small_vocab()
    assert (PAD_ID, SOS_ID, EOS_ID) == (0, 1, 2)
    assert v.id_to_token(PAD_ID) == "<pad>"
    assert v.id_to_token(SOS_ID) == "<s>"
    assert v.id_to_token(EOS_ID) == "</s>"
    assert v.n == 3 and v.m == 5 and len(v) == 8


def test_default_names_letters_then_numbered():
    names = [default_interchangeable_name(i) for i in range(30)]
    assert names[0] == "a" and names[25] == "z"
    assert names[26] == "ap10" and names[29] == "ap13"
    assert len(set(names)) == 30


def test_specials_must_lead():
    with pytest.raises(ValueError):
        Vocabulary(["<s>", "<pad>", "</s>"], 3)
    with pytest.raises(ValueError):
        Vocabulary(["<pad>", "<s>", "</s>", "a"], 3)  # clash with interchangeable name


def test_encode_decode_roundtrip():
    v = small_vocab()
    ids = v.encode("abcab")
    assert ids == [3, 4, 5, 3, 4]
    assert v.decode(ids) == "abcab"


def test_encode_greedy_longest_match():
    v = Vocabulary(["<pad>", "<s>", "</s>"], 28)
    assert v.encode("ap10a") == [v.token_to_id("ap10"), v.token_to_id("a")]
    assert v.decode(v.encode("ap11ap10")) == "ap11ap10"


def test_encode_unknown_raises():
    v = small_vocab()
    with pytest.raises(ParseError):
        v.encode("abz")


def test_ap_count_across_sequences():
    v = small_vocab()
    a = v.encode("aab")
    b = v.encode("bc")
    assert v.ap_count(a) == 2
    assert v.ap_count(a, b) == 3
    assert v.ap_count([PAD_ID, SOS_ID]) == 0


def test_extend_keeps_ids():
    v = small_vocab(4)
    w = extend_vocabulary(v, 9)
    assert w.m == 9 and w.n == v.n
    for tok in "abcd":
        assert w.token_to_id(tok) == v.token_to_id(tok)
    with pytest.raises(SizeError):
        extend_vocabulary(v, 3)


def test_renaming_validation():
    with pytest.raises(ValueError):
        Renaming({3: 4, 5: 4}, boundary=3)  # not injective
    with pytest.raises(ValueError):
        Renaming({1: 4}, boundary=3)  # key below boundary


def test_renaming_call_and_domain():
    r = Renaming({3: 5, 4: 3}, boundary=3)
    assert r(0) == 0 and r(2) == 2  # identity below boundary
    assert r(3) == 5 and r(4) == 3
    with pytest.raises(DomainError):
        r(5)


def test_apply_and_invert():
    v = small_vocab()
    r = Renaming({3: 6, 4: 3, 5: 4}, boundary=3)
    seq = v.encode("abcab")
    out = apply_renaming(seq, r)
    assert v.decode(out) == "dabda"
    assert apply_renaming(out, invert_renaming(r)) == seq


def test_invert_roundtrip_random():
    rng = np.random.default_rng(7)
    for _ in range(200):
        r = sample_renaming(rng, source_m=4, target_m=9, n=3)
        inv = invert_renaming(r)
        for i in range(3, 7):
            assert inv(r(i)) == i


def test_identity_renaming():
    r = identity_renaming(4, n=3)
    assert [r(i) for i in range(3, 7)] == [3, 4, 5, 6]


def test_sample_renaming_bounds():
    rng = np.random.default_rng(0)
    with pytest.raises(SizeError):
        sample_renaming(rng, source_m=5, target_m=4, n=3)
    r = sample_renaming(rng, source_m=3, target_m=3, n=3)
    assert sorted(r.image_tuple()) == [3, 4, 5]


def test_sample_renaming_uniform():
    # All 6 injections of 2 tokens into 3 slots should be equally likely.
    rng = np.random.default_rng(123)
    counts: dict[tuple, int] = {}
    draws = 12000
    for _ in range(draws):
        r = sample_renaming(rng, source_m=2, target_m=3, n=3)
        key = r.image_tuple()
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 6
    p = stats.chisquare(list(counts.values())).pvalue
    assert p > 0.001


def test_enumerate_renamings():
    rs = list(enumerate_renamings(3, target_m=5, n=3))
    assert len(rs) == renaming_count(3, 5) == 60
    images = [r.image_tuple() for r in rs]
    assert images == sorted(images)  # lexicographic image order
    assert len(set(images)) == 60
    for r in rs:
        assert sorted(r.mapping) == [3, 4, 5]


def test_enumerate_renamings_explicit_domain():
    rs = list(enumerate_renamings(2, target_m=3, n=3, domain=(4, 5)))
    assert len(rs) == 6
    for r in rs:
        assert sorted(r.mapping) == [4, 5]
    with pytest.raises(SizeError):
        list(enumerate_renamings(4, target_m=3, n=3))
