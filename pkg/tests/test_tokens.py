import pytest

from prefalign.errors import InputError
from prefalign.tokens import TokenKind, Verdict, Vocab


def test_vocab_size_default(vocab):
    # 6 tags + 5 dim marks + 5 evid + 5 rate + 3 prefer + 4 fillers
    assert vocab.size == 28


def test_ids_are_dense_and_unique(vocab):
    names = [vocab.name(t) for t in range(vocab.size)]
    assert len(set(names)) == vocab.size


def test_kind_and_value_roundtrip(vocab):
    assert vocab.kind(vocab.open_think) is TokenKind.OPEN_THINK
    assert vocab.kind(vocab.dim_mark(3)) is TokenKind.DIM_MARK
    assert vocab.value(vocab.dim_mark(3)) == 3
    assert vocab.value(vocab.evid(4)) == 4
    assert vocab.value(vocab.rate(1)) == 1
    assert vocab.value(vocab.prefer(Verdict.TIE)) is Verdict.TIE
    assert vocab.value(vocab.filler(2)) == 2
    assert vocab.value(vocab.close_answer) is None


def test_text_roundtrip(vocab):
    text = "<think> EVID_3 FILLER_0 </think> <answer> RATE_3 </answer>"
    ids = vocab.from_text(text)
    assert vocab.to_text(ids) == text


def test_text_roundtrip_all_tokens(vocab):
    ids = list(range(vocab.size))
    assert vocab.from_text(vocab.to_text(ids)) == ids


def test_unknown_token_name(vocab):
    with pytest.raises(InputError):
        vocab.from_text("<think> BANANA </think>")


def test_out_of_range_constructors(vocab):
    with pytest.raises(InputError):
        vocab.evid(0)
    with pytest.raises(InputError):
        vocab.rate(6)
    with pytest.raises(InputError):
        vocab.dim_mark(5)
    with pytest.raises(InputError):
        vocab.filler(4)


def test_verdict_swap():
    assert Verdict.A.swapped() is Verdict.B
    assert Verdict.B.swapped() is Verdict.A
    assert Verdict.TIE.swapped() is Verdict.TIE


def test_custom_vocab_sizes():
    v = Vocab(n_dims=3, rating_levels=4, n_fillers=2)
    assert v.size == 6 + 3 + 4 + 4 + 3 + 2
    assert v.value(v.rate(4)) == 4
