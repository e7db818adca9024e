import filecmp

import pytest

from dialmt.toydata import check_toy_data, generate_toy_data

SMALL = dict(vocab_size=80, n_train=120, n_tune=15, n_dev=20, n_test=20, n_pivot_src=150, n_pivot_tgt=120)


@pytest.fixture(scope="module")
def toy():
    return generate_toy_data(seed=3, **SMALL)


def test_fixed_seed_is_byte_identical(tmp_path):
    a = generate_toy_data(seed=5, **SMALL).write(tmp_path / "a")
    b = generate_toy_data(seed=5, **SMALL).write(tmp_path / "b")
    for name, path in a.items():
        assert filecmp.cmp(path, b[name], shallow=False), name


def test_different_seeds_differ():
    a = generate_toy_data(seed=1, **SMALL)
    b = generate_toy_data(seed=2, **SMALL)
    assert a.train.pairs != b.train.pairs


def test_post_conditions_hold(toy):
    assert check_toy_data(toy) == []


def test_sizes(toy):
    sizes = toy.manifest()["sizes"]
    assert (sizes["train"], sizes["tune"], sizes["dev"], sizes["test"]) == (120, 15, 20, 20)
    assert (sizes["pivot_src"], sizes["pivot_tgt"]) == (150, 120)
    assert len(toy.train_gold) == len(toy.train)


def test_planted_oov_types(toy):
    train_src = {w for s, _ in toy.train for w in s.words}
    pivot_src = {w for s, _ in toy.pivot_src for w in s.words}
    assert toy.planted_oov_types
    for w in toy.planted_oov_types:
        assert w not in train_src
        assert w in pivot_src


def test_gold_alignments_fit_segmented_lengths(toy):
    from dialmt.morphology import segment_d3

    for (s, t), gold in zip(toy.train, toy.train_gold):
        assert gold.source_len == len(segment_d3(toy.src_lexicon, s))
        assert gold.target_len == len(segment_d3(toy.tgt_lexicon, t))


def test_rejects_empty_sizes():
    with pytest.raises(ValueError):
        generate_toy_data(n_train=0)
    with pytest.raises(ValueError):
        generate_toy_data(vocab_size=0)
