import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vccgm.errors import EmptyDataset, InsufficientSamples, InvalidMode, InvalidSpec
from vccgm.imbalance_synth import (
    HelixFamily,
    ImbalanceSpec,
    LineFamily,
    RingFamily,
    dataset_from_bytes,
    dataset_to_bytes,
    make_imbalanced,
    make_toy_dataset,
    mean_counts,
    multimodal_counts,
    read_csv,
    read_dataset,
    subsample,
    unimodal_counts,
    write_csv,
    write_dataset,
    write_histogram,
)

LABELS = np.arange(1, 100, dtype=float)


def spec(n_modes=1, noise=0.0, **kw):
    pattern = {1: "unimodal", 2: "bimodal", 3: "trimodal"}[n_modes]
    modes = kw.pop("modes", (50.0, 20.0, 80.0)[:n_modes])
    return ImbalanceSpec(modes=modes, noise_std=noise, pattern=pattern, **kw)


def test_mode_gets_peak():
    c = unimodal_counts(LABELS, 50.0, spec())
    assert c[49] == 49


def test_distance_ten_gives_18():
    c = unimodal_counts(LABELS, 50.0, spec())
    assert c[59] == 18 == c[39]


def test_noise_off_matches_formula():
    c = unimodal_counts(LABELS, 50.0, spec())
    expected = [max(1, int(49 * math.exp(-0.1 * abs(y - 50)))) for y in LABELS]
    assert c.tolist() == expected


def test_invalid_mode():
    with pytest.raises(InvalidMode):
        unimodal_counts(LABELS, 50.5, spec())
    with pytest.raises(InvalidMode):
        multimodal_counts(LABELS, (20.0, 20.0), spec(2, modes=(20.0, 80.0)))
    with pytest.raises(InvalidSpec):
        ImbalanceSpec(modes=(1.0,), pattern="bimodal")


def test_bimodal_is_pointwise_max():
    s = spec(2, modes=(20.0, 80.0))
    c = multimodal_counts(LABELS, (20.0, 80.0), s)
    a = unimodal_counts(LABELS, 20.0, spec(modes=(20.0,)))
    b = unimodal_counts(LABELS, 80.0, spec(modes=(80.0,)))
    assert c.tolist() == np.maximum(a, b).tolist()
    # label 50 is equidistant from both modes
    assert c[49] == a[49] == b[49]


def test_trimodal_peaks():
    modes = (20.0, 50.0, 80.0)
    c = multimodal_counts(LABELS, modes, spec(3, modes=modes))
    assert [c[int(m) - 1] for m in modes] == [49, 49, 49]
    assert np.sum(c == 49) == 3


def test_sum_combination_flag():
    s = ImbalanceSpec(modes=(40.0, 60.0), noise_std=0.0, pattern="bimodal", combine="sum")
    m = mean_counts(LABELS, (40.0, 60.0), s)
    assert m[49] == min(49, int(2 * 49 * math.exp(-1.0)))


def test_imbalance_ratio_present():
    c = unimodal_counts(np.arange(5, 96, dtype=float), 50.0, spec(noise=5.0))
    c = c[c > 0]
    assert c.max() / c.min() >= 10


@given(st.integers(0, 10_000), st.floats(0.01, 1.0), st.floats(0, 20))
def test_clamp_law(seed, decay, noise):
    s = ImbalanceSpec(modes=(50.0,), decay_rate=decay, noise_std=noise)
    c = unimodal_counts(LABELS, 50.0, s, rng_seed=seed)
    assert c.min() >= 0 and c.max() <= 49


def test_default_family_moments():
    fam = RingFamily()
    assert np.allclose(fam.mean([0.0]), [[1.0, 0.0]])
    assert fam.std([0.0])[0] == pytest.approx(0.05)
    assert np.allclose(fam.mean([0.5]), [[-1.0, 0.0]], atol=1e-12)


def test_sample_mean_converges():
    fam = RingFamily()
    ds = make_toy_dataset(2, 100_000, fam, rng_seed=3)
    for y in (0.0, 1.0):
        x = ds.x[ds.y_raw == y]
        sd = fam.std([y])[0]
        assert np.all(np.abs(x.mean(axis=0) - fam.mean([y])[0]) < 3 * sd / np.sqrt(len(x)))


def test_families_have_declared_dimension():
    for fam in (RingFamily(), LineFamily(), HelixFamily()):
        assert make_toy_dataset(3, 2, fam).d == fam.dim


def test_non_pd_family_rejected():
    with pytest.raises(InvalidSpec):
        make_toy_dataset(3, 2, RingFamily(base_std=-0.1, std_slope=0.0))


def test_subsample_identity_and_errors():
    full = make_toy_dataset(5, 4, rng_seed=1)
    same = subsample(full, [4] * 5, rng_seed=9)
    assert np.array_equal(same.x, full.x)
    with pytest.raises(InsufficientSamples):
        subsample(full, [5, 0, 0, 0, 0])
    with pytest.raises(EmptyDataset):
        subsample(full, [0] * 5)


def test_seeded_output_is_byte_identical():
    full = make_toy_dataset(99, 49, RingFamily(span=0.75), rng_seed=0, raw_range=(0, 100), interior=True)
    s = ImbalanceSpec(modes=(50.0,))
    a, _ = make_imbalanced(full, s, 4)
    b, _ = make_imbalanced(full, s, 4)
    assert dataset_to_bytes(a) == dataset_to_bytes(b)


def test_binary_and_csv_roundtrip(tmp_path):
    ds = make_toy_dataset(4, 3, HelixFamily(rise=2.0), rng_seed=2, raw_range=(10, 20))
    back = dataset_from_bytes(dataset_to_bytes(ds))
    assert np.array_equal(back.x, ds.x) and np.array_equal(back.y_raw, ds.y_raw)
    assert back.family == ds.family and (back.raw_min, back.raw_max) == (10, 20)
    write_dataset(tmp_path / "d.bin", ds)
    assert dataset_to_bytes(read_dataset(tmp_path / "d.bin")) == dataset_to_bytes(ds)
    write_csv(tmp_path / "d.csv", ds)
    c = read_csv(tmp_path / "d.csv", 10, 20)
    assert np.array_equal(c.x, ds.x) and np.array_equal(c.y_raw, ds.y_raw)
    write_histogram(tmp_path / "h.csv", ds)
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "label,count" and len(lines) == 5


def test_bad_bytes():
    with pytest.raises(InvalidSpec):
        dataset_from_bytes(b"nope")
    buf = dataset_to_bytes(make_toy_dataset(2, 1))
    with pytest.raises(InvalidSpec):
        dataset_from_bytes(buf[:-8])
