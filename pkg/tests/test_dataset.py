import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from locnoise.dataset import (
    GaussianMixtureSpec,
    LabeledDataset,
    MixtureComponent,
    NoiseSpec,
    Standardizer,
    asymmetric_xor,
    gen_mixture,
    inject_noise,
    load_csv,
    load_points_csv,
    noisy_posterior,
    save_csv,
    symmetric_xor,
)
from locnoise.errors import ParseError, ValidationError


def test_symmetric_xor_balanced_classes():
    ds = gen_mixture(symmetric_xor(), 1000, 0)
    assert ds.n == 1000 and ds.d == 2
    assert abs(int(ds.labels.sum()) - 500) < 60


def test_symmetric_xor_components_near_centres():
    ds = gen_mixture(symmetric_xor(), 4000, 1)
    X, y = ds.instances, ds.labels
    c1 = X[y == 1]
    # class 1 sits in the first and third quadrants
    assert np.mean(np.sign(c1[:, 0]) == np.sign(c1[:, 1])) > 0.95
    c0 = X[y == 0]
    assert np.mean(np.sign(c0[:, 0]) != np.sign(c0[:, 1])) > 0.95


def test_asymmetric_xor_draws_from_four_gaussians():
    spec = asymmetric_xor()
    ds = gen_mixture(spec, 6000, 2)
    centres = {1: np.array([[4, 4], [-2, -2]]), 0: np.array([[-1, 1], [1, -1]])}
    for c in (0, 1):
        pts = ds.instances[ds.labels == c]
        nearest = np.argmin(((pts[:, None, :] - centres[c][None]) ** 2).sum(-1), axis=1)
        for j in range(2):
            grp = pts[nearest == j]
            assert abs(len(grp) / len(pts) - 0.5) < 0.1
            if c == 1:
                # well separated centres: the cluster mean recovers the centre
                assert np.allclose(grp.mean(axis=0), centres[c][j], atol=0.15)


def test_single_component_mean_over_repeats():
    spec = GaussianMixtureSpec(
        ((MixtureComponent((0.0, 0.0)),), (MixtureComponent((0.0, 0.0)),)), (0.5, 0.5)
    )
    seeds = np.random.SeedSequence(3).spawn(100_000)
    # the per-draw generator is exercised for a subset; the full sample uses one call
    few = np.array([gen_mixture(spec, 1, s).instances[0] for s in seeds[:500]])
    assert few.shape == (500, 2)
    many = gen_mixture(spec, 100_000, 4).instances
    assert np.all(np.abs(many.mean(axis=0)) < 0.02)
    assert np.all(np.abs(few.mean(axis=0)) < 0.2)


def test_gen_mixture_deterministic():
    a = gen_mixture(symmetric_xor(), 50, 11)
    b = gen_mixture(symmetric_xor(), 50, 11)
    assert a == b
    assert a != gen_mixture(symmetric_xor(), 50, 12)


@pytest.mark.parametrize(
    "kwargs, field",
    [
        ({"priors": (0.7, 0.7)}, "priors"),
        ({"components": (((0, 0),), ())}, "components"),
        ({"components": (({"center": (0, 0), "scale": -1},), ((1, 1),))}, "scale"),
        ({"components": (({"center": (0, 0), "weight": 0.5},), ((1, 1),))}, "weight"),
        ({"components": (((0, 0),), ((1, 1, 1),))}, "center"),
    ],
)
def test_invalid_mixture_names_field(kwargs, field):
    args = {"components": (((0, 0),), ((1, 1),)), "priors": (0.5, 0.5)}
    args.update(kwargs)
    with pytest.raises(ValidationError) as exc:
        GaussianMixtureSpec(**args)
    assert exc.value.field == field


def test_gen_mixture_rejects_nonpositive_n():
    with pytest.raises(ValidationError):
        gen_mixture(symmetric_xor(), 0, 0)


def test_mixture_dict_roundtrip():
    spec = asymmetric_xor()
    assert GaussianMixtureSpec.from_dict(spec.to_dict()) == spec
    assert GaussianMixtureSpec.from_dict("symmetric_xor") == symmetric_xor()


# -- noise -------------------------------------------------------------------


def test_noisy_posterior_examples():
    assert noisy_posterior(0.5, NoiseSpec.ccn(0.0, 0.10)) == pytest.approx(0.55, abs=1e-15)
    # eta = 1 gives 1 - alpha
    assert noisy_posterior(1.0, NoiseSpec.ccn(0.3, 0.1)) == pytest.approx(0.7, abs=1e-15)
    for tau in (0.0, 0.1, 0.25, 0.49):
        assert noisy_posterior(0.5, NoiseSpec.un(tau)) == pytest.approx(0.5, abs=1e-15)


@given(
    st.floats(0, 1),
    st.floats(0, 0.49),
    st.floats(0, 0.49),
)
def test_noisy_posterior_in_unit_interval(eta, a, b):
    p = noisy_posterior(eta, NoiseSpec.ccn(a, b))
    assert 0.0 <= p <= 1.0
    assert p == pytest.approx((1 - a - b) * eta + b, abs=1e-12)


def test_noise_spec_invariants():
    with pytest.raises(ValidationError):
        NoiseSpec.un(0.5)
    with pytest.raises(ValidationError):
        NoiseSpec.ccn(0.6, 0.4)
    with pytest.raises(ValidationError):
        NoiseSpec("UN", 0.1, 0.2, 0.1)
    with pytest.raises(ValidationError):
        NoiseSpec("CCN", 0.1, 0.2, 0.1)
    with pytest.raises(ValidationError):
        NoiseSpec.ccn(-0.1, 0.0)
    assert NoiseSpec.from_dict(NoiseSpec.un(0.2).to_dict()) == NoiseSpec.un(0.2)
    assert NoiseSpec.from_dict([0.2, 0.1]) == NoiseSpec.ccn(0.2, 0.1)


def test_zero_noise_keeps_labels():
    ds = gen_mixture(symmetric_xor(), 300, 5)
    assert inject_noise(ds, NoiseSpec.ccn(0, 0), 9) == ds


def test_flip_rate_concentrates():
    ds = LabeledDataset(np.zeros((100_000, 1)), np.ones(100_000, dtype=int))
    noisy = inject_noise(ds, NoiseSpec.ccn(0.10, 0.0), 1)
    assert abs(1.0 - noisy.labels.mean() - 0.10) < 0.01


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 200), st.floats(0, 0.45), st.floats(0, 0.45), st.integers(0, 2**32 - 1))
def test_inject_noise_preserves_instances(n, a, b, seed):
    ds = gen_mixture(symmetric_xor(), n, seed)
    noisy = inject_noise(ds, NoiseSpec.ccn(a, b), seed)
    assert noisy.n == ds.n and noisy.d == ds.d
    assert np.array_equal(noisy.instances, ds.instances)
    assert noisy == inject_noise(ds, NoiseSpec.ccn(a, b), seed)


# -- csv ---------------------------------------------------------------------


def test_csv_roundtrip(tmp_path):
    ds = gen_mixture(symmetric_xor(), 40, 3)
    save_csv(ds, tmp_path / "d.csv")
    assert load_csv(tmp_path / "d.csv") == ds


def test_csv_minus_one_labels(tmp_path):
    p = tmp_path / "pm.csv"
    p.write_text("x1,y\n0.5,1\n-0.5,-1\n1.5,-1\n")
    ds = load_csv(p)
    assert ds.labels.tolist() == [1, 0, 0]


def test_csv_short_row_names_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x1,x2,y\n0,0,1\n1,0\n")
    with pytest.raises(ParseError) as exc:
        load_csv(p)
    assert exc.value.line == 3
    assert "line 3" in str(exc.value)


def test_csv_mixed_alphabets(tmp_path):
    p = tmp_path / "mixed.csv"
    p.write_text("x1,y\n0,-1\n1,0\n2,1\n")
    with pytest.raises(ParseError):
        load_csv(p)


def test_points_csv_with_eta(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("x1,x2,eta\n0,1,0.5\n1,0,0.5\n")
    pts, eta = load_points_csv(p)
    assert pts.shape == (2, 2) and eta.tolist() == [0.5, 0.5]
    pts, eta = load_points_csv(tmp_path / "a.csv", 2)
    assert eta is not None


def test_dataset_validation():
    with pytest.raises(ValidationError):
        LabeledDataset(np.zeros((3, 1)), [0, 1])
    with pytest.raises(ValidationError):
        LabeledDataset(np.zeros((2, 1)), [0, 2])
    with pytest.raises(ValidationError):
        LabeledDataset(np.array([[np.nan], [0.0]]), [0, 1])
    ds = LabeledDataset([1.0, 2.0], [0, 1])
    assert ds.d == 1
    with pytest.raises(ValueError):
        ds.instances[0, 0] = 5.0


def test_standardizer():
    ds = gen_mixture(asymmetric_xor(), 500, 8)
    z = Standardizer.fit(ds).apply(ds)
    assert np.allclose(z.instances.mean(axis=0), 0, atol=1e-12)
    assert np.allclose(z.instances.std(axis=0), 1, atol=1e-12)
    const = LabeledDataset(np.ones((4, 1)), [0, 1, 0, 1])
    assert np.all(Standardizer.fit(const).apply(const).instances == 0)
