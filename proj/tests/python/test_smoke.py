"""Smoke tests for the _psdl extension: shapes, conversions and a tiny
end-to-end solve. The heavy numerical verification lives in the C++ suites.
"""

import numpy as np
import pytest

import psdl


@pytest.fixture(scope="module")
def sphere():
    lights = psdl.well_spread_lights(8, 25.0, seed=1)
    return psdl.generate_sphere(32, lights, albedo="rings", radius=0.7)


def test_roundtrip_shapes(sphere):
    stack = sphere["stack"]
    assert stack.shape == (32, 32, 8)
    arr = stack.array
    assert arr.shape == (32, 32, 8)
    rebuilt = psdl.ImageStack(arr, stack.lights)
    assert np.array_equal(rebuilt.array, arr)

    mask = sphere["mask"]
    assert mask.array.dtype == bool
    assert mask.count == int(mask.array.sum())


def test_least_squares_inverts_clean_rendering(sphere):
    assert sphere["clamped_shadow_count"] == 0
    est = psdl.least_squares(sphere["stack"])
    err = psdl.angular_error_map(est, sphere["truth"], sphere["mask"])
    assert np.isnan(err[0, 0])  # outside the disc
    mae = psdl.mean_angular_error(err, sphere["mask"])
    assert mae <= 1e-6


def test_unit_and_albedo_views(sphere):
    unit = sphere["truth"].unit()
    norms = np.linalg.norm(unit.array, axis=2)
    inside = sphere["mask"].array
    assert np.allclose(norms[inside], 1.0, atol=1e-12)
    albedo = sphere["truth"].albedo()
    assert albedo.shape == (32, 32)
    assert albedo[inside].min() > 0


def test_poisson_noise_reproducible(sphere):
    stack = sphere["stack"]
    a = psdl.apply_poisson(stack, 10.0, seed=7, realization=0, mask=sphere["mask"])
    b = psdl.apply_poisson(stack, 10.0, seed=7, realization=0, mask=sphere["mask"])
    c = psdl.apply_poisson(stack, 10.0, seed=7, realization=1, mask=sphere["mask"])
    assert np.array_equal(a.array, b.array)
    assert not np.array_equal(a.array, c.array)
    achieved = psdl.empirical_snr_db(stack, a, sphere["mask"])
    assert abs(achieved - 10.0) <= 0.5


def test_dlpi_improves_noisy_stack(sphere):
    stack = sphere["stack"]
    noisy = psdl.apply_poisson(stack, 3.0, seed=11, mask=sphere["mask"])

    cfg = psdl.SolverConfig()
    cfg.lambda_ = 2.0
    cfg.patch = (4, 4, 4)
    cfg.stride = (1, 1, 4)
    cfg.dict.atom_count = 24
    cfg.dict.mu = 0.15
    cfg.dict.inner_iterations = 2
    cfg.outer_iterations = 4

    mae_ls = psdl.mean_angular_error(
        psdl.angular_error_map(psdl.least_squares(noisy), sphere["truth"], sphere["mask"]),
        sphere["mask"],
    )
    est, report = psdl.dlpi(noisy, cfg)
    mae_dlpi = psdl.mean_angular_error(
        psdl.angular_error_map(est, sphere["truth"], sphere["mask"]), sphere["mask"]
    )
    assert mae_dlpi < mae_ls
    trace = np.asarray(report.objective_trace)
    assert np.all(np.diff(trace) <= 1e-9 * np.abs(trace[:-1]))


def test_dlnv_runs_and_normalizes(sphere):
    noisy = psdl.apply_poisson(sphere["stack"], 10.0, seed=13, mask=sphere["mask"])
    cfg = psdl.SolverConfig()
    cfg.lambda_ = 0.5
    cfg.patch = (4, 4, 3)
    cfg.stride = (2, 2, 3)
    cfg.dict.atom_count = 16
    cfg.dict.mu = 0.05
    cfg.dict.inner_iterations = 2
    cfg.outer_iterations = 3
    cfg.prox_steps = 5
    est, report = psdl.dlnv(noisy, cfg)
    norms = np.linalg.norm(est.array, axis=2)
    inside = sphere["mask"].array
    assert np.all((np.abs(norms[inside] - 1.0) <= 1e-9) | (norms[inside] == 0.0))
    assert report.tau_used > 0


def test_patch_operators_match_numpy_oracle():
    rng = np.random.default_rng(0)
    vol = rng.normal(size=(5, 4, 3))
    patches = psdl.extract_patches(vol, patch=(2, 2, 2), stride=(1, 1, 1))
    # First patch, canonical order: x fastest, then y, then z.
    expected = [
        vol[0, 0, 0], vol[1, 0, 0], vol[0, 1, 0], vol[1, 1, 0],
        vol[0, 0, 1], vol[1, 0, 1], vol[0, 1, 1], vol[1, 1, 1],
    ]
    assert np.allclose(patches[:, 0], expected)

    cover = psdl.gram_diagonal(patch=(2, 2, 2), stride=(1, 1, 1), volume_shape=[5, 4, 3])
    back = psdl.adjoint_patches(
        np.ones_like(patches), patch=(2, 2, 2), stride=(1, 1, 1), volume_shape=[5, 4, 3]
    )
    assert np.array_equal(cover, back)
    lhs = float(np.sum(patches * patches))
    adj = psdl.adjoint_patches(patches, patch=(2, 2, 2), stride=(1, 1, 1), volume_shape=[5, 4, 3])
    rhs = float(np.sum(vol * adj))
    assert abs(lhs - rhs) <= 1e-10 * (np.linalg.norm(vol) * np.linalg.norm(patches) + 1)


def test_dataset_loader(tmp_path):
    d = tmp_path / "ds"
    d.mkdir()
    rng = np.random.default_rng(1)
    imgs = rng.uniform(0.1, 1.0, size=(4, 5, 3)).astype(np.float32).astype(np.float64)
    for k in range(3):
        path = d / f"im{k}.fgrid"
        header = b"FGR1" + np.array([4, 5, 1], dtype="<u4").tobytes()
        path.write_bytes(header + imgs[:, :, k].astype("<f4").tobytes())
    (d / "lights.txt").write_text("1 0 0\n0 1 0\n0 0 1\n")
    (d / "manifest.txt").write_text(
        "image im0.fgrid\nimage im1.fgrid\nimage im2.fgrid\nlights lights.txt\n"
    )
    ds = psdl.load_dataset(str(d))
    assert ds["stack"].shape == (4, 5, 3)
    assert np.allclose(ds["stack"].array, imgs, atol=1e-7)
    assert ds["name"] == "ds"


def test_contract_errors_surface_as_value_errors():
    with pytest.raises(ValueError):
        psdl.LightSet(np.zeros((2, 3)))  # too few directions
    with pytest.raises(ValueError):
        cfg = psdl.SolverConfig()
        cfg.patch = (4, 4)  # wrong arity


def test_select_light_subset_deterministic():
    lights = psdl.well_spread_lights(20, 40.0, seed=3)
    a = psdl.select_light_subset(lights, 5, seed=9)
    b = psdl.select_light_subset(lights, 5, seed=9)
    assert a == b
    assert len(set(a)) == 5
