"""Acceptance gate.

Each criterion runs at its stated tolerance and prints one pass/fail
line (visible with pytest -s).  The end-to-end criterion trains a real
dictionary on synthetic multimodal pairs, so this module takes a few
minutes; everything is seeded and deterministic.
"""

import contextlib
import io
from itertools import combinations
from pathlib import Path

import numpy as np
import pytest

import cdldenoise as cdl
from cdldenoise.cli import run as cli_run
from conftest import random_dictionary

# noisy-input PSNR at each 8-bit sigma: 20*log10(255/sigma) as realized on a
# large image and rounded to two decimals
TABLE_NOISY_PSNR = {4: 36.08, 8: 30.07, 12: 26.54, 16: 24.05, 20: 22.11, 24: 20.52}


def _criterion(name: str, ok: bool, detail: str = "") -> None:
    print(f"[acceptance] {name}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
    assert ok, f"{name} failed: {detail}"


def _eval_psnr(ref: Path, test: Path) -> float:
    buffer = io.StringIO()
    with contextlib.redirect_stdout(buffer):
        assert cli_run(["eval", "--ref", str(ref), "--test", str(test)]) == 0
    return float(buffer.getvalue().split("psnr=")[1].strip())


# -----------------------------------------------------------------------
# Criterion 1: noise injection then eval reproduces the reference
# noisy-input PSNR values within +/-0.05 dB on a >=512x512 image.
# -----------------------------------------------------------------------


def test_criterion_1_noisy_input_psnr(tmp_path):
    rng = np.random.default_rng(314)
    base = np.full((1024, 1024), 0.5)
    # mid-range levels keep 8-bit clamping out of the picture at sigma 24
    for _ in range(40):
        r0, r1 = np.sort(rng.integers(0, 1024, size=2))
        c0, c1 = np.sort(rng.integers(0, 1024, size=2))
        base[r0 : r1 + 1, c0 : c1 + 1] = rng.uniform(0.42, 0.58)
    clean_path = tmp_path / "clean.pgm"
    clean_path.write_bytes(cdl.encode_image(cdl.GrayImage(base)))

    worst = 0.0
    for sigma, expected in TABLE_NOISY_PSNR.items():
        noisy_path = tmp_path / f"noisy{sigma}.pgm"
        assert (
            cli_run(
                ["noise", "--input", str(clean_path), "--sigma", str(sigma),
                 "--seed", "42", "--out", str(noisy_path)]
            )
            == 0
        )
        measured = _eval_psnr(clean_path, noisy_path)
        worst = max(worst, abs(measured - expected))
    _criterion(
        "1 noise/eval matches reference noisy-input PSNR",
        worst <= 0.05,
        f"max deviation {worst:.4f} dB (tolerance 0.05)",
    )


# -----------------------------------------------------------------------
# Criterion 2a: independently evaluated training objective is
# non-increasing across every logged stage (rtol 1e-8) on a toy corpus
# with n=64, k=32, T=1000.
# -----------------------------------------------------------------------


def _independent_objective(ds, cs, ts, lam):
    total = 0.0
    for i in range(ts.count):
        ex = (
            ts.target[:, i]
            - ds.target_common @ cs.common[:, i]
            - ds.target_unique @ cs.target_unique[:, i]
        )
        ey = (
            ts.guide[:, i]
            - ds.guide_common @ cs.common[:, i]
            - ds.guide_unique @ cs.guide_unique[:, i]
        )
        total += 0.5 * (float(ex @ ex) + float(ey @ ey))
        total += lam * float(
            np.abs(cs.common[:, i]).sum()
            + np.abs(cs.target_unique[:, i]).sum()
            + np.abs(cs.guide_unique[:, i]).sum()
        )
    return total


def test_criterion_2a_objective_monotonicity():
    targets, guides = [], []
    for idx in range(4):
        t, g = cdl.synth_pair(64, 64, seed=500 + idx)
        targets.append(t)
        guides.append(g)
    ts = cdl.build_training_set(targets, guides, side=8, count=1000, seed=13)
    cfg = cdl.TrainConfig(lambd=0.05, atoms=32, inner_sweeps=20, outer_rounds=5, seed=3)
    values = []
    cdl.train(
        ts, cfg, on_stage=lambda st, d, c: values.append(
            (st, _independent_objective(d, c, ts, cfg.lambd))
        )
    )
    ok = all(
        later <= earlier * (1 + 1e-8)
        for (_, earlier), (_, later) in zip(values, values[1:])
    )
    _criterion(
        "2a training objective monotone across logged stages",
        ok and len(values) == 11,
        f"{len(values)} stages, {values[0][1]:.2f} -> {values[-1][1]:.2f}",
    )


# -----------------------------------------------------------------------
# Criterion 2b: pursuit oracle equivalence on 200 random instances
# (n=6, k=4 per dictionary, s_max=2): support matches a naive greedy
# reference exactly and the residual is within 1.5x of exhaustive search.
# -----------------------------------------------------------------------


def _naive_greedy(signal, dictionary, max_support):
    support = []
    residual = signal.copy()
    norms = np.linalg.norm(dictionary, axis=0)
    for _ in range(max_support):
        scores = []
        for j in range(dictionary.shape[1]):
            if j in support or norms[j] <= 1e-12:
                scores.append(-1.0)
            else:
                scores.append(abs(dictionary[:, j] @ residual) / norms[j])
        best = int(np.argmax(scores))
        if scores[best] <= 0:
            break
        support.append(best)
        active = dictionary[:, support]
        coef, *_ = np.linalg.lstsq(active, signal, rcond=None)
        residual = signal - active @ coef
    return support, residual


def test_criterion_2b_pursuit_oracles():
    rng = np.random.default_rng(4)
    worst_ratio = 0.0
    for _ in range(200):
        ds = random_dictionary(6, 4, seed=int(rng.integers(1 << 31)))
        sd = cdl.StackedDictionary.from_set(ds)
        x, y = rng.standard_normal(6), rng.standard_normal(6)
        signal = np.concatenate([x, y])
        cfg = cdl.CodingConfig(sigma_norm=0.0, patch_dim=6, max_support=2)
        code = cdl.joint_omp(x, y, ds, cfg)
        oracle_support, oracle_resid = _naive_greedy(signal, sd.matrix, 2)
        assert sorted(code.stacked_indices(4)) == sorted(oracle_support)
        best = np.linalg.norm(signal)
        for size in (1, 2):
            for combo in combinations(range(12), size):
                active = sd.matrix[:, list(combo)]
                coef, *_ = np.linalg.lstsq(active, signal, rcond=None)
                best = min(best, float(np.linalg.norm(signal - active @ coef)))
        worst_ratio = max(worst_ratio, np.linalg.norm(oracle_resid) / max(best, 1e-12))
        assert worst_ratio <= 1.5
    _criterion(
        "2b pursuit support matches naive greedy, residual <= 1.5x optimum",
        worst_ratio <= 1.5,
        f"worst residual ratio {worst_ratio:.4f} over 200 instances",
    )


# -----------------------------------------------------------------------
# Criterion 2c: reconstruction closed form matches a dense linear-system
# oracle within 1e-10 on 50 random 6x6 configurations.
# -----------------------------------------------------------------------


def test_criterion_2c_reconstruction_oracle():
    rng = np.random.default_rng(27)
    worst = 0.0
    for trial in range(50):
        blend = (0.0, 0.7, 2.5)[trial % 3]
        side = int(rng.integers(2, 4))
        stride = int(rng.integers(1, side + 1))
        noisy = cdl.GrayImage(rng.uniform(size=(6, 6)))
        grid, _ = cdl.extract_grid(noisy, side=side, stride=stride)
        estimates = rng.standard_normal((side * side, grid.patch_count))
        out = cdl.reconstruct(cdl.PatchEstimates(grid, estimates), noisy, blend)

        total = 36
        lhs = blend * np.eye(total)
        rhs = blend * noisy.pixels.ravel()
        for p, (row, col) in enumerate(grid.positions):
            extract = np.zeros((side * side, total))
            local = 0
            for dr in range(side):
                for dc in range(side):
                    extract[local, (row + dr) * 6 + (col + dc)] = 1.0
                    local += 1
            lhs += extract.T @ extract
            rhs += extract.T @ estimates[:, p]
        oracle = np.linalg.solve(lhs, rhs).reshape(6, 6)
        worst = max(worst, float(np.max(np.abs(out.pixels - oracle))))
        assert worst <= 1e-10
    _criterion(
        "2c closed-form reconstruction matches dense solve",
        worst <= 1e-10,
        f"worst deviation {worst:.2e} over 50 configurations",
    )


# -----------------------------------------------------------------------
# Criteria 2d and 2e share one trained dictionary: 20 synthetic pairs,
# k=128 atoms, held-out pair denoised at sigma=16.
# -----------------------------------------------------------------------


@pytest.fixture(scope="module")
def synth_trained():
    targets, guides = [], []
    for idx in range(20):
        t, g = cdl.synth_pair(96, 96, seed=1000 + idx)
        targets.append(t)
        guides.append(g)
    ts = cdl.build_training_set(targets, guides, side=8, count=12000, seed=77)
    cfg = cdl.TrainConfig(lambd=0.05, atoms=128, inner_sweeps=20, outer_rounds=5, seed=5)
    ds = cdl.train(ts, cfg)

    clean, guide = cdl.synth_pair(96, 96, seed=9999)
    noisy = cdl.add_gaussian_noise(clean, cdl.NoiseSpec(sigma=16.0, seed=21))
    return ds, clean, guide, noisy


def test_criterion_2d_end_to_end_gain(synth_trained):
    ds, clean, guide, noisy = synth_trained
    noisy_psnr = cdl.psnr(clean, noisy)
    basic = cdl.denoise_basic(noisy, guide, ds, cdl.DenoiseConfig(sigma=16.0))
    basic_psnr = cdl.psnr(clean, basic)
    group = cdl.denoise_group(
        noisy, guide, ds, cdl.DenoiseConfig(sigma=16.0, group=True)
    )
    group_psnr = cdl.psnr(clean, group)
    gain = basic_psnr - noisy_psnr
    margin = group_psnr - basic_psnr
    _criterion(
        "2d end-to-end denoising gain",
        gain >= 4.0 and margin >= -0.1,
        f"noisy {noisy_psnr:.2f} dB, basic {basic_psnr:.2f} dB (gain {gain:.2f}, "
        f"need >=4), group {group_psnr:.2f} dB (margin {margin:+.2f}, need >=-0.1)",
    )


def test_criterion_2e_dictionary_structure(synth_trained):
    ds, *_ = synth_trained

    def paired_cosines(a, b):
        norms = np.maximum(
            np.linalg.norm(a, axis=0) * np.linalg.norm(b, axis=0), 1e-12
        )
        return np.abs(np.einsum("ij,ij->j", a, b)) / norms

    common = float(paired_cosines(ds.target_common, ds.guide_common).mean())
    unique = float(paired_cosines(ds.target_unique, ds.guide_unique).mean())
    _criterion(
        "2e common atom pairs more similar than unique pairs",
        common > unique,
        f"mean |cos| common {common:.3f} vs unique {unique:.3f}",
    )


# -----------------------------------------------------------------------
# Criterion 3: invariant suites, all green in under a minute.
# -----------------------------------------------------------------------


def test_criterion_3_invariant_suites(tmp_path):
    rng = np.random.default_rng(8)
    checks = []

    # atom-norm constraints after a short real training run
    targets, guides = [], []
    for idx in range(3):
        t, g = cdl.synth_pair(48, 48, seed=200 + idx)
        targets.append(t)
        guides.append(g)
    ts = cdl.build_training_set(targets, guides, side=6, count=800, seed=3)
    ds = cdl.train(
        ts, cdl.TrainConfig(lambd=0.05, atoms=24, inner_sweeps=5, outer_rounds=2, seed=1)
    )
    stacked_norms = np.sqrt(
        np.einsum("ij,ij->j", ds.target_common, ds.target_common)
        + np.einsum("ij,ij->j", ds.guide_common, ds.guide_common)
    )
    checks.append(
        (
            "atom norms",
            stacked_norms.max() <= 1 + 1e-12
            and np.linalg.norm(ds.target_unique, axis=0).max() <= 1 + 1e-12
            and np.linalg.norm(ds.guide_unique, axis=0).max() <= 1 + 1e-12,
        )
    )

    # DC removal round trip
    data = rng.standard_normal((36, 50))
    pm = cdl.remove_dc(cdl.PatchMatrix(data=data, dc=np.zeros(50)))
    checks.append(("dc round trip", float(np.max(np.abs(pm.data + pm.dc - data))) <= 1e-12))

    # blend-weight limits of the reconstruction
    noisy = cdl.GrayImage(rng.uniform(size=(8, 8)))
    grid, pm_raw = cdl.extract_grid(noisy, side=3, stride=1)
    estimates = rng.standard_normal((9, grid.patch_count))
    huge = cdl.reconstruct(cdl.PatchEstimates(grid, estimates), noisy, blend=1e12)
    checks.append(("blend limit", float(np.max(np.abs(huge.pixels - noisy.pixels))) <= 1e-6))
    full_grid, full_pm = cdl.extract_grid(noisy, side=8, stride=8)
    identity = cdl.reconstruct(
        cdl.PatchEstimates(full_grid, full_pm.data), noisy, blend=0.0
    )
    checks.append(
        ("blend zero average", float(np.max(np.abs(identity.pixels - noisy.pixels))) <= 1e-12)
    )

    # singleton-cluster group coding equals independent coding
    ds_small = random_dictionary(9, 6, seed=5)
    image = cdl.GrayImage(rng.uniform(size=(9, 9)))
    guide = cdl.GrayImage(rng.uniform(size=(9, 9)))
    base = cdl.denoise_basic(image, guide, ds_small, cdl.DenoiseConfig(sigma=12.0, stride=3))
    grid_small, _ = cdl.extract_grid(image, side=3, stride=3)
    grouped = cdl.denoise_group(
        image,
        guide,
        ds_small,
        cdl.DenoiseConfig(sigma=12.0, stride=3, group=True, clusters=grid_small.patch_count),
    )
    checks.append(
        ("singleton group == basic", float(np.max(np.abs(grouped.pixels - base.pixels))) <= 1e-10)
    )

    # file-format round trips
    dict_path = tmp_path / "inv.cdl"
    cdl.save_dictionaries(ds_small, dict_path)
    back = cdl.load_dictionaries(dict_path)
    dict_ok = all(
        np.array_equal(getattr(back, name), getattr(ds_small, name))
        for name in ("target_common", "target_unique", "guide_common", "guide_unique")
    )
    img = cdl.GrayImage(rng.uniform(-0.2, 1.2, size=(7, 5)))
    pgm_back = cdl.decode_image(cdl.encode_image(img))
    pgm_ok = float(
        np.max(np.abs(pgm_back.pixels - np.clip(img.pixels, 0, 1)))
    ) <= 0.5 / 255 + 1e-12
    raw_ok = np.array_equal(cdl.decode_raw(cdl.encode_raw(img)).pixels, img.pixels)
    checks.append(("file format round trips", dict_ok and pgm_ok and raw_ok))

    failed = [name for name, ok in checks if not ok]
    _criterion(
        "3 invariant suites",
        not failed,
        f"{len(checks)} suites" + (f", failed: {failed}" if failed else ""),
    )
