import numpy as np
import pytest

from vlasov_ap.domain import PhaseGrid, initial_distribution
from vlasov_ap.errors import StabilityFailure, ZeroReference
from vlasov_ap.fields import get_tension
from vlasov_ap.harness import (
    DiagnosticsRecord,
    RunConfig,
    boundary_mass_fraction,
    convergence_study,
    format_config,
    negative_part,
    reference_filtered,
    rel_error,
    rms,
    run,
    total_mass,
)
from vlasov_ap.reference import SplittingSolver, limit_solution


# ---------------------------------------------------------------------------
# configuration

def test_config_rejects_bad_values():
    good = dict(epsilon=0.5, t_final=1.0)
    for bad in (
        dict(good, scheme="spectral"),
        dict(good, init="cold"),
        dict(good, mode="gravitational"),
        dict(good, epsilon=0.0),
        dict(good, epsilon=-0.1),
        dict(good, t_final=-1.0),
        dict(good, delta_t=0.0),
        dict(good, delta_t=-0.02),
        dict(good, n_points=100),
        dict(good, n_tau=48),
    ):
        with pytest.raises(ValueError):
            RunConfig(**bad)


def test_config_file_parsing(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# baseline beam\n"
        "epsilon = 0.5\n"
        "t_final = 1.0   # one slow unit\n"
        "n_points = 32\n"
        "delta_t = auto\n"
        "snapshot_times = 0.5, 1.0\n"
        "\n"
        "scheme = ap\n"
    )
    cfg = RunConfig.from_file(path)
    assert cfg.epsilon == 0.5
    assert cfg.n_points == 32
    assert cfg.delta_t is None
    assert cfg.snapshot_times == (0.5, 1.0)
    # overrides win, None entries are ignored
    cfg = RunConfig.from_file(path, overrides={"scheme": "limit", "delta_t": "0.25", "n_tau": None})
    assert cfg.scheme == "limit" and cfg.delta_t == 0.25 and cfg.n_tau == 64

    path.write_text("epsilon = 0.5\nt_final = 1.0\nfoo = 1\n")
    with pytest.raises(ValueError, match="unknown config key"):
        RunConfig.from_file(path)
    path.write_text("epsilon = 0.5\n")
    with pytest.raises(ValueError, match="missing required"):
        RunConfig.from_file(path)
    path.write_text("epsilon 0.5\nt_final = 1.0\n")
    with pytest.raises(ValueError, match="key = value"):
        RunConfig.from_file(path)


def test_config_format_round_trip():
    cfg = RunConfig(
        epsilon=0.123,
        t_final=2.5,
        n_points=32,
        n_tau=16,
        scheme="splitting",
        init="plain",
        tension="cos4",
        delta_t=None,
        snapshot_times=(0.5, 2.5),
        rms_every=4,
        output_dir="elsewhere",
    )
    raw = {}
    for line in format_config(cfg).splitlines():
        key, value = line.split(" = ", 1)
        raw[key] = value
    assert RunConfig.from_strings(raw) == cfg


# ---------------------------------------------------------------------------
# diagnostics

def test_rms_on_constant_field():
    grid = PhaseGrid(64)
    n, d, lo = grid.n_points, grid.delta_xi, -grid.xi_max
    # left-endpoint Riemann sum of xi1^2 over the box, by the power sums
    sum_sq = n * lo ** 2 + 2 * lo * d * (n - 1) * n / 2 + d ** 2 * (n - 1) * n * (2 * n - 1) / 6
    expected = np.sqrt(sum_sq * n * d ** 2)
    assert rms(np.ones((n, n)), grid) == pytest.approx(expected, rel=1e-12)


def test_rms_reflection_invariance():
    grid = PhaseGrid(32)
    x1, x2 = grid.mesh()
    f = initial_distribution(x1, x2) * (1.0 + 0.3 * np.sin(x1 + 0.5 * x2))
    # nodes exclude the right edge, so xi1 -> -xi1 is a flip plus a roll
    mirrored = np.roll(f[::-1, :], 1, axis=0)
    assert rms(mirrored, grid) == pytest.approx(rms(f, grid), rel=1e-13)


def test_rms_clips_undershoot():
    grid = PhaseGrid(8, 2.0)
    f = np.ones((8, 8))
    f[3, 4] = -2.0
    assert rms(f, grid) == rms(np.clip(f, 0.0, None), grid)
    assert negative_part(f, grid) == pytest.approx(2.0 * grid.delta_xi ** 2)
    assert negative_part(np.ones((8, 8)), grid) == 0.0


def test_mass_and_boundary_fraction():
    grid = PhaseGrid(4, 2.0)
    assert total_mass(np.ones((4, 4)), grid) == pytest.approx(16.0)
    assert boundary_mass_fraction(np.ones((8, 8))) == pytest.approx(0.75)
    assert boundary_mass_fraction(np.ones((8, 8)), cells=1) == pytest.approx(28.0 / 64.0)
    assert boundary_mass_fraction(np.zeros((8, 8))) == 0.0


def test_rel_error_norms():
    ref = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert rel_error(ref, ref) == 0.0
    assert rel_error(2.0 * ref, ref, "l2") == pytest.approx(1.0)
    assert rel_error(2.0 * ref, ref, "linf") == pytest.approx(1.0)
    with pytest.raises(ZeroReference):
        rel_error(ref, np.zeros_like(ref))
    with pytest.raises(ValueError, match="unknown norm"):
        rel_error(ref, ref, "l1")


def test_diagnostics_record_guards_nan():
    DiagnosticsRecord(0.0, 1.0, 9.6, 0.0)
    with pytest.raises(StabilityFailure):
        DiagnosticsRecord(0.0, float("nan"), 9.6, 0.0)


# ---------------------------------------------------------------------------
# single runs and their files

def test_zero_horizon_readout_is_initial_data(tmp_path):
    grid = PhaseGrid(32)
    x1, x2 = grid.mesh()
    f0 = initial_distribution(x1, x2)
    for init in ("corrected", "plain"):
        out = tmp_path / init
        cfg = RunConfig(epsilon=0.1, t_final=0.0, n_points=32, n_tau=16,
                        init=init, snapshot_times=(0.0,), output_dir=str(out))
        result = run(cfg)
        assert result.n_steps == 0
        assert len(result.records) == 1 and result.records[0].time == 0.0
        data = np.loadtxt(out / "snapshot_0.csv", delimiter=",", skiprows=1)
        assert np.abs(data[:, 2].reshape(32, 32) - f0).max() < 1e-13


def test_runs_are_bit_identical(tmp_path):
    cfg = RunConfig(epsilon=0.5, t_final=0.06, n_points=32, n_tau=16,
                    delta_t=0.02, snapshot_times=(0.04,),
                    output_dir=str(tmp_path / "a"))
    run(cfg)
    run(cfg.replace(output_dir=str(tmp_path / "b")))
    for name in ("rms.csv", "snapshot_0.04.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    # meta echoes the config, so only the output_dir line may differ
    for a, b in zip((tmp_path / "a" / "meta.txt").read_text().splitlines(),
                    (tmp_path / "b" / "meta.txt").read_text().splitlines()):
        if not a.startswith("output_dir"):
            assert a == b


def test_meta_reports_resolved_step(tmp_path):
    cfg = RunConfig(epsilon=0.5, t_final=0.05, n_points=32, n_tau=16,
                    delta_t=0.02, output_dir=str(tmp_path))
    result = run(cfg)
    meta = dict(line.split(" = ", 1) for line in (tmp_path / "meta.txt").read_text().splitlines())
    # dt is shrunk to fit the horizon, never stretched
    assert int(meta["n_steps"]) == 3
    assert float(meta["dt_actual"]) == pytest.approx(0.05 / 3.0, rel=1e-15)
    assert float(meta["max_negative_part"]) >= 0.0
    rows = np.loadtxt(tmp_path / "rms.csv", delimiter=",", skiprows=1)
    assert rows.shape == (4, 4)
    assert rows[-1, 0] == pytest.approx(0.05, abs=1e-15)
    assert result.max_negative == float(meta["max_negative_part"])


def test_limit_snapshot_is_lossless(tmp_path):
    cfg = RunConfig(epsilon=0.3, t_final=0.75, n_points=32, scheme="limit",
                    delta_t=0.25, snapshot_times=(0.75,), output_dir=str(tmp_path))
    run(cfg)
    data = np.loadtxt(tmp_path / "snapshot_0.75.csv", delimiter=",", skiprows=1)
    x1, x2 = PhaseGrid(32).mesh()
    # %.17g round-trips doubles exactly
    assert np.array_equal(data[:, 2].reshape(32, 32), limit_solution(0.75, x1, x2))


def test_small_box_warns_about_edge_mass(tmp_path):
    cfg = RunConfig(epsilon=0.5, t_final=0.0, n_points=32, xi_max=2.0,
                    scheme="limit", output_dir=str(tmp_path))
    with pytest.warns(RuntimeWarning, match="box edge"):
        run(cfg, write=False)


def test_ap_and_splitting_agree_at_eps_one(tmp_path):
    cfg = RunConfig(epsilon=1.0, t_final=np.pi / 16, n_points=64,
                    output_dir=str(tmp_path))
    result = run(cfg, write=False)
    ref = reference_filtered(cfg)
    assert rel_error(result.f_tilde, ref, "l2") <= 2e-2


# ---------------------------------------------------------------------------
# filtered rms series

def fast_band_fraction(times, series, eps):
    spec = np.abs(np.fft.rfft(np.asarray(series))) ** 2
    freq = np.fft.rfftfreq(len(series), d=times[1] - times[0])
    return spec[freq >= 1.0 / (2.0 * np.pi * eps)].sum() / spec.sum()


def test_filtered_rms_has_no_fast_oscillation():
    # One slow period (the xi1 moment turns at angular rate 1/2, period 4 pi)
    # sampled at dt = 0.02 keeps the t/eps band inside Nyquist at eps = 0.01.
    # The limit series is quiet to rounding; the corrected scheme keeps the
    # fast band below 1e-6 of the spectrum (measured 5.9e-7 at this grid,
    # carried by the first corrector showing through the tau = t/eps readout).
    eps = 0.01
    out = {}
    for scheme in ("limit", "ap"):
        cfg = RunConfig(epsilon=eps, t_final=4.0 * np.pi, n_points=64, n_tau=32,
                        scheme=scheme, init="corrected", delta_t=0.02)
        res = run(cfg, write=False)
        out[scheme] = fast_band_fraction(res.times, res.rms_series, eps)
    assert out["limit"] < 1e-12
    assert out["ap"] < 1e-6


def test_corrected_init_beats_plain_on_rms():
    # eps = 0.025: the plain start pays an O(eps) initial layer that the
    # corrected data removes.  Splitting reference at dt = 3.125e-4 is
    # converged to ~1.5e-4 in this metric; the measured gap is 7.4x.
    eps, t_final = 0.025, 1.6
    ref_cfg = RunConfig(epsilon=eps, t_final=t_final, n_points=64,
                        scheme="splitting", delta_t=3.125e-4, rms_every=64)
    ref = run(ref_cfg, write=False)
    r_ref = np.asarray(ref.rms_series)
    t_ref = np.asarray(ref.times)
    l1 = {}
    for init in ("corrected", "plain"):
        cfg = RunConfig(epsilon=eps, t_final=t_final, n_points=64, n_tau=32,
                        init=init, delta_t=0.02)
        res = run(cfg, write=False)
        assert np.allclose(res.times, t_ref)
        l1[init] = np.trapezoid(np.abs(np.asarray(res.rms_series) - r_ref), t_ref)
    assert l1["plain"] >= 3.0 * l1["corrected"], l1


# ---------------------------------------------------------------------------
# references and studies

def test_splitting_error_grows_as_eps_shrinks():
    # fixed dt against a self-converged run: the (dt/eps)^2 step error shows
    # as a factor near 4 per halving.  The prefactor oscillates with eps and
    # this pair sits inside the band; the ratio is insensitive to dt.
    grid = PhaseGrid(64)
    dt, t_end = 0.0025, np.pi / 16
    errs = []
    for eps in (0.1, 0.05):
        solver = SplittingSolver(grid, eps, get_tension("cos2sq"))
        coarse = solver.solve(t_end, dt)
        ref = solver.solve(t_end, dt / 64.0)
        errs.append(np.abs(coarse - ref).max())
    ratio = errs[1] / errs[0]
    assert 3.0 < ratio < 5.0, errs


def test_convergence_study_outputs(tmp_path):
    # the splitting scheme is spectral in xi, so the sweep sees the pure step
    # error; a sharper-than-default reference keeps the frame honest
    cfg = RunConfig(epsilon=0.25, t_final=np.pi / 16, n_points=64,
                    scheme="splitting", reference_dt_factor=0.002,
                    output_dir=str(tmp_path))
    rows, slopes = convergence_study(cfg, [0.08, 0.04], [0.25])
    assert [r[0] for r in rows] == [0.25, 0.25]
    # requested steps are shrunk to divide the horizon
    assert rows[0][1] == pytest.approx(np.pi / 48)
    assert rows[1][1] == pytest.approx(np.pi / 80)
    assert rows[1][2] < rows[0][2]
    assert len(slopes) == 1 and slopes[0][0] == 0.25
    assert 1.8 < slopes[0][1] < 2.2
    saved = np.loadtxt(tmp_path / "convergence.csv", delimiter=",", skiprows=1)
    assert saved.shape == (2, 3)
    assert np.loadtxt(tmp_path / "slopes.csv", delimiter=",", skiprows=1).shape == (2,)


def test_reference_cache_is_memoized(tmp_path):
    cache = tmp_path / "cache"
    cfg = RunConfig(epsilon=0.25, t_final=0.1, n_points=32, rms_every=1 << 30,
                    output_dir=str(tmp_path))
    first = reference_filtered(cfg, cache_dir=str(cache))
    files = sorted(cache.glob("*.npy"))
    assert len(files) == 1
    # a poisoned cache entry coming back proves the second call reads it
    marker = np.full_like(first, 7.0)
    np.save(files[0], marker)
    assert np.array_equal(reference_filtered(cfg, cache_dir=str(cache)), marker)
    reference_filtered(cfg.replace(epsilon=0.5), cache_dir=str(cache))
    assert len(sorted(cache.glob("*.npy"))) == 2


def test_reference_n_must_match_grid(tmp_path):
    cfg = RunConfig(epsilon=0.25, t_final=0.1, n_points=32, reference_n=48,
                    output_dir=str(tmp_path))
    with pytest.raises(ValueError, match="multiple of n_points"):
        reference_filtered(cfg)
