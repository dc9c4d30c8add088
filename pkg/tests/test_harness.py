import numpy as np
import pytest

from stochwave import (
    ConfigError,
    CubicDrift,
    DegenerateStudyError,
    Embedding,
    ExperimentConfig,
    State,
    make_backend,
    rate_fit,
    spatial_study,
    strong_error,
    temporal_study,
    trace_study,
)
from stochwave.harness import (
    read_csv_columns,
    resolve_config,
    validate_config,
    write_rates_csv,
    write_trace_csv,
)

FAST_TEMPORAL = ExperimentConfig(
    modes=16,
    taus=(2**-2, 2**-3, 2**-4),
    tau_ref=2**-6,
    samples=24,
    batch_size=8,
    seed=2,
)

FAST_SPATIAL = ExperimentConfig(
    modes=16,
    space_levels=(2, 4, 8),
    space_ref=32,
    tau=2**-4,
    samples=16,
    batch_size=8,
    seed=3,
)


def test_rate_fit_exact_power_laws():
    slope, intercept, half = rate_fit([(1.0, 1.0), (0.5, 0.5), (0.25, 0.25)])
    assert slope == pytest.approx(1.0, abs=1e-12)
    assert intercept == pytest.approx(0.0, abs=1e-12)
    assert half < 1e-12
    slope, _, _ = rate_fit([(1.0, 1.0), (0.5, 0.25), (0.25, 0.0625)])
    assert slope == pytest.approx(2.0, abs=1e-12)


def test_rate_fit_noisy_covers_truth():
    rng = np.random.default_rng(71)
    scales = 2.0 ** -np.arange(1, 8)
    errors = 3.0 * scales * np.exp(rng.normal(0.0, 0.1, scales.size))
    slope, _, half = rate_fit(zip(scales, errors))
    assert abs(slope - 1.0) <= half


def test_rate_fit_rejects_bad_input():
    with pytest.raises(ValueError):
        rate_fit([(1.0, 1.0), (0.5, 0.5)])
    with pytest.raises(ValueError):
        rate_fit([(1.0, 1.0), (0.5, 0.0), (0.25, 0.1)])


def test_strong_error_same_space():
    backend = make_backend("spectral", 4)
    e1 = np.zeros(4)
    e1[0] = 1.0
    e2 = np.zeros(4)
    e2[1] = 1.0
    ref = State(e1, e2)
    zero = State.zero(backend)
    e_u, e_v = strong_error(ref, zero, backend)
    assert e_u == pytest.approx(1.0, rel=1e-14)
    assert e_v == pytest.approx(1.0 / (2.0 * np.pi), rel=1e-13)
    same = strong_error(ref, ref, backend)
    assert same == (0.0, 0.0)


def test_strong_error_embeds_coarse_spectral():
    rng = np.random.default_rng(72)
    fine = make_backend("spectral", 8)
    coarse = make_backend("spectral", 3)
    u_ref = rng.standard_normal(8)
    v_ref = rng.standard_normal(8)
    test = State(u_ref[:3].copy(), v_ref[:3].copy())
    e_u, e_v = strong_error(State(u_ref, v_ref), test, fine, coarse)
    assert e_u == pytest.approx(np.sqrt(np.sum(u_ref[3:] ** 2)), rel=1e-13)
    lam = fine.eigenvalues
    assert e_v == pytest.approx(np.sqrt(np.sum(v_ref[3:] ** 2 / lam[3:])), rel=1e-13)
    with pytest.raises(ValueError):
        strong_error(State(u_ref[:3], v_ref[:3]), State(u_ref, v_ref), coarse, fine)


def test_fem_embedding_is_exact():
    rng = np.random.default_rng(73)
    fine = make_backend("fem", 15)
    coarse = make_backend("fem", 3)
    embed = Embedding(coarse, fine)
    field = rng.standard_normal(3)
    lifted = embed(field)
    # same function: coarse nodes are fine nodes 4, 8, 12
    assert np.allclose(lifted[3::4], field, atol=1e-15)
    assert fine.norm(lifted, 0) == pytest.approx(coarse.norm(field, 0), rel=1e-12)
    assert fine.norm(lifted, 1) == pytest.approx(coarse.norm(field, 1), rel=1e-12)
    with pytest.raises(ValueError):
        Embedding(make_backend("fem", 4), fine)
    with pytest.raises(ValueError):
        Embedding(coarse, make_backend("spectral", 15))


def test_temporal_study_runs_and_is_monotone():
    report = temporal_study(FAST_TEMPORAL)
    assert report.scales[0] > report.scales[-1]
    # errors shrink with the step, up to statistical slack
    for k in range(len(report.levels) - 1):
        slack = 2.0 * (report.stderr[k] + report.stderr[k + 1])
        assert report.total_error[k + 1] <= report.total_error[k] + slack
    assert 0.5 < report.slope < 1.5


def test_temporal_study_deterministic_and_worker_invariant():
    base = temporal_study(FAST_TEMPORAL)
    again = temporal_study(FAST_TEMPORAL)
    assert np.array_equal(base.err_u, again.err_u)
    assert np.array_equal(base.err_v, again.err_v)
    pooled = temporal_study(
        ExperimentConfig(**{**FAST_TEMPORAL.__dict__, "workers": 3})
    )
    assert np.array_equal(base.err_u, pooled.err_u)
    assert np.array_equal(base.err_v, pooled.err_v)


def test_temporal_study_linear_drift_keeps_order_one():
    config = ExperimentConfig(
        modes=16,
        taus=(2**-2, 2**-3, 2**-4, 2**-5),
        tau_ref=2**-8,
        samples=48,
        batch_size=16,
        seed=4,
        drift=None,
    )
    report = temporal_study(config)
    assert 0.8 <= report.slope <= 1.2


def test_temporal_study_degenerate_aborts():
    config = ExperimentConfig(
        modes=8,
        taus=(2**-2, 2**-3, 2**-4),
        tau_ref=2**-5,
        samples=4,
        noise_modes=0,
        seed=5,
    )
    with pytest.raises(DegenerateStudyError, match="degenerate"):
        temporal_study(config)


def test_spatial_study_spectral_smoke():
    report = spatial_study(FAST_SPATIAL)
    assert report.levels == [2, 4, 8]
    expected_scales = [1.0 / ((j + 1) * np.pi) for j in (2, 4, 8)]
    assert np.allclose(report.scales, expected_scales, rtol=1e-12)
    assert np.all(np.diff(report.total_error) < 0)
    assert 0.6 < report.slope < 1.4


def test_spatial_study_fem_smoke():
    config = ExperimentConfig(
        backend="fem",
        space_levels=(2, 3, 4),
        space_ref=7,
        tau=2**-5,
        samples=12,
        batch_size=6,
        seed=6,
    )
    report = spatial_study(config)
    assert np.allclose(report.scales, [0.25, 0.125, 0.0625])
    assert np.all(np.diff(report.total_error) < 0)
    assert report.slope > 0.4


def test_trace_study_reference_slope_and_bands():
    config = ExperimentConfig(modes=4, tau=2**-4, samples=200, seed=7, batch_size=50)
    report = trace_study(config)
    q = ((np.arange(1, 5) * np.pi) ** 2) ** (-0.5005)
    assert report.ref_slope == pytest.approx(0.5 * np.sum(q), rel=1e-13)
    assert report.initial_energy == 0.0
    band = 5.0 * report.stderr[1:] + 1e-12
    assert np.all(np.abs(report.mean_energy[1:] - report.reference[1:]) <= band)


def test_fem_noise_trace_matches_per_mode_oracle():
    from stochwave import NoiseModel
    from stochwave.fem import project_sine_mode

    backend = make_backend("fem", 15)
    model = NoiseModel(s=0.5005, j_noise=40)
    oracle = 0.0
    for j in range(1, 41):
        c = project_sine_mode(j, backend.ops, backend.mesh)
        oracle += model.q[j - 1] * float(c @ backend.ops.mass @ c)
    assert backend.noise_trace(model) == pytest.approx(oracle, rel=1e-13)


def test_trace_study_fem_backend_follows_projected_trace():
    config = ExperimentConfig(
        backend="fem", mesh_exponent=4, tau=2**-5, samples=300,
        batch_size=75, seed=6,
    )
    report = trace_study(config)
    band = 4.0 * report.stderr[1:] + 1e-12
    assert np.all(np.abs(report.mean_energy[1:] - report.reference[1:]) <= band)
    assert report.slope == pytest.approx(report.ref_slope, rel=0.15)


def test_trace_study_zero_noise_is_flat_at_offset():
    drift = CubicDrift(c1_offset=0.25)
    config = ExperimentConfig(
        modes=4, tau=2**-3, samples=3, noise_modes=0, drift=drift, seed=8
    )
    report = trace_study(config)
    assert report.ref_slope == 0.0
    assert np.allclose(report.mean_energy, 0.25, atol=1e-14)
    assert report.slope == pytest.approx(0.0, abs=1e-12)


def test_noise_paths_nest_across_levels():
    # the tables a coarse level consumes are exact block sums of the
    # reference tables, recomputed here from the same plan
    from stochwave import NoiseModel, SeedPlan, coarsen_time, sample_increments

    model = NoiseModel(s=0.5005, j_noise=16)
    plan = SeedPlan(FAST_TEMPORAL.seed)
    ref = sample_increments(model, plan, 0, 64, FAST_TEMPORAL.tau_ref)
    for factor in (4, 8, 16):
        coarse = coarsen_time(ref, factor)
        rebuilt = np.add.reduce(
            [ref[k::factor] for k in range(factor)]
        )
        assert np.allclose(coarse, rebuilt, rtol=0, atol=1e-15)


def test_validate_config_rejects_bad_setups():
    with pytest.raises(ConfigError, match="gamma"):
        validate_config(ExperimentConfig(gamma=1.5, q_exponent=0.5), "trace")
    with pytest.raises(ConfigError, match="dyadic"):
        validate_config(
            ExperimentConfig(taus=(0.3, 0.15, 0.075), tau_ref=2**-6), "temporal"
        )
    with pytest.raises(ConfigError, match="finer"):
        validate_config(
            ExperimentConfig(taus=(2**-3, 2**-4, 2**-5), tau_ref=2**-4), "temporal"
        )
    with pytest.raises(ConfigError, match="integral"):
        validate_config(ExperimentConfig(tau=0.3, t_final=1.0), "trace")
    with pytest.raises(ConfigError, match="solvability"):
        validate_config(ExperimentConfig(tau=2.5), "trace")
    with pytest.raises(ConfigError, match="finest"):
        validate_config(
            ExperimentConfig(space_levels=(4, 8, 16), space_ref=16), "spatial"
        )
    validate_config(resolve_config(ExperimentConfig(), "temporal"), "temporal")


def test_resolve_config_defaults():
    spatial = resolve_config(ExperimentConfig(), "spatial")
    assert spatial.space_levels == (4, 8, 16, 32)
    assert spatial.space_ref == 256
    assert spatial.samples == 200
    fem = resolve_config(ExperimentConfig(backend="fem"), "spatial")
    assert fem.space_levels == (2, 3, 4, 5)
    assert fem.space_ref == 8
    assert fem.samples == 100
    trace = resolve_config(ExperimentConfig(), "trace")
    assert trace.tau == 2**-6 and trace.samples == 1000


def test_csv_round_trips(tmp_path):
    report = temporal_study(FAST_TEMPORAL)
    rates = tmp_path / "rates.csv"
    write_rates_csv(rates, report)
    cols = read_csv_columns(rates)
    assert list(cols) == ["level", "scale", "err_u", "err_v", "stderr"]
    assert np.array_equal(cols["err_u"], report.err_u)
    assert np.array_equal(cols["scale"], report.scales)

    trace = trace_study(
        ExperimentConfig(modes=4, tau=2**-3, samples=8, seed=9, batch_size=4)
    )
    path = tmp_path / "trace.csv"
    write_trace_csv(path, trace)
    cols = read_csv_columns(path)
    assert np.array_equal(cols["t"], trace.times)
    assert np.array_equal(cols["mean_J"], trace.mean_energy)
    assert np.array_equal(cols["reference"], trace.reference)
