import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from gdtm.graph import build_chain_adjacency, build_heterogeneous_adjacency, chain_graph
from gdtm.metrics import nmse
from gdtm.nn import ShapeError
from gdtm.oracle import (
    HARMONIC, IMPULSE, RANDOM, EpisodeRecord, ExcitationSpec, SolverConfig, generate_excitation,
    newmark_solve, uniform_chain,
)
from gdtm.surrogate import (
    NormalizationScalers, RolloutError, TrainConfig, TrainingError, build_dataset,
    evaluate_rollout, evaluate_rollouts, fit_scalers, fit_surrogate, linear_oracle_surrogate,
    new_surrogate, predict_samples, rollout, split_episodes, train,
)

DT = 0.01


def episodes(n_vertices=4, steps=300, seed=0, dt=DT):
    cfg = SolverConfig(dt=dt, steps=steps)
    system = uniform_chain(n_vertices)
    rng = np.random.default_rng(seed)
    specs = [ExcitationSpec(IMPULSE, int(rng.integers(n_vertices)), 1000.0),
             ExcitationSpec(HARMONIC, int(rng.integers(n_vertices)), 500.0, frequency=1.5),
             ExcitationSpec(RANDOM, int(rng.integers(n_vertices)), 200.0, seed=seed)]
    return [newmark_solve(system, generate_excitation(s, cfg, n_vertices), cfg) for s in specs]


def zero_record(steps=2, n=3):
    z = np.zeros((steps, n))
    return EpisodeRecord(DT, z, z, z, z)


def test_fit_scalers_uses_max_abs():
    z = np.zeros((3, 2))
    acc = np.array([[0.0, -4.0], [1.0, 2.0], [0.0, 0.0]])
    sc = fit_scalers([EpisodeRecord(DT, z, acc, z, z)])
    assert sc.acceleration == 4.0
    assert sc.velocity == sc.displacement == sc.excitation == 1.0


def test_fit_scalers_requires_episodes():
    with pytest.raises(ValueError):
        fit_scalers([])


def test_normalization_round_trip():
    sc = NormalizationScalers(0.37, 1.9, 3e-3, 850.0)
    x = np.random.default_rng(0).normal(size=50)
    for channel in ("acceleration", "velocity", "displacement", "excitation"):
        assert_allclose(sc.denormalize(channel, sc.normalize(channel, x)), x, rtol=1e-15)
    with pytest.raises(ValueError):
        NormalizationScalers(acceleration=0.0)


def test_dataset_counts_and_layout():
    eps = episodes(steps=50)
    adj = build_chain_adjacency(4)
    data = build_dataset(eps, adj, fit_scalers(eps))
    assert len(data) == sum(e.steps - 1 for e in eps)
    assert data.inputs.shape == (len(data), 4, 3)
    assert len(build_dataset([zero_record(2, 4)], adj, NormalizationScalers())) == 1


def test_dataset_pairs_state_n_with_step_n_plus_one():
    ep = episodes(steps=20)[2]
    adj = build_chain_adjacency(4)
    sc = fit_scalers([ep])
    data = build_dataset([ep], adj, sc)
    s = 7
    expected_agg = adj.stacked[0] @ (ep.velocity[s] / sc.velocity)
    assert_allclose(data.inputs[s, :, 0], expected_agg)
    assert_allclose(data.inputs[s, :, 2], ep.excitation[s + 1] / sc.excitation)
    assert_allclose(data.targets[s], ep.acceleration[s + 1] / sc.acceleration)


def test_zero_episode_gives_zero_samples():
    data = build_dataset([zero_record(5, 3)], build_chain_adjacency(3), NormalizationScalers())
    assert not data.inputs.any() and not data.targets.any()


def test_dataset_shape_mismatch():
    with pytest.raises(ShapeError):
        build_dataset([zero_record(3, 3)], build_chain_adjacency(4), NormalizationScalers())


def test_heterogeneous_input_width():
    adj = build_heterogeneous_adjacency(chain_graph(5, types=[0, 1]))
    model = new_surrogate("heterogeneous", adj, NormalizationScalers(), DT)
    assert adj.N == 3
    assert model.mlp.input_dim == 7
    with pytest.raises(ShapeError):
        model.check_adjacency(build_chain_adjacency(5))


def test_split_is_whole_episode_and_stratified():
    kinds = ["a"] * 10 + ["b"] * 10 + ["c"] * 10
    split = split_episodes(30, 0.8, seed=3, strata=kinds)
    assert len(split.train) == 24 and len(split.test) == 6
    assert not set(split.train) & set(split.test)
    for label in "abc":
        assert sum(kinds[i] == label for i in split.test) == 2
    assert split_episodes(30, 0.8, 3, kinds) == split


def test_training_reduces_loss_and_is_deterministic(tmp_path):
    eps = episodes(steps=400) + episodes(steps=400, seed=1)
    cfg = TrainConfig(epochs=30, seed=2)
    strata = ["i", "h", "r"] * 2
    adj = build_chain_adjacency(4)
    model, hist, split = fit_surrogate(eps, adj, config=cfg, strata=strata)
    assert hist.test_loss[0] >= 10 * min(hist.test_loss)
    model2, hist2, _ = fit_surrogate(eps, adj, config=cfg, strata=strata)
    hist.to_csv(tmp_path / "a.csv")
    hist2.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    for p, q in zip(model.params(), model2.params()):
        assert_array_equal(p, q)
    assert (tmp_path / "a.csv").read_text().startswith("epoch,train_loss,test_loss\n0,")


def test_zero_target_training_drives_output_to_zero():
    eps = [zero_record(40, 3) for _ in range(5)]
    adj = build_chain_adjacency(3)
    model = new_surrogate("homogeneous", adj, NormalizationScalers(), DT, seed=1)
    for b in model.mlp.biases:
        b[:] = 0.3
    data = build_dataset(eps, adj, NormalizationScalers())
    trained, hist = train(model, data, TrainConfig(epochs=40, batch_size=16, learning_rate=1e-2))
    assert min(hist.test_loss) < 1e-3 * hist.test_loss[0]
    assert np.abs(predict_samples(trained, data)).max() < 1e-2


def test_training_error_on_divergence():
    eps = episodes(steps=50)
    adj = build_chain_adjacency(4)
    data = build_dataset(eps, adj, fit_scalers(eps))
    model = new_surrogate("homogeneous", adj, fit_scalers(eps), DT)
    data.targets[:] = np.nan
    with pytest.raises(TrainingError) as err:
        train(model, data, TrainConfig(epochs=2))
    assert err.value.epoch == 1


def test_rollout_single_step_returns_initial_row():
    adj = build_chain_adjacency(3)
    model = new_surrogate("homogeneous", adj, NormalizationScalers(), DT)
    rec = rollout(model, adj, np.zeros((1, 3)), u0=[1.0, 2.0, 3.0])
    assert rec.steps == 1
    assert_array_equal(rec.displacement[0], [1.0, 2.0, 3.0])


@pytest.mark.parametrize("kind", ["homogeneous", "heterogeneous", "gat"])
def test_zero_output_model_is_a_fixed_point(kind):
    adj = build_heterogeneous_adjacency(chain_graph(4, types=[0, 1]))
    if kind == "homogeneous":
        adj = build_chain_adjacency(4)
    model = new_surrogate(kind, adj, NormalizationScalers(), DT)
    model.mlp.weights[-1][:] = 0.0
    rec = rollout(model, adj, np.zeros((50, 4)))
    assert not rec.acceleration.any() and not rec.displacement.any()


@pytest.mark.parametrize("kind", ["homogeneous", "gat"])
def test_rollout_is_causal(kind):
    adj = build_chain_adjacency(5)
    model = new_surrogate(kind, adj, NormalizationScalers(1.0, 1.0, 1.0, 100.0), DT, seed=3)
    exc = np.random.default_rng(0).normal(size=(60, 5))
    changed = exc.copy()
    changed[31:] += 5.0
    a = rollout(model, adj, exc).acceleration
    b = rollout(model, adj, changed).acceleration
    assert_array_equal(a[:31], b[:31])
    assert not np.array_equal(a[31], b[31])


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_rollout_reports_step_of_blow_up():
    adj = build_chain_adjacency(2)
    model = new_surrogate("homogeneous", adj, NormalizationScalers(), DT)
    exc = np.zeros((10, 2))
    exc[4, 0] = np.inf
    with pytest.raises(RolloutError) as err:
        rollout(model, adj, exc)
    assert err.value.step == 4


def test_rollout_shape_check():
    adj = build_chain_adjacency(3)
    model = new_surrogate("homogeneous", adj, NormalizationScalers(), DT)
    with pytest.raises(ShapeError):
        rollout(model, adj, np.zeros((5, 4)))


def test_same_model_runs_on_any_chain_length():
    eps = episodes(steps=50)
    model = new_surrogate("homogeneous", build_chain_adjacency(4), fit_scalers(eps), DT)
    for v in (2, 7, 30):
        assert rollout(model, build_chain_adjacency(v), np.zeros((5, v))).vertex_count == v


def test_attention_capture_rows_sum_to_one():
    adj = build_heterogeneous_adjacency(chain_graph(6, types=[0, 1]))
    model = new_surrogate("gat", adj, NormalizationScalers(1.0, 0.1, 0.01, 100.0), DT, seed=4)
    exc = np.random.default_rng(2).normal(scale=50.0, size=(80, 6))
    rec, att = rollout(model, adj, exc, capture_attention=True)
    assert att.shape == (80, 6, 6)
    assert_allclose(att.sum(axis=2), 1.0, atol=1e-12)


def test_linear_oracle_predicts_exact_one_step_accelerations():
    # the oracle reproduces M^-1 (E - C v - K u) on the true state exactly
    eps = episodes(n_vertices=6, steps=200)
    sc = fit_scalers(eps)
    adj = build_chain_adjacency(6)
    model = linear_oracle_surrogate(2000.0, 2.4e5, 2500.0, sc, DT)
    ep = eps[2]
    data = build_dataset([ep], adj, sc)
    pred = predict_samples(model, data) * sc.acceleration
    a = adj.stacked[0]
    expected = (ep.excitation[1:] - 2500.0 * ep.velocity[:-1] @ a.T
                - 2.4e5 * ep.displacement[:-1] @ a.T) / 2000.0
    assert_allclose(pred, expected, rtol=1e-10, atol=1e-12)


def _oracle_nmse(dt, duration=5.0):
    steps = int(round(duration / dt))
    cfg = SolverConfig(dt=dt, steps=steps)
    system = uniform_chain(10)
    spec = ExcitationSpec(HARMONIC, 4, 500.0, frequency=1.5)
    truth = newmark_solve(system, generate_excitation(spec, cfg, 10), cfg)
    model = linear_oracle_surrogate(2000.0, 2.4e5, 2500.0, fit_scalers([truth]), dt)
    pred = rollout(model, build_chain_adjacency(10), truth.excitation)
    return evaluate_rollout(pred, truth).nmse


def test_linear_oracle_rollout_converges_with_time_step():
    # the state-n input lags the implicit solver by one step; the gap closes as dt shrinks
    # first-order amplitude error, so NMSE falls about fourfold per halving
    errors = [_oracle_nmse(dt) for dt in (0.004, 0.002, 0.001, 0.0005)]
    ratios = [a / b for a, b in zip(errors, errors[1:])]
    assert all(3.0 < r < 6.0 for r in ratios)
    assert errors[-1] < 1e-3


def test_pooled_metrics_match_concatenation():
    eps = episodes(steps=30)
    pairs = [(eps[0], eps[1]), (eps[2], eps[1])]
    pooled = evaluate_rollouts(pairs)
    truth = np.concatenate([eps[1].acceleration.ravel()] * 2)
    pred = np.concatenate([eps[0].acceleration.ravel(), eps[2].acceleration.ravel()])
    assert pooled.nmse == nmse(truth, pred)
    assert evaluate_rollout(eps[0], eps[0]).csv_row() == f"0,1,0,{eps[0].acceleration.size}"
