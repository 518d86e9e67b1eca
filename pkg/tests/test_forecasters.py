import numpy as np
import pytest

from epiecon.errors import DomainError, WindowError
from epiecon.forecasters import (
    InfectionDataset, InfectionModel, MobilityDataset, MobilityModel,
    UnemploymentDataset, UnemploymentModel, enforce_sign_constraints,
    infection_loss, infection_train_config, mobility_train_config,
    predict_mobility, predict_r, predict_u, train_mobility, train_r, train_u,
    unemployment_train_config, validate_policy_weights, _MobilityTrainable,
    _UnemploymentTrainable,
)
from epiecon.nn.training import TrainConfig
from epiecon.panel import N_CONTAINMENT, N_POLICIES, RESIDENTIAL

DEMO = np.array([36.0, 1e7, 0.48, 0.16, 62000.0])


def _random_mobility_dataset(n=40, seed=0):
    rng = np.random.default_rng(seed)
    return MobilityDataset(
        cases_hist=rng.uniform(0, 3e4, (n, 7)),
        unemp_hist=rng.uniform(2, 15, (n, 7)),
        demo=np.tile(DEMO, (n, 1)),
        policy=rng.uniform(0, 1, (n, 14)),
        blm=rng.uniform(0, 1, n),
        targets=rng.normal(-10, 5, (n, 6)),
    )


# --- mobility predictions -------------------------------------------------------

def test_mobility_zero_network_outputs_bias():
    model = MobilityModel(hidden_size=4, demo_features=3, zero=True)
    for i, net in enumerate(model.nets):
        net.fc_out.b[0] = float(i) - 2.0
    # zero inputs: the constrained policy head sees zeros, so only each
    # category's output bias survives
    out = predict_mobility(model, np.zeros(7), np.zeros(7), np.zeros(5),
                           np.zeros(14), 0.0)
    assert np.allclose(out, np.arange(6.0) - 2.0)


def test_mobility_requires_full_windows():
    model = MobilityModel(hidden_size=4, demo_features=3, seed=0)
    with pytest.raises(WindowError):
        predict_mobility(model, np.zeros(6), np.zeros(7), np.zeros(5), np.zeros(14), 0.0)
    with pytest.raises(WindowError):
        predict_mobility(model, np.zeros(7), np.zeros(7), np.zeros(4), np.zeros(14), 0.0)


def test_mobility_blm_invariance_for_away_categories():
    model = MobilityModel(hidden_size=4, demo_features=3, seed=1)
    rng = np.random.default_rng(2)
    cases, unemp = rng.uniform(0, 100, 7), rng.uniform(0, 10, 7)
    policy = rng.uniform(0, 1, 14)
    a = predict_mobility(model, cases, unemp, DEMO, policy, 0.0)
    b = predict_mobility(model, cases, unemp, DEMO, policy, 0.9)
    assert np.array_equal(a[:RESIDENTIAL], b[:RESIDENTIAL])
    assert a[RESIDENTIAL] != b[RESIDENTIAL]


def test_mobility_containment_perturbation_signs():
    model = MobilityModel(hidden_size=4, demo_features=3, seed=3)
    rng = np.random.default_rng(4)
    for trial in range(25):
        cases, unemp = rng.uniform(0, 100, 7), rng.uniform(0, 10, 7)
        policy = rng.uniform(0, 0.5, 14)
        blm = rng.uniform(0, 1)
        j = rng.integers(0, N_CONTAINMENT)
        delta = rng.uniform(0.05, 0.5)
        base = predict_mobility(model, cases, unemp, DEMO, policy, blm)
        bumped_policy = policy.copy()
        bumped_policy[j] += delta
        bumped = predict_mobility(model, cases, unemp, DEMO, bumped_policy, blm)
        diff = bumped - base
        assert np.all(diff[:RESIDENTIAL] <= 1e-12)
        assert diff[RESIDENTIAL] >= -1e-12


def test_mobility_free_policy_components_unconstrained():
    model = MobilityModel(hidden_size=4, demo_features=3, seed=5)
    weights = [net.effective_policy_weights() for net in model.nets]
    # the six non-containment entries keep their raw (either-sign) values
    free = np.concatenate([w[N_CONTAINMENT:] for w in weights])
    assert np.any(free > 0) and np.any(free < 0)


def test_sign_invariant_holds_at_init_and_after_training():
    dataset = _random_mobility_dataset()
    config = mobility_train_config(max_epochs=30, patience=30, seed=6, noise_sigma=0.1)
    model, _ = train_mobility(dataset, config, hidden_size=4, demo_features=3)
    enforce_sign_constraints(model)  # raises on violation
    for net in model.nets:
        w = net.effective_policy_weights()[:N_CONTAINMENT]
        if net.category == RESIDENTIAL:
            assert np.all(w >= 0)
        else:
            assert np.all(w <= 0)


def test_validate_policy_weights_detects_violation():
    bad = np.zeros(N_POLICIES)
    bad[2] = 0.5
    with pytest.raises(DomainError):
        validate_policy_weights(bad, category=0)
    validate_policy_weights(bad, category=RESIDENTIAL)  # positive is fine here
    bad[2] = -0.5
    with pytest.raises(DomainError):
        validate_policy_weights(bad, category=RESIDENTIAL)


def test_mobility_zero_noise_loss_reduces_to_plain_mse():
    dataset = _random_mobility_dataset(20, seed=7)
    model = MobilityModel(hidden_size=4, demo_features=3, seed=8)
    model.fit_norms(dataset)
    trainable = _MobilityTrainable(model, model.nets[0])
    rng = np.random.default_rng(0)
    loss = trainable.training_loss(dataset, rng, TrainConfig(noise_sigma=0.0))
    assert loss == pytest.approx(trainable.validation_loss(dataset))


def test_mobility_noise_terms_add_consistency_loss():
    dataset = _random_mobility_dataset(20, seed=9)
    model = MobilityModel(hidden_size=4, demo_features=3, seed=10)
    model.fit_norms(dataset)
    trainable = _MobilityTrainable(model, model.nets[0])
    clean = trainable.training_loss(dataset, np.random.default_rng(1), TrainConfig(noise_sigma=0.0))
    noisy = trainable.training_loss(dataset, np.random.default_rng(1), TrainConfig(noise_sigma=0.3))
    assert noisy > clean


def test_mobility_paper_defaults_accepted():
    config = mobility_train_config()
    assert config.learning_rate == pytest.approx(8e-4)
    assert config.weight_decay == pytest.approx(5e-6)
    assert config.lr_decay_factor == pytest.approx(0.8)
    assert config.lr_decay_period == 200
    assert config.patience == 100


def test_mobility_learnable_synthetic_linear_truth():
    rng = np.random.default_rng(11)
    n = 400  # comfortably more samples than parameters
    cases = rng.uniform(0, 3e4, (n, 7))
    unemp = rng.uniform(2, 15, (n, 7))
    policy = rng.uniform(0, 1, (n, 14))
    blm = rng.uniform(0, 1, n)
    czn = (cases[:, -1] - 1.5e4) / 8.6e3
    uzn = (unemp[:, -1] - 8.5) / 3.7
    targets = np.stack([
        -12.0 - 3.0 * czn + 1.0 * uzn - 2.0 * policy[:, 0] - 1.0 * policy[:, 1]
        for _ in range(6)], axis=1)
    targets[:, 5] = 8.0 + 2.0 * czn + 1.5 * policy[:, 0] + 0.5 * blm
    dataset = MobilityDataset(cases, unemp, np.tile(DEMO, (n, 1)), policy, blm, targets)
    config = mobility_train_config(learning_rate=8e-3, max_epochs=600, patience=300,
                                   noise_sigma=0.0, seed=12)
    model, _ = train_mobility(dataset, config, hidden_size=4, demo_features=3)
    holdout = dataset.slice(n - 80, n)
    pred = model.predict_batch(holdout.cases_hist, holdout.unemp_hist, holdout.demo,
                               holdout.policy, holdout.blm)
    mse = np.mean((pred - holdout.targets) ** 2, axis=0)
    var = dataset.targets.var(axis=0)
    assert np.all(mse < 0.10 * var)


# --- unemployment ------------------------------------------------------------------

def test_unemployment_zero_network_outputs_bias_clipped():
    model = UnemploymentModel(hidden_size=4, demo_features=3, inner_features=2, zero=True)
    model.fc_out.b[0] = -3.0  # de-normalized with identity stats, clips at 0
    assert predict_u(model, np.zeros((7, 6)), np.zeros(5), 5.0) == 0.0
    model.fc_out.b[0] = 4.5
    assert predict_u(model, np.zeros((7, 6)), np.zeros(5), 5.0) == pytest.approx(4.5)


def test_unemployment_clipping_contract():
    rng = np.random.default_rng(13)
    model = UnemploymentModel(hidden_size=4, demo_features=3, inner_features=2, seed=14)
    model.norm_target.std[0] = 1e6  # blow up the output scale to hit the clip
    for _ in range(50):
        u = predict_u(model, rng.normal(size=(7, 6)), rng.normal(size=5), rng.uniform(0, 20))
        assert 0.0 <= u <= 100.0


def test_unemployment_window_validation():
    model = UnemploymentModel(hidden_size=4, demo_features=3, inner_features=2, seed=0)
    with pytest.raises(WindowError):
        predict_u(model, np.zeros((6, 6)), np.zeros(5), 5.0)


def test_unemployment_sensitive_to_week_lag():
    model = UnemploymentModel(hidden_size=4, demo_features=3, inner_features=2, seed=15)
    mob = np.random.default_rng(16).normal(size=(7, 6))
    a = predict_u(model, mob, DEMO, 4.0)
    b = predict_u(model, mob, DEMO, 9.0)
    assert a != b


def test_unemployment_zero_noise_loss_equality():
    rng = np.random.default_rng(17)
    dataset = UnemploymentDataset(rng.normal(size=(20, 7, 6)), np.tile(DEMO, (20, 1)),
                                  rng.uniform(2, 15, 20), rng.uniform(2, 15, 20))
    model = UnemploymentModel(hidden_size=4, demo_features=3, inner_features=2, seed=18)
    model.fit_norms(dataset)
    trainable = _UnemploymentTrainable(model)
    loss = trainable.training_loss(dataset, rng, TrainConfig(noise_sigma=0.0))
    assert loss == pytest.approx(trainable.validation_loss(dataset))


def test_unemployment_paper_defaults_accepted():
    config = unemployment_train_config()
    assert config.learning_rate == pytest.approx(1e-3)
    assert config.weight_decay == pytest.approx(5e-6)


def test_unemployment_beats_last_value_baseline():
    # AR(1)-plus-mobility world: the trained model should outperform carrying
    # the week-old rate forward
    rng = np.random.default_rng(19)
    n = 160
    mob = rng.normal(0, 1, (n + 7, 6))
    u = np.zeros(n + 7)
    u[:7] = 8.0
    for t in range(7, n + 7):
        u[t] = 0.6 * u[t - 7] + 3.2 + 1.5 * mob[t - 1, 4] + rng.normal(0, 0.05)
    windows = np.stack([mob[t - 6:t + 1] for t in range(7, n + 7)])
    dataset = UnemploymentDataset(windows, np.tile(DEMO, (n, 1)), u[:n], u[7:])
    config = unemployment_train_config(learning_rate=1e-2, max_epochs=800,
                                       patience=200, noise_sigma=0.0, seed=20)
    model, _ = train_u(dataset, config, hidden_size=6, demo_features=3, inner_features=4)
    holdout = dataset.slice(n - 32, n)
    pred = model.predict_batch(holdout.mob_window, holdout.demo, holdout.u_prev)
    model_mae = np.mean(np.abs(pred - holdout.targets))
    naive_mae = np.mean(np.abs(holdout.u_prev - holdout.targets))
    assert model_mae < naive_mae


# --- infection rate -----------------------------------------------------------------

def test_infection_nonnegative_for_random_inputs():
    model = InfectionModel(hidden_size=4, demo_features=3, seed=21)
    rng = np.random.default_rng(22)
    windows = rng.normal(0, 3, (10_000, 7, 6))
    demo = rng.normal(0, 1, (10_000, 5))
    rates = model.predict_batch(windows, demo)
    assert np.all(rates >= 0)


def test_infection_zero_network_softplus_bias():
    model = InfectionModel(hidden_size=4, demo_features=3, zero=True)
    r = predict_r(model, np.zeros((7, 6)), np.zeros(5))
    assert r == pytest.approx(np.log(2.0))  # softplus(0) * rate_scale(=1)


def test_infection_full_window_dependence():
    model = InfectionModel(hidden_size=4, demo_features=3, seed=23)
    rng = np.random.default_rng(24)
    window = rng.normal(size=(7, 6))
    other = window.copy()
    other[0] += 1.0  # day t-6 only
    assert predict_r(model, window, DEMO) != predict_r(model, other, DEMO)


def test_infection_window_validation():
    model = InfectionModel(hidden_size=4, demo_features=3, seed=0)
    with pytest.raises(WindowError):
        predict_r(model, np.zeros((7, 5)), np.zeros(5))


def test_infection_loss_perfect_predictor_zero():
    targets = np.array([0.01, 0.02, 0.05])
    assert infection_loss(targets, targets) == 0.0


def test_infection_loss_inverse_target_weighting():
    # equal absolute errors, targets 0.01 vs 0.1: the small-target sample
    # contributes ten times the loss
    lo = infection_loss([0.02], [0.01])
    hi = infection_loss([0.11], [0.1])
    assert lo / hi == pytest.approx(10.0)


def test_infection_paper_defaults_accepted():
    config = infection_train_config()
    assert config.learning_rate == pytest.approx(6e-4)
    assert config.weight_decay == pytest.approx(5e-5)
    assert config.max_epochs == 100
    assert config.early_stop is False


def test_infection_drops_tiny_targets_and_rejects_empty():
    rng = np.random.default_rng(25)
    dataset = InfectionDataset(rng.normal(size=(10, 7, 6)), np.tile(DEMO, (10, 1)),
                               np.full(10, 1e-12))
    with pytest.raises(DomainError):
        train_r(dataset, infection_train_config(max_epochs=2))


def test_infection_learns_mobility_response():
    rng = np.random.default_rng(26)
    n = 140
    windows = rng.normal(0, 1, (n, 7, 6))
    targets = np.exp(-3.0 + 0.8 * windows[:, -1, 4])  # workplace-driven rate
    dataset = InfectionDataset(windows, np.tile(DEMO, (n, 1)), targets)
    config = infection_train_config(learning_rate=6e-3, max_epochs=500, seed=27)
    model, _ = train_r(dataset, config, hidden_size=6, demo_features=3)
    holdout = dataset.slice(n - 28, n)
    pred = model.predict_batch(holdout.mob_window, holdout.demo)
    assert infection_loss(pred, holdout.targets) < 0.1 * infection_loss(
        np.full(28, targets.mean()), holdout.targets)


# --- checkpoints ------------------------------------------------------------------------

def test_mobility_checkpoint_roundtrip(tmp_path):
    dataset = _random_mobility_dataset(25, seed=28)
    model, _ = train_mobility(dataset, mobility_train_config(max_epochs=5, patience=5, seed=29),
                              hidden_size=4, demo_features=3)
    path = tmp_path / "mobility.json"
    model.save(path)
    loaded = MobilityModel.load(path)
    args = (dataset.cases_hist, dataset.unemp_hist, dataset.demo, dataset.policy, dataset.blm)
    assert np.array_equal(model.predict_batch(*args), loaded.predict_batch(*args))


def test_unemployment_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(30)
    dataset = UnemploymentDataset(rng.normal(size=(20, 7, 6)), np.tile(DEMO, (20, 1)),
                                  rng.uniform(2, 15, 20), rng.uniform(2, 15, 20))
    model, _ = train_u(dataset, unemployment_train_config(max_epochs=5, patience=5, seed=31),
                       hidden_size=4, demo_features=3, inner_features=2)
    path = tmp_path / "u.json"
    model.save(path)
    loaded = UnemploymentModel.load(path)
    args = (dataset.mob_window, dataset.demo, dataset.u_prev)
    assert np.array_equal(model.predict_batch(*args), loaded.predict_batch(*args))


def test_infection_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(32)
    dataset = InfectionDataset(rng.normal(size=(20, 7, 6)), np.tile(DEMO, (20, 1)),
                               rng.uniform(0.01, 0.1, 20))
    model, _ = train_r(dataset, infection_train_config(max_epochs=5, seed=33),
                       hidden_size=4, demo_features=3)
    path = tmp_path / "r.json"
    model.save(path)
    loaded = InfectionModel.load(path)
    assert np.array_equal(model.predict_batch(dataset.mob_window, dataset.demo),
                          loaded.predict_batch(dataset.mob_window, dataset.demo))


def test_training_deterministic_under_seed():
    losses = []
    for _ in range(2):
        rng = np.random.default_rng(34)
        dataset = UnemploymentDataset(rng.normal(size=(24, 7, 6)), np.tile(DEMO, (24, 1)),
                                      rng.uniform(2, 15, 24), rng.uniform(2, 15, 24))
        _, result = train_u(dataset,
                            unemployment_train_config(max_epochs=40, patience=40,
                                                      noise_sigma=0.1, seed=35),
                            hidden_size=4, demo_features=3, inner_features=2)
        losses.append(result.train_history)
    assert losses[0] == losses[1]
