"""The three forecast models.

* Mobility: six structurally identical networks, one per category, each
  combining an LSTM over the 7-day confirmed-case history, an LSTM over the
  7-day unemployment history, a demographic head, a linear policy head whose
  containment-policy weights are sign-constrained by construction, and (for
  the residential category only) a nonnegative-weight protest-intensity head.
* Unemployment: LSTM over the 7-day 6-category mobility window, a demographic
  head, an inner dense layer, and an output layer that also sees the
  week-lagged unemployment rate. Predictions clip to [0, 100] percent.
* Infection rate: LSTM over the mobility window plus the demographic head,
  with a softplus output transform so the rate is always nonnegative.

All inputs are z-scored with statistics frozen from the training window and
stored with the model; mobility and unemployment targets are likewise
z-scored internally (predictions are de-normalized at the API boundary, and
the infection rate instead carries a positive output scale), so optimizer
step sizes are meaningful regardless of the raw units. Robustness losses
perturb the normalized inputs with Gaussian noise of standard deviation
`noise_sigma`, which by construction equals `noise_sigma` training standard
deviations per feature.
"""
from __future__ import annotations

import numpy as np

from .errors import DomainError, WindowError
from .nn.layers import Fc, Lstm, sigmoid, softplus
from .nn.training import TrainConfig, chronological_split, train
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .panel import N_CONTAINMENT, N_POLICIES, RESIDENTIAL

WINDOW = 7
N_MOBILITY = 6
N_DEMO = 5

STD_FLOOR = 1e-8  # constant features normalize to zero instead of blowing up


class NormStats:
    """Per-feature mean/std pairs, frozen at fit time."""

    def __init__(self, mean, std):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        self.std = np.atleast_1d(np.asarray(std, dtype=float))

    @classmethod
    def fit(cls, values) -> "NormStats":
        arr = np.asarray(values, dtype=float)
        flat = arr.reshape(-1, arr.shape[-1]) if arr.ndim > 1 else arr.reshape(-1, 1)
        mean = flat.mean(axis=0)
        std = flat.std(axis=0)
        std = np.where(std < STD_FLOOR, 1.0, std)
        return cls(mean, std)

    def normalize(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.std


def _require_window(arr, shape, what):
    arr = np.asarray(arr, dtype=float)
    if arr.shape != shape:
        raise WindowError(f"{what} must have shape {shape}, got {arr.shape}")
    return arr


# --- mobility ----------------------------------------------------------------


class MobilityNet:
    """One mobility category.

    The policy head is linear with raw parameters theta; containment entries
    (the first 8) map through -softplus(theta) for the away-from-home
    categories and +softplus(theta) for residential, so the sign constraint
    holds for every parameter value. Its scalar output, and the protest head's
    scalar output, are added directly to the dense output head, which keeps
    the constrained sign effective end to end.
    """

    def __init__(self, category: int, hidden_size: int = 32, demo_features: int = 8,
                 rng=None, zero: bool = False):
        self.category = category
        self.hidden_size = hidden_size
        self.demo_features = demo_features
        self.policy_sign = 1.0 if category == RESIDENTIAL else -1.0
        maker_lstm = Lstm.zeros if zero else (lambda h, d, name: Lstm.init(h, d, rng=rng, name=name))
        maker_fc = Fc.zeros if zero else (lambda o, i, act, name: Fc.init(o, i, act, rng=rng, name=name))
        if zero:
            self.lstm_cases = Lstm.zeros(hidden_size, 1, name=f"m{category}.lstm_cases")
            self.lstm_unemp = Lstm.zeros(hidden_size, 1, name=f"m{category}.lstm_unemp")
            self.fc_demo = Fc.zeros(demo_features, N_DEMO, "tanh", name=f"m{category}.fc_demo")
            self.fc_out = Fc.zeros(1, 2 * hidden_size + demo_features, "identity",
                                   name=f"m{category}.fc_out")
            self.policy_theta = np.zeros(N_POLICIES)
            self.blm_theta = np.zeros(1)
        else:
            self.lstm_cases = maker_lstm(hidden_size, 1, f"m{category}.lstm_cases")
            self.lstm_unemp = maker_lstm(hidden_size, 1, f"m{category}.lstm_unemp")
            self.fc_demo = maker_fc(demo_features, N_DEMO, "tanh", f"m{category}.fc_demo")
            self.fc_out = maker_fc(1, 2 * hidden_size + demo_features, "identity",
                                   f"m{category}.fc_out")
            bound = 1.0 / np.sqrt(N_POLICIES)
            self.policy_theta = rng.uniform(-bound, bound, N_POLICIES)
            self.blm_theta = rng.uniform(-bound, bound, 1)
        self.g_policy_theta = np.zeros_like(self.policy_theta)
        self.g_blm_theta = np.zeros_like(self.blm_theta)

    def layers(self):
        return [self.lstm_cases, self.lstm_unemp, self.fc_demo, self.fc_out]

    def params(self):
        out = {}
        for layer in self.layers():
            for k, v in layer.params().items():
                out[f"{layer.name}.{k}"] = v
        out[f"m{self.category}.policy_theta"] = self.policy_theta
        out[f"m{self.category}.blm_theta"] = self.blm_theta
        return out

    def grads(self):
        out = {}
        for layer in self.layers():
            for k, v in layer.grads().items():
                out[f"{layer.name}.{k}"] = v
        out[f"m{self.category}.policy_theta"] = self.g_policy_theta
        out[f"m{self.category}.blm_theta"] = self.g_blm_theta
        return out

    def zero_grads(self):
        for layer in self.layers():
            layer.zero_grads()
        self.g_policy_theta[...] = 0.0
        self.g_blm_theta[...] = 0.0

    def effective_policy_weights(self) -> np.ndarray:
        w = self.policy_theta.copy()
        w[:N_CONTAINMENT] = self.policy_sign * softplus(self.policy_theta[:N_CONTAINMENT])
        return w

    def effective_blm_weight(self) -> float:
        # protests add time spent at home: nonnegative effect on residential
        return float(softplus(self.blm_theta[0]))

    def forward(self, cases_n, unemp_n, demo_n, policy_n, blm_n):
        """All inputs already normalized; returns (m, cache)."""
        h1, cache1 = self.lstm_cases.forward(cases_n[:, :, None])
        h2, cache2 = self.lstm_unemp.forward(unemp_n[:, :, None])
        hd, cached = self.fc_demo.forward(demo_n)
        feats = np.concatenate([h1, h2, hd], axis=1)
        base, cacheo = self.fc_out.forward(feats)
        w_pol = self.effective_policy_weights()
        out = base[:, 0] + policy_n @ w_pol
        if self.category == RESIDENTIAL:
            out = out + blm_n * self.effective_blm_weight()
        return out, (cache1, cache2, cached, cacheo, policy_n, blm_n)

    def backward(self, cache, dm):
        cache1, cache2, cached, cacheo, policy_n, blm_n = cache
        H = self.hidden_size
        dfeats = self.fc_out.backward(cacheo, dm[:, None])
        self.lstm_cases.backward(cache1, dfeats[:, :H])
        self.lstm_unemp.backward(cache2, dfeats[:, H:2 * H])
        self.fc_demo.backward(cached, dfeats[:, 2 * H:])
        dw = dm @ policy_n  # (14,)
        g = np.empty(N_POLICIES)
        g[:N_CONTAINMENT] = dw[:N_CONTAINMENT] * self.policy_sign * sigmoid(self.policy_theta[:N_CONTAINMENT])
        g[N_CONTAINMENT:] = dw[N_CONTAINMENT:]
        self.g_policy_theta += g
        if self.category == RESIDENTIAL:
            self.g_blm_theta += np.array([float(dm @ blm_n) * sigmoid(self.blm_theta[0])])


class MobilityModel:
    """Bundle of six category networks plus shared normalization statistics."""

    KIND = "mobility"

    def __init__(self, hidden_size: int = 32, demo_features: int = 8, seed: int = 0,
                 zero: bool = False):
        rng = np.random.default_rng(seed)
        self.hidden_size = hidden_size
        self.demo_features = demo_features
        self.nets = [MobilityNet(i, hidden_size, demo_features, rng=rng, zero=zero)
                     for i in range(N_MOBILITY)]
        self.norm_cases = NormStats(0.0, 1.0)
        self.norm_unemp = NormStats(0.0, 1.0)
        self.norm_demo = NormStats(np.zeros(N_DEMO), np.ones(N_DEMO))
        self.norm_policy = NormStats(np.zeros(N_POLICIES), np.ones(N_POLICIES))
        self.norm_blm = NormStats(0.0, 1.0)
        self.norm_target = NormStats(np.zeros(N_MOBILITY), np.ones(N_MOBILITY))

    def fit_norms(self, dataset):
        self.norm_cases = NormStats.fit(dataset.cases_hist.reshape(-1, 1))
        self.norm_unemp = NormStats.fit(dataset.unemp_hist.reshape(-1, 1))
        self.norm_demo = NormStats.fit(dataset.demo)
        self.norm_policy = NormStats.fit(dataset.policy)
        self.norm_blm = NormStats.fit(dataset.blm.reshape(-1, 1))
        self.norm_target = NormStats.fit(dataset.targets)

    def normalize(self, cases, unemp, demo, policy, blm):
        return (
            (cases - self.norm_cases.mean[0]) / self.norm_cases.std[0],
            (unemp - self.norm_unemp.mean[0]) / self.norm_unemp.std[0],
            self.norm_demo.normalize(demo),
            self.norm_policy.normalize(policy),
            (blm - self.norm_blm.mean[0]) / self.norm_blm.std[0],
        )

    def predict_batch(self, cases, unemp, demo, policy, blm) -> np.ndarray:
        cases = np.asarray(cases, dtype=float)
        unemp = np.asarray(unemp, dtype=float)
        if cases.ndim != 2 or cases.shape[1] != WINDOW:
            raise WindowError(f"confirmed-case history must be (B, {WINDOW}), got {cases.shape}")
        if unemp.shape != cases.shape:
            raise WindowError(f"unemployment history must match case history shape")
        cn, un, dn, pn, bn = self.normalize(cases, unemp, np.asarray(demo, dtype=float),
                                            np.asarray(policy, dtype=float),
                                            np.asarray(blm, dtype=float))
        out = np.empty((len(cases), N_MOBILITY))
        for net in self.nets:
            m, _ = net.forward(cn, un, dn, pn, bn)
            out[:, net.category] = (self.norm_target.mean[net.category]
                                    + self.norm_target.std[net.category] * m)
        return out

    def params(self):
        out = {}
        for net in self.nets:
            out.update(net.params())
        return out

    def grads(self):
        out = {}
        for net in self.nets:
            out.update(net.grads())
        return out

    def norm_tensors(self):
        return {
            "cases_mean": self.norm_cases.mean, "cases_std": self.norm_cases.std,
            "unemp_mean": self.norm_unemp.mean, "unemp_std": self.norm_unemp.std,
            "demo_mean": self.norm_demo.mean, "demo_std": self.norm_demo.std,
            "policy_mean": self.norm_policy.mean, "policy_std": self.norm_policy.std,
            "blm_mean": self.norm_blm.mean, "blm_std": self.norm_blm.std,
            "target_mean": self.norm_target.mean, "target_std": self.norm_target.std,
        }

    def set_norm_tensors(self, stats):
        self.norm_cases = NormStats(stats["cases_mean"], stats["cases_std"])
        self.norm_unemp = NormStats(stats["unemp_mean"], stats["unemp_std"])
        self.norm_demo = NormStats(stats["demo_mean"], stats["demo_std"])
        self.norm_policy = NormStats(stats["policy_mean"], stats["policy_std"])
        self.norm_blm = NormStats(stats["blm_mean"], stats["blm_std"])
        self.norm_target = NormStats(stats["target_mean"], stats["target_std"])

    def save(self, path, config=None):
        save_checkpoint(path, self.KIND, self.params(), self.norm_tensors(), config or {},
                        meta={"hidden_size": self.hidden_size, "demo_features": self.demo_features})

    @classmethod
    def load(cls, path) -> "MobilityModel":
        blob = load_checkpoint(path)
        if blob["kind"] != cls.KIND:
            raise DomainError(f"checkpoint kind {blob['kind']!r} is not {cls.KIND!r}")
        model = cls(hidden_size=int(blob["meta"]["hidden_size"]),
                    demo_features=int(blob["meta"]["demo_features"]), zero=True)
        params = model.params()
        for k, v in blob["params"].items():
            params[k][...] = v
        model.set_norm_tensors(blob["norm_stats"])
        return model


def predict_mobility(model: MobilityModel, cases_hist, unemp_hist, demo, policy, blm) -> np.ndarray:
    """Single-day prediction of all six smoothed mobility categories."""
    cases = _require_window(cases_hist, (WINDOW,), "confirmed-case history")
    unemp = _require_window(unemp_hist, (WINDOW,), "unemployment history")
    demo = _require_window(demo, (N_DEMO,), "demographics")
    policy = _require_window(policy, (N_POLICIES,), "policy index")
    return model.predict_batch(cases[None], unemp[None], demo[None], policy[None],
                               np.array([float(blm)]))[0]


def validate_policy_weights(weights, category: int) -> None:
    """Reject raw weight vectors that violate the containment sign invariant:
    nonpositive for the away-from-home categories, nonnegative for
    residential."""
    weights = np.asarray(weights, dtype=float)
    head = weights[:N_CONTAINMENT]
    if category == RESIDENTIAL:
        bad = head < 0
    else:
        bad = head > 0
    if np.any(bad):
        raise DomainError(
            f"category {category}: containment-policy weights {np.flatnonzero(bad).tolist()} "
            "have the wrong sign")


def enforce_sign_constraints(model: MobilityModel) -> MobilityModel:
    """The parameterization is sign-preserving, so this only verifies the
    invariant on the effective weights."""
    for net in model.nets:
        validate_policy_weights(net.effective_policy_weights(), net.category)
    return model


class MobilityDataset:
    def __init__(self, cases_hist, unemp_hist, demo, policy, blm, targets):
        self.cases_hist = np.asarray(cases_hist, dtype=float)
        self.unemp_hist = np.asarray(unemp_hist, dtype=float)
        self.demo = np.asarray(demo, dtype=float)
        self.policy = np.asarray(policy, dtype=float)
        self.blm = np.asarray(blm, dtype=float)
        self.targets = np.asarray(targets, dtype=float)

    def __len__(self):
        return len(self.targets)

    def slice(self, a, b):
        return MobilityDataset(self.cases_hist[a:b], self.unemp_hist[a:b], self.demo[a:b],
                               self.policy[a:b], self.blm[a:b], self.targets[a:b])


class _MobilityTrainable:
    """Adapter training one category against the four-term robustness loss:
    main MSE to the target plus consistency MSEs between noise-perturbed and
    clean predictions (noise on unemployment, on case counts, and on both)."""

    def __init__(self, model: MobilityModel, net: MobilityNet):
        self.model = model
        self.net = net

    def params(self):
        return self.net.params()

    def grads(self):
        return self.net.grads()

    def zero_grads(self):
        self.net.zero_grads()

    def clone_params(self):
        return {k: v.copy() for k, v in self.net.params().items()}

    def set_params(self, source):
        for k, v in self.net.params().items():
            v[...] = source[k]

    def _normalized(self, batch):
        return self.model.normalize(batch.cases_hist, batch.unemp_hist, batch.demo,
                                    batch.policy, batch.blm)

    def _normalized_target(self, batch):
        i = self.net.category
        return ((batch.targets[:, i] - self.model.norm_target.mean[i])
                / self.model.norm_target.std[i])

    def training_loss(self, batch, rng, config: TrainConfig) -> float:
        cn, un, dn, pn, bn = self._normalized(batch)
        target = self._normalized_target(batch)
        n = len(target)
        m, cache = self.net.forward(cn, un, dn, pn, bn)
        w_main = config.weight("main")
        loss = w_main * float(np.mean((m - target) ** 2))
        dm = w_main * 2.0 * (m - target) / n

        if config.noise_sigma > 0:
            sigma = config.noise_sigma
            noise_u = rng.normal(0.0, sigma, un.shape)
            noise_c = rng.normal(0.0, sigma, cn.shape)
            variants = (
                ("noise_u", cn, un + noise_u),
                ("noise_n", cn + noise_c, un),
                ("noise_un", cn + noise_c, un + noise_u),
            )
            for name, c_in, u_in in variants:
                w = config.weight(name)
                m_x, cache_x = self.net.forward(c_in, u_in, dn, pn, bn)
                loss += w * float(np.mean((m_x - m) ** 2))
                d = w * 2.0 * (m_x - m) / n
                self.net.backward(cache_x, d)
                dm -= d
        self.net.backward(cache, dm)
        return loss

    def validation_loss(self, batch) -> float:
        cn, un, dn, pn, bn = self._normalized(batch)
        m, _ = self.net.forward(cn, un, dn, pn, bn)
        return float(np.mean((m - self._normalized_target(batch)) ** 2))


def mobility_train_config(**overrides) -> TrainConfig:
    """Optimizer defaults for the mobility module: lr 8e-4, weight decay 5e-6,
    lr x0.8 every 200 epochs, patience 100."""
    base = dict(learning_rate=8e-4, weight_decay=5e-6, lr_decay_factor=0.8,
                lr_decay_period=200, patience=100, max_epochs=2000, noise_sigma=0.1)
    base.update(overrides)
    return TrainConfig(**base)


def train_mobility(dataset: MobilityDataset, config: TrainConfig | None = None,
                   hidden_size: int = 32, demo_features: int = 8,
                   model: MobilityModel | None = None):
    """Train all six category networks; returns (model, per-category results)."""
    config = config or mobility_train_config()
    if model is None:
        model = MobilityModel(hidden_size, demo_features, seed=config.seed)
        train_part, _ = chronological_split(dataset, config.validation_fraction)
        model.fit_norms(train_part)
    results = []
    for net in model.nets:
        trainable = _MobilityTrainable(model, net)
        results.append(train(trainable, dataset, config))
    enforce_sign_constraints(model)
    return model, results


# --- unemployment --------------------------------------------------------------


class UnemploymentModel:
    KIND = "unemployment"

    def __init__(self, hidden_size: int = 32, demo_features: int = 8,
                 inner_features: int = 16, seed: int = 0, zero: bool = False):
        rng = np.random.default_rng(seed)
        self.hidden_size = hidden_size
        self.demo_features = demo_features
        self.inner_features = inner_features
        if zero:
            self.lstm_mob = Lstm.zeros(hidden_size, N_MOBILITY, name="u.lstm_mob")
            self.fc_demo = Fc.zeros(demo_features, N_DEMO, "tanh", name="u.fc_demo")
            self.fc_inner = Fc.zeros(inner_features, hidden_size + demo_features, "tanh",
                                     name="u.fc_inner")
            self.fc_out = Fc.zeros(1, inner_features + 1, "identity", name="u.fc_out")
        else:
            self.lstm_mob = Lstm.init(hidden_size, N_MOBILITY, rng=rng, name="u.lstm_mob")
            self.fc_demo = Fc.init(demo_features, N_DEMO, "tanh", rng=rng, name="u.fc_demo")
            self.fc_inner = Fc.init(inner_features, hidden_size + demo_features, "tanh",
                                    rng=rng, name="u.fc_inner")
            self.fc_out = Fc.init(1, inner_features + 1, "identity", rng=rng, name="u.fc_out")
        self.norm_mob = NormStats(np.zeros(N_MOBILITY), np.ones(N_MOBILITY))
        self.norm_demo = NormStats(np.zeros(N_DEMO), np.ones(N_DEMO))
        self.norm_u = NormStats(0.0, 1.0)
        self.norm_target = NormStats(0.0, 1.0)

    def layers(self):
        return [self.lstm_mob, self.fc_demo, self.fc_inner, self.fc_out]

    def params(self):
        out = {}
        for layer in self.layers():
            for k, v in layer.params().items():
                out[f"{layer.name}.{k}"] = v
        return out

    def grads(self):
        out = {}
        for layer in self.layers():
            for k, v in layer.grads().items():
                out[f"{layer.name}.{k}"] = v
        return out

    def zero_grads(self):
        for layer in self.layers():
            layer.zero_grads()

    def fit_norms(self, dataset):
        self.norm_mob = NormStats.fit(dataset.mob_window.reshape(-1, N_MOBILITY))
        self.norm_demo = NormStats.fit(dataset.demo)
        self.norm_u = NormStats.fit(dataset.u_prev.reshape(-1, 1))
        self.norm_target = NormStats.fit(dataset.targets.reshape(-1, 1))

    def forward(self, mob_n, demo_n, u_prev_n):
        """Normalized inputs -> (unclipped percent prediction, cache)."""
        h, cache_l = self.lstm_mob.forward(mob_n)
        hd, cache_d = self.fc_demo.forward(demo_n)
        inner, cache_i = self.fc_inner.forward(np.concatenate([h, hd], axis=1))
        out, cache_o = self.fc_out.forward(np.concatenate([inner, u_prev_n[:, None]], axis=1))
        return out[:, 0], (cache_l, cache_d, cache_i, cache_o)

    def backward(self, cache, du):
        cache_l, cache_d, cache_i, cache_o = cache
        dcat = self.fc_out.backward(cache_o, du[:, None])
        dinner = self.fc_inner.backward(cache_i, dcat[:, :self.inner_features])
        H = self.hidden_size
        self.lstm_mob.backward(cache_l, dinner[:, :H])
        self.fc_demo.backward(cache_d, dinner[:, H:])

    def _normalize(self, mob, demo, u_prev):
        return (self.norm_mob.normalize(mob), self.norm_demo.normalize(demo),
                (np.asarray(u_prev, dtype=float) - self.norm_u.mean[0]) / self.norm_u.std[0])

    def predict_batch(self, mob_window, demo, u_prev) -> np.ndarray:
        mob = np.asarray(mob_window, dtype=float)
        if mob.ndim != 3 or mob.shape[1:] != (WINDOW, N_MOBILITY):
            raise WindowError(f"mobility window must be (B, {WINDOW}, {N_MOBILITY}), got {mob.shape}")
        mn, dn, un = self._normalize(mob, demo, u_prev)
        u, _ = self.forward(mn, dn, un)
        u = self.norm_target.mean[0] + self.norm_target.std[0] * u
        return np.clip(u, 0.0, 100.0)

    def norm_tensors(self):
        return {"mob_mean": self.norm_mob.mean, "mob_std": self.norm_mob.std,
                "demo_mean": self.norm_demo.mean, "demo_std": self.norm_demo.std,
                "u_mean": self.norm_u.mean, "u_std": self.norm_u.std,
                "target_mean": self.norm_target.mean, "target_std": self.norm_target.std}

    def set_norm_tensors(self, stats):
        self.norm_mob = NormStats(stats["mob_mean"], stats["mob_std"])
        self.norm_demo = NormStats(stats["demo_mean"], stats["demo_std"])
        self.norm_u = NormStats(stats["u_mean"], stats["u_std"])
        self.norm_target = NormStats(stats["target_mean"], stats["target_std"])

    def save(self, path, config=None):
        save_checkpoint(path, self.KIND, self.params(), self.norm_tensors(), config or {},
                        meta={"hidden_size": self.hidden_size,
                              "demo_features": self.demo_features,
                              "inner_features": self.inner_features})

    @classmethod
    def load(cls, path) -> "UnemploymentModel":
        blob = load_checkpoint(path)
        if blob["kind"] != cls.KIND:
            raise DomainError(f"checkpoint kind {blob['kind']!r} is not {cls.KIND!r}")
        model = cls(hidden_size=int(blob["meta"]["hidden_size"]),
                    demo_features=int(blob["meta"]["demo_features"]),
                    inner_features=int(blob["meta"]["inner_features"]), zero=True)
        params = model.params()
        for k, v in blob["params"].items():
            params[k][...] = v
        model.set_norm_tensors(blob["norm_stats"])
        return model


def predict_u(model: UnemploymentModel, mob_window, demo, u_prev_week: float) -> float:
    """Daily unemployment rate (percent, clipped to [0, 100]) from the 7-day
    mobility window, demographics and the week-lagged rate."""
    mob = _require_window(mob_window, (WINDOW, N_MOBILITY), "mobility window")
    demo = _require_window(demo, (N_DEMO,), "demographics")
    return float(model.predict_batch(mob[None], demo[None], np.array([float(u_prev_week)]))[0])


class UnemploymentDataset:
    def __init__(self, mob_window, demo, u_prev, targets):
        self.mob_window = np.asarray(mob_window, dtype=float)
        self.demo = np.asarray(demo, dtype=float)
        self.u_prev = np.asarray(u_prev, dtype=float)
        self.targets = np.asarray(targets, dtype=float)

    def __len__(self):
        return len(self.targets)

    def slice(self, a, b):
        return UnemploymentDataset(self.mob_window[a:b], self.demo[a:b],
                                   self.u_prev[a:b], self.targets[a:b])


class _UnemploymentTrainable:
    """Loss = w_main * MSE(u, target) + w_noise * MSE(u_noise, u), where
    u_noise perturbs the mobility inputs only. The noisy prediction is pulled
    toward the clean one, never toward the target."""

    def __init__(self, model: UnemploymentModel):
        self.model = model

    def params(self):
        return self.model.params()

    def grads(self):
        return self.model.grads()

    def zero_grads(self):
        self.model.zero_grads()

    def clone_params(self):
        return {k: v.copy() for k, v in self.model.params().items()}

    def set_params(self, source):
        for k, v in self.model.params().items():
            v[...] = source[k]

    def _normalized_target(self, batch):
        return ((batch.targets - self.model.norm_target.mean[0])
                / self.model.norm_target.std[0])

    def training_loss(self, batch, rng, config: TrainConfig) -> float:
        mn, dn, un = self.model._normalize(batch.mob_window, batch.demo, batch.u_prev)
        target = self._normalized_target(batch)
        n = len(target)
        u, cache = self.model.forward(mn, dn, un)
        w_main = config.weight("main")
        loss = w_main * float(np.mean((u - target) ** 2))
        du = w_main * 2.0 * (u - target) / n
        if config.noise_sigma > 0:
            noisy = mn + rng.normal(0.0, config.noise_sigma, mn.shape)
            u_x, cache_x = self.model.forward(noisy, dn, un)
            w = config.weight("noise")
            loss += w * float(np.mean((u_x - u) ** 2))
            d = w * 2.0 * (u_x - u) / n
            self.model.backward(cache_x, d)
            du -= d
        self.model.backward(cache, du)
        return loss

    def validation_loss(self, batch) -> float:
        mn, dn, un = self.model._normalize(batch.mob_window, batch.demo, batch.u_prev)
        u, _ = self.model.forward(mn, dn, un)
        return float(np.mean((u - self._normalized_target(batch)) ** 2))


def unemployment_train_config(**overrides) -> TrainConfig:
    """Optimizer defaults for the unemployment module: lr 1e-3, weight decay
    5e-6, lr x0.8 every 200 epochs, patience 100."""
    base = dict(learning_rate=1e-3, weight_decay=5e-6, lr_decay_factor=0.8,
                lr_decay_period=200, patience=100, max_epochs=2000, noise_sigma=0.1)
    base.update(overrides)
    return TrainConfig(**base)


def train_u(dataset: UnemploymentDataset, config: TrainConfig | None = None,
            hidden_size: int = 32, demo_features: int = 8, inner_features: int = 16,
            model: UnemploymentModel | None = None):
    config = config or unemployment_train_config()
    if model is None:
        model = UnemploymentModel(hidden_size, demo_features, inner_features, seed=config.seed)
        train_part, _ = chronological_split(dataset, config.validation_fraction)
        model.fit_norms(train_part)
    result = train(_UnemploymentTrainable(model), dataset, config)
    return model, result


# --- infection rate ------------------------------------------------------------

RATE_EPS = 1e-8  # targets at or below this are excluded from the loss


class InfectionModel:
    KIND = "infection"

    def __init__(self, hidden_size: int = 32, demo_features: int = 8, seed: int = 0,
                 zero: bool = False):
        rng = np.random.default_rng(seed)
        self.hidden_size = hidden_size
        self.demo_features = demo_features
        if zero:
            self.lstm_mob = Lstm.zeros(hidden_size, N_MOBILITY, name="r.lstm_mob")
            self.fc_demo = Fc.zeros(demo_features, N_DEMO, "tanh", name="r.fc_demo")
            self.fc_out = Fc.zeros(1, hidden_size + demo_features, "identity", name="r.fc_out")
        else:
            self.lstm_mob = Lstm.init(hidden_size, N_MOBILITY, rng=rng, name="r.lstm_mob")
            self.fc_demo = Fc.init(demo_features, N_DEMO, "tanh", rng=rng, name="r.fc_demo")
            self.fc_out = Fc.init(1, hidden_size + demo_features, "identity", rng=rng,
                                  name="r.fc_out")
        self.norm_mob = NormStats(np.zeros(N_MOBILITY), np.ones(N_MOBILITY))
        self.norm_demo = NormStats(np.zeros(N_DEMO), np.ones(N_DEMO))
        self.rate_scale = 1.0  # positive output scale; keeps softplus(z) near 1

    def layers(self):
        return [self.lstm_mob, self.fc_demo, self.fc_out]

    def params(self):
        out = {}
        for layer in self.layers():
            for k, v in layer.params().items():
                out[f"{layer.name}.{k}"] = v
        return out

    def grads(self):
        out = {}
        for layer in self.layers():
            for k, v in layer.grads().items():
                out[f"{layer.name}.{k}"] = v
        return out

    def zero_grads(self):
        for layer in self.layers():
            layer.zero_grads()

    def fit_norms(self, dataset):
        self.norm_mob = NormStats.fit(dataset.mob_window.reshape(-1, N_MOBILITY))
        self.norm_demo = NormStats.fit(dataset.demo)
        mean_target = float(np.mean(dataset.targets))
        if mean_target > 0:
            self.rate_scale = mean_target / softplus(0.0)

    def forward(self, mob_n, demo_n):
        """Normalized inputs -> (rate, pre-activation, cache); the scaled
        softplus output transform keeps the rate nonnegative."""
        h, cache_l = self.lstm_mob.forward(mob_n)
        hd, cache_d = self.fc_demo.forward(demo_n)
        z, cache_o = self.fc_out.forward(np.concatenate([h, hd], axis=1))
        z = z[:, 0]
        return softplus(z) * self.rate_scale, z, (cache_l, cache_d, cache_o)

    def backward(self, cache, z, dr):
        cache_l, cache_d, cache_o = cache
        dz = dr * sigmoid(z) * self.rate_scale
        dcat = self.fc_out.backward(cache_o, dz[:, None])
        H = self.hidden_size
        self.lstm_mob.backward(cache_l, dcat[:, :H])
        self.fc_demo.backward(cache_d, dcat[:, H:])

    def _normalize(self, mob, demo):
        return self.norm_mob.normalize(mob), self.norm_demo.normalize(demo)

    def predict_batch(self, mob_window, demo) -> np.ndarray:
        mob = np.asarray(mob_window, dtype=float)
        if mob.ndim != 3 or mob.shape[1:] != (WINDOW, N_MOBILITY):
            raise WindowError(f"mobility window must be (B, {WINDOW}, {N_MOBILITY}), got {mob.shape}")
        mn, dn = self._normalize(mob, demo)
        r, _, _ = self.forward(mn, dn)
        return r

    def norm_tensors(self):
        return {"mob_mean": self.norm_mob.mean, "mob_std": self.norm_mob.std,
                "demo_mean": self.norm_demo.mean, "demo_std": self.norm_demo.std,
                "rate_scale": np.array([self.rate_scale])}

    def set_norm_tensors(self, stats):
        self.norm_mob = NormStats(stats["mob_mean"], stats["mob_std"])
        self.norm_demo = NormStats(stats["demo_mean"], stats["demo_std"])
        self.rate_scale = float(stats["rate_scale"][0])

    def save(self, path, config=None):
        save_checkpoint(path, self.KIND, self.params(), self.norm_tensors(), config or {},
                        meta={"hidden_size": self.hidden_size,
                              "demo_features": self.demo_features})

    @classmethod
    def load(cls, path) -> "InfectionModel":
        blob = load_checkpoint(path)
        if blob["kind"] != cls.KIND:
            raise DomainError(f"checkpoint kind {blob['kind']!r} is not {cls.KIND!r}")
        model = cls(hidden_size=int(blob["meta"]["hidden_size"]),
                    demo_features=int(blob["meta"]["demo_features"]), zero=True)
        params = model.params()
        for k, v in blob["params"].items():
            params[k][...] = v
        model.set_norm_tensors(blob["norm_stats"])
        return model


def predict_r(model: InfectionModel, mob_window, demo) -> float:
    """Nonnegative daily infection rate from the 7-day mobility window."""
    mob = _require_window(mob_window, (WINDOW, N_MOBILITY), "mobility window")
    demo = _require_window(demo, (N_DEMO,), "demographics")
    return float(model.predict_batch(mob[None], demo[None])[0])


class InfectionDataset:
    def __init__(self, mob_window, demo, targets):
        self.mob_window = np.asarray(mob_window, dtype=float)
        self.demo = np.asarray(demo, dtype=float)
        self.targets = np.asarray(targets, dtype=float)

    def __len__(self):
        return len(self.targets)

    def slice(self, a, b):
        return InfectionDataset(self.mob_window[a:b], self.demo[a:b], self.targets[a:b])

    def drop_tiny_targets(self, eps: float = RATE_EPS) -> "InfectionDataset":
        keep = self.targets > eps
        return InfectionDataset(self.mob_window[keep], self.demo[keep], self.targets[keep])


def infection_loss(pred, target) -> float:
    """Mean of squared error divided by the true rate, which upweights
    low-rate days by 1/target for a fixed absolute error."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    return float(np.mean((pred - target) ** 2 / target))


class _InfectionTrainable:
    def __init__(self, model: InfectionModel):
        self.model = model

    def params(self):
        return self.model.params()

    def grads(self):
        return self.model.grads()

    def zero_grads(self):
        self.model.zero_grads()

    def clone_params(self):
        return {k: v.copy() for k, v in self.model.params().items()}

    def set_params(self, source):
        for k, v in self.model.params().items():
            v[...] = source[k]

    def training_loss(self, batch, rng, config: TrainConfig) -> float:
        mn, dn = self.model._normalize(batch.mob_window, batch.demo)
        target = batch.targets
        n = len(target)
        r, z, cache = self.model.forward(mn, dn)
        loss = config.weight("main") * infection_loss(r, target)
        dr = config.weight("main") * 2.0 * (r - target) / (target * n)
        self.model.backward(cache, z, dr)
        return loss

    def validation_loss(self, batch) -> float:
        mn, dn = self.model._normalize(batch.mob_window, batch.demo)
        r, _, _ = self.model.forward(mn, dn)
        return infection_loss(r, batch.targets)


def infection_train_config(**overrides) -> TrainConfig:
    """Optimizer defaults for the infection module: lr 6e-4, weight decay
    5e-5, a fixed 100 epochs with no early stopping."""
    base = dict(learning_rate=6e-4, weight_decay=5e-5, patience=100,
                max_epochs=100, early_stop=False, noise_sigma=0.0)
    base.update(overrides)
    return TrainConfig(**base)


def train_r(dataset: InfectionDataset, config: TrainConfig | None = None,
            hidden_size: int = 32, demo_features: int = 8,
            model: InfectionModel | None = None):
    config = config or infection_train_config()
    dataset = dataset.drop_tiny_targets()
    if len(dataset) == 0:
        raise DomainError("all infection-rate targets are at or below the exclusion threshold")
    if model is None:
        model = InfectionModel(hidden_size, demo_features, seed=config.seed)
        train_part, _ = chronological_split(dataset, config.validation_fraction)
        model.fit_norms(train_part)
    result = train(_InfectionTrainable(model), dataset, config)
    return model, result
