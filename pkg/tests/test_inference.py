import numpy as np
import pytest
from scipy import stats

from support import sim41_obs
from tukeymiss.core import (
    LinearLogit,
    QuadraticLogit,
    canonicalize,
    complete_moments,
    missing_model,
    q_closed_form,
)
from tukeymiss.dataset import Dataset
from tukeymiss.expfam import MixtureModel, mixture_log_density, sample_mixture
from tukeymiss.inference import (
    AsymptotePrior,
    DataPreconditionError,
    KnownMechanism,
    LinearPrior,
    McarPrior,
    McmcConfig,
    PointPrior,
    PriorConfig,
    PriorIncompatibleError,
    QuadraticPrior,
    fit,
    fit_observed_mixture,
    impute,
    posterior_estimands,
    posterior_q,
    sample_mechanism,
    slice_sample,
    split_rhat,
    summarize,
)
from tukeymiss.simulate import reference_sim41, simulate

ATOMS = tuple(float(g) for g in range(-4, 5))
MIXTURE_COLUMNS = ("lambda", "w", "mu", "sigma", "p")


@pytest.fixture(scope="module")
def sim41_fit():
    cfg = reference_sim41(n=10_000, seed=31)
    data, truth = simulate(cfg)
    prior = PriorConfig(K=3, atom_locations=ATOMS)
    return data, truth, fit(data, prior, McmcConfig(2, 1200, 600, 1, 31))


class TestSliceSampler:
    def test_bounded_target(self):
        # Beta(2, 5) through its log density on (0, 1)
        logp = lambda x: stats.beta.logpdf(x, 2, 5) if 0 < x < 1 else -np.inf
        rng = np.random.default_rng(0)
        x, out = 0.3, []
        for _ in range(8000):
            x = slice_sample(x, logp, rng, 0.1)
            out.append(x)
        assert stats.kstest(out[::4], stats.beta(2, 5).cdf).pvalue > 0.01

    def test_wide_target_with_narrow_width(self):
        logp = lambda x: -0.5 * (x / 20.0) ** 2
        rng = np.random.default_rng(1)
        x, out = 0.0, []
        for _ in range(6000):
            x = slice_sample(x, logp, rng, 0.5)
            out.append(x)
        assert np.std(out) == pytest.approx(20.0, rel=0.15)


class TestObservedMixture:
    def test_normal_mean(self):
        y = np.random.default_rng(5).standard_normal(10_000)
        draws = fit_observed_mixture(Dataset.from_observed(y), PriorConfig(K=1), McmcConfig(1, 400, 100))
        assert abs(draws.columns["mu[1]"].mean()) < 0.04

    def test_atom_values_are_allocated_to_atoms(self):
        # with exact atom allocation the lambda posterior is Beta(1 + 200, 1 + 100)
        rng = np.random.default_rng(6)
        y = np.concatenate([rng.normal(0.3, 1.0, 200), np.full(60, -4.0), np.full(40, 1.0)])
        prior = PriorConfig(K=2, atom_locations=(-4.0, 1.0))
        draws = fit_observed_mixture(Dataset.from_observed(y), prior, McmcConfig(1, 3000, 0))
        assert stats.kstest(draws.columns["lambda"], stats.beta(201, 101).cdf).pvalue > 0.001
        assert stats.kstest(draws.columns["p[1]"], stats.beta(61, 41).cdf).pvalue > 0.001

    def test_sim41_density(self, sim41_fit):
        _, _, draws = sim41_fit
        obs = sim41_obs()
        grid = np.array([-2.0, 0.0, 3.0]) + 1e-7
        dens = np.exp([mixture_log_density(m, grid) for m in draws.obs_models()])
        truth = np.exp(mixture_log_density(obs, grid))
        assert np.all(np.abs(dens.mean(axis=0) - truth) < 3 * dens.std(axis=0))

    def test_too_few_values(self):
        with pytest.raises(DataPreconditionError):
            fit_observed_mixture(Dataset.from_observed([1.0, 2.0]), PriorConfig(K=3), McmcConfig(1, 10, 0))
        with pytest.raises(DataPreconditionError):
            fit_observed_mixture(Dataset.from_observed([], 5), PriorConfig(K=1), McmcConfig(1, 10, 0))

    def test_deterministic(self):
        y = np.random.default_rng(8).standard_normal(300)
        a = fit_observed_mixture(Dataset.from_observed(y), PriorConfig(K=2), McmcConfig(2, 60, 10, 1, 4))
        b = fit_observed_mixture(Dataset.from_observed(y), PriorConfig(K=2), McmcConfig(2, 60, 10, 1, 4))
        for k in a.columns:
            np.testing.assert_array_equal(a.columns[k], b.columns[k])

    def test_thinning(self):
        y = np.random.default_rng(8).standard_normal(100)
        mcmc = McmcConfig(3, 50, 10, 4, 1)
        d = fit_observed_mixture(Dataset.from_observed(y), PriorConfig(K=1), mcmc)
        assert len(d) == 3 * mcmc.retained == 3 * 10
        assert np.all(np.bincount(d.chain) == 10)


class TestPosteriorQ:
    def test_updates(self):
        assert posterior_q(3, 1) == (4, 2)
        a, b = posterior_q(5000, 5000)
        assert (a, b) == (5001, 5001) and a / (a + b) == 0.5

    def test_unknown_count_passthrough(self):
        assert posterior_q(100, None) == (1.0, 1.0)
        assert posterior_q(100, None, (2.0, 3.0)) == (2.0, 3.0)

    def test_no_records(self):
        with pytest.raises(DataPreconditionError):
            posterior_q(0, 0)


class TestSampleMechanism:
    def test_quadratic_bounds(self):
        rng = np.random.default_rng(2)
        prior = PriorConfig()
        for _ in range(500):
            mech, raw = sample_mechanism(prior, 0.5, sim41_obs(), rng)
            assert 0 < raw["b2"] < 0.08
            assert q_closed_form(sim41_obs(), mech) == pytest.approx(0.5, abs=1e-12)

    def test_asymptote_kappa_exceeds_q(self):
        rng = np.random.default_rng(3)
        prior = PriorConfig(mechanism=AsymptotePrior())
        for q in rng.uniform(0.05, 0.95, 300):
            mech, raw = sample_mechanism(prior, q, sim41_obs(), rng)
            assert q < mech.kappa < 1 and raw["kappa"] == mech.kappa

    def test_shipped_bounds_never_reject(self):
        # b2 < 0.08 < 1/8 = 1/(2 sigma^2) at the largest allowed sigma = 2
        obs = MixtureModel.from_moments(1.0, [1.0], [0.0], [2.0 - 1e-9])
        rng = np.random.default_rng(4)
        for _ in range(2000):
            spec, _ = QuadraticLogit(None, -2.0, 0.08 * rng.beta(3, 1)), None
            assert np.all(obs.eta2 + canonicalize(spec).alpha2 < 0)

    def test_incompatible_prior(self):
        # sigma = 10 needs b2 < 0.005; nearly all Beta(3,1) * 0.08 draws exceed it
        obs = MixtureModel.from_moments(1.0, [1.0], [0.0], [10.0])
        prior = PriorConfig(mechanism=QuadraticPrior(b2_beta=(30.0, 1.0)))
        with pytest.raises(PriorIncompatibleError, match="prior incompatible with fitted model"):
            sample_mechanism(prior, 0.5, obs, np.random.default_rng(0), max_attempts=2000)

    def test_point_prior(self):
        prior = PriorConfig(mechanism=PointPrior(QuadraticLogit(None, -2.0, 0.06)))
        mech, raw = sample_mechanism(prior, 0.5, sim41_obs(), np.random.default_rng(0))
        assert raw["b0"] == pytest.approx(-0.9651298706411569, abs=1e-12)

    def test_known_mechanism_refused(self):
        prior = PriorConfig(mechanism=KnownMechanism(LinearLogit(0.5, 1.0)))
        with pytest.raises(TypeError):
            sample_mechanism(prior, 0.5, sim41_obs(), np.random.default_rng(0))


class TestFit:
    def test_mixture_block_independent_of_mechanism_prior(self):
        data, _ = simulate(reference_sim41(n=800, seed=2))
        mcmc = McmcConfig(2, 80, 20, 1, 6)
        a = fit(data, PriorConfig(atom_locations=ATOMS), mcmc)
        b = fit(data, PriorConfig(atom_locations=ATOMS, mechanism=AsymptotePrior()), mcmc)
        c = fit(data, PriorConfig(atom_locations=ATOMS), mcmc, mechanism_seed=99)
        for name in a.names:
            if name.split("[")[0] in MIXTURE_COLUMNS or name == "q":
                np.testing.assert_array_equal(a.columns[name], b.columns[name])
                np.testing.assert_array_equal(a.columns[name], c.columns[name])
        assert not np.array_equal(a.columns["alpha1"], c.columns["alpha1"])

    def test_mcar_prior_leaves_observed_mean(self):
        data, _ = simulate(reference_sim41(n=600, seed=4))
        draws = fit(data, PriorConfig(atom_locations=ATOMS, mechanism=McarPrior()),
                    McmcConfig(1, 60, 10, 1, 2))
        est = posterior_estimands(draws)
        obs_means = np.array([m.moments()[0] for m in draws.obs_models()])
        np.testing.assert_array_equal(est.complete_mean, obs_means)

    def test_unknown_count_keeps_q_prior(self):
        y = np.random.default_rng(1).standard_normal(400)
        draws = fit(Dataset.from_observed(y, None), PriorConfig(K=1, mechanism=LinearPrior()),
                    McmcConfig(2, 1500, 0, 1, 3))
        assert stats.kstest(draws.columns["q"], "uniform").pvalue > 0.001

    def test_known_mechanism_sets_q(self):
        y = np.random.default_rng(1).standard_normal(200)
        spec = LinearLogit(0.5, 1.0)
        draws = fit(Dataset.from_observed(y, 100), PriorConfig(K=1, mechanism=KnownMechanism(spec)),
                    McmcConfig(1, 40, 10, 1, 1))
        for i in range(len(draws)):
            assert draws.columns["q"][i] == q_closed_form(draws.obs_model(i), canonicalize(spec))
        assert np.all(draws.columns["b0"] == 0.5)

    def test_pinned(self):
        cfg = reference_sim41(n=1, seed=0)
        truth = cfg.process.model
        draws = fit(Dataset([], []), PriorConfig(atom_locations=ATOMS), McmcConfig(2, 50, 0, 1, 5),
                    pinned=truth.obs, pinned_q=truth.q)
        assert np.all(draws.columns["q"] == 0.5)
        assert draws.obs_model(7).equals(truth.obs)
        est = posterior_estimands(draws)
        assert np.ptp(est.complete_mean) > 0

    def test_coverage_single_run(self, sim41_fit):
        _, truth, draws = sim41_fit
        est = posterior_estimands(draws)
        for x, t in [(est.complete_mean, truth.complete_mean), (est.complete_sd, truth.complete_sd)]:
            lo, hi = np.quantile(x, [0.025, 0.975])
            assert lo <= t <= hi


class TestEstimands:
    def test_atom_error_against_truth(self):
        truth = reference_sim41(n=1).process.model
        draws = fit(Dataset([], []), PriorConfig(atom_locations=ATOMS), McmcConfig(1, 20, 0, 1, 5),
                    pinned=truth.obs, pinned_q=truth.q,)
        from tukeymiss.core import complete_model

        est = posterior_estimands(draws, true_complete=complete_model(truth))
        assert est.atom_max_error.shape == (20,)
        assert np.all(est.atom_max_error >= 0)

    def test_moments_match_core(self, sim41_fit):
        _, _, draws = sim41_fit
        est = posterior_estimands(draws.select(np.arange(len(draws)) < 5))
        for i in range(5):
            assert (est.complete_mean[i], est.complete_sd[i]) == complete_moments(draws.tukey_model(i))


class TestImpute:
    def test_m_zero(self, sim41_fit):
        data, _, draws = sim41_fit
        assert impute(data, draws, 0, 1) == []

    def test_complete_datasets(self, sim41_fit):
        data, _, draws = sim41_fit
        out = impute(data, draws, 3, 7)
        assert len(out) == 3
        for d in out:
            assert d.n_missing == 0
            np.testing.assert_array_equal(d.values[data.observed], data.y_obs)

    def test_deterministic(self, sim41_fit):
        data, _, draws = sim41_fit
        a, b = impute(data, draws, 2, 7), impute(data, draws, 2, 7)
        assert all(x.equals(y) for x, y in zip(a, b))

    def test_pooled_imputations_follow_missing_model(self, sim41_fit):
        data, _, draws = sim41_fit
        m = 20
        imps = impute(data, draws, m, 11)
        pooled = np.concatenate([d.values[~data.observed] for d in imps])
        picks = np.sort(np.random.default_rng(11).choice(len(draws), size=m, replace=False))
        rng = np.random.default_rng(12)
        ref = np.concatenate([sample_mixture(missing_model(draws.obs_model(i), draws.mechanism(i)),
                                             data.n_missing, rng) for i in picks])
        assert stats.ks_2samp(pooled, ref).pvalue > 0.01

    def test_mcar_imputations_match_observed(self):
        rng = np.random.default_rng(3)
        y = rng.normal(1.0, 2.0, 4000)
        data = Dataset.from_observed(y, 4000)
        draws = fit(data, PriorConfig(K=1, mechanism=McarPrior()), McmcConfig(1, 200, 100, 1, 3))
        imp = impute(data, draws, 1, 5)[0]
        assert stats.ks_2samp(imp.values[~data.observed], y).pvalue > 0.01

    def test_needs_missing_records(self, sim41_fit):
        _, _, draws = sim41_fit
        with pytest.raises(DataPreconditionError):
            impute(Dataset.from_observed([1.0, 2.0], 0), draws, 1, 0)

    def test_m_too_large(self, sim41_fit):
        data, _, draws = sim41_fit
        with pytest.raises(ValueError):
            impute(data, draws, len(draws) + 1, 0)


class TestSummaries:
    def test_constant_column(self):
        s = summarize({"x": np.full(100, 2.5)}, np.repeat([0, 1], 50))
        assert s["x"]["ci95"] == [2.5, 2.5] and s["x"]["rhat"] == 1.0

    def test_identical_chains(self):
        x = np.random.default_rng(0).standard_normal(500)
        # each chain is a sequence and its reverse, so all half-chain means agree
        chain_values = np.concatenate([x, x[::-1]])
        values = np.concatenate([chain_values, chain_values])
        chain = np.repeat([0, 1], chain_values.size)
        assert abs(split_rhat(values, chain) - 1.0) < 1e-6

    def test_detects_disagreement(self):
        rng = np.random.default_rng(0)
        values = np.concatenate([rng.normal(0, 1, 500), rng.normal(5, 1, 500)])
        assert split_rhat(values, np.repeat([0, 1], 500)) > 1.5

    def test_quantiles(self):
        x = np.arange(1001, dtype=float)
        s = summarize({"x": x})
        assert s["x"]["median"] == 500.0 and s["x"]["ci95"] == [25.0, 975.0]
        assert "rhat" not in s["x"]


def test_coverage_at_n_1000():
    from tukeymiss.studies import derive_seed, sim41_cell

    hits = 0
    for s in range(50):
        est, truth = sim41_cell(1000, derive_seed(1000, s, 0),
                                McmcConfig(2, 1000, 500, 1, derive_seed(1000, s, 1)))
        lo, hi = np.quantile(est.complete_mean, [0.025, 0.975])
        hits += lo <= truth.complete_mean <= hi
    assert hits >= 42
