#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "hmm_oracle.hpp"
#include "pcgcls/error.hpp"
#include "pcgcls/hmm.hpp"
#include "pcgcls/random.hpp"

using namespace pcg;
using namespace pcg::hmm;

namespace {

// Left-to-right chain with one Gaussian per state.
HmmModel chain(const std::vector<double>& stay, const std::vector<double>& means, double var) {
    HmmModel m;
    m.n_states = static_cast<int>(stay.size());
    m.dim = 1;
    const auto N = stay.size();
    m.transition.assign(N * N, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        m.transition[i * N + i] = stay[i];
        if (i + 1 < N) m.transition[i * N + i + 1] = 1.0 - stay[i];
    }
    m.initial.assign(N, 0.0);
    m.initial[0] = 1.0;
    for (double mu : means) m.emissions.push_back(Gmm{1, {1.0}, {mu}, {var}});
    return m;
}

FeatureMap column(const std::vector<double>& xs) {
    FeatureMap f;
    f.frames = xs.size();
    f.coefficients = 1;
    f.values = xs;
    return f;
}

}  // namespace

TEST_CASE("gmm: weighted component densities match the diagonal Gaussian formula") {
    Rng rng(1);
    const auto m = hmm_oracle::random_model(rng, 1, 3, 4);
    const Gmm& g = m.emissions[0];
    const std::vector<double> x = {0.3, -1.2, 2.0};
    std::vector<double> out(4);
    g.component_log_densities(x, out);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(out[k] == doctest::Approx(std::log(g.weights[k]) + hmm_oracle::log_gauss_diag(x.data(), &g.means[k * 3], &g.variances[k * 3], 3)).epsilon(1e-13));
    }
    CHECK(g.log_density(x) == doctest::Approx(hmm_oracle::emission(g, x.data())).epsilon(1e-13));
}

TEST_CASE("forward: a single frame is the initial-weighted emission") {
    Rng rng(2);
    const auto m = hmm_oracle::random_model(rng, 3, 2, 2);
    const auto seq = hmm_oracle::random_sequence(rng, 1, 2);
    double p = 0.0;
    for (int s = 0; s < 3; ++s) p += m.initial[s] * std::exp(hmm_oracle::emission(m.emissions[s], seq.values.data()));
    CHECK(forward_loglik(m, seq) == doctest::Approx(std::log(p)).epsilon(1e-13));
}

TEST_CASE("forward: two states, three frames, all eight paths") {
    const auto m = chain({0.6, 1.0}, {0.0, 2.0}, 1.0);
    const auto seq = column({0.1, 1.4, 2.2});
    const auto brute = hmm_oracle::enumerate(m, seq);
    CHECK(brute.paths == 8);
    CHECK(std::abs(forward_loglik(m, seq) - brute.loglik) < 1e-10);
}

TEST_CASE("forward and viterbi: equal to exhaustive enumeration on random toy models") {
    Rng rng(3);
    for (int trial = 0; trial < 60; ++trial) {
        const int N = 1 + static_cast<int>(uniform_index(rng, 3));
        const std::size_t T = 1 + uniform_index(rng, 8);
        const std::size_t dim = 1 + uniform_index(rng, 2);
        const auto m = hmm_oracle::random_model(rng, N, dim, 1 + uniform_index(rng, 3));
        const auto seq = hmm_oracle::random_sequence(rng, T, dim);
        const auto brute = hmm_oracle::enumerate(m, seq);
        const double fwd = forward_loglik(m, seq);
        CHECK(std::abs(fwd - brute.loglik) < 1e-10);
        CHECK(std::abs(forward_loglik_logspace(m, seq) - brute.loglik) < 1e-10);
        const auto vit = viterbi(m, seq);
        CHECK(std::abs(vit.score - brute.best_score) < 1e-10);
        CHECK(vit.path == brute.best_path);
        CHECK(vit.score <= fwd + 1e-12);
        CHECK(fwd <= vit.score + std::log(static_cast<double>(brute.paths)) + 1e-12);
    }
}

TEST_CASE("forward: scaled and log-space recursions agree on long sequences") {
    Rng rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        const auto m = hmm_oracle::random_model(rng, 4, 12, 3);
        const auto seq = hmm_oracle::random_sequence(rng, 96, 12);
        const double a = forward_loglik(m, seq), b = forward_loglik_logspace(m, seq);
        CHECK(std::abs(a - b) < 1e-8 * std::max(1.0, std::abs(b)));
    }
}

TEST_CASE("forward: frames far from every mean still give a finite likelihood") {
    const auto m = chain({0.5, 1.0}, {0.0, 1.0}, 1e-4);
    const auto seq = column({500.0, -800.0, 1000.0});
    const double ll = forward_loglik(m, seq);
    CHECK(std::isfinite(ll));
    CHECK(ll == doctest::Approx(forward_loglik_logspace(m, seq)).epsilon(1e-10));
}

TEST_CASE("viterbi: a chain with no self-loops walks every state once") {
    const auto m = chain({0.0, 0.0, 0.0, 1.0}, {0.0, 1.0, 2.0, 3.0}, 1.0);
    const auto v = viterbi(m, column({5.0, -3.0, 7.0, 0.0}));
    CHECK(v.path == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("posteriors: every frame sums to one") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = hmm_oracle::random_model(rng, 4, 3, 2);
        const auto seq = hmm_oracle::random_sequence(rng, 40, 3);
        const auto post = state_posteriors(m, seq);
        CHECK(post.loglik == doctest::Approx(forward_loglik(m, seq)).epsilon(1e-10));
        for (std::size_t t = 0; t < 40; ++t) {
            double sum = 0;
            for (std::size_t j = 0; j < 4; ++j) sum += post.gamma[t * 4 + j];
            CHECK(std::abs(sum - 1.0) < 1e-10);
        }
    }
}

TEST_CASE("init: 96-frame sequences split into 24-frame blocks per state") {
    std::vector<FeatureMap> seqs;
    Rng rng(6);
    for (int n = 0; n < 5; ++n) {
        std::vector<double> xs(96);
        for (std::size_t t = 0; t < 96; ++t) xs[t] = 10.0 * static_cast<double>(t / 24) + 0.01 * standard_normal(rng);
        seqs.push_back(column(xs));
    }
    InitConfig cfg;
    cfg.n_components = 1;
    const auto m = init_hmm(seqs, Label::Normal, cfg);
    m.validate();
    CHECK(m.n_states == 4);
    for (int s = 0; s < 4; ++s) {
        CHECK(m.emissions[s].means[0] == doctest::Approx(10.0 * s).epsilon(1e-2));
        if (s < 3) CHECK(m.a(s, s) == doctest::Approx(1.0 - 4.0 / 96.0).epsilon(1e-12));
    }
    CHECK(m.a(3, 3) == 1.0);
    CHECK(m.initial[0] == 1.0);
    CHECK(m.label == Label::Normal);
}

TEST_CASE("init: a repeated frame puts every mean on it with floored variances") {
    FeatureMap f;
    f.frames = 96;
    f.coefficients = 3;
    for (std::size_t t = 0; t < 96; ++t) f.values.insert(f.values.end(), {1.5, -2.0, 0.25});
    const std::vector<FeatureMap> seqs = {f, f};
    const auto m = init_hmm(seqs, Label::Abnormal, {});
    CHECK(m.emissions[0].components() == 16);
    for (const auto& g : m.emissions) {
        for (std::size_t k = 0; k < g.components(); ++k) {
            CHECK(g.means[k * 3] == 1.5);
            CHECK(g.means[k * 3 + 1] == -2.0);
            CHECK(g.means[k * 3 + 2] == 0.25);
            for (std::size_t d = 0; d < 3; ++d) CHECK(g.variances[k * 3 + d] == kVarianceFloor);
        }
    }
}

TEST_CASE("init: seeded runs are identical") {
    Rng rng(7);
    std::vector<FeatureMap> seqs;
    for (int n = 0; n < 6; ++n) seqs.push_back(hmm_oracle::random_sequence(rng, 96, 12));
    InitConfig cfg;
    cfg.seed = 42;
    const auto a = init_hmm(seqs, Label::Normal, cfg), b = init_hmm(seqs, Label::Normal, cfg);
    for (int s = 0; s < 4; ++s) {
        CHECK(a.emissions[s].means == b.emissions[s].means);
        CHECK(a.emissions[s].variances == b.emissions[s].variances);
        CHECK(a.emissions[s].weights == b.emissions[s].weights);
    }
}

TEST_CASE("baum-welch: log-likelihood never decreases over 20 iterations") {
    Rng rng(8);
    const auto truth = hmm_oracle::random_model(rng, 4, 3, 2);
    std::vector<FeatureMap> data;
    for (int n = 0; n < 30; ++n) data.push_back(hmm_oracle::sample(truth, rng, 60));
    InitConfig icfg;
    icfg.n_components = 3;
    const auto start = init_hmm(data, Label::Normal, icfg);
    BaumWelchConfig cfg;
    cfg.max_iters = 20;
    cfg.tol = 0.0;
    const auto r = baum_welch(start, data, cfg);
    CHECK(r.events.empty());
    REQUIRE(r.loglik_history.size() == 21);
    for (std::size_t i = 1; i < r.loglik_history.size(); ++i) {
        CHECK(r.loglik_history[i] >= r.loglik_history[i - 1] - 1e-9 * std::abs(r.loglik_history[i - 1]));
    }
}

TEST_CASE("baum-welch: rows stay stochastic and left-to-right after each iteration") {
    Rng rng(9);
    const auto truth = hmm_oracle::random_model(rng, 4, 2, 2);
    std::vector<FeatureMap> data;
    for (int n = 0; n < 10; ++n) data.push_back(hmm_oracle::sample(truth, rng, 50));
    HmmModel m = init_hmm(data, Label::Normal, {4, 2, 20, 1});
    for (int it = 0; it < 5; ++it) {
        m = baum_welch(m, data, {1, 0.0}).model;
        CHECK_NOTHROW(m.validate());
    }
}

TEST_CASE("baum-welch: a single-state, single-component optimum is a fixed point") {
    Rng rng(10);
    std::vector<FeatureMap> data;
    double sum[2] = {0, 0}, sq[2] = {0, 0};
    std::size_t n = 0;
    for (int k = 0; k < 5; ++k) {
        data.push_back(hmm_oracle::random_sequence(rng, 40, 2));
        for (std::size_t t = 0; t < 40; ++t) {
            for (std::size_t d = 0; d < 2; ++d) {
                sum[d] += data.back().values[t * 2 + d];
                sq[d] += data.back().values[t * 2 + d] * data.back().values[t * 2 + d];
            }
            ++n;
        }
    }
    HmmModel m;
    m.n_states = 1;
    m.dim = 2;
    m.transition = {1.0};
    m.initial = {1.0};
    Gmm g{2, {1.0}, {}, {}};
    for (std::size_t d = 0; d < 2; ++d) {
        const double mean = sum[d] / static_cast<double>(n);
        g.means.push_back(mean);
        g.variances.push_back(sq[d] / static_cast<double>(n) - mean * mean);
    }
    m.emissions = {g};
    const auto r = baum_welch(m, data, {1, 0.0});
    for (std::size_t d = 0; d < 2; ++d) {
        CHECK(std::abs(r.model.emissions[0].means[d] - g.means[d]) < 1e-8);
        CHECK(std::abs(r.model.emissions[0].variances[d] - g.variances[d]) < 1e-8);
    }
    CHECK(r.model.emissions[0].weights[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.model.transition[0] == 1.0);
}

TEST_CASE("baum-welch: recovers a sampled three-state chain (T = 200, 50 sequences)") {
    // state durations near T / 3 so that the flat start lands in the right basin
    const auto truth = chain({0.985, 0.985, 1.0}, {0.0, 3.0, 6.0}, 0.25);
    Rng rng(11);
    std::vector<FeatureMap> data;
    for (int n = 0; n < 50; ++n) data.push_back(hmm_oracle::sample(truth, rng, 200));
    InitConfig icfg;
    icfg.n_states = 3;
    icfg.n_components = 1;
    const auto r = baum_welch(init_hmm(data, Label::Normal, icfg), data, {});
    for (int s = 0; s < 3; ++s) {
        CHECK(std::abs(r.model.a(s, s) - truth.a(s, s)) < 0.05);
        CHECK(std::abs(r.model.emissions[s].means[0] - truth.emissions[s].means[0]) < 0.05);
        CHECK(std::abs(r.model.emissions[s].variances[0] - 0.25) < 0.05);
    }
}

TEST_CASE("baum-welch: an empty mixture component is reseeded and reported") {
    // two well separated clusters per state but four components
    std::vector<FeatureMap> data;
    Rng rng(12);
    for (int n = 0; n < 8; ++n) {
        std::vector<double> xs(40);
        for (auto& x : xs) x = (uniform01(rng) < 0.5 ? -5.0 : 5.0) + 0.01 * standard_normal(rng);
        data.push_back(column(xs));
    }
    HmmModel m = chain({1.0}, {0.0}, 1.0);
    m.emissions[0] = Gmm{1, {0.25, 0.25, 0.25, 0.25}, {-5.0, 5.0, 1000.0, 2000.0}, {1.0, 1.0, 1.0, 1.0}};
    const auto r = baum_welch(m, data, {3, 0.0});
    CHECK_FALSE(r.events.empty());
    CHECK_NOTHROW(r.model.validate());
    for (double w : r.model.emissions[0].weights) CHECK(w > 0.0);
}

TEST_CASE("classify: sequences from the normal model are labelled normal") {
    const auto normal = chain({0.9, 0.9, 1.0}, {0.0, 1.0, 2.0}, 1.0);
    auto abnormal = chain({0.9, 0.9, 1.0}, {0.5, 1.5, 2.5}, 1.0);
    abnormal.label = Label::Abnormal;
    // per-frame log-likelihood ratio has mean 0.125 and sd 0.5, so at T = 120
    // the Bayes error is Phi(-15 / sqrt(30)) ~ 0.3%
    Rng rng(13);
    int correct = 0;
    for (int n = 0; n < 200; ++n) {
        const auto seq = hmm_oracle::sample(normal, rng, 120);
        correct += classify_hmm(normal, abnormal, seq).label == Label::Normal;
    }
    CHECK(correct >= 190);
}

TEST_CASE("classify: identical models tie to abnormal; shifts keep the decision") {
    const auto m = chain({0.8, 1.0}, {0.0, 1.0}, 1.0);
    const auto d = classify_hmm(m, m, column({0.2, 0.9, 1.1}));
    CHECK(d.label == Label::Abnormal);
    CHECK(d.loglik_normal == d.loglik_abnormal);
    CHECK(classify_hmm(m, m, column({0.2, 0.9, 1.1}), Score::Viterbi).label == Label::Abnormal);
    CHECK(abnormal_posterior(-10.0, -12.0) == doctest::Approx(abnormal_posterior(990.0, 988.0)).epsilon(1e-12));
    CHECK(abnormal_posterior(-3.0, -3.0) == 0.5);
    CHECK(abnormal_posterior(-10.0, -12.0) == doctest::Approx(1.0 / (1.0 + std::exp(2.0))).epsilon(1e-12));
}

TEST_CASE("validate: broken invariants are rejected") {
    auto m = chain({0.5, 1.0}, {0.0, 1.0}, 1.0);
    CHECK_NOTHROW(m.validate());
    auto bad = m;
    bad.transition = {0.5, 0.5, 0.5, 0.5};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = m;
    bad.transition = {0.5, 0.4, 0.0, 1.0};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = m;
    bad.emissions[0].variances = {1e-6};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = m;
    bad.emissions[1].weights = {0.7};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}
