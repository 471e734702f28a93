#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcgcls/data_io.hpp"
#include "pcgcls/features.hpp"

namespace pcg::hmm {

inline constexpr double kVarianceFloor = 1e-4;
inline constexpr int kDefaultStates = 4;
inline constexpr int kDefaultComponents = 16;

/// Diagonal-covariance Gaussian mixture over `dim`-dimensional vectors.
struct Gmm {
    std::size_t dim = 0;
    std::vector<double> weights;    // K
    std::vector<double> means;      // K x dim
    std::vector<double> variances;  // K x dim

    std::size_t components() const { return weights.size(); }
    /// log N(x; mean_k, diag var_k) for every component.
    void component_log_densities(std::span<const double> x, std::span<double> out) const;
    double log_density(std::span<const double> x) const;
};

/// Left-to-right chain: only self and next-state transitions are non-zero,
/// the initial distribution puts all mass on the first state and the last
/// state self-loops.
struct HmmModel {
    int n_states = 0;
    std::size_t dim = 0;
    std::vector<double> transition;  // n_states x n_states, row-major
    std::vector<double> initial;     // n_states
    std::vector<Gmm> emissions;      // one per state
    Label label = Label::Normal;

    double a(int i, int j) const { return transition[static_cast<std::size_t>(i * n_states + j)]; }
    /// Throws ValidationError when an invariant is broken.
    void validate() const;
};

struct InitConfig {
    int n_states = kDefaultStates;
    int n_components = kDefaultComponents;
    int kmeans_iterations = 20;
    std::uint64_t seed = 1;
};

HmmModel init_hmm(std::span<const FeatureMap> sequences, Label label, const InitConfig& cfg = {});

/// log b_j(x_t) for every frame and state, T x n_states.
std::vector<double> emission_log_probs(const HmmModel& model, const FeatureMap& seq);

/// log p(seq | model) by the scaled forward recursion.
double forward_loglik(const HmmModel& model, const FeatureMap& seq);
/// The same quantity computed entirely in log space.
double forward_loglik_logspace(const HmmModel& model, const FeatureMap& seq);

struct ViterbiResult {
    std::vector<int> path;  // 0-based state per frame
    double score = 0.0;     // log joint of path and sequence
};

ViterbiResult viterbi(const HmmModel& model, const FeatureMap& seq);

struct Posteriors {
    std::vector<double> gamma;  // T x n_states
    double loglik = 0.0;
};

Posteriors state_posteriors(const HmmModel& model, const FeatureMap& seq);

struct BaumWelchConfig {
    int max_iters = 50;
    double tol = 1e-5;  // relative log-likelihood improvement
};

struct BaumWelchResult {
    HmmModel model;
    /// Total log-likelihood of the training data before each update, then
    /// once more for the returned model.
    std::vector<double> loglik_history;
    int iterations = 0;
    bool converged = false;
    std::vector<std::string> events;  // component reseeds, one line each
};

BaumWelchResult baum_welch(const HmmModel& model, std::span<const FeatureMap> sequences,
                           const BaumWelchConfig& cfg = {});

struct HmmDecision {
    Label label = Label::Abnormal;
    double loglik_normal = 0.0;
    double loglik_abnormal = 0.0;
};

enum class Score : std::uint8_t { Forward, Viterbi };

/// Maximum-likelihood decision between the two class models; ties go to
/// ABNORMAL.
HmmDecision classify_hmm(const HmmModel& normal, const HmmModel& abnormal, const FeatureMap& seq,
                         Score score = Score::Forward);

/// Posterior of ABNORMAL under equal priors given the two log-likelihoods.
double abnormal_posterior(double loglik_normal, double loglik_abnormal);

}  // namespace pcg::hmm
