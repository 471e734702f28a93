#include "pcgcls/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pcgcls/error.hpp"
#include "pcgcls/random.hpp"

namespace pcg::hmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kEmptyComponent = 1e-6;

double log_sum_exp(std::span<const double> v) {
    double m = kNegInf;
    for (double x : v) m = std::max(m, x);
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

void check_sequence(const HmmModel& model, const FeatureMap& seq) {
    if (seq.coefficients != model.dim) {
        throw ShapeError("sequence has " + std::to_string(seq.coefficients) + " coefficients per frame, model expects " +
                         std::to_string(model.dim));
    }
    if (seq.frames == 0) throw ValidationError("sequence has no frames");
    if (seq.values.size() != seq.frames * seq.coefficients) throw ShapeError("feature map storage size mismatch");
}

std::vector<double> log_transitions(const HmmModel& model) {
    std::vector<double> out(model.transition.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = safe_log(model.transition[i]);
    return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

// Seeded k-means++ followed by Lloyd iterations. Points are rows of `data`.
Gmm fit_kmeans_gmm(const std::vector<double>& data, std::size_t dim, int k, int iterations, Rng& rng) {
    const std::size_t n = data.size() / dim;
    const auto kk = static_cast<std::size_t>(k);
    auto point = [&](std::size_t i) { return std::span<const double>(data).subspan(i * dim, dim); };

    std::vector<double> centers;
    centers.reserve(kk * dim);
    const std::size_t first = uniform_index(rng, n);
    centers.insert(centers.end(), data.begin() + static_cast<std::ptrdiff_t>(first * dim),
                   data.begin() + static_cast<std::ptrdiff_t>((first + 1) * dim));
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(point(i), point(first));
    while (centers.size() < kk * dim) {
        double total = 0.0;
        for (double v : d2) total += v;
        std::size_t pick = 0;
        if (total <= 0.0) {
            pick = uniform_index(rng, n);
        } else {
            double r = uniform01(rng) * total;
            for (pick = 0; pick + 1 < n; ++pick) {
                r -= d2[pick];
                if (r < 0.0) break;
            }
        }
        const std::size_t c0 = centers.size();
        centers.insert(centers.end(), data.begin() + static_cast<std::ptrdiff_t>(pick * dim),
                       data.begin() + static_cast<std::ptrdiff_t>((pick + 1) * dim));
        const std::span<const double> c(centers.data() + c0, dim);
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(point(i), c));
    }

    std::vector<std::size_t> assign(n, 0);
    for (int it = 0; it <= iterations; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < kk; ++c) {
                const double d = squared_distance(point(i), std::span<const double>(centers).subspan(c * dim, dim));
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (it == 0 || assign[i] != best) changed = true;
            assign[i] = best;
        }
        if (!changed || it == iterations) break;
        std::vector<double> sum(kk * dim, 0.0);
        std::vector<std::size_t> count(kk, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++count[assign[i]];
            for (std::size_t d = 0; d < dim; ++d) sum[assign[i] * dim + d] += data[i * dim + d];
        }
        for (std::size_t c = 0; c < kk; ++c) {
            if (count[c] == 0) continue;
            for (std::size_t d = 0; d < dim; ++d) centers[c * dim + d] = sum[c * dim + d] / static_cast<double>(count[c]);
        }
    }

    // Pooled variance stands in for clusters with fewer than two members.
    std::vector<double> pooled_mean(dim, 0.0), pooled_var(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < dim; ++d) pooled_mean[d] += data[i * dim + d];
    for (auto& m : pooled_mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < dim; ++d) {
            const double e = data[i * dim + d] - pooled_mean[d];
            pooled_var[d] += e * e;
        }
    for (auto& v : pooled_var) v /= static_cast<double>(n);

    Gmm g;
    g.dim = dim;
    g.weights.assign(kk, 0.0);
    g.means = centers;
    g.variances.assign(kk * dim, 0.0);
    std::vector<std::size_t> count(kk, 0);
    for (std::size_t i = 0; i < n; ++i) {
        ++count[assign[i]];
        for (std::size_t d = 0; d < dim; ++d) {
            const double e = data[i * dim + d] - centers[assign[i] * dim + d];
            g.variances[assign[i] * dim + d] += e * e;
        }
    }
    for (std::size_t c = 0; c < kk; ++c) {
        g.weights[c] = static_cast<double>(count[c] + 1) / static_cast<double>(n + kk);
        for (std::size_t d = 0; d < dim; ++d) {
            double& v = g.variances[c * dim + d];
            v = count[c] >= 2 ? v / static_cast<double>(count[c]) : pooled_var[d];
            v = std::max(v, kVarianceFloor);
        }
    }
    return g;
}

struct LogLattice {
    std::vector<double> log_alpha, log_beta;  // T x N
    double loglik = 0.0;
};

LogLattice log_forward_backward(const HmmModel& model, const std::vector<double>& log_b, std::size_t T) {
    const auto N = static_cast<std::size_t>(model.n_states);
    const auto log_a = log_transitions(model);
    LogLattice L;
    L.log_alpha.assign(T * N, kNegInf);
    L.log_beta.assign(T * N, kNegInf);
    for (std::size_t j = 0; j < N; ++j) L.log_alpha[j] = safe_log(model.initial[j]) + log_b[j];
    for (std::size_t t = 1; t < T; ++t) {
        for (std::size_t j = 0; j < N; ++j) {
            double acc = kNegInf;
            for (std::size_t i = 0; i < N; ++i) acc = log_add(acc, L.log_alpha[(t - 1) * N + i] + log_a[i * N + j]);
            L.log_alpha[t * N + j] = acc + log_b[t * N + j];
        }
    }
    for (std::size_t j = 0; j < N; ++j) L.log_beta[(T - 1) * N + j] = 0.0;
    for (std::size_t t = T - 1; t-- > 0;) {
        for (std::size_t i = 0; i < N; ++i) {
            double acc = kNegInf;
            for (std::size_t j = 0; j < N; ++j) {
                acc = log_add(acc, log_a[i * N + j] + log_b[(t + 1) * N + j] + L.log_beta[(t + 1) * N + j]);
            }
            L.log_beta[t * N + i] = acc;
        }
    }
    L.loglik = log_sum_exp(std::span<const double>(L.log_alpha).subspan((T - 1) * N, N));
    return L;
}

}  // namespace

// --- GMM ----------------------------------------------------------------------

void Gmm::component_log_densities(std::span<const double> x, std::span<double> out) const {
    const std::size_t K = components();
    for (std::size_t k = 0; k < K; ++k) {
        double s = 0.0;
        const double* mu = &means[k * dim];
        const double* var = &variances[k * dim];
        for (std::size_t d = 0; d < dim; ++d) {
            const double e = x[d] - mu[d];
            s += kLog2Pi + std::log(var[d]) + e * e / var[d];
        }
        out[k] = safe_log(weights[k]) - 0.5 * s;
    }
}

double Gmm::log_density(std::span<const double> x) const {
    std::vector<double> tmp(components());
    component_log_densities(x, tmp);
    return log_sum_exp(tmp);
}

void HmmModel::validate() const {
    const auto N = static_cast<std::size_t>(n_states);
    if (n_states < 1) throw ValidationError("HMM needs at least one state");
    if (transition.size() != N * N || initial.size() != N || emissions.size() != N) {
        throw ValidationError("HMM parameter sizes do not match the state count");
    }
    for (int i = 0; i < n_states; ++i) {
        double row = 0.0;
        for (int j = 0; j < n_states; ++j) {
            const double p = a(i, j);
            if (p < 0.0) throw ValidationError("negative transition probability");
            if (p != 0.0 && j != i && j != i + 1) throw ValidationError("transition breaks left-to-right topology");
            row += p;
        }
        if (std::abs(row - 1.0) > 1e-9) throw ValidationError("transition row " + std::to_string(i) + " does not sum to 1");
    }
    for (const auto& g : emissions) {
        if (g.dim != dim || g.means.size() != g.components() * dim || g.variances.size() != g.components() * dim) {
            throw ValidationError("mixture parameter sizes do not match the feature dimension");
        }
        double w = 0.0;
        for (double x : g.weights) w += x;
        if (std::abs(w - 1.0) > 1e-9) throw ValidationError("mixture weights do not sum to 1");
        for (double v : g.variances) {
            if (!(v >= kVarianceFloor * (1.0 - 1e-12))) throw ValidationError("variance below floor");
        }
    }
}

// --- initialisation ----------------------------------------------------------

HmmModel init_hmm(std::span<const FeatureMap> sequences, Label label, const InitConfig& cfg) {
    if (cfg.n_states < 1 || cfg.n_components < 1) throw ConfigError("HMM needs >= 1 state and >= 1 component");
    if (sequences.empty()) throw ValidationError("HMM initialisation needs at least one sequence");
    const std::size_t dim = sequences[0].coefficients;
    if (dim == 0) throw ShapeError("feature maps have no coefficients");
    const auto N = static_cast<std::size_t>(cfg.n_states);
    std::vector<std::vector<double>> pooled(N);
    double total_frames = 0.0;
    for (const auto& seq : sequences) {
        if (seq.coefficients != dim) throw ShapeError("feature maps disagree on coefficient count");
        if (seq.frames < N) {
            throw ValidationError("sequence has " + std::to_string(seq.frames) + " frames, fewer than the " +
                                  std::to_string(N) + " states");
        }
        for (std::size_t t = 0; t < seq.frames; ++t) {
            const std::size_t s = t * N / seq.frames;
            const auto row = seq.row(t);
            pooled[s].insert(pooled[s].end(), row.begin(), row.end());
        }
        total_frames += static_cast<double>(seq.frames);
    }
    const double mean_len = total_frames / static_cast<double>(sequences.size());

    HmmModel m;
    m.n_states = cfg.n_states;
    m.dim = dim;
    m.label = label;
    m.initial.assign(N, 0.0);
    m.initial[0] = 1.0;
    m.transition.assign(N * N, 0.0);
    const double next = std::min(1.0, static_cast<double>(N) / mean_len);
    for (std::size_t i = 0; i < N; ++i) {
        if (i + 1 < N) {
            m.transition[i * N + i] = 1.0 - next;
            m.transition[i * N + i + 1] = next;
        } else {
            m.transition[i * N + i] = 1.0;
        }
    }
    Rng rng(derive_seed(cfg.seed, "hmm-init"));
    for (std::size_t s = 0; s < N; ++s) {
        m.emissions.push_back(fit_kmeans_gmm(pooled[s], dim, cfg.n_components, cfg.kmeans_iterations, rng));
    }
    return m;
}

// --- scoring ------------------------------------------------------------------

std::vector<double> emission_log_probs(const HmmModel& model, const FeatureMap& seq) {
    check_sequence(model, seq);
    const auto N = static_cast<std::size_t>(model.n_states);
    std::vector<double> out(seq.frames * N);
    std::vector<double> tmp;
    for (std::size_t j = 0; j < N; ++j) {
        const Gmm& g = model.emissions[j];
        tmp.resize(g.components());
        for (std::size_t t = 0; t < seq.frames; ++t) {
            g.component_log_densities(seq.row(t), tmp);
            out[t * N + j] = log_sum_exp(tmp);
        }
    }
    return out;
}

double forward_loglik(const HmmModel& model, const FeatureMap& seq) {
    const auto log_b = emission_log_probs(model, seq);
    const auto N = static_cast<std::size_t>(model.n_states);
    const std::size_t T = seq.frames;
    std::vector<double> alpha(N), next(N), b(N);
    double loglik = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        double m = kNegInf;
        for (std::size_t j = 0; j < N; ++j) m = std::max(m, log_b[t * N + j]);
        if (!std::isfinite(m)) return forward_loglik_logspace(model, seq);
        for (std::size_t j = 0; j < N; ++j) b[j] = std::exp(log_b[t * N + j] - m);
        for (std::size_t j = 0; j < N; ++j) {
            if (t == 0) {
                next[j] = model.initial[j] * b[j];
            } else {
                double acc = 0.0;
                for (std::size_t i = 0; i < N; ++i) acc += alpha[i] * model.transition[i * N + j];
                next[j] = acc * b[j];
            }
        }
        double c = 0.0;
        for (double v : next) c += v;
        // Every reachable state is far below the frame maximum: the scaled
        // recursion underflows, so fall back to log space.
        if (!(c > 0.0) || !std::isfinite(c)) return forward_loglik_logspace(model, seq);
        for (std::size_t j = 0; j < N; ++j) alpha[j] = next[j] / c;
        loglik += std::log(c) + m;
    }
    return loglik;
}

double forward_loglik_logspace(const HmmModel& model, const FeatureMap& seq) {
    const auto log_b = emission_log_probs(model, seq);
    const auto N = static_cast<std::size_t>(model.n_states);
    const auto log_a = log_transitions(model);
    std::vector<double> alpha(N), next(N), terms(N);
    for (std::size_t j = 0; j < N; ++j) alpha[j] = safe_log(model.initial[j]) + log_b[j];
    for (std::size_t t = 1; t < seq.frames; ++t) {
        for (std::size_t j = 0; j < N; ++j) {
            for (std::size_t i = 0; i < N; ++i) terms[i] = alpha[i] + log_a[i * N + j];
            next[j] = log_sum_exp(terms) + log_b[t * N + j];
        }
        alpha.swap(next);
    }
    return log_sum_exp(alpha);
}

ViterbiResult viterbi(const HmmModel& model, const FeatureMap& seq) {
    const auto log_b = emission_log_probs(model, seq);
    const auto N = static_cast<std::size_t>(model.n_states);
    const std::size_t T = seq.frames;
    const auto log_a = log_transitions(model);
    std::vector<double> delta(T * N, kNegInf);
    std::vector<int> back(T * N, 0);
    for (std::size_t j = 0; j < N; ++j) delta[j] = safe_log(model.initial[j]) + log_b[j];
    for (std::size_t t = 1; t < T; ++t) {
        for (std::size_t j = 0; j < N; ++j) {
            double best = kNegInf;
            int arg = static_cast<int>(j);
            for (std::size_t i = 0; i < N; ++i) {
                const double v = delta[(t - 1) * N + i] + log_a[i * N + j];
                if (v > best) {
                    best = v;
                    arg = static_cast<int>(i);
                }
            }
            delta[t * N + j] = best + log_b[t * N + j];
            back[t * N + j] = arg;
        }
    }
    ViterbiResult r;
    r.path.assign(T, 0);
    std::size_t last = 0;
    for (std::size_t j = 1; j < N; ++j) {
        if (delta[(T - 1) * N + j] > delta[(T - 1) * N + last]) last = j;
    }
    r.score = delta[(T - 1) * N + last];
    r.path[T - 1] = static_cast<int>(last);
    for (std::size_t t = T - 1; t > 0; --t) {
        r.path[t - 1] = back[t * N + static_cast<std::size_t>(r.path[t])];
    }
    return r;
}

Posteriors state_posteriors(const HmmModel& model, const FeatureMap& seq) {
    const auto log_b = emission_log_probs(model, seq);
    const auto N = static_cast<std::size_t>(model.n_states);
    const std::size_t T = seq.frames;
    const auto L = log_forward_backward(model, log_b, T);
    Posteriors p;
    p.loglik = L.loglik;
    p.gamma.resize(T * N);
    for (std::size_t t = 0; t < T; ++t) {
        double s = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
            p.gamma[t * N + j] = std::exp(L.log_alpha[t * N + j] + L.log_beta[t * N + j] - L.loglik);
            s += p.gamma[t * N + j];
        }
        for (std::size_t j = 0; j < N; ++j) p.gamma[t * N + j] /= s;
    }
    return p;
}

// --- Baum-Welch ---------------------------------------------------------------

namespace {

struct Stats {
    std::vector<double> xi;     // N x N expected transitions
    std::vector<double> occ;    // N x K component occupancy
    std::vector<double> sum;    // N x K x D
    std::vector<double> sumsq;  // N x K x D
    double loglik = 0.0;
};

Stats accumulate(const HmmModel& model, std::span<const FeatureMap> sequences) {
    const auto N = static_cast<std::size_t>(model.n_states);
    const std::size_t D = model.dim;
    std::size_t K = 0;
    for (const auto& g : model.emissions) K = std::max(K, g.components());
    Stats s;
    s.xi.assign(N * N, 0.0);
    s.occ.assign(N * K, 0.0);
    s.sum.assign(N * K * D, 0.0);
    s.sumsq.assign(N * K * D, 0.0);
    const auto log_a = log_transitions(model);

    std::vector<double> comp(K);
    for (const auto& seq : sequences) {
        check_sequence(model, seq);
        const std::size_t T = seq.frames;
        // Per-frame component log densities, reused for the state emissions.
        std::vector<double> comp_log(T * N * K, kNegInf);
        std::vector<double> log_b(T * N);
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t j = 0; j < N; ++j) {
                const Gmm& g = model.emissions[j];
                std::span<double> out(comp_log.data() + (t * N + j) * K, g.components());
                g.component_log_densities(seq.row(t), out);
                log_b[t * N + j] = log_sum_exp(out);
            }
        }
        const auto L = log_forward_backward(model, log_b, T);
        if (!std::isfinite(L.loglik)) throw NumericError("training sequence has zero likelihood under the model");
        s.loglik += L.loglik;
        for (std::size_t t = 0; t + 1 < T; ++t) {
            for (std::size_t i = 0; i < N; ++i) {
                for (std::size_t j = i; j < std::min(N, i + 2); ++j) {
                    const double lx = L.log_alpha[t * N + i] + log_a[i * N + j] + log_b[(t + 1) * N + j] +
                                      L.log_beta[(t + 1) * N + j] - L.loglik;
                    s.xi[i * N + j] += std::exp(lx);
                }
            }
        }
        for (std::size_t t = 0; t < T; ++t) {
            const auto x = seq.row(t);
            for (std::size_t j = 0; j < N; ++j) {
                const double lg = L.log_alpha[t * N + j] + L.log_beta[t * N + j] - L.loglik;
                if (lg == kNegInf) continue;
                const std::size_t Kj = model.emissions[j].components();
                for (std::size_t k = 0; k < Kj; ++k) {
                    const double r = std::exp(lg + comp_log[(t * N + j) * K + k] - log_b[t * N + j]);
                    if (r == 0.0) continue;
                    s.occ[j * K + k] += r;
                    double* sm = &s.sum[(j * K + k) * D];
                    double* sq = &s.sumsq[(j * K + k) * D];
                    for (std::size_t d = 0; d < D; ++d) {
                        sm[d] += r * x[d];
                        sq[d] += r * x[d] * x[d];
                    }
                }
            }
        }
    }
    return s;
}

void maximise(HmmModel& model, const Stats& s, std::vector<std::string>& events, int iteration) {
    const auto N = static_cast<std::size_t>(model.n_states);
    const std::size_t D = model.dim;
    const std::size_t K = s.occ.size() / N;
    for (std::size_t i = 0; i < N; ++i) {
        double row = 0.0;
        for (std::size_t j = i; j < std::min(N, i + 2); ++j) row += s.xi[i * N + j];
        if (row <= 0.0 || i + 1 == N) continue;
        for (std::size_t j = i; j < i + 2; ++j) model.transition[i * N + j] = s.xi[i * N + j] / row;
    }
    for (std::size_t j = 0; j < N; ++j) {
        Gmm& g = model.emissions[j];
        const std::size_t Kj = g.components();
        double state_occ = 0.0;
        for (std::size_t k = 0; k < Kj; ++k) state_occ += s.occ[j * K + k];
        if (!(state_occ > 0.0)) continue;
        std::vector<bool> empty(Kj, false);
        for (std::size_t k = 0; k < Kj; ++k) {
            const double o = s.occ[j * K + k];
            if (o < kEmptyComponent) {
                empty[k] = true;
                continue;
            }
            g.weights[k] = o / state_occ;
            for (std::size_t d = 0; d < D; ++d) {
                const double mu = s.sum[(j * K + k) * D + d] / o;
                const double var = s.sumsq[(j * K + k) * D + d] / o - mu * mu;
                g.means[k * D + d] = mu;
                g.variances[k * D + d] = std::max(var, kVarianceFloor);
            }
        }
        for (std::size_t k = 0; k < Kj; ++k) {
            if (!empty[k]) continue;
            std::size_t h = Kj;
            for (std::size_t c = 0; c < Kj; ++c) {
                if (!empty[c] && (h == Kj || g.weights[c] > g.weights[h])) h = c;
            }
            if (h == Kj) break;
            // Split the heaviest component: halve its weight and offset the copy
            // by a tenth of a standard deviation.
            g.weights[h] *= 0.5;
            g.weights[k] = g.weights[h];
            for (std::size_t d = 0; d < D; ++d) {
                g.variances[k * D + d] = g.variances[h * D + d];
                g.means[k * D + d] = g.means[h * D + d] + 0.1 * std::sqrt(g.variances[h * D + d]);
            }
            empty[k] = false;
            events.push_back("iteration " + std::to_string(iteration) + ": state " + std::to_string(j) +
                             " component " + std::to_string(k) + " empty, reseeded from component " +
                             std::to_string(h));
        }
        double w = 0.0;
        for (double x : g.weights) w += x;
        for (double& x : g.weights) x /= w;
    }
}

}  // namespace

BaumWelchResult baum_welch(const HmmModel& model, std::span<const FeatureMap> sequences, const BaumWelchConfig& cfg) {
    if (sequences.empty()) throw ValidationError("Baum-Welch needs at least one sequence");
    if (cfg.max_iters < 0 || !(cfg.tol >= 0.0)) throw ConfigError("invalid Baum-Welch iteration settings");
    model.validate();
    BaumWelchResult r;
    r.model = model;
    for (int it = 0; it < cfg.max_iters; ++it) {
        const Stats s = accumulate(r.model, sequences);
        if (!r.loglik_history.empty()) {
            const double prev = r.loglik_history.back();
            if ((s.loglik - prev) <= cfg.tol * std::abs(prev)) {
                r.loglik_history.push_back(s.loglik);
                r.converged = true;
                // The last update did not help enough; its result is kept as it
                // is at least as likely as its predecessor.
                return r;
            }
        }
        r.loglik_history.push_back(s.loglik);
        maximise(r.model, s, r.events, it + 1);
        r.iterations = it + 1;
    }
    double total = 0.0;
    for (const auto& seq : sequences) total += forward_loglik_logspace(r.model, seq);
    r.loglik_history.push_back(total);
    return r;
}

// --- classification -----------------------------------------------------------

HmmDecision classify_hmm(const HmmModel& normal, const HmmModel& abnormal, const FeatureMap& seq, Score score) {
    if (normal.dim != abnormal.dim) throw ShapeError("the two class models disagree on feature dimension");
    HmmDecision d;
    if (score == Score::Forward) {
        d.loglik_normal = forward_loglik(normal, seq);
        d.loglik_abnormal = forward_loglik(abnormal, seq);
    } else {
        d.loglik_normal = viterbi(normal, seq).score;
        d.loglik_abnormal = viterbi(abnormal, seq).score;
    }
    d.label = d.loglik_normal > d.loglik_abnormal ? Label::Normal : Label::Abnormal;
    return d;
}

double abnormal_posterior(double loglik_normal, double loglik_abnormal) {
    const double diff = loglik_normal - loglik_abnormal;
    if (std::isnan(diff)) return 0.5;
    return 1.0 / (1.0 + std::exp(diff));
}

}  // namespace pcg::hmm
