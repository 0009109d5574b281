#include "semcom/info_metrics.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "semcom/autodiff.hpp"
#include "semcom/errors.hpp"
#include "semcom/rng.hpp"
#include "semcom/sources.hpp"

namespace semcom::metrics {

namespace {
constexpr double kLog2E = 1.4426950408889634;

double entropy_of_probs(const auto& probs) {
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log2(p);
    return h;
}
}  // namespace

void DiscreteDistribution::validate() const {
    if (probabilities.empty()) throw ValidationError("DiscreteDistribution: empty");
    double sum = 0.0;
    for (double p : probabilities) {
        if (!(p >= 0.0)) throw ValidationError("DiscreteDistribution: negative probability");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ValidationError("DiscreteDistribution: probabilities must sum to 1");
}

double DiscreteDistribution::entropy_bits() const {
    validate();
    return entropy_of_probs(probabilities);
}

JointCounts JointCounts::from_pairs(std::span<const int> a, std::span<const int> b,
                                    int a_alphabet, int b_alphabet) {
    if (a.size() != b.size()) throw ValidationError("JointCounts: length mismatch");
    JointCounts jc;
    jc.counts.setZero(a_alphabet, b_alphabet);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < 0 || a[i] >= a_alphabet || b[i] < 0 || b[i] >= b_alphabet)
            throw ValidationError("JointCounts: symbol out of alphabet");
        ++jc.counts(a[i], b[i]);
    }
    return jc;
}

void JointCounts::validate() const {
    if (counts.size() == 0) throw ValidationError("JointCounts: empty matrix");
    if ((counts.array() < 0).any()) throw ValidationError("JointCounts: negative count");
    if (counts.sum() < 1) throw ValidationError("JointCounts: total count must be >= 1");
}

double entropy_plugin(std::span<const std::int64_t> counts) {
    std::int64_t total = 0;
    for (std::int64_t c : counts) {
        if (c < 0) throw ValidationError("entropy_plugin: negative count");
        total += c;
    }
    if (total == 0) throw ValidationError("entropy_plugin: all counts are zero");
    double h = 0.0;
    for (std::int64_t c : counts) {
        if (c > 0) {
            const double p = static_cast<double>(c) / static_cast<double>(total);
            h -= p * std::log2(p);
        }
    }
    return h;
}

double mi_bits_from_joint(const Eigen::MatrixXd& joint) {
    const double total = joint.sum();
    if (!(total > 0.0)) throw ValidationError("mi_bits_from_joint: empty joint");
    Eigen::VectorXd row = joint.rowwise().sum() / total;
    Eigen::VectorXd col = joint.colwise().sum().transpose() / total;
    double mi = 0.0;
    for (Eigen::Index i = 0; i < joint.rows(); ++i) {
        for (Eigen::Index j = 0; j < joint.cols(); ++j) {
            const double p = joint(i, j) / total;
            if (p > 0.0) mi += p * std::log2(p / (row(i) * col(j)));
        }
    }
    return std::max(mi, 0.0);
}

MIEstimate mi_plugin(const JointCounts& joint) {
    joint.validate();
    MIEstimate est;
    est.estimator = Estimator::PlugIn;
    est.sample_count = joint.total();
    est.value_bits = mi_bits_from_joint(joint.counts.cast<double>());
    return est;
}

MIEstimate mi_variational(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                          const MiVariationalOptions& options) {
    const Eigen::Index n = u.cols();
    if (v.cols() != n) throw ValidationError("mi_variational: pair count mismatch");
    if (n < 1000) throw ValidationError("mi_variational: needs at least 10^3 pairs");
    if (!u.allFinite() || !v.allFinite())
        throw NumericError("mi_variational: non-finite input pairs");

    // Separable scorer f(u,v) = g(u).h(v); two small MLPs sharing a budget.
    Rng rng(options.seed);
    const int h = options.hidden, e = options.embed;
    auto init = [&rng](Eigen::Index rows, Eigen::Index cols) {
        nn::Mat w(rows, cols);
        const double s = std::sqrt(2.0 / static_cast<double>(cols));
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = s * rng.normal();
        return w;
    };
    struct Tower {
        nn::Mat w1, b1, w2, b2;
    };
    Tower gu{init(h, u.rows()), nn::Mat::Zero(h, 1), init(e, h), nn::Mat::Zero(e, 1)};
    Tower hv{init(h, v.rows()), nn::Mat::Zero(h, 1), init(e, h), nn::Mat::Zero(e, 1)};

    // Held-in / held-out split; the bound is reported on held-out batches so
    // an overfit scorer cannot inflate it.
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    shuffle(idx, rng);
    const int n_eval = std::max<int>(options.batch, static_cast<int>(n / 5));
    const int n_train = static_cast<int>(n) - n_eval;
    if (n_train < options.batch)
        throw ValidationError("mi_variational: too few pairs for the configured batch");

    const int b = options.batch;
    auto gather = [&](const Eigen::MatrixXd& src, const std::vector<int>& rows_of,
                      int start, int count) {
        nn::Mat out(src.rows(), count);
        for (int j = 0; j < count; ++j) out.col(j) = src.col(rows_of[start + j]);
        return out;
    };

    nn::Adam adam(options.learning_rate);
    std::vector<int> order(idx.begin(), idx.begin() + n_train);
    auto tower_forward = [](nn::Graph& g, const Tower& t, nn::Graph::NodeId x) {
        auto a1 = g.tanh(g.add_colvec(g.matmul(g.param(t.w1), x), g.param(t.b1)));
        return g.add_colvec(g.matmul(g.param(t.w2), a1), g.param(t.b2));
    };

    std::vector<nn::Mat*> params = {&gu.w1, &gu.b1, &gu.w2, &gu.b2,
                                    &hv.w1, &hv.b1, &hv.w2, &hv.b2};
    int cursor = 0;
    for (int step = 0; step < options.steps; ++step) {
        if (cursor + b > n_train) {
            shuffle(order, rng);
            cursor = 0;
        }
        nn::Graph g;
        std::vector<nn::Graph::NodeId> pid;
        pid.reserve(params.size());
        for (nn::Mat* p : params) pid.push_back(g.param(*p));
        auto fwd = [&](int base, nn::Graph::NodeId x) {
            auto a1 = g.tanh(g.add_colvec(g.matmul(pid[base], x), pid[base + 1]));
            return g.add_colvec(g.matmul(pid[base + 2], a1), pid[base + 3]);
        };
        auto ub = g.constant(gather(u, order, cursor, b));
        auto vb = g.constant(gather(v, order, cursor, b));
        cursor += b;
        auto scores = g.matmul(g.transpose(fwd(0, ub)), fwd(4, vb));  // b x b, col j vs v_j
        g.check_finite(scores, "mi_variational critic scores");
        std::vector<int> diag(b);
        std::iota(diag.begin(), diag.end(), 0);
        auto loss = g.cross_entropy_bits(scores, diag);
        g.backward(loss);
        std::vector<const nn::Mat*> grads;
        grads.reserve(params.size());
        for (auto id : pid) grads.push_back(&g.grad(id));
        adam.step(params, grads);
    }

    // Held-out evaluation in batches; the InfoNCE bound is log2(b) minus the
    // diagonal cross entropy, clamped into [0, log2(b)].
    std::vector<double> batch_estimates;
    for (int start = n_train; start + b <= static_cast<int>(n); start += b) {
        nn::Graph g;
        auto ub = g.constant(gather(u, idx, start, b));
        auto vb = g.constant(gather(v, idx, start, b));
        auto ge = tower_forward(g, gu, ub);
        auto he = tower_forward(g, hv, vb);
        auto scores = g.matmul(g.transpose(ge), he);
        g.check_finite(scores, "mi_variational critic scores");
        std::vector<int> diag(b);
        std::iota(diag.begin(), diag.end(), 0);
        auto loss = g.cross_entropy_bits(scores, diag);
        batch_estimates.push_back(std::log2(static_cast<double>(b)) - g.value(loss)(0, 0));
    }
    if (batch_estimates.empty())
        throw ValidationError("mi_variational: held-out split smaller than one batch");

    double mean = 0.0;
    for (double x : batch_estimates) mean += x;
    mean /= static_cast<double>(batch_estimates.size());
    double var = 0.0;
    for (double x : batch_estimates) var += (x - mean) * (x - mean);
    var /= std::max<double>(1.0, static_cast<double>(batch_estimates.size()) - 1.0);

    MIEstimate est;
    est.estimator = Estimator::Variational;
    est.sample_count = n;
    est.value_bits = std::clamp(mean, 0.0, std::log2(static_cast<double>(b)));
    est.confidence_half_width_bits =
        1.96 * std::sqrt(var / static_cast<double>(batch_estimates.size()));
    return est;
}

EseBits empirical_semantic_entropy(const MessageEncoder& encoder,
                                   const sources::Dataset& dataset) {
    const int k = encoder.alphabet_size();
    const int m = encoder.message_length();
    if (k < 1 || m < 1)
        throw EstimatorError("empirical_semantic_entropy: encoder has no discrete alphabet");
    std::map<std::vector<int>, std::int64_t> message_hist;
    std::vector<std::int64_t> symbol_hist(k, 0);
    for (const auto& s : dataset.samples()) {
        SemanticMessage msg = encoder.encode(s);
        if (static_cast<int>(msg.indices.size()) != m)
            throw ValidationError("empirical_semantic_entropy: message length mismatch");
        for (int ix : msg.indices) {
            if (ix < 0 || ix >= k)
                throw ValidationError("empirical_semantic_entropy: index out of alphabet");
            ++symbol_hist[ix];
        }
        ++message_hist[msg.indices];
    }
    std::vector<std::int64_t> message_counts;
    message_counts.reserve(message_hist.size());
    for (const auto& [_, c] : message_hist) message_counts.push_back(c);
    EseBits out;
    out.per_message = entropy_plugin(message_counts);
    out.per_symbol = entropy_plugin(symbol_hist);
    return out;
}

SaturatingBits classification_distortion(const Eigen::MatrixXd& predictive,
                                         std::span<const int> labels) {
    const Eigen::Index n = predictive.cols();
    if (static_cast<Eigen::Index>(labels.size()) != n)
        throw ValidationError("classification_distortion: label count mismatch");
    if (n == 0) throw ValidationError("classification_distortion: empty evaluation set");
    for (Eigen::Index j = 0; j < n; ++j) {
        if ((predictive.col(j).array() < -1e-12).any() ||
            std::abs(predictive.col(j).sum() - 1.0) > 1e-6)
            throw ValidationError("classification_distortion: column is not a distribution");
        if (labels[j] < 0 || labels[j] >= predictive.rows())
            throw ValidationError("classification_distortion: label out of range");
    }
    double total = 0.0;
    bool saturated = false;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double p = predictive(labels[j], j);
        if (p <= 0.0) {
            saturated = true;
        } else {
            total -= std::log2(p);
        }
    }
    if (saturated) return {std::numeric_limits<double>::infinity(), true};
    return {total / static_cast<double>(n), false};
}

SaturatingBits perception_distortion(const DiscreteDistribution& p,
                                     const DiscreteDistribution& q) {
    p.validate();
    q.validate();
    if (p.probabilities.size() != q.probabilities.size())
        throw ValidationError("perception_distortion: alphabet mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.probabilities.size(); ++i) {
        const double pi = p.probabilities[i];
        if (pi <= 0.0) continue;
        const double qi = q.probabilities[i];
        if (qi <= 0.0) return {std::numeric_limits<double>::infinity(), true};
        kl += pi * std::log2(pi / qi);
    }
    return {std::max(kl, 0.0), false};
}

double semantic_rate(double rho, const MIEstimate& mi) {
    if (!(rho > 0.0)) throw ValidationError("semantic_rate: rho must be positive");
    if (!(mi.value_bits >= -1e-9)) throw ValidationError("semantic_rate: invalid MI value");
    return rho * mi.value_bits;
}

}  // namespace semcom::metrics
