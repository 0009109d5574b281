#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "semcom/sources.hpp"
#include "semcom/types.hpp"

namespace semcom::metrics {

// All measures in this module are in bits (log base 2).

struct DiscreteDistribution {
    std::vector<double> probabilities;

    void validate() const;  // nonnegative, sums to 1 within 1e-9
    double entropy_bits() const;
};

// Co-occurrence counts over two finite alphabets.
struct JointCounts {
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;

    static JointCounts from_pairs(std::span<const int> a, std::span<const int> b,
                                  int a_alphabet, int b_alphabet);
    void validate() const;  // nonnegative, total >= 1
    std::int64_t total() const { return counts.sum(); }
};

enum class Estimator { PlugIn, Variational };

struct MIEstimate {
    double value_bits = 0.0;
    Estimator estimator = Estimator::PlugIn;
    std::int64_t sample_count = 0;
    std::optional<double> confidence_half_width_bits;
};

// Maximum-likelihood plug-in entropy of a count vector, with 0*log 0 = 0.
double entropy_plugin(std::span<const std::int64_t> counts);

// Plug-in mutual information I = H(row) + H(col) - H(joint), clamped to >= 0.
MIEstimate mi_plugin(const JointCounts& joint);

// Exact mutual information of a (normalized) joint probability matrix.
double mi_bits_from_joint(const Eigen::MatrixXd& joint);

// Contrastive variational lower bound on I(U;V) from paired samples
// (columns of u and v). Trains a separable scorer on a held-in split and
// reports the bound on held-out batches; never exceeds log2(batch).
struct MiVariationalOptions {
    int steps = 1500;
    int batch = 256;
    int hidden = 64;
    int embed = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
};
MIEstimate mi_variational(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                          const MiVariationalOptions& options = {});

// View of a discrete deterministic encoder (argmax mode, channel bypassed),
// as needed by the empirical semantic entropy.
class MessageEncoder {
   public:
    virtual ~MessageEncoder() = default;
    virtual SemanticMessage encode(const sources::LabeledSample& sample) const = 0;
    virtual int alphabet_size() const = 0;   // K
    virtual int message_length() const = 0;  // m
};

struct EseBits {
    double per_message = 0.0;
    double per_symbol = 0.0;  // pooled index histogram
};

// Plug-in entropy of the encoder's message distribution over the dataset.
EseBits empirical_semantic_entropy(const MessageEncoder& encoder,
                                   const sources::Dataset& dataset);

// A measure that can saturate to +infinity (zero predicted probability on a
// realized outcome, or a support violation in a divergence).
struct SaturatingBits {
    double bits = 0.0;
    bool saturated = false;
};

// Mean over samples of -log2 p(true label); predictive columns are
// per-sample distributions over classes.
SaturatingBits classification_distortion(const Eigen::MatrixXd& predictive,
                                         std::span<const int> labels);

// KL(p || q) in bits.
SaturatingBits perception_distortion(const DiscreteDistribution& p,
                                     const DiscreteDistribution& q);

enum class RateKind { GroundTruth, Empirical };

// rho symbols per channel use times the mutual information, bits per use.
double semantic_rate(double rho, const MIEstimate& mi);

}  // namespace semcom::metrics
