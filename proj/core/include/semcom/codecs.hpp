#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "semcom/autodiff.hpp"
#include "semcom/info_metrics.hpp"
#include "semcom/phy.hpp"
#include "semcom/rng.hpp"
#include "semcom/sources.hpp"
#include "semcom/types.hpp"

namespace semcom::codecs {

enum class Activation { Relu, Tanh };

struct MlpSpec {
    std::vector<int> dims;  // input, hidden..., output
    Activation activation = Activation::Relu;
    // Zero final layer gives symmetric starts (uniform predictions). Encoder
    // stacks that feed a power normalizer must opt out: an exactly-zero
    // latent has no direction to normalize.
    bool zero_init_last = true;
};

// Collects (tensor, graph-node) bindings by component tag so training loops
// can step parameter subsets ("enc", "cb", "dec", "adv").
struct ParamMap {
    std::vector<std::string> tags;
    std::vector<nn::Mat*> tensors;
    std::vector<nn::Graph::NodeId> ids;

    void add(std::string tag, nn::Mat* tensor, nn::Graph::NodeId id);
    // Tensors/gradients whose tag is in `wanted` (empty -> all).
    std::pair<std::vector<nn::Mat*>, std::vector<const nn::Mat*>> select(
        const nn::Graph& g, std::span<const std::string> wanted) const;
};

// Plain fully connected stack. Hidden layers use He-scaled init; the final
// layer starts at zero so fresh models predict uniformly.
class Mlp {
   public:
    Mlp() = default;
    Mlp(MlpSpec spec, Rng& rng);

    // Trainable forward: weights enter the graph as parameters, recorded in
    // `params` under `tag`. Pass nullptr to freeze this component.
    nn::Graph::NodeId forward(nn::Graph& g, nn::Graph::NodeId x, ParamMap* params,
                              const std::string& tag);
    // Frozen forward on a const model.
    nn::Graph::NodeId forward(nn::Graph& g, nn::Graph::NodeId x) const;

    // Convenience plain-Eigen forward (no graph).
    nn::Mat forward_plain(const nn::Mat& x) const;

    const MlpSpec& spec() const { return spec_; }
    std::vector<std::pair<std::string, nn::Mat*>> named_tensors(const std::string& prefix);

   private:
    MlpSpec spec_;
    std::vector<nn::Mat> weights_;
    std::vector<nn::Mat> biases_;
};

// ---------------------------------------------------------------------------
// DT-RIB: discrete codebook encoder + digital modulation + task decoder.

struct DtribSpec {
    int input_dim = 0;
    int class_count = 0;
    std::vector<int> encoder_hidden{512, 256};
    std::vector<int> decoder_hidden{256};
    int message_length = 16;  // m
    int codebook_size = 16;   // K, must equal the paired modulation order
    int codeword_dim = 16;    // d_c
    Activation activation = Activation::Relu;
    bool straight_through = false;  // hard forward, relaxed backward
};

struct DtribModel {
    DtribSpec spec;
    Mlp encoder;       // input -> m*K logits
    nn::Mat codebook;  // d_c x K
    Mlp decoder;       // m*d_c soft-codeword mixture -> classes

    DtribModel() = default;
    // Enforces codebook_size == channel modulation order.
    DtribModel(const DtribSpec& s, const phy::ChannelConfig& paired_channel,
               std::uint64_t seed);
};

enum class EncodeMode { Argmax, Relaxed };

struct EncodeResult {
    SemanticMessage message;                      // argmax indices
    std::optional<Eigen::MatrixXd> relaxed_weights;  // K x m, relaxed mode only
};

// Single-sample discrete encoding. Argmax ties resolve to the lowest index;
// relaxed mode draws Gumbel-softmax weights per position.
EncodeResult encode_discrete(const DtribModel& model, const std::vector<float>& x,
                             EncodeMode mode, double tau, std::uint64_t seed);

// Received soft symbols -> constellation-similarity weights -> soft codeword
// mixture -> decoder head. Returns a valid distribution over classes.
metrics::DiscreteDistribution decode_task(const DtribModel& model,
                                          const phy::SymbolBlock& received,
                                          const phy::ChannelConfig& config);

// Differentiable training forward for one batch (columns of x).
struct DtribForward {
    nn::Graph::NodeId class_logits;     // C x B
    nn::Graph::NodeId pre_channel_mix;  // m*d_c x B, relaxed codeword mixture
    // Hard codeword lookup of the argmax messages with a straight-through
    // gradient into the relaxed weights: the representation an eval-time
    // read-out actually sees, kept differentiable for adversaries.
    nn::Graph::NodeId pre_channel_hard;
    std::vector<SemanticMessage> messages;    // argmax Z per sample
    std::vector<SemanticMessage> hard_demod;  // Zhat under the same channel draw
};
DtribForward dtrib_relaxed_forward(nn::Graph& g, DtribModel& model, const nn::Mat& x,
                                   double tau, const phy::ChannelConfig& config, Rng& rng,
                                   ParamMap* params);

// Deterministic evaluation forward: argmax encoding, hard PSK transmission,
// soft receiver front-end into the decoder.
struct DtribEval {
    Eigen::MatrixXd class_probs;  // C x B
    std::vector<SemanticMessage> messages;
    std::vector<SemanticMessage> hard_demod;
};
DtribEval dtrib_eval_forward(const DtribModel& model, const nn::Mat& x,
                             const phy::ChannelConfig& config);

// Stochastic deployment forward: messages are sampled from the encoder's
// categorical distribution (Gumbel-max on the logits) instead of argmax.
// The privacy-preserving configuration transmits this way; the sampling
// seed makes it reproducible.
DtribEval dtrib_sampled_eval_forward(const DtribModel& model, const nn::Mat& x,
                                     const phy::ChannelConfig& config,
                                     std::uint64_t sample_seed);

// ---------------------------------------------------------------------------
// Analog baselines (same DNN budget, no binary interface).

struct AnalogSpec {
    int input_dim = 0;
    int class_count = 0;
    std::vector<int> encoder_hidden{512, 256};
    std::vector<int> decoder_hidden{256};
    int symbols = 16;  // m complex channel symbols per sample
    Activation activation = Activation::Relu;
};

// DeepJSCC-style: encoder emits 2m reals taken as m complex symbols,
// power-normalized per sample to unit average symbol power.
struct JsccModel {
    AnalogSpec spec;
    Mlp encoder;  // input -> 2m
    Mlp decoder;  // 2m -> classes

    JsccModel() = default;
    JsccModel(const AnalogSpec& s, std::uint64_t seed);
};

// VFE-style: encoder emits mean and log-spread of a diagonal Gaussian
// latent; the reparameterized sample is power-normalized and transmitted.
struct VibModel {
    AnalogSpec spec;
    Mlp encoder;  // input -> 4m (mu, log_std)
    Mlp decoder;  // 2m -> classes

    VibModel() = default;
    VibModel(const AnalogSpec& s, std::uint64_t seed);
};

struct AnalogForward {
    nn::Graph::NodeId class_logits;
    nn::Graph::NodeId mu = -1;       // VIB only
    nn::Graph::NodeId log_std = -1;  // VIB only
};
AnalogForward jscc_forward(nn::Graph& g, JsccModel& model, const nn::Mat& x,
                           const phy::ChannelConfig& config, Rng& rng, ParamMap* params);
AnalogForward vib_forward(nn::Graph& g, VibModel& model, const nn::Mat& x,
                          const phy::ChannelConfig& config, Rng& rng, ParamMap* params,
                          bool sample_latent);

Eigen::MatrixXd jscc_eval_forward(const JsccModel& model, const nn::Mat& x,
                                  const phy::ChannelConfig& config, std::uint64_t seed);
// Evaluation transmits the (normalized) latent mean.
Eigen::MatrixXd vib_eval_forward(const VibModel& model, const nn::Mat& x,
                                 const phy::ChannelConfig& config, std::uint64_t seed);

// Single-sample baseline ops.
metrics::DiscreteDistribution analog_jscc(const JsccModel& model, const std::vector<float>& x,
                                          const phy::ChannelConfig& config, std::uint64_t seed);
metrics::DiscreteDistribution analog_vib(const VibModel& model, const std::vector<float>& x,
                                         const phy::ChannelConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// CLUB: DT-RIB pipeline plus an adversary on the pre-channel representation.

struct ClubModel {
    DtribModel base;
    Mlp adversary;  // m*d_c -> private cardinality
    int private_cardinality = 2;
    std::vector<int> adversary_hidden{64};

    ClubModel() = default;
    ClubModel(const DtribSpec& s, int private_cardinality, std::vector<int> adversary_hidden,
              const phy::ChannelConfig& paired_channel, std::uint64_t seed);
};

using AnyModel = std::variant<DtribModel, JsccModel, VibModel, ClubModel>;

enum class CodecKind { Dtrib, AnalogJscc, AnalogVib, Club };
CodecKind kind_of(const AnyModel& model);
std::string codec_name(CodecKind kind);

// ---------------------------------------------------------------------------
// Message-encoder adapters for the empirical semantic entropy.

class DtribMessageEncoder final : public metrics::MessageEncoder {
   public:
    explicit DtribMessageEncoder(const DtribModel& model) : model_(&model) {}
    SemanticMessage encode(const sources::LabeledSample& sample) const override;
    int alphabet_size() const override { return model_->spec.codebook_size; }
    int message_length() const override { return model_->spec.message_length; }

   private:
    const DtribModel* model_;
};

// The ideal semantic source encoder on an oracle source: emits the label.
class IdealLabelEncoder final : public metrics::MessageEncoder {
   public:
    explicit IdealLabelEncoder(int class_count) : class_count_(class_count) {}
    SemanticMessage encode(const sources::LabeledSample& sample) const override {
        return SemanticMessage{{sample.label}};
    }
    int alphabet_size() const override { return class_count_; }
    int message_length() const override { return 1; }

   private:
    int class_count_;
};

// ---------------------------------------------------------------------------
// Checkpoints: self-describing container, versioned "SEMCOM-CKPT-1",
// parameter arrays as little-endian 32-bit floats. Writes are atomic
// (temp file + rename).

void save_checkpoint(const std::filesystem::path& path, const AnyModel& model,
                     const std::string& config_text);

struct LoadedCheckpoint {
    AnyModel model;
    std::string arch_descriptor;
    std::string config_text;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

std::string arch_descriptor(const AnyModel& model);

// Batch assembly: samples as columns.
struct Batch {
    nn::Mat x;
    std::vector<int> labels;
    std::vector<int> private_attrs;  // empty unless privacy-augmented
};
Batch make_batch(const sources::Dataset& dataset, std::span<const int> indices);

}  // namespace semcom::codecs
