#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "semcom/codecs.hpp"
#include "semcom/config.hpp"
#include "semcom/info_metrics.hpp"
#include "semcom/objectives.hpp"
#include "semcom/phy.hpp"
#include "semcom/sources.hpp"

namespace semcom::harness {

enum class DatasetKind { Idx, Oracle };

// `ideal` is the channel-bypassing oracle encoder used by the metrics verb;
// it is not trainable.
enum class CodecChoice { Dtrib, AnalogJscc, AnalogVib, Club, Ideal };

struct ExperimentConfig {
    // dataset
    DatasetKind dataset_kind = DatasetKind::Oracle;
    std::filesystem::path data_dir;  // idx corpus directory
    int oracle_classes = 4;
    int oracle_dim = 16;
    std::int64_t train_count = 20000;
    std::int64_t test_count = 10000;
    double oracle_scale = 0.05;
    std::vector<double> oracle_probs;  // empty -> uniform
    std::uint64_t dataset_seed = 42;
    std::string private_rule = "none";  // none | parity | coin | constant
    int private_cardinality = 2;

    // model
    CodecChoice codec = CodecChoice::Dtrib;
    std::vector<int> encoder_hidden{512, 256};
    std::vector<int> decoder_hidden{256};
    std::vector<int> adversary_hidden{64};
    int message_length = 16;
    int codebook_size = 16;
    int codeword_dim = 16;
    codecs::Activation activation = codecs::Activation::Relu;
    bool straight_through = false;

    // loss
    objectives::LossWeights weights;
    double tau_start = 1.0;
    double tau_end = 0.1;
    // Club leakage pressure ramps linearly from 0 to gamma over the first
    // N epochs (0 disables the ramp). Stabilizes the min-max alternation:
    // utility establishes before the anti-adversary gradient engages.
    int gamma_warmup_epochs = 0;

    // channel (training point)
    phy::ChannelConfig channel;

    // train
    int epochs = 5;
    int batch_size = 256;
    double learning_rate = 1e-3;
    // Club adversary phase; 0 means "same as learning_rate". Keeping the
    // adversary slower than the encoder stabilizes the min-max alternation.
    double adversary_learning_rate = 0.0;
    std::vector<std::uint64_t> seeds{1, 2, 3};

    // eval
    std::vector<double> eval_snr_db{-10, -5, 0, 4, 8, 12, 18};
    std::filesystem::path checkpoint_dir;  // empty -> the --out directory
    double rho = 1.0;                      // semantic symbols per channel use

    static ExperimentConfig from_config(const Config& cfg);
    void validate() const;
};

struct DatasetPair {
    sources::Dataset train;
    sources::Dataset test;
};
DatasetPair build_datasets(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Training

struct TrainOutcome {
    std::vector<std::filesystem::path> checkpoints;  // one per seed
    std::vector<std::filesystem::path> train_logs;
};

// Trains one model per seed with mini-batch Adam and fresh channel noise per
// batch at the training SNR. Checkpoints and logs are written atomically
// into out_dir; the effective config is serialized next to them.
TrainOutcome train(const ExperimentConfig& cfg, const Config& raw_config,
                   const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// Evaluation

struct MetricsRecord {
    std::string codec;
    double snr_db = 0.0;
    double accuracy = 0.0;
    double ese_bits_per_msg = std::numeric_limits<double>::quiet_NaN();
    double ese_bits_per_symbol = std::numeric_limits<double>::quiet_NaN();
    double mi_z_zhat_bits = std::numeric_limits<double>::quiet_NaN();
    double empirical_rate_bits_per_use = std::numeric_limits<double>::quiet_NaN();
    double class_distortion_bits = 0.0;
    double perception_distortion_bits = 0.0;
    std::uint64_t seed = 0;
    // Not part of the CSV schema; surfaced by the metrics verb.
    std::optional<double> ground_truth_rate_bits;
};

struct ResultsTable {
    std::vector<MetricsRecord> rows;

    void validate() const;  // non-empty, one row per (codec, snr, seed)
};

// Loads each seed's checkpoint and evaluates the full SNR grid without
// retraining (train once at the training SNR, sweep the test grid).
ResultsTable evaluate_sweep(const ExperimentConfig& cfg, const Config& raw_config,
                            const std::filesystem::path& out_dir);

// Writes results.csv (schema-pinned columns, '#' metadata header echoing the
// effective config) and an accuracy-vs-SNR SVG plot, one curve per codec
// with a min/max band over seeds. Deterministic byte-for-byte.
void emit_report(const ResultsTable& results, const Config& effective_config,
                 const std::filesystem::path& out_dir);

// Re-renders only the plot (the `report` verb: the CSV already exists).
void emit_plot(const ResultsTable& results, const std::filesystem::path& out_dir);

ResultsTable load_results_csv(const std::filesystem::path& csv_path);

// ---------------------------------------------------------------------------
// Shared evaluation helpers (used by the sweep, the metrics verb, tests).

// Empirical semantic entropy of a trained model, channel bypassed. Throws
// EstimatorError for continuous-valued (analog) codecs.
metrics::EseBits ese_for_model(const codecs::AnyModel& model, const sources::Dataset& dataset);

struct CellMetrics {
    double accuracy = 0.0;
    metrics::SaturatingBits class_distortion;
    double mi_z_zhat_bits = std::numeric_limits<double>::quiet_NaN();
    metrics::SaturatingBits perception;
    double ground_truth_rate_bits = 0.0;
    // Club only: in-loop adversary accuracy on the private attribute.
    std::optional<double> adversary_accuracy;
};
// Evaluates a frozen model on `test` at one channel point.
CellMetrics evaluate_cell(const codecs::AnyModel& model, const sources::Dataset& test,
                          const phy::ChannelConfig& channel, std::uint64_t eval_seed,
                          double rho);

// Deterministic per-cell seed derivation.
std::uint64_t cell_seed(std::uint64_t seed, double snr_db);

// Atomic text write: temp file in the same directory, then rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace semcom::harness
