#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "semcom/rng.hpp"

namespace semcom::sources {

struct LabeledSample {
    std::vector<float> x;              // normalized to [0,1] per coordinate
    int label = 0;                     // in {0..C-1}
    std::optional<int> private_attr;   // in {0..P-1}, present iff augmented
};

enum class Split { Train, Test };
enum class Provenance { CorpusFile, Synthetic };

// Immutable after construction; safe to share across concurrent readers.
class Dataset {
   public:
    Dataset(std::vector<LabeledSample> samples, int class_count, Split split,
            Provenance provenance, int image_rows = 0, int image_cols = 0);

    const std::vector<LabeledSample>& samples() const { return samples_; }
    std::size_t size() const { return samples_.size(); }
    int dimension() const { return dimension_; }
    int class_count() const { return class_count_; }
    Split split() const { return split_; }
    Provenance provenance() const { return provenance_; }
    int image_rows() const { return image_rows_; }
    int image_cols() const { return image_cols_; }

    bool privacy_augmented() const { return private_cardinality_ > 0; }
    int private_cardinality() const { return private_cardinality_; }

    std::vector<std::int64_t> label_counts() const;
    std::vector<std::int64_t> private_attr_counts() const;

   private:
    friend Dataset attach_private_attribute(const Dataset&, const struct PrivateRule&,
                                            std::uint64_t);
    std::vector<LabeledSample> samples_;
    int dimension_ = 0;
    int class_count_ = 0;
    Split split_ = Split::Train;
    Provenance provenance_ = Provenance::Synthetic;
    int image_rows_ = 0, image_cols_ = 0;
    int private_cardinality_ = 0;
};

// IDX corpus ingestion (big-endian magic 0x00000803 images / 0x00000801
// labels). Pixels are scaled from {0..255} to [0,1] by division by 255.
Dataset load_idx_corpus(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path,
                        Split split = Split::Train);

// Re-serializes an ingested corpus to the same IDX byte format.
void save_idx_corpus(const Dataset& dataset, const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path);

// Synthetic source with analytically known ground-truth semantic entropy:
// labels drawn from class_probabilities, observations from a per-class
// isotropic Gaussian clamped to [0,1].
struct OracleSourceSpec {
    std::vector<double> class_probabilities;
    std::vector<std::vector<double>> class_means;  // one vector of size `dimension` per class
    std::vector<double> class_scales;              // isotropic spread per class
    int dimension = 0;
    std::int64_t sample_count = 0;
    std::uint64_t seed = 0;

    void validate() const;

    // Shannon entropy of class_probabilities, in bits: the GSE of this
    // source, since the label is a minimal sufficient statistic of x by
    // construction.
    double ground_truth_semantic_entropy_bits() const;

    // Deterministic well-separated means in [0.2,0.8]^d for quick setups.
    static OracleSourceSpec with_auto_means(std::vector<double> class_probabilities,
                                            int dimension, std::int64_t sample_count,
                                            std::uint64_t seed, double scale = 0.05);
};

Dataset make_oracle_source(const OracleSourceSpec& spec);

// Deterministic-or-stochastic map from (x, y) to a private attribute.
struct PrivateRule {
    int cardinality = 0;  // P
    std::function<int(const std::vector<float>& x, int label, Rng& rng)> fn;

    static PrivateRule parity(int p);       // s = y mod p
    static PrivateRule constant(int value, int p);
    static PrivateRule coin(int p);         // independent uniform over {0..p-1}
};

// Returns a copy of `dataset` where every sample carries a private
// attribute; x and y are untouched. Reproducible given `seed`.
Dataset attach_private_attribute(const Dataset& dataset, const PrivateRule& rule,
                                 std::uint64_t seed);

}  // namespace semcom::sources
