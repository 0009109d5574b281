#include "semcom/sources.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "semcom/errors.hpp"

namespace semcom::sources {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw IoError("truncated file: " + path.string());
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Dataset::Dataset(std::vector<LabeledSample> samples, int class_count, Split split,
                 Provenance provenance, int image_rows, int image_cols)
    : samples_(std::move(samples)),
      class_count_(class_count),
      split_(split),
      provenance_(provenance),
      image_rows_(image_rows),
      image_cols_(image_cols) {
    if (samples_.empty()) throw ValidationError("Dataset: empty sample list");
    dimension_ = static_cast<int>(samples_[0].x.size());
    const bool augmented = samples_[0].private_attr.has_value();
    int max_s = -1;
    for (const auto& s : samples_) {
        if (static_cast<int>(s.x.size()) != dimension_)
            throw ValidationError("Dataset: inconsistent sample dimension");
        if (s.label < 0 || s.label >= class_count_)
            throw ValidationError("Dataset: label out of range");
        if (s.private_attr.has_value() != augmented)
            throw ValidationError("Dataset: private attribute present on some samples only");
        for (float v : s.x) {
            if (!std::isfinite(v)) throw ValidationError("Dataset: non-finite observation");
        }
        if (augmented) max_s = std::max(max_s, *s.private_attr);
    }
    private_cardinality_ = augmented ? max_s + 1 : 0;
}

std::vector<std::int64_t> Dataset::label_counts() const {
    std::vector<std::int64_t> counts(class_count_, 0);
    for (const auto& s : samples_) ++counts[s.label];
    return counts;
}

std::vector<std::int64_t> Dataset::private_attr_counts() const {
    if (!privacy_augmented())
        throw ValidationError("private_attr_counts: dataset is not privacy-augmented");
    std::vector<std::int64_t> counts(private_cardinality_, 0);
    for (const auto& s : samples_) ++counts[*s.private_attr];
    return counts;
}

Dataset load_idx_corpus(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path, Split split) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw IoError("cannot open " + images_path.string());
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw IoError("cannot open " + labels_path.string());

    const std::uint32_t img_magic = read_be32(img, images_path);
    if (img_magic != kImageMagic)
        throw FormatError("bad image magic in " + images_path.string() + " (expected 0x803)");
    const std::uint32_t lab_magic = read_be32(lab, labels_path);
    if (lab_magic != kLabelMagic)
        throw FormatError("bad label magic in " + labels_path.string() + " (expected 0x801)");

    const std::uint32_t n_images = read_be32(img, images_path);
    const std::uint32_t rows = read_be32(img, images_path);
    const std::uint32_t cols = read_be32(img, images_path);
    const std::uint32_t n_labels = read_be32(lab, labels_path);
    if (n_images != n_labels)
        throw FormatError("corrupt corpus: image count " + std::to_string(n_images) +
                          " != label count " + std::to_string(n_labels));
    const std::size_t dim = std::size_t(rows) * cols;

    std::vector<unsigned char> pixel_buf(dim);
    std::vector<LabeledSample> samples;
    samples.reserve(n_images);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        if (!img.read(reinterpret_cast<char*>(pixel_buf.data()),
                      static_cast<std::streamsize>(dim)))
            throw IoError("truncated image data in " + images_path.string());
        unsigned char label_byte;
        if (!lab.read(reinterpret_cast<char*>(&label_byte), 1))
            throw IoError("truncated label data in " + labels_path.string());
        if (label_byte > 9)
            throw FormatError("label out of range {0..9} in " + labels_path.string());
        LabeledSample s;
        s.x.resize(dim);
        for (std::size_t j = 0; j < dim; ++j)
            s.x[j] = static_cast<float>(pixel_buf[j]) / 255.0f;
        s.label = label_byte;
        samples.push_back(std::move(s));
    }
    return Dataset(std::move(samples), 10, split, Provenance::CorpusFile,
                   static_cast<int>(rows), static_cast<int>(cols));
}

void save_idx_corpus(const Dataset& dataset, const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path) {
    if (dataset.image_rows() <= 0 || dataset.image_cols() <= 0)
        throw ValidationError("save_idx_corpus: dataset has no image geometry");
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw IoError("cannot open " + images_path.string() + " for writing");
    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw IoError("cannot open " + labels_path.string() + " for writing");

    const auto n = static_cast<std::uint32_t>(dataset.size());
    write_be32(img, kImageMagic);
    write_be32(img, n);
    write_be32(img, static_cast<std::uint32_t>(dataset.image_rows()));
    write_be32(img, static_cast<std::uint32_t>(dataset.image_cols()));
    write_be32(lab, kLabelMagic);
    write_be32(lab, n);

    std::vector<unsigned char> pixel_buf(dataset.dimension());
    for (const auto& s : dataset.samples()) {
        for (std::size_t j = 0; j < s.x.size(); ++j)
            pixel_buf[j] = static_cast<unsigned char>(
                std::lround(static_cast<double>(s.x[j]) * 255.0));
        img.write(reinterpret_cast<const char*>(pixel_buf.data()),
                  static_cast<std::streamsize>(pixel_buf.size()));
        const unsigned char label_byte = static_cast<unsigned char>(s.label);
        lab.write(reinterpret_cast<const char*>(&label_byte), 1);
    }
    if (!img || !lab) throw IoError("short write while serializing corpus");
}

void OracleSourceSpec::validate() const {
    if (class_probabilities.empty())
        throw ValidationError("oracle spec: no class probabilities");
    double sum = 0.0;
    for (double p : class_probabilities) {
        if (!(p >= 0.0)) throw ValidationError("oracle spec: negative class probability");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw ValidationError("oracle spec: class probabilities must sum to 1");
    if (dimension <= 0) throw ValidationError("oracle spec: dimension must be positive");
    if (sample_count <= 0) throw ValidationError("oracle spec: sample count must be positive");
    if (class_means.size() != class_probabilities.size() ||
        class_scales.size() != class_probabilities.size())
        throw ValidationError("oracle spec: one mean vector and scale per class required");
    for (const auto& m : class_means)
        if (static_cast<int>(m.size()) != dimension)
            throw ValidationError("oracle spec: mean dimension mismatch");
    for (double s : class_scales)
        if (!(s > 0.0)) throw ValidationError("oracle spec: scale must be positive");
}

double OracleSourceSpec::ground_truth_semantic_entropy_bits() const {
    double h = 0.0;
    for (double p : class_probabilities)
        if (p > 0.0) h -= p * std::log2(p);
    return h;
}

OracleSourceSpec OracleSourceSpec::with_auto_means(std::vector<double> class_probabilities,
                                                   int dimension, std::int64_t sample_count,
                                                   std::uint64_t seed, double scale) {
    OracleSourceSpec spec;
    const std::size_t c = class_probabilities.size();
    spec.class_probabilities = std::move(class_probabilities);
    spec.dimension = dimension;
    spec.sample_count = sample_count;
    spec.seed = seed;
    spec.class_scales.assign(c, scale);
    // Means come from a fixed stream so the same (C, d) always yields the
    // same layout regardless of the sampling seed.
    Rng rng(0x00AC1Eull);
    spec.class_means.resize(c);
    for (std::size_t k = 0; k < c; ++k) {
        spec.class_means[k].resize(dimension);
        for (int j = 0; j < dimension; ++j)
            spec.class_means[k][j] = 0.2 + 0.6 * rng.uniform01();
    }
    return spec;
}

Dataset make_oracle_source(const OracleSourceSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    // Class-first sampling: y from the class distribution, then x from the
    // class emission, clamped into the [0,1] observation box.
    std::vector<double> cdf(spec.class_probabilities.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < cdf.size(); ++k) {
        acc += spec.class_probabilities[k];
        cdf[k] = acc;
    }
    std::vector<LabeledSample> samples;
    samples.reserve(spec.sample_count);
    for (std::int64_t i = 0; i < spec.sample_count; ++i) {
        const double u = rng.uniform01();
        int y = 0;
        while (y + 1 < static_cast<int>(cdf.size()) && u > cdf[y]) ++y;
        LabeledSample s;
        s.label = y;
        s.x.resize(spec.dimension);
        const auto& mean = spec.class_means[y];
        const double sc = spec.class_scales[y];
        for (int j = 0; j < spec.dimension; ++j) {
            const double v = mean[j] + sc * rng.normal();
            s.x[j] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
        samples.push_back(std::move(s));
    }
    return Dataset(std::move(samples), static_cast<int>(spec.class_probabilities.size()),
                   Split::Train, Provenance::Synthetic);
}

PrivateRule PrivateRule::parity(int p) {
    if (p < 1) throw ValidationError("parity rule: cardinality must be >= 1");
    return {p, [p](const std::vector<float>&, int label, Rng&) { return label % p; }};
}

PrivateRule PrivateRule::constant(int value, int p) {
    if (value < 0 || value >= p) throw ValidationError("constant rule: value out of range");
    return {p, [value](const std::vector<float>&, int, Rng&) { return value; }};
}

PrivateRule PrivateRule::coin(int p) {
    if (p < 1) throw ValidationError("coin rule: cardinality must be >= 1");
    return {p, [p](const std::vector<float>&, int, Rng& rng) {
                return static_cast<int>(rng.below(static_cast<std::uint64_t>(p)));
            }};
}

Dataset attach_private_attribute(const Dataset& dataset, const PrivateRule& rule,
                                 std::uint64_t seed) {
    if (rule.cardinality < 1 || !rule.fn)
        throw ValidationError("attach_private_attribute: invalid rule");
    Rng rng(seed);
    Dataset out = dataset;
    for (auto& s : out.samples_) {
        const int v = rule.fn(s.x, s.label, rng);
        if (v < 0 || v >= rule.cardinality)
            throw ValidationError("attach_private_attribute: rule output out of range");
        s.private_attr = v;
    }
    out.private_cardinality_ = rule.cardinality;
    return out;
}

}  // namespace semcom::sources
