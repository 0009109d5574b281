#include "semcom/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <span>
#include <sstream>

#include "semcom/errors.hpp"

namespace semcom::harness {

namespace {

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
    return mix64(a * 0x9E3779B97F4A7C15ull + mix64(b + mix64(c)));
}

std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

CodecChoice parse_codec(const std::string& s) {
    if (s == "dtrib") return CodecChoice::Dtrib;
    if (s == "analog_jscc") return CodecChoice::AnalogJscc;
    if (s == "analog_vib") return CodecChoice::AnalogVib;
    if (s == "club") return CodecChoice::Club;
    if (s == "ideal") return CodecChoice::Ideal;
    throw ValidationError("config: unknown codec '" + s + "'");
}

std::string codec_choice_name(CodecChoice c) {
    switch (c) {
        case CodecChoice::Dtrib: return "dtrib";
        case CodecChoice::AnalogJscc: return "analog_jscc";
        case CodecChoice::AnalogVib: return "analog_vib";
        case CodecChoice::Club: return "club";
        case CodecChoice::Ideal: return "ideal";
    }
    return "unknown";
}

}  // namespace

ExperimentConfig ExperimentConfig::from_config(const Config& cfg) {
    ExperimentConfig e;
    const std::string kind = cfg.get("dataset.kind", "oracle");
    if (kind == "oracle")
        e.dataset_kind = DatasetKind::Oracle;
    else if (kind == "idx")
        e.dataset_kind = DatasetKind::Idx;
    else
        throw ValidationError("config: unknown dataset.kind '" + kind + "'");
    e.data_dir = cfg.get("dataset.path", "");
    e.oracle_classes = cfg.get_int("dataset.classes", e.oracle_classes);
    e.oracle_dim = cfg.get_int("dataset.dim", e.oracle_dim);
    e.train_count = cfg.get_int("dataset.train_count", static_cast<int>(e.train_count));
    e.test_count = cfg.get_int("dataset.test_count", static_cast<int>(e.test_count));
    e.oracle_scale = cfg.get_double("dataset.scale", e.oracle_scale);
    e.oracle_probs = cfg.get_double_list("dataset.probs", {});
    e.dataset_seed = static_cast<std::uint64_t>(cfg.get_int("dataset.seed", 42));
    e.private_rule = cfg.get("dataset.private_rule", "none");
    e.private_cardinality = cfg.get_int("dataset.private_cardinality", 2);

    e.codec = parse_codec(cfg.get("model.codec", "dtrib"));
    e.encoder_hidden = cfg.get_int_list("model.encoder_hidden", e.encoder_hidden);
    e.decoder_hidden = cfg.get_int_list("model.decoder_hidden", e.decoder_hidden);
    e.adversary_hidden = cfg.get_int_list("model.adversary_hidden", e.adversary_hidden);
    e.message_length = cfg.get_int("model.m", e.message_length);
    e.codebook_size = cfg.get_int("model.K", e.codebook_size);
    e.codeword_dim = cfg.get_int("model.dc", e.codeword_dim);
    const std::string act = cfg.get("model.activation", "relu");
    if (act == "relu")
        e.activation = codecs::Activation::Relu;
    else if (act == "tanh")
        e.activation = codecs::Activation::Tanh;
    else
        throw ValidationError("config: unknown activation '" + act + "'");
    e.straight_through = cfg.get_bool("model.straight_through", false);

    e.weights.beta = cfg.get_double("loss.beta", e.weights.beta);
    e.weights.lambda = cfg.get_double("loss.lambda", e.weights.lambda);
    e.weights.gamma = cfg.get_double("loss.gamma", e.weights.gamma);
    e.tau_start = cfg.get_double("loss.tau_start", e.tau_start);
    e.tau_end = cfg.get_double("loss.tau_end", e.tau_end);
    e.gamma_warmup_epochs = cfg.get_int("loss.gamma_warmup_epochs", 0);

    const std::string ch_model = cfg.get("channel.model", "awgn");
    if (ch_model == "awgn")
        e.channel.model = phy::ChannelModel::Awgn;
    else if (ch_model == "rayleigh")
        e.channel.model = phy::ChannelModel::Rayleigh;
    else
        throw ValidationError("config: unknown channel.model '" + ch_model + "'");
    e.channel.modulation_order = cfg.get_int("channel.modulation_order", 16);
    e.channel.peak_snr_db = cfg.get_double("channel.peak_snr_db", 8.0);
    const std::string csi = cfg.get("channel.csi", "perfect-receiver");
    if (csi == "perfect-receiver")
        e.channel.csi = phy::Csi::PerfectReceiver;
    else if (csi == "none")
        e.channel.csi = phy::Csi::None;
    else
        throw ValidationError("config: unknown channel.csi '" + csi + "'");

    e.epochs = cfg.get_int("train.epochs", e.epochs);
    e.batch_size = cfg.get_int("train.batch_size", e.batch_size);
    e.learning_rate = cfg.get_double("train.learning_rate", e.learning_rate);
    e.adversary_learning_rate = cfg.get_double("train.adversary_learning_rate", 0.0);
    e.seeds = cfg.get_u64_list("train.seeds", e.seeds);

    e.eval_snr_db = cfg.get_double_list("eval.snr_grid_db", e.eval_snr_db);
    e.checkpoint_dir = cfg.get("eval.checkpoint_dir", "");
    e.rho = cfg.get_double("eval.rho", 1.0);

    e.validate();
    return e;
}

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw ValidationError("config: at least one seed required");
    if (epochs < 0) throw ValidationError("config: epochs must be >= 0");
    if (batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ValidationError("config: learning_rate must be positive");
    if (!(tau_start > 0.0) || !(tau_end > 0.0))
        throw ValidationError("config: temperature schedule must be positive");
    if (!(rho > 0.0)) throw ValidationError("config: rho must be positive");
    weights.validate();
    channel.validate();
    if (dataset_kind == DatasetKind::Idx && data_dir.empty())
        throw ValidationError("config: dataset.path required for idx corpora");
    if (dataset_kind == DatasetKind::Oracle) {
        if (oracle_classes < 1) throw ValidationError("config: dataset.classes must be >= 1");
        if (!oracle_probs.empty() &&
            static_cast<int>(oracle_probs.size()) != oracle_classes)
            throw ValidationError("config: dataset.probs size must match dataset.classes");
    }
    if (codec == CodecChoice::Club && private_rule == "none")
        throw ValidationError("config: club requires a private attribute rule");
    if (eval_snr_db.empty()) throw ValidationError("config: empty eval SNR grid");
}

DatasetPair build_datasets(const ExperimentConfig& cfg) {
    auto attach = [&cfg](sources::Dataset d, std::uint64_t seed) {
        if (cfg.private_rule == "none") return d;
        sources::PrivateRule rule;
        if (cfg.private_rule == "parity")
            rule = sources::PrivateRule::parity(cfg.private_cardinality);
        else if (cfg.private_rule == "coin")
            rule = sources::PrivateRule::coin(cfg.private_cardinality);
        else if (cfg.private_rule == "constant")
            rule = sources::PrivateRule::constant(0, cfg.private_cardinality);
        else
            throw ValidationError("config: unknown private rule '" + cfg.private_rule + "'");
        return sources::attach_private_attribute(d, rule, seed);
    };

    if (cfg.dataset_kind == DatasetKind::Idx) {
        auto train = sources::load_idx_corpus(cfg.data_dir / "train-images-idx3-ubyte",
                                              cfg.data_dir / "train-labels-idx1-ubyte",
                                              sources::Split::Train);
        auto test = sources::load_idx_corpus(cfg.data_dir / "t10k-images-idx3-ubyte",
                                             cfg.data_dir / "t10k-labels-idx1-ubyte",
                                             sources::Split::Test);
        return {attach(std::move(train), mix_seed(cfg.dataset_seed, 0x5EED01)),
                attach(std::move(test), mix_seed(cfg.dataset_seed, 0x5EED02))};
    }
    std::vector<double> probs = cfg.oracle_probs;
    if (probs.empty())
        probs.assign(cfg.oracle_classes, 1.0 / static_cast<double>(cfg.oracle_classes));
    auto train_spec = sources::OracleSourceSpec::with_auto_means(
        probs, cfg.oracle_dim, cfg.train_count, cfg.dataset_seed, cfg.oracle_scale);
    auto test_spec = sources::OracleSourceSpec::with_auto_means(
        probs, cfg.oracle_dim, cfg.test_count, mix_seed(cfg.dataset_seed, 0x7E57),
        cfg.oracle_scale);
    return {attach(sources::make_oracle_source(train_spec), mix_seed(cfg.dataset_seed, 0x5EED01)),
            attach(sources::make_oracle_source(test_spec), mix_seed(cfg.dataset_seed, 0x5EED02))};
}

namespace {

codecs::AnyModel construct_model(const ExperimentConfig& cfg, const DatasetPair& data,
                                 std::uint64_t seed) {
    const int input_dim = data.train.dimension();
    const int classes = data.train.class_count();
    switch (cfg.codec) {
        case CodecChoice::Dtrib: {
            codecs::DtribSpec s;
            s.input_dim = input_dim;
            s.class_count = classes;
            s.encoder_hidden = cfg.encoder_hidden;
            s.decoder_hidden = cfg.decoder_hidden;
            s.message_length = cfg.message_length;
            s.codebook_size = cfg.codebook_size;
            s.codeword_dim = cfg.codeword_dim;
            s.activation = cfg.activation;
            s.straight_through = cfg.straight_through;
            return codecs::DtribModel(s, cfg.channel, seed);
        }
        case CodecChoice::AnalogJscc:
        case CodecChoice::AnalogVib: {
            codecs::AnalogSpec s;
            s.input_dim = input_dim;
            s.class_count = classes;
            s.encoder_hidden = cfg.encoder_hidden;
            s.decoder_hidden = cfg.decoder_hidden;
            s.symbols = cfg.message_length;
            s.activation = cfg.activation;
            if (cfg.codec == CodecChoice::AnalogJscc) return codecs::JsccModel(s, seed);
            return codecs::VibModel(s, seed);
        }
        case CodecChoice::Club: {
            if (!data.train.privacy_augmented())
                throw ValidationError("club: dataset is not privacy-augmented");
            codecs::DtribSpec s;
            s.input_dim = input_dim;
            s.class_count = classes;
            s.encoder_hidden = cfg.encoder_hidden;
            s.decoder_hidden = cfg.decoder_hidden;
            s.message_length = cfg.message_length;
            s.codebook_size = cfg.codebook_size;
            s.codeword_dim = cfg.codeword_dim;
            s.activation = cfg.activation;
            s.straight_through = cfg.straight_through;
            return codecs::ClubModel(s, data.train.private_cardinality(),
                                     cfg.adversary_hidden, cfg.channel, seed);
        }
        case CodecChoice::Ideal:
            throw ValidationError("the ideal encoder has no trainable model");
    }
    throw ValidationError("unreachable codec choice");
}

struct EpochTerms {
    double ce = 0.0, redundancy = 0.0, complexity = 0.0, leakage = 0.0;
    int batches = 0;

    void observe(double c, double r, double x, double l) {
        ce += c;
        redundancy += r;
        complexity += x;
        leakage += l;
        ++batches;
    }
    std::string csv_line(int epoch) const {
        const double n = std::max(1, batches);
        std::ostringstream os;
        os << epoch << ',' << fmt_double(ce / n) << ',' << fmt_double(redundancy / n) << ','
           << fmt_double(complexity / n) << ',' << fmt_double(leakage / n);
        return os.str();
    }
};

}  // namespace

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp + " for writing");
        out << text;
        if (!out) throw IoError("short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::uint64_t cell_seed(std::uint64_t seed, double snr_db) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(snr_db));
    std::memcpy(&bits, &snr_db, sizeof(bits));
    return mix_seed(seed, bits, 0xCE11);
}

TrainOutcome train(const ExperimentConfig& cfg, const Config& raw_config,
                   const std::filesystem::path& out_dir) {
    cfg.validate();
    if (cfg.codec == CodecChoice::Ideal)
        throw ValidationError("train: the ideal encoder cannot be trained");
    std::filesystem::create_directories(out_dir);
    const std::string config_text = raw_config.serialize();
    write_text_atomic(out_dir / "effective.cfg", config_text);

    DatasetPair data = build_datasets(cfg);
    const long n = static_cast<long>(data.train.size());
    const int batch = cfg.batch_size;
    const long steps_per_epoch = std::max(1L, n / batch);
    const long total_steps = std::max(1L, steps_per_epoch * cfg.epochs);

    TrainOutcome outcome;
    for (std::uint64_t seed : cfg.seeds) {
        codecs::AnyModel model = construct_model(cfg, data, seed);
        nn::Adam adam(cfg.learning_rate);
        nn::Adam adam_adv(cfg.adversary_learning_rate > 0.0 ? cfg.adversary_learning_rate
                                                            : cfg.learning_rate);

        std::ostringstream log;
        log << "epoch,ce_bits,redundancy_bits,complexity_bits,leakage_bits\n";
        bool variance_warned = false;

        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        long step = 0;
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            Rng shuffle_rng(mix_seed(seed, 0x5417FFul, static_cast<std::uint64_t>(epoch)));
            shuffle(order, shuffle_rng);
            EpochTerms terms;
            for (long bix = 0; bix < steps_per_epoch; ++bix, ++step) {
                std::span<const int> slice(order.data() + bix * batch,
                                           static_cast<std::size_t>(batch));
                codecs::Batch mb = codecs::make_batch(data.train, slice);
                const std::uint64_t bseed =
                    mix_seed(seed, static_cast<std::uint64_t>(epoch),
                             static_cast<std::uint64_t>(bix));
                const double frac = total_steps > 1
                                        ? static_cast<double>(step) / (total_steps - 1)
                                        : 1.0;
                const double tau =
                    cfg.tau_start * std::pow(cfg.tau_end / cfg.tau_start, frac);

                try {
                    std::visit(
                        [&](auto& m) {
                            using T = std::decay_t<decltype(m)>;
                            if constexpr (std::is_same_v<T, codecs::DtribModel>) {
                                nn::Graph g;
                                codecs::ParamMap pm;
                                nn::Graph::NodeId root;
                                auto r = objectives::rib_loss(g, m, mb, cfg.weights.lambda,
                                                              tau, cfg.channel, bseed, &pm,
                                                              &root);
                                if (r.variance_warning && !variance_warned) {
                                    log << "# warning: batch too small for the plug-in "
                                           "redundancy estimate\n";
                                    variance_warned = true;
                                }
                                g.backward(root);
                                auto [ts, gs] = pm.select(g, {});
                                adam.step(ts, gs);
                                terms.observe(r.ce_bits, r.redundancy_bits, 0.0, 0.0);
                            } else if constexpr (std::is_same_v<T, codecs::JsccModel>) {
                                nn::Graph g;
                                codecs::ParamMap pm;
                                Rng rng(bseed);
                                auto fwd = codecs::jscc_forward(g, m, mb.x, cfg.channel, rng,
                                                                &pm);
                                auto ce = g.cross_entropy_bits(fwd.class_logits, mb.labels);
                                g.check_finite(ce, "jscc training loss");
                                g.backward(ce);
                                auto [ts, gs] = pm.select(g, {});
                                adam.step(ts, gs);
                                terms.observe(g.value(ce)(0, 0), 0.0, 0.0, 0.0);
                            } else if constexpr (std::is_same_v<T, codecs::VibModel>) {
                                nn::Graph g;
                                codecs::ParamMap pm;
                                nn::Graph::NodeId root;
                                auto r = objectives::vib_loss(g, m, mb, cfg.weights.beta,
                                                              cfg.channel, bseed, &pm, &root);
                                g.backward(root);
                                auto [ts, gs] = pm.select(g, {});
                                adam.step(ts, gs);
                                terms.observe(r.ce_bits, 0.0, r.complexity_bits, 0.0);
                            } else {  // ClubModel
                                double gamma = cfg.weights.gamma;
                                if (cfg.gamma_warmup_epochs > 0 &&
                                    epoch < cfg.gamma_warmup_epochs)
                                    gamma *= static_cast<double>(epoch) /
                                             cfg.gamma_warmup_epochs;
                                nn::Graph ga, ge;
                                codecs::ParamMap pa, pe;
                                nn::Graph::NodeId ra, re;
                                auto r = objectives::club_loss(
                                    m, mb, cfg.weights.beta, gamma, tau,
                                    cfg.channel, bseed, &ge, &pe, &re, &ga, &pa, &ra);
                                ga.backward(ra);
                                auto [ta, gsa] = pa.select(ga, {});
                                adam_adv.step(ta, gsa);
                                ge.backward(re);
                                auto [te, gse] = pe.select(ge, {});
                                adam.step(te, gse);
                                terms.observe(r.utility_ce_bits, 0.0, r.complexity_bits,
                                              r.leakage_ce_bits);
                            }
                        },
                        model);
                } catch (const NumericError& e) {
                    throw NumericError("training diverged (seed " + std::to_string(seed) +
                                       ", epoch " + std::to_string(epoch) + ", batch " +
                                       std::to_string(bix) + "): " + e.what());
                }
            }
            log << terms.csv_line(epoch) << "\n";
        }

        const auto ckpt = out_dir / ("checkpoint-s" + std::to_string(seed) + ".bin");
        const auto log_path = out_dir / ("train_log-s" + std::to_string(seed) + ".csv");
        codecs::save_checkpoint(ckpt, model, config_text);
        write_text_atomic(log_path, log.str());
        outcome.checkpoints.push_back(ckpt);
        outcome.train_logs.push_back(log_path);
    }
    return outcome;
}

metrics::EseBits ese_for_model(const codecs::AnyModel& model, const sources::Dataset& dataset) {
    if (const auto* d = std::get_if<codecs::DtribModel>(&model))
        return metrics::empirical_semantic_entropy(codecs::DtribMessageEncoder(*d), dataset);
    if (const auto* c = std::get_if<codecs::ClubModel>(&model))
        return metrics::empirical_semantic_entropy(codecs::DtribMessageEncoder(c->base),
                                                   dataset);
    throw EstimatorError(
        "empirical semantic entropy is undefined for continuous-valued encoders; "
        "estimate mutual information with mi_variational instead");
}

namespace {

// Batched evaluation of the predictive distribution over the test set.
Eigen::MatrixXd predict_probs(const codecs::AnyModel& model, const sources::Dataset& test,
                              const phy::ChannelConfig& channel, std::uint64_t eval_seed,
                              std::vector<SemanticMessage>* z_out,
                              std::vector<SemanticMessage>* zhat_out) {
    const int n = static_cast<int>(test.size());
    const int chunk = 1000;
    Eigen::MatrixXd probs(test.class_count(), n);
    std::vector<int> index(n);
    std::iota(index.begin(), index.end(), 0);
    for (int start = 0; start < n; start += chunk) {
        const int count = std::min(chunk, n - start);
        std::span<const int> slice(index.data() + start, static_cast<std::size_t>(count));
        codecs::Batch b = codecs::make_batch(test, slice);
        phy::ChannelConfig ch = channel;
        ch.seed = mix_seed(eval_seed, static_cast<std::uint64_t>(start), 0xE7A1);
        std::visit(
            [&](const auto& m) {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, codecs::DtribModel>) {
                    auto ev = codecs::dtrib_eval_forward(m, b.x, ch);
                    probs.middleCols(start, count) = ev.class_probs;
                    if (z_out)
                        z_out->insert(z_out->end(), ev.messages.begin(), ev.messages.end());
                    if (zhat_out)
                        zhat_out->insert(zhat_out->end(), ev.hard_demod.begin(),
                                         ev.hard_demod.end());
                } else if constexpr (std::is_same_v<T, codecs::ClubModel>) {
                    auto ev = codecs::dtrib_eval_forward(m.base, b.x, ch);
                    probs.middleCols(start, count) = ev.class_probs;
                    if (z_out)
                        z_out->insert(z_out->end(), ev.messages.begin(), ev.messages.end());
                    if (zhat_out)
                        zhat_out->insert(zhat_out->end(), ev.hard_demod.begin(),
                                         ev.hard_demod.end());
                } else if constexpr (std::is_same_v<T, codecs::JsccModel>) {
                    probs.middleCols(start, count) =
                        codecs::jscc_eval_forward(m, b.x, ch, ch.seed);
                } else {
                    probs.middleCols(start, count) =
                        codecs::vib_eval_forward(m, b.x, ch, ch.seed);
                }
            },
            model);
    }
    return probs;
}

int argmax_col_d(const Eigen::MatrixXd& m, int col) {
    int best = 0;
    double best_v = m(0, col);
    for (Eigen::Index i = 1; i < m.rows(); ++i) {
        if (m(i, col) > best_v) {
            best_v = m(i, col);
            best = static_cast<int>(i);
        }
    }
    return best;
}

}  // namespace

CellMetrics evaluate_cell(const codecs::AnyModel& model, const sources::Dataset& test,
                          const phy::ChannelConfig& channel, std::uint64_t eval_seed,
                          double rho) {
    const int n = static_cast<int>(test.size());
    const int classes = test.class_count();
    const bool discrete = std::holds_alternative<codecs::DtribModel>(model) ||
                          std::holds_alternative<codecs::ClubModel>(model);
    std::vector<SemanticMessage> z, zhat;
    Eigen::MatrixXd probs = predict_probs(model, test, channel, eval_seed,
                                          discrete ? &z : nullptr,
                                          discrete ? &zhat : nullptr);

    CellMetrics out;
    std::vector<int> labels(n), predicted(n);
    for (int j = 0; j < n; ++j) {
        labels[j] = test.samples()[j].label;
        predicted[j] = argmax_col_d(probs, j);
    }
    long correct = 0;
    for (int j = 0; j < n; ++j) correct += predicted[j] == labels[j];
    out.accuracy = static_cast<double>(correct) / n;
    out.class_distortion = metrics::classification_distortion(probs, labels);

    if (discrete) {
        int k = 0;
        if (const auto* d = std::get_if<codecs::DtribModel>(&model))
            k = d->spec.codebook_size;
        else
            k = std::get<codecs::ClubModel>(model).base.spec.codebook_size;
        // Pooled over (sample, position) pairs: one channel use per symbol,
        // matching the pooled per-symbol ESE on a noiseless channel.
        out.mi_z_zhat_bits = objectives::pooled_mi_bits(z, zhat, k);
    }

    // Perception distortion between the recovered-class distribution and the
    // label distribution on the evaluation set.
    {
        std::vector<double> p(classes, 0.0), q(classes, 0.0);
        for (int j = 0; j < n; ++j) {
            p[predicted[j]] += 1.0 / n;
            q[labels[j]] += 1.0 / n;
        }
        out.perception = metrics::perception_distortion({p}, {q});
    }

    out.ground_truth_rate_bits = metrics::semantic_rate(
        rho, metrics::mi_plugin(metrics::JointCounts::from_pairs(labels, predicted, classes,
                                                                 classes)));

    if (const auto* c = std::get_if<codecs::ClubModel>(&model)) {
        if (test.privacy_augmented()) {
            // In-loop adversary read-out on the extracted (pre-channel)
            // representation: hard codeword lookup of the argmax messages.
            const auto& base = c->base;
            const int m = base.spec.message_length;
            const int dc = base.spec.codeword_dim;
            long adv_correct = 0;
            const int chunk = 1000;
            for (int start = 0; start < n; start += chunk) {
                const int count = std::min(chunk, n - start);
                nn::Mat rep(m * dc, count);
                for (int j = 0; j < count; ++j)
                    for (int pos = 0; pos < m; ++pos)
                        rep.block(pos * dc, j, dc, 1) =
                            base.codebook.col(z[start + j].indices[pos]);
                nn::Mat logits = c->adversary.forward_plain(rep);
                for (int j = 0; j < count; ++j) {
                    int best = 0;
                    double bv = logits(0, j);
                    for (Eigen::Index i = 1; i < logits.rows(); ++i)
                        if (logits(i, j) > bv) {
                            bv = logits(i, j);
                            best = static_cast<int>(i);
                        }
                    adv_correct += best == *test.samples()[start + j].private_attr;
                }
            }
            out.adversary_accuracy = static_cast<double>(adv_correct) / n;
        }
    }
    return out;
}

void ResultsTable::validate() const {
    if (rows.empty()) throw ValidationError("ResultsTable: empty");
    std::vector<std::string> keys;
    keys.reserve(rows.size());
    for (const auto& r : rows)
        keys.push_back(r.codec + "/" + fmt_double(r.snr_db) + "/" + std::to_string(r.seed));
    std::sort(keys.begin(), keys.end());
    if (std::adjacent_find(keys.begin(), keys.end()) != keys.end())
        throw ValidationError("ResultsTable: duplicate (codec, snr, seed) key");
}

ResultsTable evaluate_sweep(const ExperimentConfig& cfg, const Config& raw_config,
                            const std::filesystem::path& out_dir) {
    cfg.validate();
    (void)raw_config;
    const auto ckpt_dir = cfg.checkpoint_dir.empty() ? out_dir : cfg.checkpoint_dir;
    DatasetPair data = build_datasets(cfg);

    ResultsTable table;
    for (std::uint64_t seed : cfg.seeds) {
        const auto path = ckpt_dir / ("checkpoint-s" + std::to_string(seed) + ".bin");
        auto loaded = codecs::load_checkpoint(path);
        const std::string expect = codec_choice_name(cfg.codec);
        const std::string actual = codecs::codec_name(codecs::kind_of(loaded.model));
        if (actual != expect)
            throw FormatError("checkpoint " + path.string() + " holds codec '" + actual +
                              "' but the config expects '" + expect + "'");

        metrics::EseBits ese{std::numeric_limits<double>::quiet_NaN(),
                             std::numeric_limits<double>::quiet_NaN()};
        bool have_ese = false;
        try {
            ese = ese_for_model(loaded.model, data.test);
            have_ese = true;
        } catch (const EstimatorError&) {
            // analog codecs: no discrete message distribution
        }

        for (double snr : cfg.eval_snr_db) {
            phy::ChannelConfig ch = cfg.channel;
            ch.peak_snr_db = snr;
            const std::uint64_t eseed = cell_seed(seed, snr);
            CellMetrics cell = evaluate_cell(loaded.model, data.test, ch, eseed, cfg.rho);

            MetricsRecord row;
            row.codec = expect;
            row.snr_db = snr;
            row.seed = seed;
            row.accuracy = cell.accuracy;
            if (have_ese) {
                row.ese_bits_per_msg = ese.per_message;
                row.ese_bits_per_symbol = ese.per_symbol;
            }
            row.mi_z_zhat_bits = cell.mi_z_zhat_bits;
            if (!std::isnan(cell.mi_z_zhat_bits)) {
                metrics::MIEstimate mi;
                mi.value_bits = cell.mi_z_zhat_bits;
                row.empirical_rate_bits_per_use = metrics::semantic_rate(cfg.rho, mi);
            }
            row.class_distortion_bits = cell.class_distortion.bits;
            row.perception_distortion_bits = cell.perception.bits;
            row.ground_truth_rate_bits = cell.ground_truth_rate_bits;
            table.rows.push_back(std::move(row));
        }
    }
    table.validate();
    return table;
}

namespace {

const char* kCsvHeader =
    "codec,snr_db,accuracy,ese_bits_per_msg,ese_bits_per_symbol,mi_z_zhat_bits,"
    "empirical_rate_bits_per_use,class_distortion_bits,perception_distortion_bits,seed";

std::string results_to_csv(const ResultsTable& table, const Config& effective) {
    std::ostringstream os;
    os << "# semcom results\n";
    std::istringstream cfg_lines(effective.serialize());
    std::string line;
    while (std::getline(cfg_lines, line)) {
        if (!line.empty()) os << "# " << line << "\n";
    }
    os << kCsvHeader << "\n";
    std::vector<const MetricsRecord*> sorted;
    sorted.reserve(table.rows.size());
    for (const auto& r : table.rows) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const MetricsRecord* a, const MetricsRecord* b) {
        if (a->codec != b->codec) return a->codec < b->codec;
        if (a->snr_db != b->snr_db) return a->snr_db < b->snr_db;
        return a->seed < b->seed;
    });
    for (const auto* r : sorted) {
        os << r->codec << ',' << fmt_double(r->snr_db) << ',' << fmt_double(r->accuracy) << ','
           << fmt_double(r->ese_bits_per_msg) << ',' << fmt_double(r->ese_bits_per_symbol)
           << ',' << fmt_double(r->mi_z_zhat_bits) << ','
           << fmt_double(r->empirical_rate_bits_per_use) << ','
           << fmt_double(r->class_distortion_bits) << ','
           << fmt_double(r->perception_distortion_bits) << ',' << r->seed << "\n";
    }
    return os.str();
}

struct Series {
    std::vector<double> snr, mean, lo, hi;
};

std::string render_svg(const ResultsTable& table) {
    // Aggregate by codec and SNR over seeds (finite SNRs only).
    std::map<std::string, std::map<double, std::vector<double>>> by_codec;
    for (const auto& r : table.rows)
        if (std::isfinite(r.snr_db)) by_codec[r.codec][r.snr_db].push_back(r.accuracy);

    std::map<std::string, Series> series;
    double snr_min = 0, snr_max = 1;
    bool first = true;
    for (const auto& [codec, pts] : by_codec) {
        Series s;
        for (const auto& [snr, accs] : pts) {
            double mean = 0, lo = accs[0], hi = accs[0];
            for (double a : accs) {
                mean += a;
                lo = std::min(lo, a);
                hi = std::max(hi, a);
            }
            mean /= static_cast<double>(accs.size());
            s.snr.push_back(snr);
            s.mean.push_back(mean);
            s.lo.push_back(lo);
            s.hi.push_back(hi);
            if (first) {
                snr_min = snr_max = snr;
                first = false;
            }
            snr_min = std::min(snr_min, snr);
            snr_max = std::max(snr_max, snr);
        }
        series[codec] = std::move(s);
    }
    if (snr_max == snr_min) snr_max = snr_min + 1;

    const double w = 640, h = 420, ml = 60, mr = 150, mt = 30, mb = 50;
    auto px = [&](double snr) { return ml + (snr - snr_min) / (snr_max - snr_min) * (w - ml - mr); };
    auto py = [&](double acc) { return mt + (1.0 - acc) * (h - mt - mb); };
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
       << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    // Axes and ticks.
    os << "<line x1=\"" << ml << "\" y1=\"" << py(0) << "\" x2=\"" << w - mr << "\" y2=\""
       << py(0) << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << py(0) << "\" x2=\"" << ml << "\" y2=\"" << py(1)
       << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 10; i += 2) {
        const double a = i / 10.0;
        os << "<line x1=\"" << ml - 4 << "\" y1=\"" << py(a) << "\" x2=\"" << ml << "\" y2=\""
           << py(a) << "\" stroke=\"black\"/>"
           << "<text x=\"" << ml - 8 << "\" y=\"" << py(a) + 4
           << "\" font-size=\"11\" text-anchor=\"end\">" << fmt_double(a) << "</text>\n";
    }
    std::set<double> xticks;
    for (const auto& [codec, s] : series)
        for (double v : s.snr) xticks.insert(v);
    for (double v : xticks) {
        os << "<line x1=\"" << px(v) << "\" y1=\"" << py(0) << "\" x2=\"" << px(v) << "\" y2=\""
           << py(0) + 4 << "\" stroke=\"black\"/>"
           << "<text x=\"" << px(v) << "\" y=\"" << py(0) + 18
           << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt_double(v) << "</text>\n";
    }
    os << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 12
       << "\" font-size=\"12\" text-anchor=\"middle\">test peak SNR (dB)</text>\n";
    os << "<text x=\"16\" y=\"" << (mt + h - mb) / 2
       << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       << (mt + h - mb) / 2 << ")\">task accuracy</text>\n";

    int ci = 0;
    for (const auto& [codec, s] : series) {
        const char* color = colors[ci % 5];
        // min/max band over seeds
        os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
        for (std::size_t i = 0; i < s.snr.size(); ++i)
            os << px(s.snr[i]) << ',' << py(s.hi[i]) << ' ';
        for (std::size_t i = s.snr.size(); i-- > 0;)
            os << px(s.snr[i]) << ',' << py(s.lo[i]) << ' ';
        os << "\"/>\n";
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < s.snr.size(); ++i)
            os << px(s.snr[i]) << ',' << py(s.mean[i]) << ' ';
        os << "\"/>\n";
        const double ly = mt + 16 + 18 * ci;
        os << "<line x1=\"" << w - mr + 10 << "\" y1=\"" << ly << "\" x2=\"" << w - mr + 34
           << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>"
           << "<text x=\"" << w - mr + 40 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">"
           << codec << "</text>\n";
        ++ci;
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace

void emit_report(const ResultsTable& results, const Config& effective_config,
                 const std::filesystem::path& out_dir) {
    results.validate();
    std::filesystem::create_directories(out_dir);
    write_text_atomic(out_dir / "results.csv", results_to_csv(results, effective_config));
    write_text_atomic(out_dir / "accuracy_vs_snr.svg", render_svg(results));
}

void emit_plot(const ResultsTable& results, const std::filesystem::path& out_dir) {
    results.validate();
    std::filesystem::create_directories(out_dir);
    write_text_atomic(out_dir / "accuracy_vs_snr.svg", render_svg(results));
}

ResultsTable load_results_csv(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw IoError("cannot open " + csv_path.string());
    ResultsTable table;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != kCsvHeader)
                throw FormatError("results CSV: unexpected header in " + csv_path.string());
            header_seen = true;
            continue;
        }
        std::stringstream ss(line);
        std::string tok;
        std::vector<std::string> cols;
        while (std::getline(ss, tok, ',')) cols.push_back(tok);
        if (cols.size() != 10)
            throw FormatError("results CSV: expected 10 columns, got " +
                              std::to_string(cols.size()));
        auto num = [](const std::string& s) {
            if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
            return parse_double_value(s, "results CSV");
        };
        MetricsRecord r;
        r.codec = cols[0];
        r.snr_db = num(cols[1]);
        r.accuracy = num(cols[2]);
        r.ese_bits_per_msg = num(cols[3]);
        r.ese_bits_per_symbol = num(cols[4]);
        r.mi_z_zhat_bits = num(cols[5]);
        r.empirical_rate_bits_per_use = num(cols[6]);
        r.class_distortion_bits = num(cols[7]);
        r.perception_distortion_bits = num(cols[8]);
        r.seed = std::stoull(cols[9]);
        table.rows.push_back(std::move(r));
    }
    table.validate();
    return table;
}

}  // namespace semcom::harness
