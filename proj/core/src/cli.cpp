#include "semcom/cli.hpp"

#include <iostream>
#include <optional>
#include <sstream>

#include "semcom/errors.hpp"
#include "semcom/harness.hpp"

namespace semcom::cli {

namespace {

constexpr const char* kUsage =
    "usage: semcom <verb> [flags]\n"
    "\n"
    "verbs:\n"
    "  train    train the configured codec; writes checkpoints and train logs\n"
    "  sweep    evaluate checkpoints across the SNR grid; writes results.csv and plots\n"
    "  metrics  compute information measures for a dataset/checkpoint pair\n"
    "  report   re-render plots from an existing results.csv\n"
    "\n"
    "flags:\n"
    "  --config PATH      experiment config file\n"
    "  --out DIR          output directory\n"
    "  --set KEY=VALUE    override a config key (repeatable, dotted keys)\n"
    "  --seed N           replace the configured seed list with {N}\n";

struct Args {
    std::string verb;
    std::optional<std::string> config_path;
    std::optional<std::string> out_dir;
    std::vector<std::pair<std::string, std::string>> overrides;
    std::optional<std::uint64_t> seed;
};

Args parse_args(const std::vector<std::string>& argv) {
    if (argv.empty()) throw ValidationError("missing verb");
    Args a;
    a.verb = argv[0];
    if (a.verb != "train" && a.verb != "sweep" && a.verb != "metrics" && a.verb != "report")
        throw ValidationError("unknown verb '" + a.verb + "'");
    for (std::size_t i = 1; i < argv.size(); ++i) {
        const std::string& flag = argv[i];
        auto next = [&]() -> const std::string& {
            if (i + 1 >= argv.size())
                throw ValidationError("flag " + flag + " needs a value");
            return argv[++i];
        };
        if (flag == "--config") {
            a.config_path = next();
        } else if (flag == "--out") {
            a.out_dir = next();
        } else if (flag == "--set") {
            const std::string& kv = next();
            const auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw ValidationError("--set expects KEY=VALUE, got '" + kv + "'");
            a.overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
        } else if (flag == "--seed") {
            try {
                a.seed = std::stoull(next());
            } catch (const std::exception&) {
                throw ValidationError("--seed expects an unsigned integer");
            }
        } else {
            throw ValidationError("unknown flag '" + flag + "'");
        }
    }
    return a;
}

harness::Config effective_config(const Args& a) {
    if (!a.config_path) throw ValidationError("verb '" + a.verb + "' requires --config");
    harness::Config cfg = harness::Config::parse_file(*a.config_path);
    for (const auto& [k, v] : a.overrides) cfg.set(k, v);
    if (a.seed) cfg.set("train.seeds", std::to_string(*a.seed));
    return cfg;
}

void run_metrics(const harness::Config& raw, const Args& args, std::ostream& out) {
    const auto cfg = harness::ExperimentConfig::from_config(raw);
    harness::DatasetPair data = harness::build_datasets(cfg);

    out << "samples = " << data.test.size() << "\n";
    out << "label_entropy_bits = " << metrics::entropy_plugin(data.test.label_counts())
        << "\n";
    if (cfg.dataset_kind == harness::DatasetKind::Oracle) {
        std::vector<double> probs = cfg.oracle_probs;
        if (probs.empty())
            probs.assign(cfg.oracle_classes, 1.0 / static_cast<double>(cfg.oracle_classes));
        sources::OracleSourceSpec spec = sources::OracleSourceSpec::with_auto_means(
            probs, cfg.oracle_dim, cfg.test_count, cfg.dataset_seed, cfg.oracle_scale);
        out << "gse_bits = " << spec.ground_truth_semantic_entropy_bits() << "\n";
    }

    if (cfg.codec == harness::CodecChoice::Ideal) {
        // Channel-bypassed ESE of the ideal encoder, then one configured
        // channel point for the semantic rates.
        codecs::IdealLabelEncoder enc(data.test.class_count());
        auto ese = metrics::empirical_semantic_entropy(enc, data.test);
        out << "ese_bits_per_msg = " << ese.per_message << "\n";
        out << "ese_bits_per_symbol = " << ese.per_symbol << "\n";

        std::vector<SemanticMessage> messages;
        std::vector<int> labels;
        messages.reserve(data.test.size());
        for (const auto& s : data.test.samples()) {
            messages.push_back(enc.encode(s));
            labels.push_back(s.label);
        }
        phy::ChannelConfig ch = cfg.channel;
        ch.modulation_order = data.test.class_count();
        ch.seed = harness::cell_seed(cfg.seeds[0], ch.peak_snr_db);
        auto tr = phy::transmit(messages, ch);
        std::vector<int> z(labels.size()), zhat(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) {
            z[i] = messages[i].indices[0];
            zhat[i] = tr.hard_messages[i].indices[0];
        }
        const int k = data.test.class_count();
        auto mi_emp = metrics::mi_plugin(metrics::JointCounts::from_pairs(z, zhat, k, k));
        auto mi_gt = metrics::mi_plugin(metrics::JointCounts::from_pairs(labels, zhat, k, k));
        out << "mi_z_zhat_bits = " << mi_emp.value_bits << "\n";
        out << "empirical_rate_bits_per_use = " << metrics::semantic_rate(cfg.rho, mi_emp)
            << "\n";
        out << "ground_truth_rate_bits_per_use = " << metrics::semantic_rate(cfg.rho, mi_gt)
            << "\n";
        return;
    }

    // Trained codecs: load the first seed's checkpoint.
    const std::filesystem::path ckpt_dir =
        !cfg.checkpoint_dir.empty()
            ? cfg.checkpoint_dir
            : std::filesystem::path(args.out_dir.value_or("."));
    const auto path = ckpt_dir / ("checkpoint-s" + std::to_string(cfg.seeds[0]) + ".bin");
    auto loaded = codecs::load_checkpoint(path);
    try {
        auto ese = harness::ese_for_model(loaded.model, data.test);
        out << "ese_bits_per_msg = " << ese.per_message << "\n";
        out << "ese_bits_per_symbol = " << ese.per_symbol << "\n";
    } catch (const EstimatorError& e) {
        out << "ese_bits_per_msg = unsupported (" << e.what() << ")\n";
    }
    phy::ChannelConfig ch = cfg.channel;
    ch.seed = harness::cell_seed(cfg.seeds[0], ch.peak_snr_db);
    auto cell = harness::evaluate_cell(loaded.model, data.test, ch, ch.seed, cfg.rho);
    out << "accuracy = " << cell.accuracy << "\n";
    out << "class_distortion_bits = " << cell.class_distortion.bits << "\n";
    out << "perception_distortion_bits = " << cell.perception.bits << "\n";
    if (!std::isnan(cell.mi_z_zhat_bits)) {
        out << "mi_z_zhat_bits = " << cell.mi_z_zhat_bits << "\n";
        metrics::MIEstimate mi;
        mi.value_bits = cell.mi_z_zhat_bits;
        out << "empirical_rate_bits_per_use = " << metrics::semantic_rate(cfg.rho, mi) << "\n";
    }
    out << "ground_truth_rate_bits_per_use = " << cell.ground_truth_rate_bits << "\n";
    if (cell.adversary_accuracy)
        out << "adversary_accuracy = " << *cell.adversary_accuracy << "\n";
}

int dispatch(const Args& args, std::ostream& out, std::ostream& err) {
    (void)err;
    if (args.verb == "train") {
        if (!args.out_dir) throw ValidationError("train requires --out");
        harness::Config raw = effective_config(args);
        const auto cfg = harness::ExperimentConfig::from_config(raw);
        auto outcome = harness::train(cfg, raw, *args.out_dir);
        for (const auto& p : outcome.checkpoints) out << "checkpoint " << p.string() << "\n";
        for (const auto& p : outcome.train_logs) out << "train_log " << p.string() << "\n";
        return 0;
    }
    if (args.verb == "sweep") {
        if (!args.out_dir) throw ValidationError("sweep requires --out");
        harness::Config raw = effective_config(args);
        const auto cfg = harness::ExperimentConfig::from_config(raw);
        auto table = harness::evaluate_sweep(cfg, raw, *args.out_dir);
        harness::emit_report(table, raw, *args.out_dir);
        harness::write_text_atomic(std::filesystem::path(*args.out_dir) / "effective.cfg",
                                   raw.serialize());
        out << "results " << (std::filesystem::path(*args.out_dir) / "results.csv").string()
            << "\n";
        out << "plot "
            << (std::filesystem::path(*args.out_dir) / "accuracy_vs_snr.svg").string() << "\n";
        return 0;
    }
    if (args.verb == "metrics") {
        harness::Config raw = effective_config(args);
        if (args.out_dir) {
            std::filesystem::create_directories(*args.out_dir);
            harness::write_text_atomic(std::filesystem::path(*args.out_dir) / "effective.cfg",
                                       raw.serialize());
        }
        run_metrics(raw, args, out);
        return 0;
    }
    // report
    if (!args.out_dir) throw ValidationError("report requires --out");
    const auto csv = std::filesystem::path(*args.out_dir) / "results.csv";
    auto table = harness::load_results_csv(csv);
    harness::emit_plot(table, *args.out_dir);
    out << "plot " << (std::filesystem::path(*args.out_dir) / "accuracy_vs_snr.svg").string()
        << "\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        return dispatch(parse_args(args), out, err);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n\n" << kUsage;
        return 1;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, out, err);
}

}  // namespace semcom::cli
