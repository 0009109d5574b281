#include "semcom/codecs.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "semcom/errors.hpp"
#include "semcom/objectives.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace semcom::codecs {

namespace {

int argmax_col(const nn::Mat& m, Eigen::Index col) {
    int best = 0;
    double best_v = m(0, col);
    for (Eigen::Index i = 1; i < m.rows(); ++i) {
        if (m(i, col) > best_v) {  // strict: ties keep the lowest index
            best_v = m(i, col);
            best = i;
        }
    }
    return best;
}

// 2 x K matrix whose column k is the constellation point carrying data
// index k (Gray placement).
nn::Mat codeword_points(int modulation_order) {
    const auto pts = phy::psk_constellation(modulation_order);
    nn::Mat p(2, modulation_order);
    for (int k = 0; k < modulation_order; ++k) {
        const auto c = pts[phy::gray_encode(k, modulation_order)];
        p(0, k) = c.real();
        p(1, k) = c.imag();
    }
    return p;
}

double soft_scale(const phy::ChannelConfig& config) {
    return std::max(config.noise_variance(), 1e-6);
}

// During relaxed training the transmitted symbols are codeword mixtures, not
// constellation points; a near-zero posterior scale saturates the similarity
// softmax and starves the encoder of gradient. Floor it at high SNR.
double train_soft_scale(const phy::ChannelConfig& config) {
    return std::max(config.noise_variance(), 0.05);
}

nn::Mat batch_to_mat(const std::vector<float>& x) {
    nn::Mat m(static_cast<Eigen::Index>(x.size()), 1);
    for (std::size_t i = 0; i < x.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = x[i];
    return m;
}

Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    throw FormatError("unknown activation tag: " + s);
}

std::string activation_name(Activation a) {
    return a == Activation::Relu ? "relu" : "tanh";
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stoi(tok));
    }
    return out;
}

std::string int_list_string(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

}  // namespace

void ParamMap::add(std::string tag, nn::Mat* tensor, nn::Graph::NodeId id) {
    tags.push_back(std::move(tag));
    tensors.push_back(tensor);
    ids.push_back(id);
}

std::pair<std::vector<nn::Mat*>, std::vector<const nn::Mat*>> ParamMap::select(
    const nn::Graph& g, std::span<const std::string> wanted) const {
    std::vector<nn::Mat*> ts;
    std::vector<const nn::Mat*> gs;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        bool take = wanted.empty();
        for (const auto& w : wanted) {
            if (tags[i] == w) {
                take = true;
                break;
            }
        }
        if (take) {
            ts.push_back(tensors[i]);
            gs.push_back(&g.grad(ids[i]));
        }
    }
    return {std::move(ts), std::move(gs)};
}

Mlp::Mlp(MlpSpec spec, Rng& rng) : spec_(std::move(spec)) {
    if (spec_.dims.size() < 2) throw ValidationError("MlpSpec: needs at least input and output");
    const std::size_t layers = spec_.dims.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
        const int in = spec_.dims[l];
        const int out = spec_.dims[l + 1];
        nn::Mat w(out, in);
        if (l + 1 == layers && spec_.zero_init_last) {
            w.setZero();  // symmetric start: uniform predictions, zero logits
        } else {
            const double s = std::sqrt(2.0 / static_cast<double>(in));
            for (Eigen::Index i = 0; i < w.rows(); ++i)
                for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = s * rng.normal();
        }
        weights_.push_back(std::move(w));
        biases_.push_back(nn::Mat::Zero(out, 1));
    }
}

nn::Graph::NodeId Mlp::forward(nn::Graph& g, nn::Graph::NodeId x, ParamMap* params,
                               const std::string& tag) {
    nn::Graph::NodeId h = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        nn::Graph::NodeId w, b;
        if (params) {
            w = g.param(weights_[l]);
            b = g.param(biases_[l]);
            params->add(tag, &weights_[l], w);
            params->add(tag, &biases_[l], b);
        } else {
            w = g.constant(weights_[l]);
            b = g.constant(biases_[l]);
        }
        h = g.add_colvec(g.matmul(w, h), b);
        if (l + 1 < weights_.size())
            h = spec_.activation == Activation::Relu ? g.relu(h) : g.tanh(h);
    }
    return h;
}

nn::Graph::NodeId Mlp::forward(nn::Graph& g, nn::Graph::NodeId x) const {
    nn::Graph::NodeId h = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        h = g.add_colvec(g.matmul(g.constant(weights_[l]), h), g.constant(biases_[l]));
        if (l + 1 < weights_.size())
            h = spec_.activation == Activation::Relu ? g.relu(h) : g.tanh(h);
    }
    return h;
}

nn::Mat Mlp::forward_plain(const nn::Mat& x) const {
    nn::Mat h = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        nn::Mat z = weights_[l] * h;
        z.colwise() += nn::Vec(biases_[l].col(0));
        if (l + 1 < weights_.size()) {
            if (spec_.activation == Activation::Relu)
                h = z.cwiseMax(0.0);
            else
                h = z.array().tanh();
        } else {
            h = std::move(z);
        }
    }
    return h;
}

std::vector<std::pair<std::string, nn::Mat*>> Mlp::named_tensors(const std::string& prefix) {
    std::vector<std::pair<std::string, nn::Mat*>> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.emplace_back(prefix + ".w" + std::to_string(l), &weights_[l]);
        out.emplace_back(prefix + ".b" + std::to_string(l), &biases_[l]);
    }
    return out;
}

DtribModel::DtribModel(const DtribSpec& s, const phy::ChannelConfig& paired_channel,
                       std::uint64_t seed)
    : spec(s) {
    paired_channel.validate();
    if (spec.codebook_size != paired_channel.modulation_order)
        throw ValidationError("DtribModel: codebook size K must equal the modulation order M");
    if (spec.input_dim <= 0 || spec.class_count <= 1)
        throw ValidationError("DtribModel: invalid input/class dimensions");
    Rng rng(seed);
    MlpSpec enc;
    enc.dims.push_back(spec.input_dim);
    enc.dims.insert(enc.dims.end(), spec.encoder_hidden.begin(), spec.encoder_hidden.end());
    enc.dims.push_back(spec.message_length * spec.codebook_size);
    enc.activation = spec.activation;
    encoder = Mlp(enc, rng);

    codebook.resize(spec.codeword_dim, spec.codebook_size);
    const double cs = 1.0 / std::sqrt(static_cast<double>(spec.codeword_dim));
    for (Eigen::Index i = 0; i < codebook.rows(); ++i)
        for (Eigen::Index j = 0; j < codebook.cols(); ++j) codebook(i, j) = cs * rng.normal();

    MlpSpec dec;
    dec.dims.push_back(spec.message_length * spec.codeword_dim);
    dec.dims.insert(dec.dims.end(), spec.decoder_hidden.begin(), spec.decoder_hidden.end());
    dec.dims.push_back(spec.class_count);
    dec.activation = spec.activation;
    decoder = Mlp(dec, rng);
}

EncodeResult encode_discrete(const DtribModel& model, const std::vector<float>& x,
                             EncodeMode mode, double tau, std::uint64_t seed) {
    if (static_cast<int>(x.size()) != model.spec.input_dim)
        throw ValidationError("encode_discrete: input dimension mismatch");
    const int m = model.spec.message_length;
    const int k = model.spec.codebook_size;
    nn::Mat logits = model.encoder.forward_plain(batch_to_mat(x));  // (m*K) x 1
    EncodeResult out;
    out.message.indices.resize(m);
    if (mode == EncodeMode::Argmax) {
        for (int pos = 0; pos < m; ++pos) {
            int best = 0;
            double best_v = logits(pos * k, 0);
            for (int i = 1; i < k; ++i) {
                if (logits(pos * k + i, 0) > best_v) {
                    best_v = logits(pos * k + i, 0);
                    best = i;
                }
            }
            out.message.indices[pos] = best;
        }
        return out;
    }
    if (!(tau > 0.0)) throw ValidationError("encode_discrete: tau must be positive in relaxed mode");
    Rng rng(seed);
    Eigen::MatrixXd weights(k, m);
    for (int pos = 0; pos < m; ++pos) {
        Eigen::VectorXd l = logits.block(pos * k, 0, k, 1);
        weights.col(pos) = objectives::gumbel_softmax(l, tau, rng);
        int best = 0;
        double best_v = weights(0, pos);
        for (int i = 1; i < k; ++i) {
            if (weights(i, pos) > best_v) {
                best_v = weights(i, pos);
                best = i;
            }
        }
        out.message.indices[pos] = best;
    }
    out.relaxed_weights = std::move(weights);
    return out;
}

metrics::DiscreteDistribution decode_task(const DtribModel& model,
                                          const phy::SymbolBlock& received,
                                          const phy::ChannelConfig& config) {
    const int m = model.spec.message_length;
    if (static_cast<int>(received.symbols.size()) != m)
        throw ValidationError("decode_task: received block length mismatch");
    nn::Mat y(2, m);
    for (int i = 0; i < m; ++i) {
        if (!std::isfinite(received.symbols[i].real()) ||
            !std::isfinite(received.symbols[i].imag()))
            throw NumericError("decode_task: non-finite received symbol");
        y(0, i) = received.symbols[i].real();
        y(1, i) = received.symbols[i].imag();
    }
    nn::Graph g;
    const nn::Mat points = codeword_points(model.spec.codebook_size);
    auto a = g.soft_assignment(g.constant(std::move(y)), points, soft_scale(config));
    auto mix = g.matmul(g.constant(model.codebook), a);
    auto flat = g.reshape(mix, m * model.spec.codeword_dim, 1);
    auto logits = g.softmax_cols(model.decoder.forward(g, flat));
    metrics::DiscreteDistribution dist;
    dist.probabilities.resize(model.spec.class_count);
    for (int c = 0; c < model.spec.class_count; ++c) dist.probabilities[c] = g.value(logits)(c, 0);
    return dist;
}

DtribForward dtrib_relaxed_forward(nn::Graph& g, DtribModel& model, const nn::Mat& x,
                                   double tau, const phy::ChannelConfig& config, Rng& rng,
                                   ParamMap* params) {
    config.validate();
    if (!(tau > 0.0)) throw ValidationError("dtrib_relaxed_forward: tau must be positive");
    if (x.rows() != model.spec.input_dim)
        throw ValidationError("dtrib_relaxed_forward: input dimension mismatch");
    if (config.model == phy::ChannelModel::Rayleigh && config.csi != phy::Csi::PerfectReceiver)
        throw ValidationError("training under Rayleigh fading requires perfect-receiver CSI");

    const int m = model.spec.message_length;
    const int k = model.spec.codebook_size;
    const Eigen::Index b = x.cols();
    const Eigen::Index mb = static_cast<Eigen::Index>(m) * b;

    auto logits = model.encoder.forward(g, g.constant(x), params, "enc");
    auto pos_logits = g.reshape(logits, k, mb);  // column c = (sample c/m, position c%m)

    nn::Mat gumbel(k, mb);
    for (Eigen::Index j = 0; j < mb; ++j)
        for (Eigen::Index i = 0; i < k; ++i) gumbel(i, j) = rng.gumbel();
    auto perturbed = g.add(pos_logits, g.constant(std::move(gumbel)));
    auto weights = g.softmax_cols(g.scale(perturbed, 1.0 / tau));

    // Argmax messages (Z): gumbel-max over the perturbed logits.
    DtribForward out;
    out.messages.resize(b);
    const nn::Mat& pert = g.value(perturbed);
    for (Eigen::Index s = 0; s < b; ++s) {
        out.messages[s].indices.resize(m);
        for (int pos = 0; pos < m; ++pos)
            out.messages[s].indices[pos] = argmax_col(pert, s * m + pos);
    }

    if (model.spec.straight_through) {
        nn::Mat hard = nn::Mat::Zero(k, mb);
        for (Eigen::Index s = 0; s < b; ++s)
            for (int pos = 0; pos < m; ++pos)
                hard(out.messages[s].indices[pos], s * m + pos) = 1.0;
        weights = g.straight_through(weights, std::move(hard));
    }

    const nn::Mat points = codeword_points(k);
    auto tx = g.matmul(g.constant(points), weights);  // 2 x mb soft symbols

    // Channel draw: per-sample fading magnitude (block-constant), then
    // per-symbol noise. Under perfect-receiver CSI the equalized channel is
    // y = x + n/h, realized by scaling the noise by 1/|h|.
    std::vector<double> inv_h(b, 1.0);
    if (config.model == phy::ChannelModel::Rayleigh) {
        for (Eigen::Index s = 0; s < b; ++s) {
            const double hr = rng.normal() / std::sqrt(2.0);
            const double hi = rng.normal() / std::sqrt(2.0);
            inv_h[s] = 1.0 / std::sqrt(hr * hr + hi * hi);
        }
    }
    const double sigma_axis = std::sqrt(config.noise_variance() / 2.0);
    nn::Mat noise = nn::Mat::Zero(2, mb);
    if (sigma_axis > 0.0) {
        for (Eigen::Index j = 0; j < mb; ++j) {
            const double scale = sigma_axis * inv_h[j / m];
            noise(0, j) = scale * rng.normal();
            noise(1, j) = scale * rng.normal();
        }
    }

    // Hard-demodulated counterparts (Zhat) of the argmax messages under the
    // same channel realization; metrics only, no gradients.
    out.hard_demod.resize(b);
    {
        const auto constellation = phy::psk_constellation(k);
        for (Eigen::Index s = 0; s < b; ++s) {
            out.hard_demod[s].indices.resize(m);
            for (int pos = 0; pos < m; ++pos) {
                const Eigen::Index c = s * m + pos;
                const int z = out.messages[s].indices[pos];
                const std::complex<double> yh = {points(0, z) + noise(0, c),
                                                 points(1, z) + noise(1, c)};
                out.hard_demod[s].indices[pos] =
                    phy::gray_decode(phy::nearest_point(yh, constellation), k);
            }
        }
    }

    auto received = g.add(tx, g.constant(std::move(noise)));
    auto assign = g.soft_assignment(received, points, train_soft_scale(config));

    nn::Graph::NodeId cb;
    if (params) {
        cb = g.param(model.codebook);
        params->add("cb", &model.codebook, cb);
    } else {
        cb = g.constant(model.codebook);
    }
    auto mix = g.matmul(cb, assign);  // d_c x mb
    auto dec_in = g.reshape(mix, static_cast<Eigen::Index>(m) * model.spec.codeword_dim, b);
    out.class_logits = model.decoder.forward(g, dec_in, params, "dec");
    auto relaxed_mix = g.matmul(cb, weights);
    out.pre_channel_mix =
        g.reshape(relaxed_mix, static_cast<Eigen::Index>(m) * model.spec.codeword_dim, b);
    {
        nn::Mat hard_mix(model.spec.codeword_dim, mb);
        for (Eigen::Index s = 0; s < b; ++s)
            for (int pos = 0; pos < m; ++pos)
                hard_mix.col(s * m + pos) = model.codebook.col(out.messages[s].indices[pos]);
        out.pre_channel_hard =
            g.reshape(g.straight_through(relaxed_mix, std::move(hard_mix)),
                      static_cast<Eigen::Index>(m) * model.spec.codeword_dim, b);
    }
    return out;
}

DtribEval dtrib_eval_forward(const DtribModel& model, const nn::Mat& x,
                             const phy::ChannelConfig& config) {
    config.validate();
    const int m = model.spec.message_length;
    const int k = model.spec.codebook_size;
    const Eigen::Index b = x.cols();

    nn::Mat logits = model.encoder.forward_plain(x);  // (m*K) x B
    DtribEval out;
    out.messages.resize(b);
    for (Eigen::Index s = 0; s < b; ++s) {
        out.messages[s].indices.resize(m);
        for (int pos = 0; pos < m; ++pos) {
            int best = 0;
            double best_v = logits(pos * k, s);
            for (int i = 1; i < k; ++i) {
                if (logits(pos * k + i, s) > best_v) {
                    best_v = logits(pos * k + i, s);
                    best = i;
                }
            }
            out.messages[s].indices[pos] = best;
        }
    }

    auto tr = phy::transmit(out.messages, config);
    out.hard_demod = std::move(tr.hard_messages);

    nn::Mat y(2, static_cast<Eigen::Index>(m) * b);
    for (Eigen::Index s = 0; s < b; ++s) {
        for (int pos = 0; pos < m; ++pos) {
            y(0, s * m + pos) = tr.received[s].symbols[pos].real();
            y(1, s * m + pos) = tr.received[s].symbols[pos].imag();
        }
    }
    nn::Graph g;
    const nn::Mat points = codeword_points(k);
    auto assign = g.soft_assignment(g.constant(std::move(y)), points, soft_scale(config));
    auto mix = g.matmul(g.constant(model.codebook), assign);
    auto dec_in = g.reshape(mix, static_cast<Eigen::Index>(m) * model.spec.codeword_dim, b);
    auto probs = g.softmax_cols(model.decoder.forward(g, dec_in));
    out.class_probs = g.value(probs);
    return out;
}

JsccModel::JsccModel(const AnalogSpec& s, std::uint64_t seed) : spec(s) {
    Rng rng(seed);
    MlpSpec enc;
    enc.dims.push_back(spec.input_dim);
    enc.dims.insert(enc.dims.end(), spec.encoder_hidden.begin(), spec.encoder_hidden.end());
    enc.dims.push_back(2 * spec.symbols);
    enc.activation = spec.activation;
    enc.zero_init_last = false;
    encoder = Mlp(enc, rng);
    MlpSpec dec;
    dec.dims.push_back(2 * spec.symbols);
    dec.dims.insert(dec.dims.end(), spec.decoder_hidden.begin(), spec.decoder_hidden.end());
    dec.dims.push_back(spec.class_count);
    dec.activation = spec.activation;
    decoder = Mlp(dec, rng);
}

VibModel::VibModel(const AnalogSpec& s, std::uint64_t seed) : spec(s) {
    Rng rng(seed);
    MlpSpec enc;
    enc.dims.push_back(spec.input_dim);
    enc.dims.insert(enc.dims.end(), spec.encoder_hidden.begin(), spec.encoder_hidden.end());
    enc.dims.push_back(4 * spec.symbols);  // mean and log-spread
    enc.activation = spec.activation;
    enc.zero_init_last = false;
    encoder = Mlp(enc, rng);
    MlpSpec dec;
    dec.dims.push_back(2 * spec.symbols);
    dec.dims.insert(dec.dims.end(), spec.decoder_hidden.begin(), spec.decoder_hidden.end());
    dec.dims.push_back(spec.class_count);
    dec.activation = spec.activation;
    decoder = Mlp(dec, rng);
}

namespace {

// Per-axis channel noise for an analog block of 2m rows (re/im interleaved
// per complex symbol); per-sample 1/|h| scaling realizes equalized fading.
nn::Mat analog_noise(const phy::ChannelConfig& config, Eigen::Index rows, Eigen::Index cols,
                     Rng& rng) {
    if (config.model == phy::ChannelModel::Rayleigh && config.csi != phy::Csi::PerfectReceiver)
        throw ValidationError("training under Rayleigh fading requires perfect-receiver CSI");
    std::vector<double> inv_h(cols, 1.0);
    if (config.model == phy::ChannelModel::Rayleigh) {
        for (Eigen::Index s = 0; s < cols; ++s) {
            const double hr = rng.normal() / std::sqrt(2.0);
            const double hi = rng.normal() / std::sqrt(2.0);
            inv_h[s] = 1.0 / std::sqrt(hr * hr + hi * hi);
        }
    }
    const double sigma_axis = std::sqrt(config.noise_variance() / 2.0);
    nn::Mat noise = nn::Mat::Zero(rows, cols);
    if (sigma_axis > 0.0) {
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i)
                noise(i, j) = sigma_axis * inv_h[j] * rng.normal();
    }
    return noise;
}

}  // namespace

AnalogForward jscc_forward(nn::Graph& g, JsccModel& model, const nn::Mat& x,
                           const phy::ChannelConfig& config, Rng& rng, ParamMap* params) {
    config.validate();
    if (x.rows() != model.spec.input_dim)
        throw ValidationError("jscc_forward: input dimension mismatch");
    auto z = model.encoder.forward(g, g.constant(x), params, "enc");
    auto zn = g.unit_power_cols(z, model.spec.symbols);
    auto y = g.add(zn, g.constant(analog_noise(config, 2 * model.spec.symbols, x.cols(), rng)));
    AnalogForward out;
    out.class_logits = model.decoder.forward(g, y, params, "dec");
    return out;
}

AnalogForward vib_forward(nn::Graph& g, VibModel& model, const nn::Mat& x,
                          const phy::ChannelConfig& config, Rng& rng, ParamMap* params,
                          bool sample_latent) {
    config.validate();
    if (x.rows() != model.spec.input_dim)
        throw ValidationError("vib_forward: input dimension mismatch");
    const Eigen::Index dim = 2 * model.spec.symbols;
    auto enc_out = model.encoder.forward(g, g.constant(x), params, "enc");
    AnalogForward out;
    out.mu = g.slice_rows(enc_out, 0, dim);
    out.log_std = g.slice_rows(enc_out, dim, dim);
    nn::Graph::NodeId z = out.mu;
    if (sample_latent) {
        nn::Mat eps(dim, x.cols());
        for (Eigen::Index j = 0; j < eps.cols(); ++j)
            for (Eigen::Index i = 0; i < dim; ++i) eps(i, j) = rng.normal();
        z = g.add(out.mu, g.mul(g.exp(out.log_std), g.constant(std::move(eps))));
    }
    auto zn = g.unit_power_cols(z, model.spec.symbols);
    auto y = g.add(zn, g.constant(analog_noise(config, dim, x.cols(), rng)));
    out.class_logits = model.decoder.forward(g, y, params, "dec");
    return out;
}

namespace {

Eigen::MatrixXd analog_eval_probs(const Mlp& decoder, nn::Graph& g, nn::Graph::NodeId y) {
    auto probs = g.softmax_cols(decoder.forward(g, y));
    return g.value(probs);
}

}  // namespace

Eigen::MatrixXd jscc_eval_forward(const JsccModel& model, const nn::Mat& x,
                                  const phy::ChannelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    nn::Graph g;
    auto z = model.encoder.forward(g, g.constant(x));
    auto zn = g.unit_power_cols(z, model.spec.symbols);
    auto y = g.add(zn, g.constant(analog_noise(config, 2 * model.spec.symbols, x.cols(), rng)));
    return analog_eval_probs(model.decoder, g, y);
}

Eigen::MatrixXd vib_eval_forward(const VibModel& model, const nn::Mat& x,
                                 const phy::ChannelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    const Eigen::Index dim = 2 * model.spec.symbols;
    nn::Graph g;
    auto enc_out = model.encoder.forward(g, g.constant(x));
    auto mu = g.slice_rows(enc_out, 0, dim);
    auto zn = g.unit_power_cols(mu, model.spec.symbols);
    auto y = g.add(zn, g.constant(analog_noise(config, dim, x.cols(), rng)));
    return analog_eval_probs(model.decoder, g, y);
}

metrics::DiscreteDistribution analog_jscc(const JsccModel& model, const std::vector<float>& x,
                                          const phy::ChannelConfig& config, std::uint64_t seed) {
    if (static_cast<int>(x.size()) != model.spec.input_dim)
        throw ValidationError("analog_jscc: input dimension mismatch");
    Eigen::MatrixXd probs = jscc_eval_forward(model, batch_to_mat(x), config, seed);
    if (!probs.allFinite()) throw NumericError("analog_jscc: non-finite decoder output");
    metrics::DiscreteDistribution d;
    d.probabilities.assign(probs.data(), probs.data() + probs.rows());
    return d;
}

metrics::DiscreteDistribution analog_vib(const VibModel& model, const std::vector<float>& x,
                                         const phy::ChannelConfig& config, std::uint64_t seed) {
    if (static_cast<int>(x.size()) != model.spec.input_dim)
        throw ValidationError("analog_vib: input dimension mismatch");
    Eigen::MatrixXd probs = vib_eval_forward(model, batch_to_mat(x), config, seed);
    if (!probs.allFinite()) throw NumericError("analog_vib: non-finite decoder output");
    metrics::DiscreteDistribution d;
    d.probabilities.assign(probs.data(), probs.data() + probs.rows());
    return d;
}

ClubModel::ClubModel(const DtribSpec& s, int private_card, std::vector<int> adv_hidden,
                     const phy::ChannelConfig& paired_channel, std::uint64_t seed)
    : base(s, paired_channel, seed),
      private_cardinality(private_card),
      adversary_hidden(std::move(adv_hidden)) {
    if (private_cardinality < 2)
        throw ValidationError("ClubModel: private cardinality must be >= 2");
    Rng rng(seed ^ 0xAD5E'55AA'1234'5678ull);
    MlpSpec adv;
    adv.dims.push_back(s.message_length * s.codeword_dim);
    adv.dims.insert(adv.dims.end(), adversary_hidden.begin(), adversary_hidden.end());
    adv.dims.push_back(private_cardinality);
    adv.activation = s.activation;
    adversary = Mlp(adv, rng);
}

CodecKind kind_of(const AnyModel& model) {
    if (std::holds_alternative<DtribModel>(model)) return CodecKind::Dtrib;
    if (std::holds_alternative<JsccModel>(model)) return CodecKind::AnalogJscc;
    if (std::holds_alternative<VibModel>(model)) return CodecKind::AnalogVib;
    return CodecKind::Club;
}

std::string codec_name(CodecKind kind) {
    switch (kind) {
        case CodecKind::Dtrib: return "dtrib";
        case CodecKind::AnalogJscc: return "analog_jscc";
        case CodecKind::AnalogVib: return "analog_vib";
        case CodecKind::Club: return "club";
    }
    return "unknown";
}

SemanticMessage DtribMessageEncoder::encode(const sources::LabeledSample& sample) const {
    return encode_discrete(*model_, sample.x, EncodeMode::Argmax, 1.0, 0).message;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kCheckpointMagic[] = "SEMCOM-CKPT-1\n";

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 4)) throw IoError("checkpoint: truncated");
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const std::uint32_t n = read_u32(in);
    std::string s(n, '\0');
    if (!in.read(s.data(), n)) throw IoError("checkpoint: truncated string");
    return s;
}

void write_tensor(std::ostream& out, const std::string& name, const nn::Mat& m) {
    write_string(out, name);
    write_u32(out, static_cast<std::uint32_t>(m.rows()));
    write_u32(out, static_cast<std::uint32_t>(m.cols()));
    std::vector<float> buf(m.size());
    for (Eigen::Index i = 0; i < m.size(); ++i)
        buf[i] = static_cast<float>(m.data()[i]);  // column-major order
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

std::map<std::string, std::string> parse_descriptor(const std::string& arch) {
    std::map<std::string, std::string> kv;
    std::stringstream ss(arch);
    std::string tok;
    ss >> kv["codec"];
    while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw FormatError("checkpoint: bad descriptor token " + tok);
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
}

std::vector<std::pair<std::string, nn::Mat*>> model_tensors(AnyModel& model) {
    std::vector<std::pair<std::string, nn::Mat*>> out;
    auto add_mlp = [&out](Mlp& mlp, const std::string& prefix) {
        for (auto& [name, t] : mlp.named_tensors(prefix)) out.emplace_back(name, t);
    };
    std::visit(
        [&](auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, DtribModel>) {
                add_mlp(m.encoder, "enc");
                out.emplace_back("codebook", &m.codebook);
                add_mlp(m.decoder, "dec");
            } else if constexpr (std::is_same_v<T, JsccModel> || std::is_same_v<T, VibModel>) {
                add_mlp(m.encoder, "enc");
                add_mlp(m.decoder, "dec");
            } else {
                add_mlp(m.base.encoder, "enc");
                out.emplace_back("codebook", &m.base.codebook);
                add_mlp(m.base.decoder, "dec");
                add_mlp(m.adversary, "adv");
            }
        },
        model);
    return out;
}

}  // namespace

std::string arch_descriptor(const AnyModel& model) {
    std::ostringstream os;
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, DtribModel>) {
                const auto& s = m.spec;
                os << "dtrib in=" << s.input_dim << " classes=" << s.class_count
                   << " enc=" << int_list_string(s.encoder_hidden)
                   << " dec=" << int_list_string(s.decoder_hidden) << " m=" << s.message_length
                   << " K=" << s.codebook_size << " dc=" << s.codeword_dim
                   << " act=" << activation_name(s.activation) << " st=" << (s.straight_through ? 1 : 0);
            } else if constexpr (std::is_same_v<T, JsccModel> || std::is_same_v<T, VibModel>) {
                const auto& s = m.spec;
                os << (std::is_same_v<T, JsccModel> ? "jscc" : "vib") << " in=" << s.input_dim
                   << " classes=" << s.class_count << " enc=" << int_list_string(s.encoder_hidden)
                   << " dec=" << int_list_string(s.decoder_hidden) << " m=" << s.symbols
                   << " act=" << activation_name(s.activation);
            } else {
                const auto& s = m.base.spec;
                os << "club in=" << s.input_dim << " classes=" << s.class_count
                   << " enc=" << int_list_string(s.encoder_hidden)
                   << " dec=" << int_list_string(s.decoder_hidden) << " m=" << s.message_length
                   << " K=" << s.codebook_size << " dc=" << s.codeword_dim
                   << " act=" << activation_name(s.activation) << " st=" << (s.straight_through ? 1 : 0)
                   << " P=" << m.private_cardinality << " adv=" << int_list_string(m.adversary_hidden);
            }
        },
        model);
    return os.str();
}

void save_checkpoint(const std::filesystem::path& path, const AnyModel& model,
                     const std::string& config_text) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp + " for writing");
        out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
        write_string(out, arch_descriptor(model));
        write_string(out, config_text);
        auto tensors = model_tensors(const_cast<AnyModel&>(model));
        write_u32(out, static_cast<std::uint32_t>(tensors.size()));
        for (auto& [name, t] : tensors) write_tensor(out, name, *t);
        if (!out) throw IoError("short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);  // atomic publish under the final name
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    std::string magic(sizeof(kCheckpointMagic) - 1, '\0');
    if (!in.read(magic.data(), static_cast<std::streamsize>(magic.size())) ||
        magic != kCheckpointMagic)
        throw FormatError("not a SEMCOM-CKPT-1 checkpoint: " + path.string());

    LoadedCheckpoint out;
    out.arch_descriptor = read_string(in);
    out.config_text = read_string(in);

    const auto kv = parse_descriptor(out.arch_descriptor);
    const std::string codec = kv.at("codec");
    auto geti = [&kv](const std::string& k) { return std::stoi(kv.at(k)); };
    if (codec == "dtrib" || codec == "club") {
        DtribSpec s;
        s.input_dim = geti("in");
        s.class_count = geti("classes");
        s.encoder_hidden = parse_int_list(kv.at("enc"));
        s.decoder_hidden = parse_int_list(kv.at("dec"));
        s.message_length = geti("m");
        s.codebook_size = geti("K");
        s.codeword_dim = geti("dc");
        s.activation = parse_activation(kv.at("act"));
        s.straight_through = geti("st") != 0;
        phy::ChannelConfig ch;
        ch.modulation_order = s.codebook_size;
        if (codec == "dtrib") {
            out.model = DtribModel(s, ch, 0);
        } else {
            out.model = ClubModel(s, geti("P"), parse_int_list(kv.at("adv")), ch, 0);
        }
    } else if (codec == "jscc" || codec == "vib") {
        AnalogSpec s;
        s.input_dim = geti("in");
        s.class_count = geti("classes");
        s.encoder_hidden = parse_int_list(kv.at("enc"));
        s.decoder_hidden = parse_int_list(kv.at("dec"));
        s.symbols = geti("m");
        s.activation = parse_activation(kv.at("act"));
        if (codec == "jscc")
            out.model = JsccModel(s, 0);
        else
            out.model = VibModel(s, 0);
    } else {
        throw FormatError("checkpoint: unknown codec " + codec);
    }

    auto tensors = model_tensors(out.model);
    std::map<std::string, nn::Mat*> by_name;
    for (auto& [name, t] : tensors) by_name[name] = t;
    const std::uint32_t count = read_u32(in);
    if (count != tensors.size())
        throw FormatError("checkpoint: tensor count mismatch for " + codec);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = read_string(in);
        const std::uint32_t rows = read_u32(in);
        const std::uint32_t cols = read_u32(in);
        auto it = by_name.find(name);
        if (it == by_name.end()) throw FormatError("checkpoint: unexpected tensor " + name);
        nn::Mat& t = *it->second;
        if (t.rows() != static_cast<Eigen::Index>(rows) ||
            t.cols() != static_cast<Eigen::Index>(cols))
            throw FormatError("checkpoint: shape mismatch for tensor " + name);
        std::vector<float> buf(std::size_t(rows) * cols);
        if (!in.read(reinterpret_cast<char*>(buf.data()),
                     static_cast<std::streamsize>(buf.size() * sizeof(float))))
            throw IoError("checkpoint: truncated tensor " + name);
        for (Eigen::Index j = 0; j < t.size(); ++j) t.data()[j] = buf[j];
    }
    return out;
}

Batch make_batch(const sources::Dataset& dataset, std::span<const int> indices) {
    if (indices.empty()) throw ValidationError("make_batch: empty index list");
    Batch b;
    b.x.resize(dataset.dimension(), static_cast<Eigen::Index>(indices.size()));
    b.labels.resize(indices.size());
    const bool priv = dataset.privacy_augmented();
    if (priv) b.private_attrs.resize(indices.size());
    for (std::size_t j = 0; j < indices.size(); ++j) {
        const auto& s = dataset.samples()[indices[j]];
        for (int i = 0; i < dataset.dimension(); ++i)
            b.x(i, static_cast<Eigen::Index>(j)) = s.x[i];
        b.labels[j] = s.label;
        if (priv) b.private_attrs[j] = *s.private_attr;
    }
    return b;
}

}  // namespace semcom::codecs
