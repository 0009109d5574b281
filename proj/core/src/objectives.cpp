#include "semcom/objectives.hpp"

#include <cmath>

#include "semcom/errors.hpp"
#include "semcom/info_metrics.hpp"

namespace semcom::objectives {

void LossWeights::validate() const {
    if (!(beta >= 0.0) || !std::isfinite(beta))
        throw ValidationError("LossWeights: beta must be finite and nonnegative");
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw ValidationError("LossWeights: lambda must be finite and nonnegative");
    if (!(gamma >= 0.0) || !std::isfinite(gamma))
        throw ValidationError("LossWeights: gamma must be finite and nonnegative");
}

Eigen::VectorXd gumbel_softmax(const Eigen::VectorXd& logits, double tau, Rng& rng) {
    if (!(tau > 0.0)) throw ValidationError("gumbel_softmax: tau must be positive");
    if (!logits.allFinite()) throw ValidationError("gumbel_softmax: non-finite logits");
    Eigen::ArrayXd a(logits.size());
    for (Eigen::Index i = 0; i < logits.size(); ++i)
        a(i) = (logits(i) + rng.gumbel()) / tau;
    a -= a.maxCoeff();
    Eigen::ArrayXd e = a.exp();
    return e / e.sum();
}

double per_position_mi_bits(const std::vector<SemanticMessage>& z,
                            const std::vector<SemanticMessage>& z_hat, int alphabet) {
    if (z.empty() || z.size() != z_hat.size())
        throw ValidationError("per_position_mi_bits: mismatched message batches");
    const int m = static_cast<int>(z[0].indices.size());
    double total = 0.0;
    std::vector<int> a(z.size()), b(z.size());
    for (int pos = 0; pos < m; ++pos) {
        for (std::size_t s = 0; s < z.size(); ++s) {
            a[s] = z[s].indices[pos];
            b[s] = z_hat[s].indices[pos];
        }
        total += metrics::mi_plugin(metrics::JointCounts::from_pairs(a, b, alphabet, alphabet))
                     .value_bits;
    }
    return total / m;
}

double pooled_mi_bits(const std::vector<SemanticMessage>& z,
                      const std::vector<SemanticMessage>& z_hat, int alphabet) {
    if (z.empty() || z.size() != z_hat.size())
        throw ValidationError("pooled_mi_bits: mismatched message batches");
    const std::size_t m = z[0].indices.size();
    std::vector<int> a, b;
    a.reserve(z.size() * m);
    b.reserve(z.size() * m);
    for (std::size_t s = 0; s < z.size(); ++s) {
        for (std::size_t pos = 0; pos < m; ++pos) {
            a.push_back(z[s].indices[pos]);
            b.push_back(z_hat[s].indices[pos]);
        }
    }
    return metrics::mi_plugin(metrics::JointCounts::from_pairs(a, b, alphabet, alphabet))
        .value_bits;
}

double per_position_entropy_bits(const std::vector<SemanticMessage>& z, int alphabet) {
    if (z.empty()) throw ValidationError("per_position_entropy_bits: empty batch");
    const int m = static_cast<int>(z[0].indices.size());
    double total = 0.0;
    std::vector<std::int64_t> counts(alphabet);
    for (int pos = 0; pos < m; ++pos) {
        std::fill(counts.begin(), counts.end(), 0);
        for (const auto& msg : z) ++counts[msg.indices[pos]];
        total += metrics::entropy_plugin(counts);
    }
    return total / m;
}

VibLossResult vib_loss(nn::Graph& g, codecs::VibModel& model, const codecs::Batch& batch,
                       double beta, const phy::ChannelConfig& config, std::uint64_t seed,
                       codecs::ParamMap* params, nn::Graph::NodeId* root) {
    if (!(beta >= 0.0)) throw ValidationError("vib_loss: beta must be nonnegative");
    Rng rng(seed);
    auto fwd = codecs::vib_forward(g, model, batch.x, config, rng, params, /*sample_latent=*/true);
    auto ce = g.cross_entropy_bits(fwd.class_logits, batch.labels);
    auto kl = g.gaussian_kl_bits(fwd.mu, fwd.log_std);
    auto total = g.add(ce, g.scale(kl, beta));
    g.check_finite(total, "vib_loss");
    if (root) *root = total;
    VibLossResult r;
    r.ce_bits = g.value(ce)(0, 0);
    r.complexity_bits = g.value(kl)(0, 0);
    r.total = g.value(total)(0, 0);
    return r;
}

VibLossResult vib_loss(codecs::VibModel& model, const codecs::Batch& batch, double beta,
                       const phy::ChannelConfig& config, std::uint64_t seed) {
    nn::Graph g;
    return vib_loss(g, model, batch, beta, config, seed, nullptr, nullptr);
}

RibLossResult rib_loss(nn::Graph& g, codecs::DtribModel& model, const codecs::Batch& batch,
                       double lambda, double tau, const phy::ChannelConfig& config,
                       std::uint64_t seed, codecs::ParamMap* params, nn::Graph::NodeId* root) {
    if (!(lambda >= 0.0)) throw ValidationError("rib_loss: lambda must be nonnegative");
    Rng rng(seed);
    auto fwd = codecs::dtrib_relaxed_forward(g, model, batch.x, tau, config, rng, params);
    auto ce = g.cross_entropy_bits(fwd.class_logits, batch.labels);
    g.check_finite(ce, "rib_loss cross entropy");

    RibLossResult r;
    r.ce_bits = g.value(ce)(0, 0);
    // Redundancy surrogate: plug-in MI of the (Z, Zhat) pair under the
    // configured channel. Piecewise constant in the parameters, so it shifts
    // the reported loss without contributing gradient.
    r.redundancy_bits =
        per_position_mi_bits(fwd.messages, fwd.hard_demod, model.spec.codebook_size);
    r.variance_warning = static_cast<long>(batch.labels.size()) * model.spec.message_length <
                         4L * model.spec.codebook_size;
    r.total = r.ce_bits - lambda * r.redundancy_bits;
    if (root) *root = ce;  // the differentiable part
    return r;
}

RibLossResult rib_loss(codecs::DtribModel& model, const codecs::Batch& batch, double lambda,
                       double tau, const phy::ChannelConfig& config, std::uint64_t seed) {
    nn::Graph g;
    return rib_loss(g, model, batch, lambda, tau, config, seed, nullptr, nullptr);
}

ClubLossResult club_loss(codecs::ClubModel& model, const codecs::Batch& batch, double beta,
                         double gamma, double tau, const phy::ChannelConfig& config,
                         std::uint64_t seed, nn::Graph* g_enc, codecs::ParamMap* enc_params,
                         nn::Graph::NodeId* enc_root, nn::Graph* g_adv,
                         codecs::ParamMap* adv_params, nn::Graph::NodeId* adv_root) {
    if (!(beta >= 0.0) || !(gamma >= 0.0))
        throw ValidationError("club_loss: beta and gamma must be nonnegative");
    if (batch.private_attrs.empty())
        throw ValidationError("club_loss: batch has no private attributes");

    ClubLossResult r;
    // Both phases replay the same channel/gumbel draw so the reported terms
    // refer to one transmission.
    if (g_adv) {
        // Adversary phase: frozen encoder, trainable adversary on the
        // extracted (pre-channel) representation.
        Rng rng(seed);
        auto fwd = codecs::dtrib_relaxed_forward(*g_adv, model.base, batch.x, tau, config, rng,
                                                 nullptr);
        auto adv_logits =
            model.adversary.forward(*g_adv, fwd.pre_channel_hard, adv_params, "adv");
        auto adv_ce = g_adv->cross_entropy_bits(adv_logits, batch.private_attrs);
        g_adv->check_finite(adv_ce, "club_loss adversary cross entropy");
        r.adversary_objective = g_adv->value(adv_ce)(0, 0);
        if (adv_root) *adv_root = adv_ce;
    }
    {
        // Encoder phase: trainable encoder/codebook/utility decoder against
        // the frozen adversary.
        nn::Graph local;
        nn::Graph& g = g_enc ? *g_enc : local;
        Rng rng(seed);
        auto fwd =
            codecs::dtrib_relaxed_forward(g, model.base, batch.x, tau, config, rng, enc_params);
        auto utility_ce = g.cross_entropy_bits(fwd.class_logits, batch.labels);
        auto adv_logits = model.adversary.forward(g, fwd.pre_channel_hard, nullptr, "adv");
        auto adv_ce = g.cross_entropy_bits(adv_logits, batch.private_attrs);
        g.check_finite(utility_ce, "club_loss utility cross entropy");

        r.utility_ce_bits = g.value(utility_ce)(0, 0);
        r.leakage_ce_bits = g.value(adv_ce)(0, 0);
        r.complexity_bits =
            per_position_entropy_bits(fwd.messages, model.base.spec.codebook_size);
        r.encoder_objective =
            r.utility_ce_bits + beta * r.complexity_bits - gamma * r.leakage_ce_bits;
        if (!g_adv) r.adversary_objective = r.leakage_ce_bits;
        if (enc_root) {
            // Differentiable part: utility CE - gamma * adversary CE (the
            // complexity surrogate is a plug-in statistic of argmax indices).
            *enc_root = g.sub(utility_ce, g.scale(adv_ce, gamma));
        }
    }
    return r;
}

ClubLossResult club_loss(codecs::ClubModel& model, const codecs::Batch& batch, double beta,
                         double gamma, double tau, const phy::ChannelConfig& config,
                         std::uint64_t seed) {
    return club_loss(model, batch, beta, gamma, tau, config, seed, nullptr, nullptr, nullptr,
                     nullptr, nullptr, nullptr);
}

}  // namespace semcom::objectives
