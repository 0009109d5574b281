#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "semcom/codecs.hpp"
#include "semcom/phy.hpp"
#include "semcom/rng.hpp"

namespace semcom::objectives {

struct LossWeights {
    double beta = 1e-3;   // complexity weight
    double lambda = 0.1;  // redundancy weight
    double gamma = 0.0;   // leakage weight

    void validate() const;
};

// One draw of w_k proportional to exp((logit_k + g_k)/tau) with independent
// standard Gumbel g_k. Always on the simplex.
Eigen::VectorXd gumbel_softmax(const Eigen::VectorXd& logits, double tau, Rng& rng);

// ---------------------------------------------------------------------------
// Learnable losses. Each has a graph-building variant (for training) and a
// scalar convenience wrapper. All terms are in bits.

struct VibLossResult {
    double total = 0.0;
    double ce_bits = 0.0;          // channel-aware cross entropy
    double complexity_bits = 0.0;  // KL(latent || standard prior)
};
VibLossResult vib_loss(nn::Graph& g, codecs::VibModel& model, const codecs::Batch& batch,
                       double beta, const phy::ChannelConfig& config, std::uint64_t seed,
                       codecs::ParamMap* params, nn::Graph::NodeId* root);
VibLossResult vib_loss(codecs::VibModel& model, const codecs::Batch& batch, double beta,
                       const phy::ChannelConfig& config, std::uint64_t seed);

struct RibLossResult {
    double total = 0.0;
    double ce_bits = 0.0;          // variational utility surrogate
    double redundancy_bits = 0.0;  // plug-in I(Z; Zhat), averaged per position
    bool variance_warning = false; // batch too small for the plug-in estimate
};
RibLossResult rib_loss(nn::Graph& g, codecs::DtribModel& model, const codecs::Batch& batch,
                       double lambda, double tau, const phy::ChannelConfig& config,
                       std::uint64_t seed, codecs::ParamMap* params, nn::Graph::NodeId* root);
RibLossResult rib_loss(codecs::DtribModel& model, const codecs::Batch& batch, double lambda,
                       double tau, const phy::ChannelConfig& config, std::uint64_t seed);

struct ClubLossResult {
    double encoder_objective = 0.0;
    double adversary_objective = 0.0;
    double utility_ce_bits = 0.0;
    double complexity_bits = 0.0;  // per-position plug-in entropy of Z
    double leakage_ce_bits = 0.0;  // adversary cross entropy on s
};
// Builds both phases on separate graphs: `g_adv` trains the adversary on a
// frozen encoder; `g_enc` trains encoder/codebook/utility decoder against a
// frozen adversary. Either graph pointer may be null to skip that phase.
ClubLossResult club_loss(codecs::ClubModel& model, const codecs::Batch& batch, double beta,
                         double gamma, double tau, const phy::ChannelConfig& config,
                         std::uint64_t seed, nn::Graph* g_enc, codecs::ParamMap* enc_params,
                         nn::Graph::NodeId* enc_root, nn::Graph* g_adv,
                         codecs::ParamMap* adv_params, nn::Graph::NodeId* adv_root);
ClubLossResult club_loss(codecs::ClubModel& model, const codecs::Batch& batch, double beta,
                         double gamma, double tau, const phy::ChannelConfig& config,
                         std::uint64_t seed);

// Plug-in MI between transmitted and hard-demodulated indices, averaged per
// message position (the rib_loss redundancy surrogate).
double per_position_mi_bits(const std::vector<SemanticMessage>& z,
                            const std::vector<SemanticMessage>& z_hat, int alphabet);
// Plug-in entropy of indices, averaged per message position.
double per_position_entropy_bits(const std::vector<SemanticMessage>& z, int alphabet);
// Plug-in MI with every (sample, position) index pair pooled into one joint:
// the per-channel-use MI behind the empirical semantic rate. On a noiseless
// channel it collapses to the pooled index entropy (the per-symbol ESE).
double pooled_mi_bits(const std::vector<SemanticMessage>& z,
                      const std::vector<SemanticMessage>& z_hat, int alphabet);

}  // namespace semcom::objectives
