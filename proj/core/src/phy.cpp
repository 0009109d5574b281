#include "semcom/phy.hpp"

#include <cassert>

#include "semcom/errors.hpp"
#include "semcom/rng.hpp"

namespace semcom::phy {

namespace {
bool is_power_of_two(int m) { return m >= 2 && (m & (m - 1)) == 0; }
}

void ChannelConfig::validate() const {
    if (!is_power_of_two(modulation_order))
        throw ValidationError("ChannelConfig: modulation order must be a power of two >= 2");
    if (std::isnan(peak_snr_db) || (std::isinf(peak_snr_db) && peak_snr_db < 0.0))
        throw ValidationError("ChannelConfig: peak_snr_db must be finite or +inf");
}

double SymbolBlock::average_power() const {
    if (symbols.empty()) return 0.0;
    double p = 0.0;
    for (const auto& s : symbols) p += std::norm(s);
    return p / static_cast<double>(symbols.size());
}

std::vector<std::complex<double>> psk_constellation(int modulation_order) {
    if (!is_power_of_two(modulation_order))
        throw ValidationError("psk_constellation: modulation order must be a power of two >= 2");
    std::vector<std::complex<double>> points(modulation_order);
    for (int k = 0; k < modulation_order; ++k) {
        const double a = 2.0 * M_PI * static_cast<double>(k) / modulation_order;
        points[k] = {std::cos(a), std::sin(a)};
    }
    return points;
}

int gray_encode(int index, int modulation_order) {
    if (!is_power_of_two(modulation_order))
        throw ValidationError("gray_encode: modulation order must be a power of two >= 2");
    if (index < 0 || index >= modulation_order)
        throw ValidationError("gray_encode: index out of range");
    // Inverse binary-reflected Gray (prefix-XOR scan): places data index
    // `index` at the position whose Gray code equals it, so neighbouring
    // positions differ in exactly one data bit.
    unsigned p = static_cast<unsigned>(index);
    for (unsigned shift = 1; shift < 32; shift <<= 1) p ^= p >> shift;
    return static_cast<int>(p);
}

int gray_decode(int position, int modulation_order) {
    if (!is_power_of_two(modulation_order))
        throw ValidationError("gray_decode: modulation order must be a power of two >= 2");
    if (position < 0 || position >= modulation_order)
        throw ValidationError("gray_decode: position out of range");
    const unsigned u = static_cast<unsigned>(position);
    return static_cast<int>(u ^ (u >> 1));
}

int nearest_point(std::complex<double> received,
                  const std::vector<std::complex<double>>& constellation) {
    int best = 0;
    double best_d = std::norm(received - constellation[0]);
    for (int k = 1; k < static_cast<int>(constellation.size()); ++k) {
        const double d = std::norm(received - constellation[k]);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

TransmitResult transmit(const std::vector<SemanticMessage>& messages,
                        const ChannelConfig& config) {
    config.validate();
    const int m_order = config.modulation_order;
    const auto constellation = psk_constellation(m_order);
    const double sigma2 = config.noise_variance();
    const double sigma_axis = std::sqrt(sigma2 / 2.0);
    Rng rng(config.seed);

    TransmitResult out;
    out.received.reserve(messages.size());
    out.hard_messages.reserve(messages.size());
    for (const auto& msg : messages) {
        std::complex<double> fading{1.0, 0.0};
        if (config.model == ChannelModel::Rayleigh) {
            // Unit-variance circular Gaussian, constant over the message.
            fading = {rng.normal() / std::sqrt(2.0), rng.normal() / std::sqrt(2.0)};
        }
        SymbolBlock block;
        block.symbols.reserve(msg.indices.size());
        SemanticMessage hard;
        hard.indices.reserve(msg.indices.size());
        for (int index : msg.indices) {
            if (index < 0 || index >= m_order)
                throw ValidationError("transmit: message index exceeds modulation order");
            const auto x = constellation[gray_encode(index, m_order)];
            std::complex<double> y = x;
            if (config.model == ChannelModel::Rayleigh) y *= fading;
            if (sigma2 > 0.0) y += std::complex<double>{sigma_axis * rng.normal(),
                                                        sigma_axis * rng.normal()};
            if (config.model == ChannelModel::Rayleigh && config.csi == Csi::PerfectReceiver)
                y /= fading;
            block.symbols.push_back(y);
            hard.indices.push_back(gray_decode(nearest_point(y, constellation), m_order));
        }
        // PSK symbols are unit modulus, so peak power equals average power
        // and the block is power-normalized by construction.
        block.power_normalized = true;
        out.received.push_back(std::move(block));
        out.hard_messages.push_back(std::move(hard));
    }
    return out;
}

}  // namespace semcom::phy
