#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "semcom/types.hpp"

namespace semcom::phy {

enum class ChannelModel { Awgn, Rayleigh };
enum class Csi { PerfectReceiver, None };

struct ChannelConfig {
    ChannelModel model = ChannelModel::Awgn;
    int modulation_order = 16;  // M, power of two
    double peak_snr_db = 8.0;   // +infinity means noiseless
    Csi csi = Csi::PerfectReceiver;
    std::uint64_t seed = 0;

    void validate() const;
    bool noiseless() const { return std::isinf(peak_snr_db) && peak_snr_db > 0.0; }

    // Total complex noise power E|n|^2. Peak SNR is defined as
    // (max constellation symbol power) / (total complex noise power); for
    // unit-modulus PSK this equals the average SNR.
    double noise_variance() const {
        return noiseless() ? 0.0 : std::pow(10.0, -peak_snr_db / 10.0);
    }
};

struct SymbolBlock {
    std::vector<std::complex<double>> symbols;
    bool power_normalized = false;

    double average_power() const;
};

// Unit-modulus points exp(i*2*pi*k/M), k = 0..M-1.
std::vector<std::complex<double>> psk_constellation(int modulation_order);

// Data index -> constellation position such that adjacent positions carry
// data indices differing in exactly one bit (inverse binary-reflected Gray).
int gray_encode(int index, int modulation_order);
// Constellation position -> data index: position XOR (position >> 1).
int gray_decode(int position, int modulation_order);

// Nearest constellation point by Euclidean distance; ties -> lowest index.
int nearest_point(std::complex<double> received,
                  const std::vector<std::complex<double>>& constellation);

struct TransmitResult {
    std::vector<SymbolBlock> received;              // post-equalization symbols
    std::vector<SemanticMessage> hard_messages;     // nearest-point demodulation
};

// Indices -> Gray -> PSK -> channel -> (received soft symbols, hard demod).
// Rayleigh fading is block-constant per message; under perfect-receiver CSI
// the received symbols are divided by the fading coefficient.
TransmitResult transmit(const std::vector<SemanticMessage>& messages,
                        const ChannelConfig& config);

}  // namespace semcom::phy
