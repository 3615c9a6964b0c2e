#ifndef RFAUTH_RF_HPP
#define RFAUTH_RF_HPP

#include <limits>
#include <vector>

#include "rfauth/signal.hpp"

namespace rfauth::rf {

// Sentinel meaning "skip the noise stage" (testing only).
inline constexpr double kSnrInfinity = std::numeric_limits<double>::infinity();

// A device's RF fingerprint: Volterra power-amplifier coefficients.
struct TransmitterProfile {
    int id = 0;
    double psi0 = 0.0;  // 3rd-order coefficient
    double psi1 = 0.0;  // 5th-order coefficient
};

enum class ChannelVariant { Awgn, Dynamic };

struct ChannelModel {
    ChannelVariant variant = ChannelVariant::Awgn;
    double snr_db = 20.0;
    // Dynamic-only knobs.
    double cfo_std_hz = 1000.0;
    int n_taps = 3;
    double rayleigh_scale = 0.5;
    int interp_factor = 32;
};

// Per-packet randomness of the dynamic channel, drawn fresh per transmission.
struct ChannelRealization {
    int timing_offset = 0;  // in [0, interp_factor)
    double cfo_hz = 0.0;
    std::vector<cplx> tap_gains = {cplx{1.0, 0.0}};
    std::uint64_t noise_seed = 0;
};

// psi0 ~ U(-0.15, -0.03), psi1 = kappa * psi0^2 with kappa ~ U(0.5, 1.5).
std::vector<TransmitterProfile> sample_transmitter_profiles(int n, Rng& rng);

// Volterra PA: y = z * (1 + psi0 |z|^2 + psi1 |z|^4).
IqSignal apply_pa(const IqSignal& signal, const TransmitterProfile& profile);

// Fractional delay of offset/interp_factor samples via windowed-sinc
// reconstruction; edges zero-padded; length preserved.
IqSignal apply_timing_error(const IqSignal& signal, int offset, int interp_factor);

// y[k] = z[k] * exp(j 2 pi cfo k / sample_rate).
IqSignal apply_cfo(const IqSignal& signal, double cfo_hz);

// Linear convolution truncated to the input length.
IqSignal apply_multipath(const IqSignal& signal, const std::vector<cplx>& tap_gains);

// Complex Gaussian noise with per-sample variance power / 10^(snr/10).
IqSignal add_awgn(const IqSignal& signal, double snr_db, Rng& rng);

ChannelRealization sample_channel_realization(const ChannelModel& model, Rng& rng);

// Awgn: noise only. Dynamic: timing -> cfo -> multipath -> awgn.
IqSignal apply_channel(const IqSignal& signal, const ChannelModel& model,
                       const ChannelRealization& realization);

// Full path: pulse-shape -> PA -> channel (fresh realization) -> matched filter.
// Returns |symbols| symbol-rate samples.
IqSignal transmit(const IqSignal& symbols, const TransmitterProfile& profile,
                  const ChannelModel& model, const PulseShapeConfig& pulse, Rng& rng);

}  // namespace rfauth::rf

#endif
