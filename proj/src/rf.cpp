#include "rfauth/rf.hpp"

#include <cmath>
#include <stdexcept>

namespace rfauth::rf {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::vector<TransmitterProfile> sample_transmitter_profiles(int n, Rng& rng) {
    if (n <= 0) throw std::invalid_argument("sample_transmitter_profiles: n must be positive");
    std::vector<TransmitterProfile> profiles(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        TransmitterProfile p;
        p.id = i;
        p.psi0 = rng.uniform(-0.15, -0.03);
        const double kappa = rng.uniform(0.5, 1.5);
        p.psi1 = kappa * p.psi0 * p.psi0;
        profiles[static_cast<std::size_t>(i)] = p;
    }
    return profiles;
}

IqSignal apply_pa(const IqSignal& signal, const TransmitterProfile& profile) {
    IqSignal out = signal;
    for (auto& s : out.samples) {
        const double m2 = std::norm(s);
        s *= 1.0 + profile.psi0 * m2 + profile.psi1 * m2 * m2;
    }
    return out;
}

IqSignal apply_timing_error(const IqSignal& signal, int offset, int interp_factor) {
    if (interp_factor < 1 || offset < 0 || offset >= interp_factor)
        throw std::invalid_argument("apply_timing_error: offset must be in [0, interp_factor)");
    if (offset == 0) return signal;

    // y[n] = x(n + offset/I): windowed-sinc fractional advance.
    const double mu = static_cast<double>(offset) / interp_factor;
    constexpr int kHalfTaps = 16;
    double taps[2 * kHalfTaps];
    for (int j = -kHalfTaps; j < kHalfTaps; ++j) {
        const double t = mu - j;  // x index distance from n+j... sinc argument
        const double sinc = (std::abs(t) < 1e-12) ? 1.0 : std::sin(kPi * t) / (kPi * t);
        // Hann window over the tap span.
        const double w = 0.5 + 0.5 * std::cos(kPi * (j - mu) / kHalfTaps);
        taps[j + kHalfTaps] = sinc * w;
    }

    const std::size_t n = signal.size();
    IqSignal out = signal;
    for (std::size_t i = 0; i < n; ++i) {
        cplx acc{0.0, 0.0};
        for (int j = -kHalfTaps; j < kHalfTaps; ++j) {
            const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(i) + j;
            if (k < 0 || k >= static_cast<std::ptrdiff_t>(n)) continue;  // zero-padded edges
            acc += signal.samples[static_cast<std::size_t>(k)] * taps[j + kHalfTaps];
        }
        out.samples[i] = acc;
    }
    return out;
}

IqSignal apply_cfo(const IqSignal& signal, double cfo_hz) {
    if (!(signal.sample_rate_hz > 0.0)) throw std::invalid_argument("apply_cfo: sample_rate_hz must be positive");
    IqSignal out = signal;
    const double w = 2.0 * kPi * cfo_hz / signal.sample_rate_hz;
    for (std::size_t k = 0; k < out.size(); ++k)
        out.samples[k] *= cplx(std::cos(w * static_cast<double>(k)), std::sin(w * static_cast<double>(k)));
    return out;
}

IqSignal apply_multipath(const IqSignal& signal, const std::vector<cplx>& tap_gains) {
    if (tap_gains.empty()) throw std::invalid_argument("apply_multipath: empty tap gains");
    if (tap_gains.size() > signal.size())
        throw std::invalid_argument("apply_multipath: more taps than samples");
    IqSignal out = signal;
    for (std::size_t n = 0; n < signal.size(); ++n) {
        cplx acc{0.0, 0.0};
        const std::size_t j_hi = std::min(tap_gains.size() - 1, n);
        for (std::size_t j = 0; j <= j_hi; ++j) acc += signal.samples[n - j] * tap_gains[j];
        out.samples[n] = acc;
    }
    return out;
}

IqSignal add_awgn(const IqSignal& signal, double snr_db, Rng& rng) {
    if (std::isinf(snr_db) && snr_db > 0.0) return signal;  // explicit no-noise sentinel
    const double power = measure_power(signal);
    if (!(power > 0.0)) throw std::invalid_argument("add_awgn: zero-power input");
    const double noise_var = power / std::pow(10.0, snr_db / 10.0);
    const double comp_std = std::sqrt(noise_var / 2.0);
    IqSignal out = signal;
    for (auto& s : out.samples) s += cplx(rng.normal(0.0, comp_std), rng.normal(0.0, comp_std));
    return out;
}

ChannelRealization sample_channel_realization(const ChannelModel& model, Rng& rng) {
    ChannelRealization r;
    r.noise_seed = rng.next_u64();
    if (model.variant == ChannelVariant::Awgn) return r;
    r.timing_offset = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(model.interp_factor)));
    r.cfo_hz = rng.normal(0.0, model.cfo_std_hz);
    r.tap_gains.resize(static_cast<std::size_t>(model.n_taps));
    for (auto& g : r.tap_gains) {
        // Complex Gaussian with per-component sigma = scale gives a
        // Rayleigh(scale)-distributed magnitude and uniform phase.
        g = cplx(rng.normal(0.0, model.rayleigh_scale), rng.normal(0.0, model.rayleigh_scale));
    }
    return r;
}

IqSignal apply_channel(const IqSignal& signal, const ChannelModel& model,
                       const ChannelRealization& realization) {
    Rng noise_rng(realization.noise_seed);
    if (model.variant == ChannelVariant::Awgn) return add_awgn(signal, model.snr_db, noise_rng);
    IqSignal out = apply_timing_error(signal, realization.timing_offset, model.interp_factor);
    out = apply_cfo(out, realization.cfo_hz);
    out = apply_multipath(out, realization.tap_gains);
    return add_awgn(out, model.snr_db, noise_rng);
}

IqSignal transmit(const IqSignal& symbols, const TransmitterProfile& profile,
                  const ChannelModel& model, const PulseShapeConfig& pulse, Rng& rng) {
    IqSignal shaped = pulse_shape(symbols, pulse);
    shaped = apply_pa(shaped, profile);
    const ChannelRealization realization = sample_channel_realization(model, rng);
    shaped = apply_channel(shaped, model, realization);
    return matched_filter_downsample(shaped, pulse, static_cast<int>(symbols.size()));
}

}  // namespace rfauth::rf
