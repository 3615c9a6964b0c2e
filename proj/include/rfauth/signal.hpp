#ifndef RFAUTH_SIGNAL_HPP
#define RFAUTH_SIGNAL_HPP

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "rfauth/rng.hpp"

namespace rfauth {

using cplx = std::complex<double>;

// A finite sequence of complex baseband samples. sample_rate_hz is only
// consumed by the dynamic channel's CFO stage.
struct IqSignal {
    std::vector<cplx> samples;
    double sample_rate_hz = 1e6;

    std::size_t size() const { return samples.size(); }
};

using BitStream = std::vector<std::uint8_t>;

struct PulseShapeConfig {
    double rolloff = 0.2;
    int samples_per_symbol = 4;
    int span_symbols = 10;  // even
};

// ---- bit / symbol layer ----

BitStream generate_random_bits(int n, Rng& rng);

// Gray mapping: 00 -> (+1+j)/sqrt2, 01 -> (-1+j)/sqrt2,
//               11 -> (-1-j)/sqrt2, 10 -> (+1-j)/sqrt2.
IqSignal qpsk_modulate(const BitStream& bits);

// ---- pulse shaping ----

// Unit-energy root-raised-cosine taps, length span*sps + 1, symmetric.
std::vector<double> rrc_taps(const PulseShapeConfig& config);

// Zero-stuff by sps and convolve with the RRC taps (full convolution).
// Output length = |symbols|*sps + span*sps.
IqSignal pulse_shape(const IqSignal& symbols, const PulseShapeConfig& config);

// Matched-filter with the RRC taps and sample at symbol instants aligned to
// the filter-pair group delay; returns exactly n_symbols samples.
IqSignal matched_filter_downsample(const IqSignal& waveform, const PulseShapeConfig& config,
                                   int n_symbols);

// ---- features / utilities ----

// DFT magnitudes of the whole signal, reshaped row-major into (N/2) x 2,
// returned as a flat row-major vector of length N.
std::vector<double> dft_magnitude_features(const IqSignal& signal);

// In-place-free DFT helper (radix-2 for powers of two, direct sum otherwise).
std::vector<cplx> dft(const std::vector<cplx>& x);

// Mean of |sample|^2.
double measure_power(const IqSignal& signal);

void assert_finite(const IqSignal& signal, const char* context);

// ---- RFSG v1 capture files ----
// Little-endian: "RFSG", u16 version=1, u32 record_count, u32 samples_per_record,
// then record_count * samples_per_record * 2 float32 interleaved I,Q.

void write_rfsg(const std::string& path, const std::vector<IqSignal>& records);
std::vector<IqSignal> read_rfsg(const std::string& path);

}  // namespace rfauth

#endif
