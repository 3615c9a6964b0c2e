#include "rfauth/signal.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace rfauth {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kInvSqrt2 = 0.70710678118654752440;
}  // namespace

BitStream generate_random_bits(int n, Rng& rng) {
    if (n <= 0 || n % 2 != 0) throw std::invalid_argument("generate_random_bits: n must be positive and even");
    BitStream bits(static_cast<std::size_t>(n));
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng.next_u64() >> 63);
    return bits;
}

IqSignal qpsk_modulate(const BitStream& bits) {
    if (bits.size() % 2 != 0) throw std::invalid_argument("qpsk_modulate: bit count must be even");
    IqSignal out;
    out.samples.reserve(bits.size() / 2);
    for (std::size_t i = 0; i + 1 < bits.size(); i += 2) {
        const int pair = bits[i] * 2 + bits[i + 1];
        switch (pair) {
            case 0: out.samples.emplace_back(kInvSqrt2, kInvSqrt2); break;    // 00
            case 1: out.samples.emplace_back(-kInvSqrt2, kInvSqrt2); break;   // 01
            case 3: out.samples.emplace_back(-kInvSqrt2, -kInvSqrt2); break;  // 11
            default: out.samples.emplace_back(kInvSqrt2, -kInvSqrt2); break;  // 10
        }
    }
    return out;
}

std::vector<double> rrc_taps(const PulseShapeConfig& config) {
    if (!(config.rolloff > 0.0 && config.rolloff <= 1.0))
        throw std::invalid_argument("rrc_taps: rolloff must be in (0,1]");
    if (config.samples_per_symbol < 2) throw std::invalid_argument("rrc_taps: samples_per_symbol must be >= 2");
    if (config.span_symbols < 4 || config.span_symbols % 2 != 0)
        throw std::invalid_argument("rrc_taps: span_symbols must be an even integer >= 4");

    const double beta = config.rolloff;
    const int sps = config.samples_per_symbol;
    const int half = config.span_symbols * sps / 2;
    std::vector<double> taps(static_cast<std::size_t>(2 * half + 1));

    for (int i = -half; i <= half; ++i) {
        const double t = static_cast<double>(i) / sps;  // in symbol periods
        double v;
        if (i == 0) {
            v = 1.0 - beta + 4.0 * beta / kPi;
        } else if (std::abs(std::abs(t) - 1.0 / (4.0 * beta)) < 1e-12) {
            v = (beta / std::sqrt(2.0)) *
                ((1.0 + 2.0 / kPi) * std::sin(kPi / (4.0 * beta)) +
                 (1.0 - 2.0 / kPi) * std::cos(kPi / (4.0 * beta)));
        } else {
            const double num = std::sin(kPi * t * (1.0 - beta)) +
                               4.0 * beta * t * std::cos(kPi * t * (1.0 + beta));
            const double den = kPi * t * (1.0 - 16.0 * beta * beta * t * t);
            v = num / den;
        }
        taps[static_cast<std::size_t>(i + half)] = v;
    }

    double energy = 0.0;
    for (double v : taps) energy += v * v;
    const double scale = 1.0 / std::sqrt(energy);
    for (double& v : taps) v *= scale;
    return taps;
}

IqSignal pulse_shape(const IqSignal& symbols, const PulseShapeConfig& config) {
    if (symbols.samples.empty()) throw std::invalid_argument("pulse_shape: empty symbol sequence");
    const auto taps = rrc_taps(config);
    const int sps = config.samples_per_symbol;
    const std::size_t n_sym = symbols.size();
    const std::size_t out_len = n_sym * sps + static_cast<std::size_t>(config.span_symbols) * sps;

    IqSignal out;
    out.sample_rate_hz = symbols.sample_rate_hz * sps;
    out.samples.assign(out_len, cplx{0.0, 0.0});
    // Full convolution of the zero-stuffed sequence with the taps.
    for (std::size_t k = 0; k < n_sym; ++k) {
        const cplx s = symbols.samples[k];
        const std::size_t base = k * static_cast<std::size_t>(sps);
        for (std::size_t j = 0; j < taps.size(); ++j) out.samples[base + j] += s * taps[j];
    }
    return out;
}

IqSignal matched_filter_downsample(const IqSignal& waveform, const PulseShapeConfig& config,
                                   int n_symbols) {
    if (n_symbols <= 0) throw std::invalid_argument("matched_filter_downsample: n_symbols must be positive");
    const auto taps = rrc_taps(config);
    const int sps = config.samples_per_symbol;
    const std::size_t group_delay = static_cast<std::size_t>(config.span_symbols) * sps;
    const std::size_t last_index = group_delay + static_cast<std::size_t>(n_symbols - 1) * sps;
    // Full convolution length is |waveform| + |taps| - 1.
    if (last_index >= waveform.size() + taps.size() - 1)
        throw std::invalid_argument("matched_filter_downsample: waveform too short for n_symbols");

    IqSignal out;
    out.sample_rate_hz = waveform.sample_rate_hz / sps;
    out.samples.reserve(static_cast<std::size_t>(n_symbols));
    for (int k = 0; k < n_symbols; ++k) {
        const std::size_t n = group_delay + static_cast<std::size_t>(k) * sps;
        // y[n] = sum_j x[n - j] h[j]
        cplx acc{0.0, 0.0};
        const std::size_t j_lo = (n + 1 > waveform.size()) ? n + 1 - waveform.size() : 0;
        const std::size_t j_hi = std::min(taps.size() - 1, n);
        for (std::size_t j = j_lo; j <= j_hi; ++j) acc += waveform.samples[n - j] * taps[j];
        out.samples.push_back(acc);
    }
    return out;
}

std::vector<cplx> dft(const std::vector<cplx>& x) {
    const std::size_t n = x.size();
    if ((n & (n - 1)) == 0 && n > 1) {
        // Iterative radix-2 Cooley-Tukey.
        std::vector<cplx> a = x;
        int log2n = 0;
        while ((std::size_t{1} << log2n) < n) ++log2n;
        for (std::size_t i = 1, j = 0; i < n; ++i) {
            std::size_t bit = n >> 1;
            for (; j & bit; bit >>= 1) j ^= bit;
            j ^= bit;
            if (i < j) std::swap(a[i], a[j]);
        }
        for (std::size_t len = 2; len <= n; len <<= 1) {
            const double ang = -2.0 * kPi / static_cast<double>(len);
            const cplx wlen(std::cos(ang), std::sin(ang));
            for (std::size_t i = 0; i < n; i += len) {
                cplx w{1.0, 0.0};
                for (std::size_t j = 0; j < len / 2; ++j) {
                    const cplx u = a[i + j];
                    const cplx v = a[i + j + len / 2] * w;
                    a[i + j] = u + v;
                    a[i + j + len / 2] = u - v;
                    w *= wlen;
                }
            }
        }
        return a;
    }
    // Direct sum fallback for non power-of-two lengths.
    std::vector<cplx> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        cplx acc{0.0, 0.0};
        for (std::size_t t = 0; t < n; ++t) {
            const double ang = -2.0 * kPi * static_cast<double>(k * t) / static_cast<double>(n);
            acc += x[t] * cplx(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

std::vector<double> dft_magnitude_features(const IqSignal& signal) {
    if (signal.size() == 0 || signal.size() % 2 != 0)
        throw std::invalid_argument("dft_magnitude_features: signal length must be even and nonzero");
    const auto spectrum = dft(signal.samples);
    std::vector<double> feat(spectrum.size());
    for (std::size_t i = 0; i < spectrum.size(); ++i) feat[i] = std::abs(spectrum[i]);
    return feat;  // row-major (N/2, 2): element k sits at row k/2, column k%2
}

double measure_power(const IqSignal& signal) {
    if (signal.samples.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& s : signal.samples) acc += std::norm(s);
    return acc / static_cast<double>(signal.size());
}

void assert_finite(const IqSignal& signal, const char* context) {
    for (const auto& s : signal.samples) {
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
            throw std::runtime_error(std::string(context) + ": non-finite sample");
    }
}

namespace {
void put_u16(FILE* f, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>(v >> 8)};
    std::fwrite(b, 1, 2, f);
}
void put_u32(FILE* f, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    std::fwrite(b, 1, 4, f);
}
std::uint16_t get_u16(FILE* f) {
    unsigned char b[2];
    if (std::fread(b, 1, 2, f) != 2) throw std::runtime_error("RFSG: truncated file");
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}
std::uint32_t get_u32(FILE* f) {
    unsigned char b[4];
    if (std::fread(b, 1, 4, f) != 4) throw std::runtime_error("RFSG: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
}  // namespace

void write_rfsg(const std::string& path, const std::vector<IqSignal>& records) {
    if (records.empty()) throw std::invalid_argument("write_rfsg: no records");
    const std::size_t spr = records.front().size();
    for (const auto& r : records)
        if (r.size() != spr) throw std::invalid_argument("write_rfsg: records must share one length");

    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("write_rfsg: cannot open " + path);
    std::fwrite("RFSG", 1, 4, f);
    put_u16(f, 1);
    put_u32(f, static_cast<std::uint32_t>(records.size()));
    put_u32(f, static_cast<std::uint32_t>(spr));
    std::vector<float> buf(spr * 2);
    for (const auto& r : records) {
        for (std::size_t i = 0; i < spr; ++i) {
            buf[2 * i] = static_cast<float>(r.samples[i].real());
            buf[2 * i + 1] = static_cast<float>(r.samples[i].imag());
        }
        std::fwrite(buf.data(), sizeof(float), buf.size(), f);
    }
    std::fclose(f);
}

std::vector<IqSignal> read_rfsg(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("read_rfsg: cannot open " + path);
    char magic[4];
    if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, "RFSG", 4) != 0) {
        std::fclose(f);
        throw std::runtime_error("read_rfsg: bad magic in " + path);
    }
    const std::uint16_t version = get_u16(f);
    if (version != 1) {
        std::fclose(f);
        throw std::runtime_error("read_rfsg: unsupported version");
    }
    const std::uint32_t count = get_u32(f);
    const std::uint32_t spr = get_u32(f);
    std::vector<IqSignal> records(count);
    std::vector<float> buf(static_cast<std::size_t>(spr) * 2);
    for (auto& r : records) {
        if (std::fread(buf.data(), sizeof(float), buf.size(), f) != buf.size()) {
            std::fclose(f);
            throw std::runtime_error("read_rfsg: truncated records in " + path);
        }
        r.samples.resize(spr);
        for (std::uint32_t i = 0; i < spr; ++i) r.samples[i] = cplx(buf[2 * i], buf[2 * i + 1]);
    }
    std::fclose(f);
    return records;
}

}  // namespace rfauth
