#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "rfauth/signal.hpp"

using namespace rfauth;

TEST_CASE("random bits: determinism, parity, balance") {
    Rng a(7), b(7);
    const auto x = generate_random_bits(4, a);
    const auto y = generate_random_bits(4, b);
    CHECK(x.size() == 4);
    CHECK(x == y);

    CHECK_THROWS_AS(generate_random_bits(3, a), std::invalid_argument);
    CHECK_THROWS_AS(generate_random_bits(0, a), std::invalid_argument);
    CHECK_THROWS_AS(generate_random_bits(-2, a), std::invalid_argument);

    Rng c(123);
    const auto big = generate_random_bits(1 << 16, c);
    double mean = 0.0;
    for (auto bit : big) mean += bit;
    mean /= static_cast<double>(big.size());
    CHECK(mean > 0.48);
    CHECK(mean < 0.52);
}

TEST_CASE("qpsk: declared Gray mapping and unit energy") {
    const auto s00 = qpsk_modulate({0, 0});
    CHECK(s00.samples[0].real() == doctest::Approx(0.7071).epsilon(1e-4));
    CHECK(s00.samples[0].imag() == doctest::Approx(0.7071).epsilon(1e-4));
    const auto s11 = qpsk_modulate({1, 1});
    CHECK(s11.samples[0].real() == doctest::Approx(-0.7071).epsilon(1e-4));
    CHECK(s11.samples[0].imag() == doctest::Approx(-0.7071).epsilon(1e-4));
    const auto s01 = qpsk_modulate({0, 1});
    CHECK(s01.samples[0].real() == doctest::Approx(-0.7071).epsilon(1e-4));
    CHECK(s01.samples[0].imag() == doctest::Approx(0.7071).epsilon(1e-4));
    const auto s10 = qpsk_modulate({1, 0});
    CHECK(s10.samples[0].real() == doctest::Approx(0.7071).epsilon(1e-4));
    CHECK(s10.samples[0].imag() == doctest::Approx(-0.7071).epsilon(1e-4));

    CHECK_THROWS_AS(qpsk_modulate({0, 1, 0}), std::invalid_argument);

    Rng rng(5);
    const auto sym = qpsk_modulate(generate_random_bits(512, rng));
    for (const auto& s : sym.samples) CHECK(std::abs(s) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rrc taps: symmetry, unit energy, center maximum") {
    PulseShapeConfig cfg{0.2, 4, 8};
    const auto taps = rrc_taps(cfg);
    CHECK(taps.size() == 33);

    for (std::size_t k = 0; k < taps.size(); ++k)
        CHECK(taps[k] == doctest::Approx(taps[taps.size() - 1 - k]).epsilon(1e-12));

    double energy = 0.0;
    for (double v : taps) energy += v * v;
    CHECK(energy == doctest::Approx(1.0).epsilon(1e-9));

    const double center = taps[taps.size() / 2];
    for (double v : taps) CHECK(v <= center);

    CHECK_THROWS_AS(rrc_taps(PulseShapeConfig{0.0, 4, 8}), std::invalid_argument);
    CHECK_THROWS_AS(rrc_taps(PulseShapeConfig{1.5, 4, 8}), std::invalid_argument);

    // rolloff = 0.25 hits the +-1/(4*beta) singularity exactly at a tap.
    const auto taps25 = rrc_taps(PulseShapeConfig{0.25, 4, 8});
    for (double v : taps25) CHECK(std::isfinite(v));
}

TEST_CASE("pulse shape: impulse response and linearity") {
    PulseShapeConfig cfg{0.2, 4, 8};
    const auto taps = rrc_taps(cfg);

    IqSignal one;
    one.samples = {cplx{1.0, 0.0}};
    const auto shaped = pulse_shape(one, cfg);
    CHECK(shaped.size() == 1 * 4 + 8 * 4);
    for (std::size_t j = 0; j < taps.size(); ++j)
        CHECK(shaped.samples[j].real() == doctest::Approx(taps[j]).epsilon(1e-12));

    IqSignal two;
    two.samples = {cplx{1.0, 0.0}, cplx{0.0, 2.0}};
    const auto shaped2 = pulse_shape(two, cfg);
    for (std::size_t j = 0; j < shaped2.size(); ++j) {
        cplx want{0.0, 0.0};
        if (j < taps.size()) want += taps[j];
        if (j >= 4 && j - 4 < taps.size()) want += cplx{0.0, 2.0} * taps[j - 4];
        CHECK(std::abs(shaped2.samples[j] - want) < 1e-12);
    }

    CHECK_THROWS_AS(pulse_shape(IqSignal{}, cfg), std::invalid_argument);
}

TEST_CASE("matched filter: group-delay peak and loopback") {
    PulseShapeConfig cfg{0.2, 4, 8};

    IqSignal one;
    one.samples = {cplx{1.0, 0.0}};
    const auto rx1 = matched_filter_downsample(pulse_shape(one, cfg), cfg, 1);
    // RRC * RRC peaks at the tap energy, i.e. exactly 1 after normalization.
    CHECK(std::abs(rx1.samples[0] - cplx{1.0, 0.0}) < 1e-6);

    CHECK_THROWS_AS(matched_filter_downsample(pulse_shape(one, cfg), cfg, 100),
                    std::invalid_argument);

    const PulseShapeConfig dflt{};  // defaults: rolloff 0.2, sps 4, span 10
    Rng rng(42);
    const auto sym = qpsk_modulate(generate_random_bits(512, rng));
    const auto rx = matched_filter_downsample(pulse_shape(sym, dflt), dflt, 256);
    REQUIRE(rx.size() == 256);
    double max_err = 0.0;
    for (std::size_t k = 0; k < 256; ++k)
        max_err = std::max(max_err, std::abs(rx.samples[k] - sym.samples[k]));
    CHECK(max_err < 0.02);
}

TEST_CASE("noiseless loopback preserves all QPSK quadrants over 10000 symbols") {
    PulseShapeConfig cfg{0.2, 4, 8};
    Rng rng(99);
    const auto sym = qpsk_modulate(generate_random_bits(20000, rng));
    const auto rx = matched_filter_downsample(pulse_shape(sym, cfg), cfg, 10000);
    int quadrant_errors = 0;
    for (std::size_t k = 0; k < 10000; ++k) {
        const bool re_ok = (rx.samples[k].real() > 0) == (sym.samples[k].real() > 0);
        const bool im_ok = (rx.samples[k].imag() > 0) == (sym.samples[k].imag() > 0);
        if (!re_ok || !im_ok) ++quadrant_errors;
    }
    CHECK(quadrant_errors == 0);
}

TEST_CASE("dft magnitude features") {
    IqSignal constant;
    constant.samples.assign(256, cplx{1.0, 0.0});
    const auto feat = dft_magnitude_features(constant);
    REQUIRE(feat.size() == 256);
    CHECK(feat[0] == doctest::Approx(256.0).epsilon(1e-9));
    for (std::size_t i = 1; i < feat.size(); ++i) CHECK(std::abs(feat[i]) < 1e-9);

    // Pure tone at bin 3 -> flat index 3 -> row 1, column 1 of the (N/2, 2) view.
    IqSignal tone;
    tone.samples.resize(256);
    for (int k = 0; k < 256; ++k) {
        const double ang = 2.0 * 3.14159265358979323846 * 3.0 * k / 256.0;
        tone.samples[static_cast<std::size_t>(k)] = cplx(std::cos(ang), std::sin(ang));
    }
    const auto tf = dft_magnitude_features(tone);
    for (std::size_t i = 0; i < tf.size(); ++i) {
        if (i == 3)
            CHECK(tf[i] == doctest::Approx(256.0).epsilon(1e-9));
        else
            CHECK(std::abs(tf[i]) < 1e-6);
    }
    const std::size_t row = 3 / 2, col = 3 % 2;
    CHECK(row == 1);
    CHECK(col == 1);
    CHECK(tf[row * 2 + col] == doctest::Approx(256.0).epsilon(1e-9));

    IqSignal odd;
    odd.samples.assign(7, cplx{1.0, 0.0});
    CHECK_THROWS_AS(dft_magnitude_features(odd), std::invalid_argument);
}

TEST_CASE("Parseval identity to relative 1e-9") {
    Rng rng(17);
    IqSignal sig;
    sig.samples.resize(256);
    for (auto& s : sig.samples) s = cplx(rng.normal(), rng.normal());
    const auto feat = dft_magnitude_features(sig);
    double lhs = 0.0;
    for (double v : feat) lhs += v * v;
    double rhs = 0.0;
    for (const auto& s : sig.samples) rhs += std::norm(s);
    rhs *= static_cast<double>(sig.size());
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
}

TEST_CASE("measure_power") {
    IqSignal zeros;
    zeros.samples.assign(16, cplx{0.0, 0.0});
    CHECK(measure_power(zeros) == 0.0);

    const auto sym = qpsk_modulate({0, 0, 1, 1, 0, 1, 1, 0});
    CHECK(measure_power(sym) == doctest::Approx(1.0).epsilon(1e-12));

    IqSignal scaled = sym;
    for (auto& s : scaled.samples) s *= 3.0;
    CHECK(measure_power(scaled) == doctest::Approx(9.0 * measure_power(sym)).epsilon(1e-12));
}

TEST_CASE("RFSG v1 round trip") {
    Rng rng(3);
    std::vector<IqSignal> records(4);
    for (auto& r : records) {
        r.samples.resize(64);
        for (auto& s : r.samples) s = cplx(rng.normal(), rng.normal());
    }
    const std::string path = "test_capture.rfsg";
    write_rfsg(path, records);
    const auto back = read_rfsg(path);
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        REQUIRE(back[i].size() == records[i].size());
        for (std::size_t k = 0; k < records[i].size(); ++k) {
            CHECK(back[i].samples[k].real() ==
                  doctest::Approx(records[i].samples[k].real()).epsilon(1e-6));
            CHECK(back[i].samples[k].imag() ==
                  doctest::Approx(records[i].samples[k].imag()).epsilon(1e-6));
        }
    }
    std::remove(path.c_str());
}

TEST_CASE("pipeline determinism for a fixed seed") {
    PulseShapeConfig cfg{0.2, 4, 8};
    auto run = [&] {
        Rng rng(2024);
        const auto sym = qpsk_modulate(generate_random_bits(512, rng));
        return matched_filter_downsample(pulse_shape(sym, cfg), cfg, 256);
    };
    const auto a = run();
    const auto b = run();
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a.samples[k] == b.samples[k]);
}
