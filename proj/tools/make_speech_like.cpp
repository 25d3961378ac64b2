// Synthesizes a speech-like test signal and writes it as 16-bit mono WAV.
//
// Syllables alternate voiced excitation (a glottal pulse train with drifting
// pitch) and unvoiced noise, each shaped by three formant resonators and a
// Hann envelope, separated by near-silent pauses. The result is strongly
// coloured, non-stationary and bursty, which is what matters when the signal
// drives an adaptive filter.
//
//   make_speech_like OUT.wav [--seconds 6] [--rate 8000] [--seed 1]

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bcsm/signal_lab.hpp"

namespace {

struct Resonator {
    double a1 = 0.0, a2 = 0.0, gain = 1.0, y1 = 0.0, y2 = 0.0;

    Resonator(double freq, double bandwidth, double rate) {
        const double r = std::exp(-std::numbers::pi * bandwidth / rate);
        a1 = 2.0 * r * std::cos(2.0 * std::numbers::pi * freq / rate);
        a2 = -r * r;
        gain = 1.0 - r;
    }

    double operator()(double x) {
        const double y = gain * x + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y;
        return y;
    }
};

std::vector<double> synthesize(double seconds, double rate, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto between = [&](double lo, double hi) { return lo + (hi - lo) * uni(rng); };

    const auto total = static_cast<std::size_t>(seconds * rate);
    std::vector<double> out;
    out.reserve(total);

    while (out.size() < total) {
        const auto syllable = static_cast<std::size_t>(between(0.15, 0.32) * rate);
        const bool voiced = uni(rng) < 0.75;
        Resonator f1(between(300, 800), between(60, 120), rate);
        Resonator f2(between(900, 2200), between(90, 160), rate);
        Resonator f3(between(2400, 3200), between(120, 220), rate);
        double pitch = between(95, 210);
        const double drift = between(-0.3, 0.3) * pitch / static_cast<double>(syllable);
        const double level = between(0.4, 1.0);
        double phase = 0.0;

        for (std::size_t i = 0; i < syllable && out.size() < total; ++i) {
            double excitation;
            if (voiced) {
                phase += pitch / rate;
                excitation = 0.0;
                if (phase >= 1.0) {
                    phase -= 1.0;
                    excitation = 6.0;
                }
                excitation += 0.05 * normal(rng);
                pitch += drift;
            } else {
                excitation = 0.6 * normal(rng);
            }
            const double env =
                0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                     static_cast<double>(syllable));
            out.push_back(level * env * f3(f2(f1(excitation))));
        }

        const auto pause = static_cast<std::size_t>(between(0.04, 0.18) * rate);
        for (std::size_t i = 0; i < pause && out.size() < total; ++i)
            out.push_back(1e-4 * normal(rng));
    }

    double peak = 0.0;
    for (double v : out) peak = std::max(peak, std::abs(v));
    for (double& v : out) v *= 0.9 / peak;
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Write a synthetic speech-like WAV file"};
    std::string path;
    double seconds = 6.0;
    unsigned rate = 8000;
    std::uint64_t seed = 1;
    app.add_option("output", path, "Output WAV path")->required();
    app.add_option("--seconds", seconds, "Duration in seconds");
    app.add_option("--rate", rate, "Sample rate in Hz");
    app.add_option("--seed", seed, "Random seed");
    CLI11_PARSE(app, argc, argv);

    try {
        const auto samples = synthesize(seconds, rate, seed);
        bcsm::write_wav16(path, samples, rate);
        std::cout << "wrote " << samples.size() << " samples to " << path << '\n';
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
