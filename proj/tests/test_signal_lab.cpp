#include <catch_amalgamated.hpp>

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bcsm/signal_lab.hpp"

using namespace bcsm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace fs = std::filesystem;

namespace {

double mean(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double variance(const std::vector<double>& x) {
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size());
}

double correlation(const std::vector<double>& a, const std::vector<double>& b, std::size_t lag = 0) {
    const double ma = mean(a), mb = mean(b);
    double num = 0.0;
    for (std::size_t i = lag; i < a.size(); ++i) num += (a[i] - ma) * (b[i - lag] - mb);
    return num / static_cast<double>(a.size()) / std::sqrt(variance(a) * variance(b));
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("bcsm_signal_lab_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path file(const std::string& name, const std::string& content) const {
        const auto p = path / name;
        std::ofstream(p, std::ios::binary) << content;
        return p;
    }
};

std::string le16(std::int16_t v) {
    const auto u = static_cast<std::uint16_t>(v);
    return {static_cast<char>(u & 0xFF), static_cast<char>(u >> 8)};
}

std::string le32(std::uint32_t v) {
    return {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
            static_cast<char>((v >> 16) & 0xFF), static_cast<char>(v >> 24)};
}

std::string wav_bytes(const std::vector<std::int16_t>& interleaved, std::uint16_t channels,
                      std::uint16_t bits = 16, std::uint16_t format = 1) {
    std::string data;
    for (auto s : interleaved) data += le16(s);
    std::string fmt = le16(static_cast<std::int16_t>(format)) +
                      le16(static_cast<std::int16_t>(channels)) + le32(8000) +
                      le32(8000u * channels * 2) + le16(static_cast<std::int16_t>(channels * 2)) +
                      le16(static_cast<std::int16_t>(bits));
    // An unrelated chunk before fmt exercises chunk skipping.
    std::string list = "LIST" + le32(3) + "abc" + std::string(1, '\0');
    std::string body = "WAVE" + list + "fmt " + le32(16) + fmt + "data" +
                       le32(static_cast<std::uint32_t>(data.size())) + data;
    return "RIFF" + le32(static_cast<std::uint32_t>(body.size())) + body;
}

Scenario white_scenario(std::size_t n, std::uint64_t seed) {
    Scenario sc;
    sc.system = random_system(16, 1);
    sc.input = WhiteInput{1.0};
    sc.samples = n;
    sc.seed = seed;
    return sc;
}

}  // namespace

TEST_CASE("generate_ar1", "[signal]") {
    SECTION("pole 0 returns the white drive") {
        const auto x = generate_ar1(0.0, 0.5, 1000, 9);
        REQUIRE(x == white_gaussian(0.5, 1000, 9));
    }
    SECTION("lag-1 autocorrelation near the pole") {
        const auto x = generate_ar1(0.9, 0.19, 100000, 10);
        const double r1 = correlation(x, x, 1);
        REQUIRE(r1 >= 0.88);
        REQUIRE(r1 <= 0.92);
    }
    SECTION("stationary variance drive / (1 - a^2)") {
        const auto x = generate_ar1(0.9, 0.19, 100000, 11);
        REQUIRE_THAT(variance(x), WithinRel(1.0, 0.05));
    }
    SECTION("recursion holds sample by sample") {
        const auto x = generate_ar1(-0.5, 2.0, 200, 12);
        const auto u = white_gaussian(2.0, 200, 12);
        REQUIRE(x[0] == u[0]);
        for (std::size_t n = 1; n < x.size(); ++n) REQUIRE(x[n] == -0.5 * x[n - 1] + u[n]);
    }
    SECTION("invalid parameters") {
        REQUIRE_THROWS_AS(generate_ar1(1.0, 1.0, 10, 0), std::invalid_argument);
        REQUIRE_THROWS_AS(generate_ar1(-1.2, 1.0, 10, 0), std::invalid_argument);
        REQUIRE_THROWS_AS(generate_ar1(0.5, 0.0, 10, 0), std::invalid_argument);
    }
    SECTION("deterministic per seed") {
        REQUIRE(generate_ar1(0.9, 0.19, 500, 3) == generate_ar1(0.9, 0.19, 500, 3));
        REQUIRE(generate_ar1(0.9, 0.19, 500, 3) != generate_ar1(0.9, 0.19, 500, 4));
    }
}

TEST_CASE("noise_variance_for_snr", "[signal]") {
    REQUIRE_THAT(noise_variance_for_snr(1.0, 10.0), WithinRel(0.1, 1e-15));
    REQUIRE(noise_variance_for_snr(1.0, 0.0) == 1.0);
    REQUIRE_THAT(noise_variance_for_snr(4.0, 30.0), WithinRel(0.004, 1e-15));
    REQUIRE(noise_variance_for_snr(2.0, no_noise) == 0.0);
    REQUIRE_THROWS(noise_variance_for_snr(-1.0, 10.0));
}

TEST_CASE("random_system", "[signal]") {
    const auto one = random_system(1, 5);
    REQUIRE_THAT(std::abs(one[0]), WithinAbs(1.0, 1e-15));
    for (std::size_t L : {2u, 16u, 64u}) {
        const auto w = random_system(L, L);
        double n2 = 0.0;
        for (double v : w) n2 += v * v;
        REQUIRE_THAT(std::sqrt(n2), WithinAbs(1.0, 1e-12));
    }
    REQUIRE(random_system(16, 77) == random_system(16, 77));
    REQUIRE(random_system(16, 77) != random_system(16, 78));
    REQUIRE_THROWS(random_system(0, 1));
}

TEST_CASE("synthesize_trial", "[signal]") {
    SECTION("no input noise leaves the regressor clean") {
        auto sc = white_scenario(1000, 1);
        sc.input_snr_db = no_noise;
        const auto sig = synthesize_trial(sc);
        REQUIRE(sig.input_noise_variance == 0.0);
        REQUIRE(sig.noisy_input == sig.clean_input);
    }
    SECTION("identity system passes input plus output noise") {
        auto sc = white_scenario(1000, 2);
        sc.system = {1.0, 0.0, 0.0};
        const auto sig = synthesize_trial(sc);
        for (std::size_t n = 0; n < 1000; ++n)
            REQUIRE(sig.desired[n] == sig.clean_input[n] + sig.output_noise[n]);
    }
    SECTION("desired minus sliding-regressor output is the output noise") {
        auto sc = white_scenario(2000, 3);
        sc.input = Ar1Input{0.9, 0.19};
        const auto sig = synthesize_trial(sc);
        const std::size_t L = sc.system.size();
        for (std::size_t n = 0; n < sig.desired.size(); ++n) {
            double y = 0.0;
            for (std::size_t k = 0; k < L; ++k)
                y += sc.system[k] * (n >= k ? sig.clean_input[n - k] : 0.0);
            REQUIRE(sig.clean_output[n] == y);
            REQUIRE_THAT(sig.desired[n] - y, WithinAbs(sig.output_noise[n], 1e-15));
        }
    }
    SECTION("AR(1) input with 10 dB input SNR") {
        Scenario sc = white_scenario(20000, 4);
        sc.input = Ar1Input{0.9, 0.19};
        const auto sig = synthesize_trial(sc);
        std::vector<double> diff(sig.noisy_input.size());
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = sig.noisy_input[i] - sig.clean_input[i];
        REQUIRE_THAT(variance(diff) / variance(sig.clean_input), WithinRel(0.1, 0.05));
    }
    SECTION("empirical SNRs match the request within 0.5 dB") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            Scenario sc = white_scenario(20000, seed);
            sc.input = Ar1Input{0.9, 0.19};
            const auto sig = synthesize_trial(sc);
            const double in_snr = 10 * std::log10(mean_power(sig.clean_input) / mean_power(sig.input_noise));
            const double out_snr = 10 * std::log10(mean_power(sig.clean_output) / mean_power(sig.output_noise));
            REQUIRE_THAT(in_snr, WithinAbs(10.0, 0.5));
            REQUIRE_THAT(out_snr, WithinAbs(30.0, 0.5));
        }
    }
    SECTION("input and output noise streams are uncorrelated") {
        const std::size_t n = 20000;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto sig = synthesize_trial(white_scenario(n, seed));
            REQUIRE(std::abs(correlation(sig.input_noise, sig.output_noise)) < 3.0 / std::sqrt(double(n)));
        }
    }
    SECTION("bit-identical for identical scenarios") {
        auto sc = white_scenario(3000, 42);
        sc.input = Ar1Input{0.9, 0.19};
        const auto a = synthesize_trial(sc);
        const auto b = synthesize_trial(sc);
        REQUIRE(a.noisy_input == b.noisy_input);
        REQUIRE(a.desired == b.desired);
        sc.seed = 43;
        REQUIRE(synthesize_trial(sc).desired != a.desired);
    }
    SECTION("scenario validation") {
        auto sc = white_scenario(10, 0);
        REQUIRE_THROWS(synthesize_trial(sc));  // 10 < L = 16
        sc.samples = 100;
        sc.input = Ar1Input{1.0, 0.1};
        REQUIRE_THROWS(synthesize_trial(sc));
    }
}

TEST_CASE("load_samples", "[signal][io]") {
    TempDir dir;
    SECTION("CSV already at unit peak") {
        REQUIRE(load_samples(dir.file("a.csv", "1\n-1\n0.5\n")) == std::vector<double>{1.0, -1.0, 0.5});
    }
    SECTION("CSV is peak-normalized") {
        REQUIRE(load_samples(dir.file("b.csv", "2\r\n-4\r\n\r\n")) == std::vector<double>{0.5, -1.0});
    }
    SECTION("16-bit mono WAV") {
        const auto p = dir.file("m.wav", wav_bytes({16384, -32768}, 1));
        REQUIRE(load_samples(p) == std::vector<double>{0.5, -1.0});
    }
    SECTION("16-bit stereo WAV channel selection") {
        const auto p = dir.file("s.wav", wav_bytes({100, 8192, -200, -16384, 50, 4096}, 2));
        REQUIRE(load_samples(p, 1) == std::vector<double>{0.5, -1.0, 0.25});
        REQUIRE(load_samples(p, 0) == std::vector<double>{0.5, -1.0, 0.25});
        REQUIRE_THROWS_WITH(load_samples(p, 2), Catch::Matchers::ContainsSubstring("out of range"));
    }
    SECTION("errors") {
        REQUIRE_THROWS(load_samples(dir.path / "missing.csv"));
        REQUIRE_THROWS_WITH(load_samples(dir.file("e.csv", "")), Catch::Matchers::ContainsSubstring("empty"));
        REQUIRE_THROWS_WITH(load_samples(dir.file("x.flac", "fLaC")),
                            Catch::Matchers::ContainsSubstring("unsupported"));
        REQUIRE_THROWS(load_samples(dir.file("two.csv", "1,2\n3,4\n")));
        REQUIRE_THROWS(load_samples(dir.file("c.csv", "1\n"), 1));
        REQUIRE_THROWS(load_samples(dir.file("z.csv", "0\n0\n")));
        REQUIRE_THROWS_WITH(load_samples(dir.file("f.wav", wav_bytes({1, 2}, 1, 8))),
                            Catch::Matchers::ContainsSubstring("16-bit"));
        REQUIRE_THROWS(load_samples(dir.file("g.wav", wav_bytes({1, 2}, 1, 16, 3))));
        REQUIRE_THROWS(load_samples(dir.file("h.wav", std::string("RIFF\0\0\0\0WAVE", 12))));
    }
    SECTION("written WAV reads back") {
        const std::vector<double> s{0.5, -0.25, 0.125, -1.0};
        write_wav16(dir.path / "rt.wav", s, 8000);
        REQUIRE(load_samples(dir.path / "rt.wav") == s);
    }
    SECTION("file input shorter than the scenario") {
        const auto p = dir.file("short.csv", "1\n2\n3\n4\n");
        Scenario sc;
        sc.system = {1.0, 0.5};
        sc.input = FileInput{p, 0};
        sc.samples = 5;
        REQUIRE_THROWS_WITH(synthesize_trial(sc), Catch::Matchers::ContainsSubstring("needs 5"));
        sc.samples = 4;
        const auto sig = synthesize_trial(sc);
        REQUIRE(sig.clean_input == std::vector<double>{0.25, 0.5, 0.75, 1.0});
        const auto resolved = resolve_input(sc);
        REQUIRE(std::holds_alternative<SampleInput>(resolved.input));
        REQUIRE(synthesize_trial(resolved).desired == sig.desired);
    }
}

TEST_CASE("CSV export round-trips every double", "[signal][io][property]") {
    std::mt19937_64 rng(19);
    std::vector<double> series;
    for (int i = 0; i < 2000; ++i) {
        const auto bits = rng();
        const double v = std::bit_cast<double>(bits);
        if (std::isfinite(v)) series.push_back(v);
    }
    series.insert(series.end(), {0.0, -0.0, 1.0, 0.1, 1e-308, 5e-324, -1.7976931348623157e308});
    std::ostringstream out;
    write_series_csv(out, series);
    std::istringstream in(out.str());
    std::string line;
    std::size_t i = 0;
    while (std::getline(in, line)) {
        double v = 0.0;
        std::from_chars(line.data(), line.data() + line.size(), v);
        REQUIRE(std::bit_cast<std::uint64_t>(v) == std::bit_cast<std::uint64_t>(series[i]));
        ++i;
    }
    REQUIRE(i == series.size());
    REQUIRE(format_double(0.1) == "0.10000000000000001");
}
