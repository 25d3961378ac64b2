#ifndef BCSM_SIGNAL_LAB_HPP
#define BCSM_SIGNAL_LAB_HPP

// Signal generation and ingestion for system-identification experiments:
// AR(1) and white Gaussian inputs, SNR-calibrated noise injection, random
// unknown systems, and 16-bit PCM WAV / single-column CSV sample files.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <memory>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <type_traits>
#include <variant>
#include <vector>

namespace bcsm {

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Stream identifiers for mix_seed. Each random sequence of a trial draws from
// its own engine so changing one does not perturb the others.
namespace stream {
inline constexpr std::uint64_t input = 1;
inline constexpr std::uint64_t input_noise = 2;
inline constexpr std::uint64_t output_noise = 3;
inline constexpr std::uint64_t system = 4;
}  // namespace stream

inline std::vector<double> white_gaussian(double variance, std::size_t n, std::uint64_t seed) {
    if (!(variance >= 0.0)) throw std::invalid_argument("noise variance must be >= 0");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sd = std::sqrt(variance);
    std::vector<double> out(n);
    for (auto& v : out) v = sd * normal(rng);
    return out;
}

/// x(n) = pole * x(n-1) + u(n), x(-1) = 0, u ~ N(0, drive_var).
inline std::vector<double> generate_ar1(double pole, double drive_var, std::size_t n,
                                        std::uint64_t seed) {
    if (!(std::abs(pole) < 1.0)) throw std::invalid_argument("AR(1) pole must satisfy |pole| < 1");
    if (!(drive_var > 0.0)) throw std::invalid_argument("AR(1) drive variance must be > 0");
    std::vector<double> x = white_gaussian(drive_var, n, seed);
    double prev = 0.0;
    for (auto& v : x) {
        v = pole * prev + v;
        prev = v;
    }
    return x;
}

/// Noise variance that sits snr_db below signal_power. +inf dB gives 0.
inline double noise_variance_for_snr(double signal_power, double snr_db) {
    if (!(signal_power >= 0.0)) throw std::invalid_argument("signal power must be >= 0");
    if (std::isinf(snr_db) && snr_db > 0) return 0.0;
    return signal_power / std::pow(10.0, snr_db / 10.0);
}

inline double mean_power(std::span<const double> x) noexcept {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return acc / static_cast<double>(x.size());
}

/// L i.i.d. standard-normal taps scaled to unit Euclidean norm.
inline std::vector<double> random_system(std::size_t length, std::uint64_t seed) {
    if (length < 1) throw std::invalid_argument("system length must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> w(length);
    double norm2 = 0.0;
    // A draw of exactly zero in every tap has probability zero, but loop anyway.
    while (!(norm2 > 0.0)) {
        norm2 = 0.0;
        for (auto& v : w) {
            v = normal(rng);
            norm2 += v * v;
        }
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& v : w) v *= inv;
    return w;
}

// ---------------------------------------------------------------------------
// Sample files

namespace detail {

inline std::uint32_t read_le32(const unsigned char* p) noexcept {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

inline std::uint16_t read_le16(const unsigned char* p) noexcept {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::vector<double> parse_wav(const std::vector<unsigned char>& bytes, std::size_t channel,
                                     const std::string& name) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw std::runtime_error(name + ": not a RIFF/WAVE file");

    std::uint16_t format = 0, channels = 0, bits = 0;
    bool have_fmt = false;
    const unsigned char* data = nullptr;
    std::size_t data_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* chunk = bytes.data() + pos;
        const std::size_t size = read_le32(chunk + 4);
        const std::size_t body = pos + 8;
        const std::size_t avail = std::min(size, bytes.size() - body);
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (avail < 16) throw std::runtime_error(name + ": truncated fmt chunk");
            format = read_le16(chunk + 8);
            channels = read_le16(chunk + 10);
            bits = read_le16(chunk + 22);
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = chunk + 8;
            data_size = avail;
        }
        pos = body + size + (size & 1u);
    }
    if (!have_fmt) throw std::runtime_error(name + ": missing fmt chunk");
    // 0xFFFE is WAVE_FORMAT_EXTENSIBLE; accepted when the sample layout is plain 16-bit.
    if ((format != 1 && format != 0xFFFE) || bits != 16)
        throw std::runtime_error(name + ": unsupported WAV encoding (need 16-bit PCM)");
    if (channels < 1 || channels > 2)
        throw std::runtime_error(name + ": unsupported channel count " + std::to_string(channels));
    if (channel >= channels)
        throw std::runtime_error(name + ": channel " + std::to_string(channel) +
                                 " out of range for " + std::to_string(channels) +
                                 "-channel file");
    if (data == nullptr) throw std::runtime_error(name + ": missing data chunk");

    const std::size_t frame = 2u * channels;
    const std::size_t frames = data_size / frame;
    std::vector<double> out(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        const auto raw = static_cast<std::int16_t>(read_le16(data + i * frame + 2 * channel));
        out[i] = static_cast<double>(raw) / 32768.0;
    }
    return out;
}

inline std::vector<double> parse_csv_column(const std::string& text, std::size_t channel,
                                            const std::string& name) {
    if (channel != 0)
        throw std::runtime_error(name + ": channel " + std::to_string(channel) +
                                 " out of range for single-column CSV");
    std::vector<double> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        const char* begin = line.data() + first;
        const char* end = line.data() + last + 1;
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(begin, end, v);
        if (ec != std::errc{} || ptr != end)
            throw std::runtime_error(name + ":" + std::to_string(line_no) +
                                     ": expected one floating-point value per line");
        out.push_back(v);
    }
    return out;
}

}  // namespace detail

/// Loads a 16-bit PCM WAV (mono or stereo) or single-column CSV and scales
/// it to unit peak magnitude.
inline std::vector<double> load_samples(const std::filesystem::path& path, std::size_t channel = 0) {
    const std::string name = path.string();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(name + ": cannot open sample file");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.empty()) throw std::runtime_error(name + ": empty sample file");

    std::vector<double> samples;
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), "RIFF", 4) == 0) {
        samples = detail::parse_wav(bytes, channel, name);
    } else {
        auto ext = path.extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (ext != ".csv" && ext != ".txt")
            throw std::runtime_error(name + ": unsupported sample format (need .wav or .csv)");
        samples = detail::parse_csv_column(std::string(bytes.begin(), bytes.end()), channel, name);
    }
    if (samples.empty()) throw std::runtime_error(name + ": no samples");

    double peak = 0.0;
    for (double v : samples) peak = std::max(peak, std::abs(v));
    if (!(peak > 0.0) || !std::isfinite(peak))
        throw std::runtime_error(name + ": samples are all zero or non-finite");
    for (auto& v : samples) v /= peak;
    return samples;
}

/// Writes a 16-bit PCM mono WAV. Samples are clipped to [-1, 1).
inline void write_wav16(const std::filesystem::path& path, std::span<const double> samples,
                        std::uint32_t sample_rate) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
    auto put32 = [&](std::uint32_t v) {
        const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                    static_cast<unsigned char>(v >> 16),
                                    static_cast<unsigned char>(v >> 24)};
        out.write(reinterpret_cast<const char*>(b), 4);
    };
    auto put16 = [&](std::uint16_t v) {
        const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
        out.write(reinterpret_cast<const char*>(b), 2);
    };
    const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    out.write("RIFF", 4);
    put32(36 + data_bytes);
    out.write("WAVEfmt ", 8);
    put32(16);
    put16(1);
    put16(1);
    put32(sample_rate);
    put32(sample_rate * 2);
    put16(2);
    put16(16);
    out.write("data", 4);
    put32(data_bytes);
    for (double s : samples) {
        const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
        const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
        put16(static_cast<std::uint16_t>(q));
    }
}

/// Shortest round-trip-safe rendering used in every CSV artifact (%.17g).
inline std::string format_double(double v) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, ptr);
}

inline void write_series_csv(std::ostream& out, std::span<const double> series) {
    for (double v : series) out << format_double(v) << '\n';
}

// ---------------------------------------------------------------------------
// Scenarios

struct Ar1Input {
    double pole = 0.9;
    double drive_variance = 1.0 - 0.9 * 0.9;
};

struct WhiteInput {
    double variance = 1.0;
};

struct FileInput {
    std::filesystem::path path;
    std::size_t channel = 0;
};

/// Pre-loaded samples (e.g. a FileInput resolved once for a whole ensemble).
struct SampleInput {
    std::shared_ptr<const std::vector<double>> samples;
};

using InputSpec = std::variant<Ar1Input, WhiteInput, FileInput, SampleInput>;

inline constexpr double no_noise = std::numeric_limits<double>::infinity();

struct Scenario {
    std::vector<double> system;
    InputSpec input = Ar1Input{};
    double input_snr_db = 10.0;
    double output_snr_db = 30.0;
    std::size_t samples = 20000;
    std::uint64_t seed = 0;

    std::size_t length() const noexcept { return system.size(); }

    void validate() const {
        if (system.empty()) throw std::invalid_argument("scenario system must have length >= 1");
        if (samples < system.size())
            throw std::invalid_argument("scenario sample count must be >= filter length");
        if (const auto* ar = std::get_if<Ar1Input>(&input)) {
            if (!(std::abs(ar->pole) < 1.0))
                throw std::invalid_argument("AR(1) pole must satisfy |pole| < 1");
            if (!(ar->drive_variance > 0.0))
                throw std::invalid_argument("AR(1) drive variance must be > 0");
        } else if (const auto* wi = std::get_if<WhiteInput>(&input)) {
            if (!(wi->variance > 0.0)) throw std::invalid_argument("white input variance must be > 0");
        } else if (const auto* si = std::get_if<SampleInput>(&input)) {
            if (!si->samples) throw std::invalid_argument("sample input has no samples");
        }
        if (std::isnan(input_snr_db) || std::isnan(output_snr_db))
            throw std::invalid_argument("SNR must not be NaN");
    }
};

/// Replaces a FileInput by the loaded samples; other inputs pass through.
inline Scenario resolve_input(Scenario scenario) {
    if (const auto* fi = std::get_if<FileInput>(&scenario.input)) {
        auto data = std::make_shared<const std::vector<double>>(load_samples(fi->path, fi->channel));
        scenario.input = SampleInput{std::move(data)};
    }
    return scenario;
}

struct TrialSignals {
    std::vector<double> clean_input;
    std::vector<double> noisy_input;
    std::vector<double> clean_output;
    std::vector<double> desired;
    std::vector<double> input_noise;
    std::vector<double> output_noise;
    double input_noise_variance = 0.0;
    double output_noise_variance = 0.0;
};

/// y(n) = sum_k w[k] x(n-k) with x(n) = 0 for n < 0.
inline std::vector<double> fir_filter(std::span<const double> system, std::span<const double> x) {
    std::vector<double> y(x.size(), 0.0);
    for (std::size_t n = 0; n < x.size(); ++n) {
        double acc = 0.0;
        const std::size_t taps = std::min(system.size(), n + 1);
        for (std::size_t k = 0; k < taps; ++k) acc += system[k] * x[n - k];
        y[n] = acc;
    }
    return y;
}

inline TrialSignals synthesize_trial(const Scenario& scenario) {
    scenario.validate();
    const std::size_t n = scenario.samples;
    TrialSignals sig;

    std::visit(
        [&](const auto& in) {
            using T = std::decay_t<decltype(in)>;
            const std::uint64_t s = mix_seed(scenario.seed, stream::input);
            if constexpr (std::is_same_v<T, Ar1Input>) {
                sig.clean_input = generate_ar1(in.pole, in.drive_variance, n, s);
            } else if constexpr (std::is_same_v<T, WhiteInput>) {
                sig.clean_input = white_gaussian(in.variance, n, s);
            } else {
                std::vector<double> loaded;
                const std::vector<double>* src = nullptr;
                if constexpr (std::is_same_v<T, FileInput>) {
                    loaded = load_samples(in.path, in.channel);
                    src = &loaded;
                } else {
                    src = in.samples.get();
                }
                if (src->size() < n)
                    throw std::runtime_error("sample input has " + std::to_string(src->size()) +
                                             " samples, scenario needs " + std::to_string(n));
                sig.clean_input.assign(src->begin(), src->begin() + static_cast<std::ptrdiff_t>(n));
            }
        },
        scenario.input);

    sig.clean_output = fir_filter(scenario.system, sig.clean_input);
    sig.input_noise_variance = noise_variance_for_snr(mean_power(sig.clean_input), scenario.input_snr_db);
    sig.output_noise_variance =
        noise_variance_for_snr(mean_power(sig.clean_output), scenario.output_snr_db);

    sig.input_noise =
        white_gaussian(sig.input_noise_variance, n, mix_seed(scenario.seed, stream::input_noise));
    sig.output_noise =
        white_gaussian(sig.output_noise_variance, n, mix_seed(scenario.seed, stream::output_noise));

    sig.noisy_input.resize(n);
    sig.desired.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        sig.noisy_input[i] = sig.clean_input[i] + sig.input_noise[i];
        sig.desired[i] = sig.clean_output[i] + sig.output_noise[i];
    }
    return sig;
}

}  // namespace bcsm

#endif  // BCSM_SIGNAL_LAB_HPP
