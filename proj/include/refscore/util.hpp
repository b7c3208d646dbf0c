#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace refscore {

std::string trim(const std::string& s);
std::string to_lower(std::string s);
std::vector<std::string> split_lines(const std::string& text);

// Collapse internal whitespace runs to single spaces and trim; used to
// compare lines for the header/footer repetition rule.
std::string normalize_line(const std::string& line);

bool ends_with_terminal_punctuation(const std::string& text);

// Half-up rounding to a fixed number of decimal places (inputs are
// nonnegative scores).
double round_half_up(double value, int decimals);

// FNV-1a 64-bit, as a hex string; used for manifest drift digests and
// stable content hashes.
std::uint64_t fnv1a64(const std::string& data);
std::string fnv1a64_hex(const std::string& data);

// Mix a stream index into a base seed (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// mt19937_64 with hand-rolled bounded/uniform/normal mappings so streams
// are identical across platforms and compilers (std distributions are
// implementation-defined).
class DeterministicRng {
public:
    explicit DeterministicRng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform integer in [0, n), rejection sampled.
    std::uint64_t bounded(std::uint64_t n);

    // Uniform double in [0, 1).
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Box-Muller; consumes exactly two uniform draws per call.
    double normal(double mean, double stddev);

private:
    std::mt19937_64 engine_;
};

std::string read_file(const std::filesystem::path& path);
// Write-temp-then-rename so artifact files are never observed half-written.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// Fixed-format double for CSV cells: %.9g, with "" for absent values.
std::string format_number(double value);
std::string format_number(std::optional<double> value);

// ISO-8601 UTC timestamp for the current time.
std::string now_iso8601();

}  // namespace refscore
