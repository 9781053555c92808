#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>

namespace sboxbench {

/// Runs body(begin, end) over contiguous blocks of [0, n) on up to `jobs` threads.
/// Callers write results by index, so output never depends on `jobs`.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t, std::size_t)>& body);

/// Independent generator for (seed, index, tag).
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index, std::uint64_t tag);

/// Stream tags, so that e.g. masks do not shift when noise changes.
namespace stream {
inline constexpr std::uint64_t kNoise = 1;
inline constexpr std::uint64_t kMasks = 2;
inline constexpr std::uint64_t kPlaintext = 3;
inline constexpr std::uint64_t kFakeKey = 4;
inline constexpr std::uint64_t kStimulus = 5;
inline constexpr std::uint64_t kFault = 6;
inline constexpr std::uint64_t kSetA = 7;
inline constexpr std::uint64_t kSetB = 8;
} // namespace stream

} // namespace sboxbench
