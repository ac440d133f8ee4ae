#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace sciqa {

// --- text helpers -----------------------------------------------------------

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
// Collapses every whitespace run to a single space and trims the ends.
std::string collapse_whitespace(std::string_view s);
std::vector<std::string> split_words(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
bool starts_with_ci(std::string_view text, std::string_view prefix);
// Byte offset of the last case-insensitive occurrence, npos if absent.
std::size_t rfind_ci(std::string_view haystack, std::string_view needle);

// Replaces every occurrence of `token` in `tmpl`.
std::string replace_all(std::string tmpl, std::string_view token,
                        std::string_view value);
// Number of occurrences of `token` in `s`.
std::size_t count_occurrences(std::string_view s, std::string_view token);

// --- hashing ----------------------------------------------------------------

// 64-bit FNV-1a; stable across platforms, used for cache keys, content
// hashes and MinHash base hashes.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::string to_hex(std::uint64_t v);

// splitmix64 mixer for deriving per-permutation hash functions.
std::uint64_t splitmix64(std::uint64_t x);

// --- numbers ----------------------------------------------------------------

// Half-up rounding to two decimals (61.005 -> 61.01).
double round_half_up_2dp(double x);

// Renders a double without trailing zero noise ("75" not "75.000000").
std::string format_score(double x);

// --- parallelism ------------------------------------------------------------

// Runs fn(0..n-1) on up to `workers` threads. fn must handle its own
// per-item errors; the first escaping exception is rethrown after join.
void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace sciqa
