#pragma once

#include <stdexcept>
#include <string>

namespace sciqa {

// Base class for every error the toolkit raises on purpose.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A record failed schema validation. Carries the offending field and the
// rule that rejected it so batch jobs can report precisely.
struct invariant_violation : error {
  std::string field;
  std::string rule;

  invariant_violation(std::string field_, std::string rule_)
      : error("invariant violation: field '" + field_ + "': " + rule_),
        field(std::move(field_)),
        rule(std::move(rule_)) {}
};

// Retriable endpoint failure (timeouts, 408/429/5xx, connection resets).
struct transient_error : error {
  using error::error;
};

// Endpoint answered but the payload had no usable content.
struct malformed_response : error {
  using error::error;
};

// Replay-mode cache lookup failed. Never falls back to the network.
struct cache_miss : error {
  using error::error;
};

struct empty_input : error {
  using error::error;
};

// Embedding provider changed vector dimension mid-run.
struct dimension_mismatch : error {
  using error::error;
};

// Two MinHash signatures built under different num_perms/seed.
struct config_mismatch : error {
  using error::error;
};

// Selection was asked to run without its strategy-specific auxiliary data.
struct missing_aux : error {
  using error::error;
};

// A bench score could not be mapped to a category.
struct unmapped_bench : error {
  using error::error;
};

struct empty_run : error {
  using error::error;
};

// Command-line misuse; the CLI maps this to exit code 2.
struct usage_error : error {
  using error::error;
};

}  // namespace sciqa
