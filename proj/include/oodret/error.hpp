#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace oodret {

enum class Errc {
  invalid_argument,
  shape_mismatch,
  not_on_simplex,
  out_of_bounds,
  bad_magic,
  bad_version,
  bad_dtype,
  truncated,
  io_error,
  missing_file,
  frame_gap,
  class_count_mismatch,
  dimension_mismatch,
  zero_vector,
  missing_embeddings,
  unknown_sequence,
  unknown_term,
  single_class,
  frame_regression,
  config_mismatch,
  parse_error,
};

std::string_view errc_name(Errc code) noexcept;

// Every module error carries a stable code so the CLI and the HTTP service
// can map it to machine-readable output.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace oodret
