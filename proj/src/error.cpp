#include "oodret/error.hpp"

namespace oodret {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::not_on_simplex: return "not_on_simplex";
    case Errc::out_of_bounds: return "out_of_bounds";
    case Errc::bad_magic: return "bad_magic";
    case Errc::bad_version: return "bad_version";
    case Errc::bad_dtype: return "bad_dtype";
    case Errc::truncated: return "truncated";
    case Errc::io_error: return "io_error";
    case Errc::missing_file: return "missing_file";
    case Errc::frame_gap: return "frame_gap";
    case Errc::class_count_mismatch: return "class_count_mismatch";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::zero_vector: return "zero_vector";
    case Errc::missing_embeddings: return "missing_embeddings";
    case Errc::unknown_sequence: return "unknown_sequence";
    case Errc::unknown_term: return "unknown_term";
    case Errc::single_class: return "single_class";
    case Errc::frame_regression: return "frame_regression";
    case Errc::config_mismatch: return "config_mismatch";
    case Errc::parse_error: return "parse_error";
  }
  return "unknown";
}

}  // namespace oodret
