#include "ccast/common.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>
#include <thread>

namespace ccast {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::multiple_roots: return "MultipleRoots";
    case Errc::unknown_parent: return "UnknownParent";
    case Errc::cycle_detected: return "CycleDetected";
    case Errc::unbalanced_leaf_depth: return "UnbalancedLeafDepth";
    case Errc::singular_gram: return "SingularGram";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::io_error: return "IoError";
    case Errc::internal: return "InternalError";
    case Errc::non_finite_loss: return "NonFiniteLoss";
    case Errc::empty_window: return "EmptyWindow";
    case Errc::missing_level_params: return "MissingLevelParams";
    case Errc::infeasible: return "Infeasible";
    case Errc::max_iterations: return "MaxIterations";
    case Errc::non_convex: return "NonConvex";
    case Errc::singular_kkt: return "SingularKKT";
    case Errc::too_many_inequalities: return "TooManyInequalities";
    case Errc::singular_w: return "SingularW";
    case Errc::insufficient_samples: return "InsufficientSamples";
    case Errc::infeasible_band: return "InfeasibleBand";
    case Errc::missing_level_row: return "MissingLevelRow";
    case Errc::zero_denominator: return "ZeroDenominator";
    case Errc::zero_weight_sum: return "ZeroWeightSum";
    case Errc::no_upper_nodes: return "NoUpperNodes";
    case Errc::missing_series: return "MissingSeries";
    case Errc::gap_in_series: return "GapInSeries";
    case Errc::duplicate_row: return "DuplicateRow";
    case Errc::unknown_series_id: return "UnknownSeriesId";
    case Errc::window_too_long: return "WindowTooLong";
  }
  return "UnknownError";
}

bool errc_is_validation(Errc c) {
  switch (c) {
    case Errc::multiple_roots:
    case Errc::unknown_parent:
    case Errc::cycle_detected:
    case Errc::unbalanced_leaf_depth:
    case Errc::dimension_mismatch:
    case Errc::invalid_config:
    case Errc::empty_window:
    case Errc::missing_level_params:
    case Errc::too_many_inequalities:
    case Errc::insufficient_samples:
    case Errc::missing_level_row:
    case Errc::zero_denominator:
    case Errc::zero_weight_sum:
    case Errc::no_upper_nodes:
    case Errc::missing_series:
    case Errc::gap_in_series:
    case Errc::duplicate_row:
    case Errc::unknown_series_id:
    case Errc::window_too_long:
      return true;
    default:
      return false;
  }
}

int max_threads() {
  if (const char* env = std::getenv("COHERENT_CAST_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::uint64_t fnv1a(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::string content_hash_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(bytes.data(), bytes.size())));
  return std::string(buf);
}

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

}  // namespace ccast
