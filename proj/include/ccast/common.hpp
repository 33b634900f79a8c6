#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ccast {

// All numerics are 64-bit. Matrices are row-major so that checkpoint and CSV
// dumps are a straight copy of the underlying buffer.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

enum class Errc {
  // tree construction
  multiple_roots,
  unknown_parent,
  cycle_detected,
  unbalanced_leaf_depth,
  singular_gram,
  // shared
  dimension_mismatch,
  invalid_config,
  io_error,
  internal,
  // autodiff / training
  non_finite_loss,
  empty_window,
  missing_level_params,
  // qp
  infeasible,
  max_iterations,
  non_convex,
  singular_kkt,
  too_many_inequalities,
  // reconcile / task
  singular_w,
  insufficient_samples,
  infeasible_band,
  missing_level_row,
  // metrics
  zero_denominator,
  zero_weight_sum,
  no_upper_nodes,
  // data
  missing_series,
  gap_in_series,
  duplicate_row,
  unknown_series_id,
  window_too_long,
};

const char* errc_name(Errc c);

// Bad inputs (files, configs, shapes) are validation errors and map to CLI
// exit code 2; numerical/solver failures map to exit code 1.
bool errc_is_validation(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}
  Errc code() const { return code_; }
  bool is_validation() const { return errc_is_validation(code_); }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool ok, Errc code, const std::string& msg) {
  if (!ok) fail(code, msg);
}

// Overload for hot paths: no string is built unless the check fails.
inline void require(bool ok, Errc code, const char* msg) {
  if (!ok) throw Error(code, msg);
}

// COHERENT_CAST_THREADS caps internal fan-out (multi-seed runs); defaults to
// hardware concurrency.
int max_threads();

// FNV-1a content hash, printed as 16 hex digits. Used for run manifests.
std::uint64_t fnv1a(const void* data, std::size_t len);
std::string content_hash_hex(const std::string& bytes);

// Locale-independent float formatting that round-trips exactly through
// parsing; all files we emit use it so reruns are byte-identical.
std::string format_double(double v);

}  // namespace ccast
