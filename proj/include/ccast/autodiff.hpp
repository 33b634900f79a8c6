#pragma once

#include "ccast/common.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ccast::ad {

// Learnable tensor. Gradients accumulate into `grad` during Tape::backward;
// they are zeroed at the start of each backward pass.
struct Param {
  Mat value;
  Mat grad;
  std::string name;
  Param(std::string n, Mat v)
      : value(std::move(v)), grad(Mat::Zero(value.rows(), value.cols())), name(std::move(n)) {}
};

class Tape;

// Handle to a tape node. Cheap to copy; valid until Tape::clear().
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  const Mat& value() const;
  int rows() const { return static_cast<int>(value().rows()); }
  int cols() const { return static_cast<int>(value().cols()); }
};

// Ordered record of executed primitives. backward() walks it in exact
// reverse execution order; one backward per forward.
class Tape {
 public:
  // back(self) pulls grad(self) into the node's inputs. Null for leaves.
  using BackFn = std::function<void(Tape&, int self)>;

  Var input(Mat value);          // constant leaf, no gradient
  Var param(Param& p);           // learnable leaf, accumulates into p.grad
  Var push(Mat value, BackFn back);

  const Mat& value(int id) const { return nodes_[id].value; }
  bool has_grad(int id) const { return nodes_[id].has_grad; }
  const Mat& grad(int id) const { return nodes_[id].grad; }
  // Lazily zero-initialized accumulator.
  Mat& grad_ref(int id);

  // Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be 1x1.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool has_grad = false;
    BackFn back;
  };
  std::vector<Node> nodes_;
  std::vector<std::pair<int, Param*>> params_;
  bool used_ = false;
};

// ---- primitives -----------------------------------------------------------
// Shapes are checked; every primitive records its adjoint on the tape.

Var affine(Var x, Var w, Var b);    // x*W + b (b is 1 x cols, broadcast over rows)
Var matmul(Var a, Var b);           // A*B
Var matmul_nt(Var a, Var b);        // A*B^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var neg(Var a);
Var mul(Var a, Var b);              // elementwise
Var add_rowvec(Var a, Var b);       // b is 1 x c
Var mul_rowvec(Var a, Var b);       // b is 1 x c
Var add_colvec(Var a, Var b);       // b is n x 1
Var mul_colvec(Var a, Var b);       // b is n x 1
Var mul_scalarvar(Var a, Var s);    // s is 1 x 1
Var scale(Var a, double c);
Var add_const(Var a, double c);
Var sigmoid(Var a);
Var tanh_act(Var a);
Var relu(Var a);
Var abs_val(Var a);                 // subgradient 0 at 0
Var softmax_rows(Var a);            // max-shifted; rows sum to 1
Var sum_all(Var a);                 // 1 x 1
Var mean_all(Var a);                // 1 x 1
Var row_sums(Var a);                // n x 1
Var col_sums(Var a);                // 1 x c
Var gather_rows(Var a, std::vector<int> idx);
Var slice_rows(Var a, int first, int count);
Var slice_cols(Var a, int first, int count);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);

// ---- gradient checking ----------------------------------------------------

struct GradCheckEntry {
  std::string param;
  int row = 0, col = 0;
  double analytic = 0.0, numeric = 0.0, rel_err = 0.0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
  long entries = 0;
  GradCheckEntry worst;
};

// Compares tape gradients of the scalar `f` against central differences,
// entry by entry. rel = |a - n| / max(|a|, |n|, 1).
GradCheckReport grad_check(const std::function<Var(Tape&)>& f, std::span<Param* const> params,
                           double eps = 1e-6, double tol = 1e-4);

// ---- optimizer --------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Mat> m, v;
  long t = 0;
};

void adam_init(AdamState& state, std::span<Param* const> params);
void adam_step(std::span<Param* const> params, AdamState& state, const AdamConfig& cfg);

// ---- checkpoints ------------------------------------------------------------
// Versioned JSON map name -> {rows, cols, data row-major}.

std::string params_to_json(std::span<Param* const> params);
void params_from_json(const std::string& text, std::span<Param* const> params);

}  // namespace ccast::ad
