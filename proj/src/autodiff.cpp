#include "ccast/autodiff.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace ccast::ad {

namespace {

void check_same_tape(Var a, Var b) {
  require(a.tape && a.tape == b.tape, Errc::internal, "vars belong to different tapes");
}

[[noreturn]] void shape_fail(const char* op, Var a, Var b) {
  fail(Errc::dimension_mismatch,
       std::string(op) + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
           " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

}  // namespace

const Mat& Var::value() const { return tape->value(id); }

Var Tape::input(Mat value) { return push(std::move(value), nullptr); }

Var Tape::param(Param& p) {
  Param* ptr = &p;
  Var v = push(p.value, [ptr](Tape& t, int self) { ptr->grad += t.grad(self); });
  params_.emplace_back(v.id, ptr);
  return v;
}

Var Tape::push(Mat value, BackFn back) {
  nodes_.push_back(Node{std::move(value), Mat(), false, std::move(back)});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Mat& Tape::grad_ref(int id) {
  Node& nd = nodes_[id];
  if (!nd.has_grad) {
    nd.grad = Mat::Zero(nd.value.rows(), nd.value.cols());
    nd.has_grad = true;
  }
  return nd.grad;
}

void Tape::backward(Var loss) {
  require(loss.tape == this, Errc::internal, "loss var from another tape");
  require(!used_, Errc::internal, "tape already ran backward; one backward per forward");
  require(loss.value().rows() == 1 && loss.value().cols() == 1, Errc::dimension_mismatch,
          "backward seed must be a 1x1 value");
  used_ = true;
  for (auto& pr : params_) pr.second->grad.setZero();
  grad_ref(loss.id)(0, 0) = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& nd = nodes_[i];
    if (nd.has_grad && nd.back) nd.back(*this, i);
  }
}

void Tape::clear() {
  nodes_.clear();
  params_.clear();
  used_ = false;
}

// ---- primitives -----------------------------------------------------------

Var affine(Var x, Var w, Var b) {
  check_same_tape(x, w);
  check_same_tape(x, b);
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) shape_fail("affine", x, w);
  Tape& t = *x.tape;
  Mat y = (x.value() * w.value()).rowwise() + b.value().row(0);
  const int xi = x.id, wi = w.id, bi = b.id;
  return t.push(std::move(y), [xi, wi, bi](Tape& t, int self) {
    const Mat& g = t.grad(self);
    t.grad_ref(xi).noalias() += g * t.value(wi).transpose();
    t.grad_ref(wi).noalias() += t.value(xi).transpose() * g;
    t.grad_ref(bi) += g.colwise().sum();
  });
}

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  if (a.cols() != b.rows()) shape_fail("matmul", a, b);
  Tape& t = *a.tape;
  Mat y = a.value() * b.value();
  const int ai = a.id, bi = b.id;
  return t.push(std::move(y), [ai, bi](Tape& t, int self) {
    const Mat& g = t.grad(self);
    t.grad_ref(ai).noalias() += g * t.value(bi).transpose();
    t.grad_ref(bi).noalias() += t.value(ai).transpose() * g;
  });
}

Var matmul_nt(Var a, Var b) {
  check_same_tape(a, b);
  if (a.cols() != b.cols()) shape_fail("matmul_nt", a, b);
  Tape& t = *a.tape;
  Mat y = a.value() * b.value().transpose();
  const int ai = a.id, bi = b.id;
  return t.push(std::move(y), [ai, bi](Tape& t, int self) {
    const Mat& g = t.grad(self);
    t.grad_ref(ai).noalias() += g * t.value(bi);
    t.grad_ref(bi).noalias() += g.transpose() * t.value(ai);
  });
}

namespace {

Var binary_same_shape(const char* op, Var a, Var b, Mat y,
                      void (*back)(Tape&, int, int, int)) {
  check_same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail(op, a, b);
  const int ai = a.id, bi = b.id;
  return a.tape->push(std::move(y),
                      [ai, bi, back](Tape& t, int self) { back(t, self, ai, bi); });
}

}  // namespace

Var add(Var a, Var b) {
  return binary_same_shape("add", a, b, a.value() + b.value(), [](Tape& t, int self, int ai, int bi) {
    t.grad_ref(ai) += t.grad(self);
    t.grad_ref(bi) += t.grad(self);
  });
}

Var sub(Var a, Var b) {
  return binary_same_shape("sub", a, b, a.value() - b.value(), [](Tape& t, int self, int ai, int bi) {
    t.grad_ref(ai) += t.grad(self);
    t.grad_ref(bi) -= t.grad(self);
  });
}

Var mul(Var a, Var b) {
  return binary_same_shape("mul", a, b, a.value().cwiseProduct(b.value()),
                           [](Tape& t, int self, int ai, int bi) {
                             const Mat& g = t.grad(self);
                             t.grad_ref(ai) += g.cwiseProduct(t.value(bi));
                             t.grad_ref(bi) += g.cwiseProduct(t.value(ai));
                           });
}

Var neg(Var a) {
  const int ai = a.id;
  return a.tape->push(-a.value(),
                      [ai](Tape& t, int self) { t.grad_ref(ai) -= t.grad(self); });
}

Var add_rowvec(Var a, Var b) {
  check_same_tape(a, b);
  if (b.rows() != 1 || b.cols() != a.cols()) shape_fail("add_rowvec", a, b);
  Mat y = a.value().rowwise() + b.value().row(0);
  const int ai = a.id, bi = b.id;
  return a.tape->push(std::move(y), [ai, bi](Tape& t, int self) {
    const Mat& g = t.grad(self);
    t.grad_ref(ai) += g;
    t.grad_ref(bi) += g.colwise().sum();
  });
}

Var mul_rowvec(Var a, Var b) {
  check_same_tape(a, b);
  if (b.rows() != 1 || b.cols() != a.cols()) shape_fail("mul_rowvec", a, b);
  Mat y = a.value().array().rowwise() * b.value().row(0).array();
  const int ai = a.id, bi = b.id;
  return a.tape->push(std::move(y), [ai, bi](Tape& t, int self) {
    const Mat& g = t.grad(self);
    t.grad_ref(ai).array() += g.array().rowwise() * t.value(bi).row(0).array();
    t.grad_ref(bi) += g.cwiseProduct(t.value(ai)).colwise().sum();
  });
}

Var add_colvec(Var a, Var b) {
  check_same_tape(a, b);
  if (b.cols() != 1 || b.rows() != a.rows()) shape_fail("add_colvec", a, b);
  Mat y = a.value().colwise() + b.value().col(0);
  const int ai = a.id, bi = b.id;
  return a.tape->push(std::move(y), [ai, bi](Tape& t, int self) {
    const Mat& g = t.grad(self);
    t.grad_ref(ai) += g;
    t.grad_ref(bi) += g.rowwise().sum();
  });
}

Var mul_colvec(Var a, Var b) {
  check_same_tape(a, b);
  if (b.cols() != 1 || b.rows() != a.rows()) shape_fail("mul_colvec", a, b);
  Mat y = a.value().array().colwise() * b.value().col(0).array();
  const int ai = a.id, bi = b.id;
  return a.tape->push(std::move(y), [ai, bi](Tape& t, int self) {
    const Mat& g = t.grad(self);
    t.grad_ref(ai).array() += g.array().colwise() * t.value(bi).col(0).array();
    t.grad_ref(bi) += g.cwiseProduct(t.value(ai)).rowwise().sum();
  });
}

Var mul_scalarvar(Var a, Var s) {
  check_same_tape(a, s);
  if (s.rows() != 1 || s.cols() != 1) shape_fail("mul_scalarvar", a, s);
  Mat y = a.value() * s.value()(0, 0);
  const int ai = a.id, si = s.id;
  return a.tape->push(std::move(y), [ai, si](Tape& t, int self) {
    const Mat& g = t.grad(self);
    t.grad_ref(ai) += g * t.value(si)(0, 0);
    t.grad_ref(si)(0, 0) += g.cwiseProduct(t.value(ai)).sum();
  });
}

Var scale(Var a, double c) {
  const int ai = a.id;
  return a.tape->push(a.value() * c,
                      [ai, c](Tape& t, int self) { t.grad_ref(ai) += t.grad(self) * c; });
}

Var add_const(Var a, double c) {
  const int ai = a.id;
  return a.tape->push(a.value().array() + c,
                      [ai](Tape& t, int self) { t.grad_ref(ai) += t.grad(self); });
}

Var sigmoid(Var a) {
  Mat y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  const int ai = a.id;
  return a.tape->push(std::move(y), [ai](Tape& t, int self) {
    const auto y = t.value(self).array();
    t.grad_ref(ai).array() += t.grad(self).array() * y * (1.0 - y);
  });
}

Var tanh_act(Var a) {
  Mat y = a.value().array().tanh().matrix();
  const int ai = a.id;
  return a.tape->push(std::move(y), [ai](Tape& t, int self) {
    const auto y = t.value(self).array();
    t.grad_ref(ai).array() += t.grad(self).array() * (1.0 - y * y);
  });
}

Var relu(Var a) {
  Mat y = a.value().cwiseMax(0.0);
  const int ai = a.id;
  return a.tape->push(std::move(y), [ai](Tape& t, int self) {
    const auto x = t.value(ai).array();
    t.grad_ref(ai).array() += t.grad(self).array() * (x > 0.0).cast<double>();
  });
}

Var abs_val(Var a) {
  Mat y = a.value().cwiseAbs();
  const int ai = a.id;
  return a.tape->push(std::move(y), [ai](Tape& t, int self) {
    const auto x = t.value(ai).array();
    t.grad_ref(ai).array() += t.grad(self).array() * x.sign();
  });
}

Var softmax_rows(Var a) {
  Mat y = a.value();
  for (int i = 0; i < y.rows(); ++i) {
    const double mx = y.row(i).maxCoeff();
    y.row(i) = (y.row(i).array() - mx).exp();
    y.row(i) /= y.row(i).sum();
  }
  const int ai = a.id;
  return a.tape->push(std::move(y), [ai](Tape& t, int self) {
    const Mat& y = t.value(self);
    const Mat& g = t.grad(self);
    Mat& ga = t.grad_ref(ai);
    for (int i = 0; i < y.rows(); ++i) {
      const double dot = g.row(i).dot(y.row(i));
      ga.row(i).array() += y.row(i).array() * (g.row(i).array() - dot);
    }
  });
}

Var sum_all(Var a) {
  Mat y(1, 1);
  y(0, 0) = a.value().sum();
  const int ai = a.id;
  return a.tape->push(std::move(y), [ai](Tape& t, int self) {
    t.grad_ref(ai).array() += t.grad(self)(0, 0);
  });
}

Var mean_all(Var a) {
  Mat y(1, 1);
  const double inv = 1.0 / static_cast<double>(a.rows() * a.cols());
  y(0, 0) = a.value().sum() * inv;
  const int ai = a.id;
  return a.tape->push(std::move(y), [ai, inv](Tape& t, int self) {
    t.grad_ref(ai).array() += t.grad(self)(0, 0) * inv;
  });
}

Var row_sums(Var a) {
  Mat y = a.value().rowwise().sum();
  const int ai = a.id;
  return a.tape->push(std::move(y), [ai](Tape& t, int self) {
    t.grad_ref(ai).colwise() += t.grad(self).col(0);
  });
}

Var col_sums(Var a) {
  Mat y = a.value().colwise().sum();
  const int ai = a.id;
  return a.tape->push(std::move(y), [ai](Tape& t, int self) {
    t.grad_ref(ai).rowwise() += t.grad(self).row(0);
  });
}

Var gather_rows(Var a, std::vector<int> idx) {
  for (int i : idx)
    require(i >= 0 && i < a.rows(), Errc::dimension_mismatch, "gather_rows index out of range");
  Mat y(static_cast<int>(idx.size()), a.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) y.row(static_cast<int>(k)) = a.value().row(idx[k]);
  const int ai = a.id;
  return a.tape->push(std::move(y), [ai, idx = std::move(idx)](Tape& t, int self) {
    const Mat& g = t.grad(self);
    Mat& ga = t.grad_ref(ai);
    for (std::size_t k = 0; k < idx.size(); ++k) ga.row(idx[k]) += g.row(static_cast<int>(k));
  });
}

Var slice_rows(Var a, int first, int count) {
  require(first >= 0 && count >= 0 && first + count <= a.rows(), Errc::dimension_mismatch,
          "slice_rows out of range");
  Mat y = a.value().middleRows(first, count);
  const int ai = a.id;
  return a.tape->push(std::move(y), [ai, first, count](Tape& t, int self) {
    t.grad_ref(ai).middleRows(first, count) += t.grad(self);
  });
}

Var slice_cols(Var a, int first, int count) {
  require(first >= 0 && count >= 0 && first + count <= a.cols(), Errc::dimension_mismatch,
          "slice_cols out of range");
  Mat y = a.value().middleCols(first, count);
  const int ai = a.id;
  return a.tape->push(std::move(y), [ai, first, count](Tape& t, int self) {
    t.grad_ref(ai).middleCols(first, count) += t.grad(self);
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), Errc::dimension_mismatch, "concat_rows of nothing");
  Tape& t = *parts[0].tape;
  int rows = 0;
  const int cols = parts[0].cols();
  for (Var p : parts) {
    check_same_tape(parts[0], p);
    require(p.cols() == cols, Errc::dimension_mismatch, "concat_rows column mismatch");
    rows += p.rows();
  }
  Mat y(rows, cols);
  std::vector<std::pair<int, int>> spans;  // (id, first row)
  int at = 0;
  for (Var p : parts) {
    y.middleRows(at, p.rows()) = p.value();
    spans.emplace_back(p.id, at);
    at += p.rows();
  }
  return t.push(std::move(y), [spans = std::move(spans)](Tape& t, int self) {
    const Mat& g = t.grad(self);
    for (auto [id, first] : spans) {
      Mat& gp = t.grad_ref(id);
      gp += g.middleRows(first, gp.rows());
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), Errc::dimension_mismatch, "concat_cols of nothing");
  Tape& t = *parts[0].tape;
  int cols = 0;
  const int rows = parts[0].rows();
  for (Var p : parts) {
    check_same_tape(parts[0], p);
    require(p.rows() == rows, Errc::dimension_mismatch, "concat_cols row mismatch");
    cols += p.cols();
  }
  Mat y(rows, cols);
  std::vector<std::pair<int, int>> spans;
  int at = 0;
  for (Var p : parts) {
    y.middleCols(at, p.cols()) = p.value();
    spans.emplace_back(p.id, at);
    at += p.cols();
  }
  return t.push(std::move(y), [spans = std::move(spans)](Tape& t, int self) {
    const Mat& g = t.grad(self);
    for (auto [id, first] : spans) {
      Mat& gp = t.grad_ref(id);
      gp += g.middleCols(first, gp.cols());
    }
  });
}

// ---- gradient checking ------------------------------------------------------

GradCheckReport grad_check(const std::function<Var(Tape&)>& f, std::span<Param* const> params,
                           double eps, double tol) {
  auto eval = [&]() {
    Tape t;
    Var loss = f(t);
    const double v = loss.value()(0, 0);
    require(std::isfinite(v), Errc::non_finite_loss, "loss is not finite");
    return v;
  };

  Tape t;
  Var loss = f(t);
  require(std::isfinite(loss.value()(0, 0)), Errc::non_finite_loss, "loss is not finite");
  t.backward(loss);
  std::vector<Mat> analytic;
  analytic.reserve(params.size());
  for (Param* p : params) analytic.push_back(p->grad);

  GradCheckReport rep;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param& p = *params[k];
    for (int i = 0; i < p.value.rows(); ++i) {
      for (int j = 0; j < p.value.cols(); ++j) {
        const double saved = p.value(i, j);
        p.value(i, j) = saved + eps;
        const double up = eval();
        p.value(i, j) = saved - eps;
        const double dn = eval();
        p.value(i, j) = saved;
        const double num = (up - dn) / (2.0 * eps);
        const double ana = analytic[k](i, j);
        const double rel = std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), 1.0});
        ++rep.entries;
        if (rel > rep.max_rel_err) {
          rep.max_rel_err = rel;
          rep.worst = GradCheckEntry{p.name, i, j, ana, num, rel};
        }
      }
    }
  }
  rep.pass = rep.max_rel_err <= tol;
  return rep;
}

// ---- optimizer ----------------------------------------------------------------

void adam_init(AdamState& state, std::span<Param* const> params) {
  state.m.clear();
  state.v.clear();
  state.t = 0;
  for (Param* p : params) {
    state.m.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    state.v.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void adam_step(std::span<Param* const> params, AdamState& state, const AdamConfig& cfg) {
  require(state.m.size() == params.size(), Errc::dimension_mismatch,
          "optimizer state does not match parameter list");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param& p = *params[k];
    state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * p.grad;
    state.v[k] = (cfg.beta2 * state.v[k].array() + (1.0 - cfg.beta2) * p.grad.array().square()).matrix();
    const Mat mhat = state.m[k] / bc1;
    const Mat vhat = state.v[k] / bc2;
    p.value.array() -= cfg.lr * mhat.array() / (vhat.array().sqrt() + cfg.eps);
  }
}

// ---- checkpoints ----------------------------------------------------------------

std::string params_to_json(std::span<Param* const> params) {
  nlohmann::ordered_json j;
  j["format"] = "coherentcast-params";
  j["version"] = 1;
  nlohmann::ordered_json entries;
  for (const Param* p : params) {
    nlohmann::ordered_json e;
    e["rows"] = p->value.rows();
    e["cols"] = p->value.cols();
    std::vector<double> data(p->value.data(), p->value.data() + p->value.size());
    e["data"] = data;
    entries[p->name] = std::move(e);
  }
  j["params"] = std::move(entries);
  return j.dump();
}

void params_from_json(const std::string& text, std::span<Param* const> params) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(Errc::io_error, std::string("checkpoint parse: ") + e.what());
  }
  require(j.value("format", "") == "coherentcast-params", Errc::io_error,
          "not a parameter checkpoint");
  require(j.value("version", 0) == 1, Errc::io_error, "unsupported checkpoint version");
  const auto& entries = j.at("params");
  for (Param* p : params) {
    require(entries.contains(p->name), Errc::io_error,
            "checkpoint is missing parameter '" + p->name + "'");
    const auto& e = entries.at(p->name);
    const int rows = e.at("rows").get<int>(), cols = e.at("cols").get<int>();
    require(rows == p->value.rows() && cols == p->value.cols(), Errc::dimension_mismatch,
            "checkpoint shape mismatch for '" + p->name + "'");
    const auto data = e.at("data").get<std::vector<double>>();
    require(static_cast<Eigen::Index>(data.size()) == p->value.size(), Errc::io_error,
            "checkpoint data length mismatch for '" + p->name + "'");
    std::copy(data.begin(), data.end(), p->value.data());
    p->grad.setZero();
  }
}

}  // namespace ccast::ad
