#pragma once

#include "ccast/common.hpp"

#include <optional>
#include <string>

namespace ccast::qp {

// min_z 1/2 z^T Q z - q^T z   s.t.  Aeq z = beq,  G z <= h.
// Q must be symmetric PSD; empty constraint blocks are allowed (0 rows).
struct QpProblem {
  Mat Q;
  Vec q;
  Mat Aeq;
  Vec beq;
  Mat G;
  Vec h;

  int dim() const { return static_cast<int>(q.size()); }
  int n_eq() const { return static_cast<int>(beq.size()); }
  int n_ineq() const { return static_cast<int>(h.size()); }

  static QpProblem unconstrained(Mat Q, Vec q);
  std::string to_json() const;
  static QpProblem from_json(const std::string& text);
};

enum class QpStatus { converged, max_iter, infeasible };

struct QpResiduals {
  double stationarity = 0.0;
  double primal_eq = 0.0;
  double primal_ineq = 0.0;
  double complementarity = 0.0;
  double worst() const;
};

struct QpSolution {
  Vec z;
  Vec nu;      // equality duals
  Vec lambda;  // inequality duals, >= 0
  QpStatus status = QpStatus::max_iter;
  QpResiduals residuals;
  int iterations = 0;
  double objective = 0.0;
  std::string to_json() const;
};

struct SolveOptions {
  double tol = 1e-8;
  int max_iter = 100;
  // When the smallest eigenvalue of Q sits below eig_floor, eig_reg * I is
  // added to keep the Newton systems invertible.
  double eig_floor = 1e-10;
  double eig_reg = 1e-8;
};

// Primal-dual interior point with a Mehrotra-style predictor-corrector step.
// Throws Infeasible when a feasibility probe proves the region empty,
// MaxIterations otherwise on non-convergence, NonConvex when Q has an
// eigenvalue below -1e-8.
QpSolution solve(const QpProblem& p, const SolveOptions& opt = {});

// Like solve() but reports non-convergence through status instead of throwing.
QpSolution try_solve(const QpProblem& p, const SolveOptions& opt = {});

struct QpBackward {
  Vec dq;
  Vec dbeq;
  Vec dh;
  std::optional<Mat> dQ, dAeq, dG;
  bool least_squares_fallback = false;
};

// Implicit differentiation of the optimum through the KKT conditions: solves
// the transposed KKT Jacobian for the adjoint, then maps it onto the problem
// data. Requires a converged solution. Weakly active constraints (lambda and
// slack both tiny) are clamped at 1e-10 before factorization; if the system
// is still singular it is solved in the least-squares sense and flagged.
QpBackward backward(const QpProblem& p, const QpSolution& sol, const Vec& dLdz,
                    bool want_matrices = false);

// Enumerates active subsets of the inequalities (g <= 12), solves each
// equality-constrained KKT system, filters by primal/dual feasibility and
// returns the feasible candidate with the lowest objective. Exact up to
// linear-solve precision; independent of the interior-point path.
QpSolution brute_force_oracle(const QpProblem& p);

}  // namespace ccast::qp
