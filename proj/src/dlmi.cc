#include "lqconic/dlmi.h"

#include <cmath>
#include <limits>

#include "lqconic/error.h"
#include "lqconic/quadrature.h"

namespace lqconic {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// N + ΛB
Eigen::MatrixXd coupling(const SymMat& lambda, const StateSpace& sys,
                         const QuadForm& qf, double t) {
  return qf.N(t) + lambda.matrix() * sys.B.at(t);
}

}  // namespace

SymMat assemble_M(const SymMat& lambda, const SymMat& lambda_dot,
                  const StateSpace& sys, const QuadForm& qf, double t) {
  if (lambda.dim() != sys.n() || lambda_dot.dim() != sys.n() ||
      qf.n() != sys.n() || qf.m() != sys.m()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "assemble_M: Λ, Λ̇, system and 𝒬 disagree in size");
  }
  return qf.at(t) + apply_E_adj(lambda_dot, sys.m()) +
         apply_A_adj(lambda, sys, t);
}

SymMat dre_derivative(const SymMat& lambda, const StateSpace& sys,
                      const QuadForm& qf, double t) {
  const Eigen::MatrixXd A = sys.A.at(t);
  const Eigen::MatrixXd G = coupling(lambda, sys, qf, t);
  const Eigen::MatrixXd AtL = A.transpose() * lambda.matrix();
  const Eigen::MatrixXd quad = G * qf.R(t).llt().solve(Eigen::MatrixXd(G.transpose()));
  return SymMat(Eigen::MatrixXd(-(AtL + AtL.transpose() - quad + qf.Q(t))));
}

std::vector<SymMat> lambda_derivative(const MatTrajectory& lambda,
                                      const StateSpace& sys,
                                      const QuadForm& qf,
                                      DerivativeSource source) {
  if (source == DerivativeSource::kFiniteDifference) {
    return finite_difference_derivative(lambda);
  }
  std::vector<SymMat> d(static_cast<std::size_t>(lambda.size()),
                        SymMat(Eigen::MatrixXd::Constant(
                            lambda.dim(), lambda.dim(), kNaN)));
  for (int k = lambda.valid_begin(); k < lambda.valid_end(); ++k) {
    d[static_cast<std::size_t>(k)] =
        dre_derivative(lambda[k], sys, qf, lambda.grid().node(k));
  }
  return d;
}

namespace {

// max |D_h − D_2h| / 3 over interior nodes, doubled to cover the one-sided
// end stencils.
double richardson_error(const MatTrajectory& lambda,
                        const std::vector<SymMat>& d) {
  const double h = lambda.grid().h();
  double err = 0.0;
  for (int k = lambda.valid_begin() + 2; k < lambda.valid_end() - 2; ++k) {
    const Eigen::MatrixXd wide =
        (lambda[k + 2].matrix() - lambda[k - 2].matrix()) / (4.0 * h);
    err = std::max(err, max_abs(Eigen::MatrixXd(
                            d[static_cast<std::size_t>(k)].matrix() - wide)));
  }
  return 2.0 * err / 3.0;
}

}  // namespace

DlmiCertificate feasibility(const MatTrajectory& lambda, const StateSpace& sys,
                            const QuadForm& qf, const DlmiOptions& options) {
  const std::vector<SymMat> d =
      lambda_derivative(lambda, sys, qf, options.derivative);
  DlmiCertificate cert;
  cert.min_eig.assign(static_cast<std::size_t>(lambda.size()), kNaN);
  cert.rank_trace.assign(static_cast<std::size_t>(lambda.size()), -1);
  cert.worst_min_eig = std::numeric_limits<double>::infinity();
  cert.psd_ok = lambda.valid_begin() < lambda.valid_end();
  if (options.derivative == DerivativeSource::kFiniteDifference) {
    cert.derivative_error = richardson_error(lambda, d);
  }

  for (int k = lambda.valid_begin(); k < lambda.valid_end(); ++k) {
    const double t = lambda.grid().node(k);
    const SymMat M =
        assemble_M(lambda[k], d[static_cast<std::size_t>(k)], sys, qf, t);
    const double e = min_eig(M);
    cert.min_eig[static_cast<std::size_t>(k)] = e;
    cert.rank_trace[static_cast<std::size_t>(k)] = eps_rank(M, options.tol);
    if (e < cert.worst_min_eig) {
      cert.worst_min_eig = e;
      cert.worst_node = t;
    }
    if (e < -(relative_threshold(M, options.tol) + options.extra_slack)) {
      cert.psd_ok = false;
    }
    if (options.factorize) {
      cert.factors.push_back(extremal_factorization(
          lambda[k], d[static_cast<std::size_t>(k)], sys, qf, t,
          std::max(options.tol, 1e-8)));
    }
  }

  const SymMat target = options.lambda_final.value_or(SymMat::Zero(sys.n()));
  const int last = lambda.size() - 1;
  cert.boundary_error =
      lambda.valid(last) ? max_abs(lambda[last] - target)
                         : std::numeric_limits<double>::infinity();
  cert.boundary_ok = cert.boundary_error <= 1e-9 * (1.0 + max_abs(target));
  cert.feasible = cert.psd_ok && cert.boundary_ok && lambda.complete();
  return cert;
}

SymFactor extremal_factorization(const SymMat& lambda_bar,
                                 const SymMat& lambda_dot,
                                 const StateSpace& sys, const QuadForm& qf,
                                 double t, double tol) {
  const SymMat R(qf.R(t));
  const int n = sys.n();
  const int m = sys.m();
  SymFactor f;
  f.U.resize(n + m, m);
  f.U.topRows(n) = coupling(lambda_bar, sys, qf, t) * spd_inv_sqrt(R).matrix();
  f.U.bottomRows(m) = spd_sqrt(R).matrix();

  const SymMat M = assemble_M(lambda_bar, lambda_dot, sys, qf, t);
  const double err = max_abs(Eigen::MatrixXd(f.reconstruct() - M.matrix()));
  if (err > tol * (1.0 + max_abs(M))) {
    throw Error(ErrorCode::kResidualTooLarge,
                "extremal_factorization: ‖UUᵀ − 𝓜(Λ)‖ = " + std::to_string(err) +
                    " at t = " + std::to_string(t) +
                    "; Λ is not a Riccati extremal there");
  }
  return f;
}

SymFactor extremal_factorization(const SymMat& lambda_bar,
                                 const StateSpace& sys, const QuadForm& qf,
                                 double t, double tol) {
  return extremal_factorization(lambda_bar,
                                dre_derivative(lambda_bar, sys, qf, t), sys,
                                qf, t, tol);
}

LureResiduals lure_residuals(const SymMat& lambda, const SymMat& lambda_dot,
                             const Eigen::MatrixXd& U1,
                             const Eigen::MatrixXd& U2, const StateSpace& sys,
                             const QuadForm& qf, double t) {
  const int n = sys.n();
  const int m = sys.m();
  if (U1.rows() != n || U2.rows() != m || U1.cols() != U2.cols()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "lure_residuals: factor blocks have wrong shape");
  }
  const Eigen::MatrixXd A = sys.A.at(t);
  const Eigen::MatrixXd AtL = A.transpose() * lambda.matrix();
  const Eigen::MatrixXd top_left =
      qf.Q(t) + lambda_dot.matrix() + AtL + AtL.transpose();
  LureResiduals r;
  r.r1 = max_abs(Eigen::MatrixXd(U1 * U1.transpose() - top_left));
  r.r2 = max_abs(Eigen::MatrixXd(U1 * U2.transpose() -
                                 coupling(lambda, sys, qf, t)));
  r.r3 = max_abs(Eigen::MatrixXd(U2 * U2.transpose() - qf.R(t)));
  return r;
}

double dual_objective(const MatTrajectory& lambda, const Eigen::VectorXd& x0) {
  if (!lambda.valid(0)) {
    throw Error(ErrorCode::kGridMismatch,
                "dual_objective: Λ(0) is not available (escaped trajectory)");
  }
  if (x0.size() != lambda.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "dual_objective: x0 size");
  }
  return x0.dot(lambda[0].matrix() * x0);
}

double dual_objective(const MatTrajectory& lambda, const SymMat& Xi,
                      const MatrixFunction& W) {
  if (!lambda.complete()) {
    throw Error(ErrorCode::kGridMismatch,
                "dual_objective: Λ does not cover the horizon");
  }
  std::vector<double> f;
  f.reserve(static_cast<std::size_t>(lambda.size()));
  for (int k = 0; k < lambda.size(); ++k) {
    const SymMat w = SymMat::SymmetricPart(W.at(lambda.grid().node(k)));
    f.push_back(trace_inner(lambda[k], w));
  }
  return trace_inner(lambda[0], Xi) + integrate_samples(f, lambda.grid().h());
}

}  // namespace lqconic
