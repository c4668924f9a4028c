#include "lqconic/riccati.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "lqconic/error.h"

namespace lqconic {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

SymMat nan_matrix(int n) {
  return SymMat(Eigen::MatrixXd::Constant(n, n, kNaN));
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& x) {
  return 0.5 * (x + x.transpose());
}

// dX/dt as a function of (t, X, index of the grid step being taken).
using Rhs = std::function<Eigen::MatrixXd(double, const Eigen::MatrixXd&, int)>;

Eigen::MatrixXd rk4_step(const Rhs& f, double t, const Eigen::MatrixXd& x,
                         double dt, int step) {
  const Eigen::MatrixXd k1 = f(t, x, step);
  const Eigen::MatrixXd k2 = f(t + 0.5 * dt, x + (0.5 * dt) * k1, step);
  const Eigen::MatrixXd k3 = f(t + 0.5 * dt, x + (0.5 * dt) * k2, step);
  const Eigen::MatrixXd k4 = f(t + dt, x + dt * k3, step);
  return symmetrized(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

bool blown_up(const Eigen::MatrixXd& x, double cap) {
  if (!x.allFinite()) return true;
  const double entry_max = max_abs(x);
  // sigma_max ≤ n·max|xᵢⱼ|, so most checks need no eigenvalues.
  if (entry_max * static_cast<double>(x.rows()) <= cap) return false;
  return sigma_max_norm(SymMat(x)) > cap;
}

struct MarchResult {
  std::vector<SymMat> samples;
  int valid_begin = 0;
  int valid_end = 0;
  bool escaped = false;
  std::optional<double> escape_time;
};

// Integrates dX/dt = f on the grid starting from the final node (backward
// sweep) or the initial node (forward sweep).
MarchResult march(const TimeGrid& grid, const SymMat& start, Boundary boundary,
                  const Rhs& f, double cap, int substeps) {
  const int steps = grid.steps();
  const int n = start.dim();
  MarchResult r;
  r.samples.assign(static_cast<std::size_t>(grid.size()), nan_matrix(n));
  const bool backward = boundary == Boundary::kFinal;
  int k = backward ? steps : 0;
  r.samples[static_cast<std::size_t>(k)] = start;
  Eigen::MatrixXd x = start.matrix();

  for (int i = 0; i < steps; ++i) {
    const int next = backward ? k - 1 : k + 1;
    const int step = backward ? next : k;
    const double t = grid.node(k);
    const double dt = grid.node(next) - t;
    Eigen::MatrixXd x_next = rk4_step(f, t, x, dt, step);
    if (blown_up(x_next, cap)) {
      // Re-take the step in substeps; either locate the escape inside it or
      // find that the full step overshot and continue from the finer result.
      Eigen::MatrixXd y = x;
      const double ds = dt / substeps;
      bool confirmed = false;
      for (int j = 0; j < substeps; ++j) {
        y = rk4_step(f, t + j * ds, y, ds, step);
        if (blown_up(y, cap)) {
          r.escape_time = t + (j + 0.5) * ds;
          confirmed = true;
          break;
        }
      }
      if (confirmed) {
        r.escaped = true;
        break;
      }
      x_next = y;
    }
    x = x_next;
    k = next;
    r.samples[static_cast<std::size_t>(k)] = SymMat(x);
  }
  if (backward) {
    r.valid_begin = k;
    r.valid_end = grid.size();
  } else {
    r.valid_begin = 0;
    r.valid_end = k + 1;
  }
  return r;
}

}  // namespace

MatTrajectory::MatTrajectory(TimeGrid grid, std::vector<SymMat> samples,
                             std::string label)
    : grid_(grid), samples_(std::move(samples)), label_(std::move(label)) {
  if (static_cast<int>(samples_.size()) != grid_.size()) {
    throw Error(ErrorCode::kGridMismatch,
                "trajectory needs steps+1 = " + std::to_string(grid_.size()) +
                    " samples, got " + std::to_string(samples_.size()));
  }
  for (const auto& s : samples_) {
    if (s.dim() != samples_.front().dim()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "trajectory samples have differing dimension");
    }
  }
  valid_end_ = size();
}

void MatTrajectory::set_valid_range(int begin, int end) {
  if (begin < 0 || end > size() || begin > end) {
    throw Error(ErrorCode::kGridMismatch, "invalid trajectory range");
  }
  valid_begin_ = begin;
  valid_end_ = end;
}

SymMat MatTrajectory::at(double t) const {
  const double s = std::clamp(t / grid_.horizon(), 0.0, 1.0) * grid_.steps();
  const double nearest = std::round(s);
  if (std::abs(s - nearest) <= 1e-9) return (*this)[static_cast<int>(nearest)];
  const int k = std::min(static_cast<int>(std::floor(s)), grid_.steps() - 1);
  const double w = s - k;
  return SymMat((1.0 - w) * (*this)[k].matrix() + w * (*this)[k + 1].matrix());
}

std::vector<SymMat> finite_difference_derivative(const MatTrajectory& traj) {
  const int n = traj.dim();
  std::vector<SymMat> d(static_cast<std::size_t>(traj.size()), nan_matrix(n));
  const int b = traj.valid_begin();
  const int e = traj.valid_end();
  const int count = e - b;
  const double h = traj.grid().h();
  auto at = [&](int k) -> const Eigen::MatrixXd& { return traj[k].matrix(); };
  auto put = [&](int k, const Eigen::MatrixXd& v) {
    d[static_cast<std::size_t>(k)] = SymMat(v);
  };
  if (count == 1) {
    put(b, Eigen::MatrixXd::Zero(n, n));
  } else if (count == 2) {
    const Eigen::MatrixXd slope = (at(b + 1) - at(b)) / h;
    put(b, slope);
    put(b + 1, slope);
  } else if (count >= 3) {
    put(b, (-3.0 * at(b) + 4.0 * at(b + 1) - at(b + 2)) / (2.0 * h));
    for (int k = b + 1; k < e - 1; ++k) {
      put(k, (at(k + 1) - at(k - 1)) / (2.0 * h));
    }
    put(e - 1, (3.0 * at(e - 1) - 4.0 * at(e - 2) + at(e - 3)) / (2.0 * h));
  }
  return d;
}

RiccatiModel::RiccatiModel(const StateSpace& sys, const QuadForm& qf)
    : n_(sys.n()) {
  if (qf.n() != sys.n() || qf.m() != sys.m()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "RiccatiModel: quadratic form does not match the system");
  }
  eval_ = [sys, qf](double t) {
    const Eigen::MatrixXd A = sys.A.at(t);
    const Eigen::MatrixXd B = sys.B.at(t);
    const Eigen::MatrixXd N = qf.N(t);
    const Eigen::LLT<Eigen::MatrixXd> r_llt(qf.R(t));
    if (r_llt.info() != Eigen::Success) {
      throw Error(ErrorCode::kRNotPd, "R(t) is not positive definite");
    }
    const Eigen::MatrixXd Rinv_Bt = r_llt.solve(Eigen::MatrixXd(B.transpose()));
    const Eigen::MatrixXd Rinv_Nt = r_llt.solve(Eigen::MatrixXd(N.transpose()));
    return RiccatiCoefficients{A - B * Rinv_Nt, SymMat::SymmetricPart(B * Rinv_Bt),
                               SymMat::SymmetricPart(qf.Q(t) - N * Rinv_Nt)};
  };
}

RiccatiModel RiccatiModel::Standard(MatrixFunction A, MatrixFunction M,
                                    MatrixFunction Q) {
  const auto n = A.rows();
  if (n < 1 || A.cols() != n || M.rows() != n || M.cols() != n ||
      Q.rows() != n || Q.cols() != n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "RiccatiModel::Standard: A, M, Q must be n x n");
  }
  return RiccatiModel(static_cast<int>(n), [A, M, Q](double t) {
    return RiccatiCoefficients{A.at(t), SymMat::SymmetricPart(M.at(t)),
                               SymMat::SymmetricPart(Q.at(t))};
  });
}

SymMat RiccatiModel::field(double t, const SymMat& lambda) const {
  const RiccatiCoefficients c = eval_(t);
  const Eigen::MatrixXd& L = lambda.matrix();
  const Eigen::MatrixXd AtL = c.A.transpose() * L;
  return SymMat(Eigen::MatrixXd(AtL + AtL.transpose() - L * c.M.matrix() * L +
                                c.Q.matrix()));
}

PiecewiseForcing::PiecewiseForcing(TimeGrid grid, int n)
    : PiecewiseForcing(grid, {0, grid.steps()}, {SymMat::Zero(n)}) {}

PiecewiseForcing::PiecewiseForcing(TimeGrid grid, std::vector<int> breakpoints,
                                   std::vector<SymMat> values)
    : grid_(grid),
      breakpoints_(std::move(breakpoints)),
      values_(std::move(values)) {
  if (breakpoints_.size() != values_.size() + 1 || breakpoints_.front() != 0 ||
      breakpoints_.back() != grid_.steps() ||
      !std::is_sorted(breakpoints_.begin(), breakpoints_.end(),
                      std::less_equal<int>())) {
    throw Error(ErrorCode::kGridMismatch,
                "forcing breakpoints must increase from 0 to steps");
  }
  for (std::size_t j = 0; j < values_.size(); ++j) {
    for (int k = breakpoints_[j]; k < breakpoints_[j + 1]; ++k) {
      piece_of_step_.push_back(static_cast<int>(j));
    }
  }
}

const SymMat& PiecewiseForcing::on_step(int k) const {
  const int step = std::clamp(k, 0, grid_.steps() - 1);
  return values_[static_cast<std::size_t>(
      piece_of_step_[static_cast<std::size_t>(step)])];
}

bool PiecewiseForcing::smooth_at(int k) const {
  const int lo = std::max(0, k - 2);
  const int hi = std::min(grid_.steps() - 1, k + 1);
  const int piece = piece_of_step_[static_cast<std::size_t>(lo)];
  for (int s = lo + 1; s <= hi; ++s) {
    if (piece_of_step_[static_cast<std::size_t>(s)] != piece) return false;
  }
  return true;
}

MatTrajectory PiecewiseForcing::node_samples() const {
  std::vector<SymMat> samples;
  samples.reserve(static_cast<std::size_t>(grid_.size()));
  for (int k = 0; k < grid_.size(); ++k) samples.push_back(on_step(k));
  return MatTrajectory(grid_, std::move(samples), "forcing");
}

TransitionMatrix::TransitionMatrix(const MatrixFunction& F,
                                   const TimeGrid& grid)
    : grid_(grid) {
  const auto n = F.rows();
  if (n < 1 || F.cols() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "transition_matrix: F not square");
  }
  Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(n, n);
  from_zero_.push_back(phi);
  const double h = grid.h();
  for (int k = 0; k < grid.steps(); ++k) {
    const double t = grid.node(k);
    const Eigen::MatrixXd k1 = F.at(t) * phi;
    const Eigen::MatrixXd k2 = F.at(t + 0.5 * h) * (phi + 0.5 * h * k1);
    const Eigen::MatrixXd k3 = F.at(t + 0.5 * h) * (phi + 0.5 * h * k2);
    const Eigen::MatrixXd k4 = F.at(t + h) * (phi + h * k3);
    phi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    from_zero_.push_back(phi);
  }
}

Eigen::MatrixXd TransitionMatrix::operator()(int k, int j) const {
  const auto& pk = from_zero_.at(static_cast<std::size_t>(k));
  const auto& pj = from_zero_.at(static_cast<std::size_t>(j));
  // Φ(t_k, t_j) = Φ(t_k, 0)·Φ(t_j, 0)⁻¹
  return pj.transpose().partialPivLu().solve(pk.transpose()).transpose();
}

TransitionMatrix transition_matrix(const MatrixFunction& F,
                                   const TimeGrid& grid) {
  return TransitionMatrix(F, grid);
}

namespace {

MatTrajectory solve_lyapunov(const MatrixFunction& F, const MatrixFunction& H,
                             const SymMat& boundary_value,
                             const TimeGrid& grid, Boundary boundary) {
  const int n = boundary_value.dim();
  if (F.rows() != n || F.cols() != n || H.rows() != n || H.cols() != n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "Lyapunov equation: F, H and the boundary value differ in size");
  }
  const Rhs f = [&](double t, const Eigen::MatrixXd& x, int) {
    const Eigen::MatrixXd FtX = F.at(t).transpose() * x;
    return Eigen::MatrixXd(-(FtX + FtX.transpose() + H.at(t)));
  };
  MarchResult r = march(grid, boundary_value, boundary, f,
                        std::numeric_limits<double>::infinity(), 1);
  MatTrajectory traj(grid, std::move(r.samples), "lyapunov");
  traj.set_valid_range(r.valid_begin, r.valid_end);
  return traj;
}

}  // namespace

MatTrajectory solve_lyapunov_final(const MatrixFunction& F,
                                   const MatrixFunction& H,
                                   const SymMat& x_final,
                                   const TimeGrid& grid) {
  return solve_lyapunov(F, H, x_final, grid, Boundary::kFinal);
}

MatTrajectory solve_lyapunov_initial(const MatrixFunction& F,
                                     const MatrixFunction& H,
                                     const SymMat& x_initial,
                                     const TimeGrid& grid) {
  return solve_lyapunov(F, H, x_initial, grid, Boundary::kInitial);
}

DreSolution solve_forced_dre(const RiccatiModel& model,
                             const PiecewiseForcing& forcing,
                             const SymMat& boundary_value, Boundary boundary,
                             const RiccatiOptions& options) {
  if (boundary_value.dim() != model.n()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "DRE boundary value does not match the model dimension");
  }
  const TimeGrid& grid = forcing.grid();
  // 𝓡(Λ) = H  ⇔  Λ̇ = H − (ÂᵀΛ + ΛÂ − ΛMΛ + Q̂)
  const Rhs f = [&](double t, const Eigen::MatrixXd& x, int step) {
    return Eigen::MatrixXd(forcing.on_step(step).matrix() -
                           model.field(t, SymMat(x)).matrix());
  };
  MarchResult r = march(grid, boundary_value, boundary, f, options.escape_cap,
                        std::max(1, options.escape_substeps));

  DreSolution sol{MatTrajectory(grid, std::move(r.samples), "dre"), r.escaped,
                  r.escape_time, 0.0};
  sol.lambda.set_valid_range(r.valid_begin, r.valid_end);

  // Residual sweep; near an escape the difference stencil straddles the
  // blow-up, so those nodes are left out.
  const MatTrajectory residual = riccati_residual(sol.lambda, model);
  const int margin = r.escaped ? 3 : 0;
  int lo = r.valid_begin;
  int hi = r.valid_end;
  if (r.escaped && boundary == Boundary::kFinal) lo += margin;
  if (r.escaped && boundary == Boundary::kInitial) hi -= margin;
  for (int k = lo; k < hi; ++k) {
    if (!forcing.smooth_at(k)) continue;
    sol.residual_max =
        std::max(sol.residual_max,
                 max_abs(residual[k] - forcing.on_step(std::min(
                                           k, grid.steps() - 1))));
  }
  return sol;
}

DreSolution solve_dre_final(const RiccatiModel& model, const SymMat& lambda_f,
                            const TimeGrid& grid,
                            const RiccatiOptions& options) {
  return solve_forced_dre(model, PiecewiseForcing(grid, model.n()), lambda_f,
                          Boundary::kFinal, options);
}

DreSolution solve_dre_initial(const RiccatiModel& model,
                              const SymMat& lambda_i, const TimeGrid& grid,
                              const RiccatiOptions& options) {
  return solve_forced_dre(model, PiecewiseForcing(grid, model.n()), lambda_i,
                          Boundary::kInitial, options);
}

DriSample sample_dri_solution(const RiccatiModel& model,
                              const SymMat& boundary_value,
                              const TimeGrid& grid, std::uint64_t seed,
                              const DriSamplingOptions& options) {
  const int n = model.n();
  const int pieces = std::clamp(options.switch_points, 1, grid.steps());
  const double amplitude = options.amplitude.value_or(
      0.5 * (1.0 + max_abs(model.at(0.0).Q)));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<int> breakpoints;
  std::vector<SymMat> values;
  breakpoints.push_back(0);
  for (int j = 1; j <= pieces; ++j) {
    breakpoints.push_back(static_cast<int>(std::lround(
        static_cast<double>(j) * grid.steps() / pieces)));
  }
  for (int j = 0; j < pieces; ++j) {
    Eigen::MatrixXd G(n, n);
    for (int c = 0; c < n; ++c) {
      for (int r = 0; r < n; ++r) G(r, c) = amplitude * normal(rng);
    }
    values.push_back(SymMat(G * G.transpose()));
  }
  PiecewiseForcing forcing(grid, std::move(breakpoints), std::move(values));
  DreSolution sol = solve_forced_dre(model, forcing, boundary_value,
                                     options.boundary, options.riccati);
  sol.lambda.set_label("dri");
  return DriSample{std::move(sol), std::move(forcing)};
}

MatTrajectory riccati_residual(const MatTrajectory& lambda,
                               const RiccatiModel& model) {
  const std::vector<SymMat> d = finite_difference_derivative(lambda);
  std::vector<SymMat> out(static_cast<std::size_t>(lambda.size()),
                          nan_matrix(lambda.dim()));
  for (int k = lambda.valid_begin(); k < lambda.valid_end(); ++k) {
    out[static_cast<std::size_t>(k)] =
        d[static_cast<std::size_t>(k)] +
        model.field(lambda.grid().node(k), lambda[k]);
  }
  MatTrajectory r(lambda.grid(), std::move(out), "residual");
  r.set_valid_range(lambda.valid_begin(), lambda.valid_end());
  return r;
}

LoewnerOrder LoewnerVerdict::order() const {
  if (a_geq_b && b_geq_a) return LoewnerOrder::kBoth;
  if (a_geq_b) return LoewnerOrder::kAGeqB;
  if (b_geq_a) return LoewnerOrder::kBGeqA;
  return LoewnerOrder::kIncomparable;
}

LoewnerVerdict loewner_compare(const MatTrajectory& a, const MatTrajectory& b,
                               double tol) {
  if (!(a.grid() == b.grid()) || a.dim() != b.dim()) {
    throw Error(ErrorCode::kGridMismatch,
                "loewner_compare: trajectories differ in grid or dimension");
  }
  LoewnerVerdict v;
  v.min_eig = std::numeric_limits<double>::infinity();
  v.max_eig = -std::numeric_limits<double>::infinity();
  const int lo = std::max(a.valid_begin(), b.valid_begin());
  const int hi = std::min(a.valid_end(), b.valid_end());
  for (int k = lo; k < hi; ++k) {
    const Eigen::VectorXd ev = eigenvalues(a[k] - b[k]);
    v.min_eig = std::min(v.min_eig, ev.minCoeff());
    v.max_eig = std::max(v.max_eig, ev.maxCoeff());
    ++v.shared_nodes;
  }
  if (v.shared_nodes == 0) {
    v.min_eig = v.max_eig = 0.0;
    return v;
  }
  v.a_geq_b = v.min_eig >= -tol;
  v.b_geq_a = v.max_eig <= tol;
  return v;
}

}  // namespace lqconic
