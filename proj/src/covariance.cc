#include "lqconic/covariance.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "lqconic/error.h"
#include "lqconic/quadrature.h"

namespace lqconic {

namespace {

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

Eigen::VectorXd stack(const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
  Eigen::VectorXd z(x.size() + u.size());
  z << x, u;
  return z;
}

void require_same_grid(const TimeGrid& a, const TimeGrid& b,
                       const char* where) {
  if (!(a == b)) {
    throw Error(ErrorCode::kGridMismatch,
                std::string(where) + ": trajectories live on different grids");
  }
}

}  // namespace

Eigen::MatrixXd Gain::at(double t) const {
  const double s = std::clamp(t / grid.horizon(), 0.0, 1.0) * grid.steps();
  const double nearest = std::round(s);
  if (std::abs(s - nearest) <= 1e-9) {
    return K[static_cast<std::size_t>(nearest)];
  }
  const int k = std::min(static_cast<int>(std::floor(s)), grid.steps() - 1);
  const double w = s - k;
  const auto k0 = static_cast<std::size_t>(k);
  if (Kdot.empty()) return (1.0 - w) * K[k0] + w * K[k0 + 1];
  const double h = grid.h();
  const double w2 = w * w;
  const double w3 = w2 * w;
  return (2 * w3 - 3 * w2 + 1) * K[k0] + (w3 - 2 * w2 + w) * h * Kdot[k0] +
         (-2 * w3 + 3 * w2) * K[k0 + 1] + (w3 - w2) * h * Kdot[k0 + 1];
}

Gain zero_gain(const TimeGrid& grid, int m, int n) {
  const std::vector<Eigen::MatrixXd> zeros(static_cast<std::size_t>(grid.size()),
                                           Eigen::MatrixXd::Zero(m, n));
  return Gain{grid, zeros, zeros};
}

namespace {

// Centered difference over [t − h/2, t + h/2] ∩ [0, T].
template <typename F>
Eigen::MatrixXd centered_rate(const F& f, double t, double h, double T) {
  const double lo = std::max(0.0, t - h / 2);
  const double hi = std::min(T, t + h / 2);
  return (f(hi) - f(lo)) / (hi - lo);
}

}  // namespace

Gain gain_from_dual(const MatTrajectory& lambda_bar, const StateSpace& sys,
                    const QuadForm& qf) {
  if (!lambda_bar.complete()) {
    throw Error(ErrorCode::kGridMismatch,
                "gain_from_dual: Λ̄ does not cover the horizon");
  }
  const TimeGrid& grid = lambda_bar.grid();
  const double h = grid.h();
  const double T = grid.horizon();
  auto Bf = [&](double t) { return sys.B.at(t); };
  auto Nf = [&](double t) { return qf.N(t); };
  auto Rf = [&](double t) { return qf.R(t); };

  Gain g{grid, {}, {}};
  g.K.reserve(static_cast<std::size_t>(grid.size()));
  g.Kdot.reserve(static_cast<std::size_t>(grid.size()));
  for (int k = 0; k < grid.size(); ++k) {
    const double t = grid.node(k);
    const Eigen::MatrixXd& L = lambda_bar[k].matrix();
    const Eigen::MatrixXd B = sys.B.at(t);
    const Eigen::LLT<Eigen::MatrixXd> R(qf.R(t));
    const Eigen::MatrixXd K =
        R.solve(Eigen::MatrixXd(qf.N(t).transpose() + B.transpose() * L));
    // K̇ = R⁻¹(Ṅᵀ + ḂᵀΛ + BᵀΛ̇ − ṘK); data rates vanish for constant data.
    Eigen::MatrixXd rate =
        B.transpose() * dre_derivative(lambda_bar[k], sys, qf, t).matrix();
    if (!sys.B.is_constant()) {
      rate += centered_rate(Bf, t, h, T).transpose() * L;
    }
    if (!qf.is_constant()) {
      rate += centered_rate(Nf, t, h, T).transpose() -
              centered_rate(Rf, t, h, T) * K;
    }
    g.K.push_back(K);
    g.Kdot.push_back(R.solve(rate));
  }
  return g;
}

Signals closed_loop_simulate(const StateSpace& sys, const Gain& gain,
                             const Eigen::VectorXd& x0, const TimeGrid& grid) {
  if (x0.size() != sys.n() || gain.n() != sys.n() || gain.m() != sys.m()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "closed_loop_simulate: gain or x0 does not match the system");
  }
  auto f = [&](double t, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return (sys.A.at(t) - sys.B.at(t) * gain.at(t)) * x;
  };
  const double h = grid.h();
  Signals s{grid, {}, {}};
  s.x.reserve(static_cast<std::size_t>(grid.size()));
  s.u.reserve(static_cast<std::size_t>(grid.size()));
  Eigen::VectorXd x = x0;
  for (int k = 0; k <= grid.steps(); ++k) {
    const double t = grid.node(k);
    s.x.push_back(x);
    s.u.push_back(-gain.at(t) * x);
    if (k == grid.steps()) break;
    const Eigen::VectorXd k1 = f(t, x);
    const Eigen::VectorXd k2 = f(t + h / 2, x + h / 2 * k1);
    const Eigen::VectorXd k3 = f(t + h / 2, x + h / 2 * k2);
    const Eigen::VectorXd k4 = f(t + h, x + h * k3);
    x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return s;
}

CovTrajectory deterministic_covariance(const Signals& s) {
  std::vector<SymMat> sigma;
  sigma.reserve(s.x.size());
  for (std::size_t k = 0; k < s.x.size(); ++k) {
    sigma.push_back(SymMat::Outer(stack(s.x[k], s.u[k])));
  }
  return {MatTrajectory(s.grid, std::move(sigma), "sigma"),
          CovKind::kDeterministic};
}

CovTrajectory stochastic_covariance(const StateSpace& sys, const Gain& gain,
                                    const MatrixFunction& W, const SymMat& Xi,
                                    const TimeGrid& grid) {
  const int n = sys.n();
  if (Xi.dim() != n || W.rows() != n || W.cols() != n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "stochastic_covariance: Xi or W does not match the system");
  }
  auto f = [&](double t, const Eigen::MatrixXd& P) -> Eigen::MatrixXd {
    const Eigen::MatrixXd F = sys.A.at(t) - sys.B.at(t) * gain.at(t);
    const Eigen::MatrixXd FP = F * P;
    return FP + FP.transpose() + W.at(t);
  };
  const double h = grid.h();
  std::vector<SymMat> sigma;
  sigma.reserve(static_cast<std::size_t>(grid.size()));
  Eigen::MatrixXd P = Xi.matrix();
  for (int k = 0; k <= grid.steps(); ++k) {
    const double t = grid.node(k);
    const Eigen::MatrixXd K = gain.at(t);
    const int m = static_cast<int>(K.rows());
    Eigen::MatrixXd S(n + m, n + m);
    S.topLeftCorner(n, n) = P;
    S.topRightCorner(n, m) = -P * K.transpose();
    S.bottomLeftCorner(m, n) = -K * P;
    S.bottomRightCorner(m, m) = K * P * K.transpose();
    sigma.push_back(SymMat(S));
    if (k == grid.steps()) break;
    const Eigen::MatrixXd k1 = f(t, P);
    const Eigen::MatrixXd k2 = f(t + h / 2, P + h / 2 * k1);
    const Eigen::MatrixXd k3 = f(t + h / 2, P + h / 2 * k2);
    const Eigen::MatrixXd k4 = f(t + h, P + h * k3);
    P += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    P = (0.5 * (P + P.transpose())).eval();
  }
  return {MatTrajectory(grid, std::move(sigma), "sigma"), CovKind::kStochastic};
}

double primal_objective(const CovTrajectory& cov, const QuadForm& qf) {
  const MatTrajectory& s = cov.sigma;
  if (s.dim() != qf.nq()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "primal_objective: Σ and 𝒬 differ in size");
  }
  std::vector<double> f;
  f.reserve(static_cast<std::size_t>(s.size()));
  for (int k = 0; k < s.size(); ++k) {
    f.push_back(trace_inner(qf.at(s.grid().node(k)), s[k]));
  }
  return integrate_samples(f, s.grid().h());
}

double descriptor_residual(const CovTrajectory& cov, const StateSpace& sys,
                           const std::optional<MatrixFunction>& W) {
  const MatTrajectory& s = cov.sigma;
  const int n = sys.n();
  const double h = s.grid().h();
  double worst = 0.0;
  for (int k = 1; k + 1 < s.size(); ++k) {
    const double t = s.grid().node(k);
    const SymMat dot((s[k + 1].matrix() - s[k - 1].matrix()) / (2.0 * h));
    Eigen::MatrixXd r =
        apply_E(dot, n).matrix() - apply_Aop(s[k], sys, t).matrix();
    if (W) r -= W->at(t);
    worst = std::max(worst, max_abs(r));
  }
  return worst;
}

double alignment_residual(const CovTrajectory& cov,
                          const MatTrajectory& lambda_bar,
                          const StateSpace& sys, const QuadForm& qf,
                          DerivativeSource source) {
  require_same_grid(cov.sigma.grid(), lambda_bar.grid(), "alignment_residual");
  if (!lambda_bar.complete()) {
    throw Error(ErrorCode::kGridMismatch,
                "alignment_residual: Λ̄ does not cover the horizon");
  }
  const std::vector<SymMat> d = lambda_derivative(lambda_bar, sys, qf, source);
  std::vector<double> f;
  f.reserve(static_cast<std::size_t>(lambda_bar.size()));
  for (int k = 0; k < lambda_bar.size(); ++k) {
    const double t = lambda_bar.grid().node(k);
    const SymMat M =
        assemble_M(lambda_bar[k], d[static_cast<std::size_t>(k)], sys, qf, t);
    f.push_back(trace_inner(M, cov.sigma[k]));
  }
  return integrate_samples(f, lambda_bar.grid().h());
}

Eigen::VectorXd extract_rank_one_factor(
    const SymMat& sigma, double tol,
    const std::optional<Eigen::VectorXd>& previous) {
  const int rank = eps_rank(sigma, tol);
  if (rank > 1) {
    throw Error(ErrorCode::kRankTooHigh,
                "extract_rank_one_factor: Σ has numerical rank " +
                    std::to_string(rank));
  }
  if (rank == 0) return Eigen::VectorXd::Zero(sigma.dim());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma.matrix());
  const int top = sigma.dim() - 1;
  Eigen::VectorXd z =
      std::sqrt(std::max(es.eigenvalues()(top), 0.0)) * es.eigenvectors().col(top);

  if (previous && previous->size() == z.size() && previous->norm() > 0.0) {
    if (z.dot(*previous) < 0.0) z = -z;
    return z;
  }
  const double floor = tol * std::max(1.0, z.cwiseAbs().maxCoeff());
  for (int i = 0; i < z.size(); ++i) {
    if (std::abs(z(i)) > floor) {
      if (z(i) < 0.0) z = -z;
      break;
    }
  }
  return z;
}

MonteCarloResult monte_carlo_cost(const StateSpace& sys, const Gain& gain,
                                  const QuadForm& qf, const MatrixFunction& W,
                                  const SymMat& Xi, const TimeGrid& grid,
                                  const MonteCarloOptions& options) {
  const int n = sys.n();
  const int steps = grid.steps();
  const double h = grid.h();
  if (options.paths < 2) {
    throw Error(ErrorCode::kValidation, "monte_carlo_cost: need ≥ 2 paths");
  }

  // Per-node data shared by all paths.
  std::vector<Eigen::MatrixXd> F(static_cast<std::size_t>(steps));
  std::vector<Eigen::MatrixXd> noise(static_cast<std::size_t>(steps));
  std::vector<Eigen::MatrixXd> K(static_cast<std::size_t>(grid.size()));
  std::vector<SymMat> Qk(static_cast<std::size_t>(grid.size()));
  for (int k = 0; k <= steps; ++k) {
    const double t = grid.node(k);
    K[static_cast<std::size_t>(k)] = gain.at(t);
    Qk[static_cast<std::size_t>(k)] = qf.at(t);
    if (k == steps) break;
    F[static_cast<std::size_t>(k)] =
        sys.A.at(t) - sys.B.at(t) * K[static_cast<std::size_t>(k)];
    noise[static_cast<std::size_t>(k)] =
        std::sqrt(h) * sym_factor(SymMat::SymmetricPart(W.at(t))).U;
  }
  const Eigen::MatrixXd x0_factor = sym_factor(Xi).U;

  CompensatedSum sum;
  CompensatedSum sum_sq;
  std::vector<double> integrand(static_cast<std::size_t>(grid.size()));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int path = 0; path < options.paths; ++path) {
    std::seed_seq seq{static_cast<std::uint32_t>(options.seed),
                      static_cast<std::uint32_t>(options.seed >> 32),
                      static_cast<std::uint32_t>(path)};
    std::mt19937_64 rng(seq);
    normal.reset();
    auto draw = [&](int k) {
      Eigen::VectorXd xi(k);
      for (int i = 0; i < k; ++i) xi(i) = normal(rng);
      return xi;
    };

    Eigen::VectorXd x = options.fixed_x0
                            ? *options.fixed_x0
                            : Eigen::VectorXd(x0_factor * draw(static_cast<int>(
                                                               x0_factor.cols())));
    if (x.size() != n) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "monte_carlo_cost: initial state size");
    }
    for (int k = 0; k <= steps; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const Eigen::VectorXd z = stack(x, -K[ks] * x);
      integrand[ks] = z.dot(Qk[ks].matrix() * z);
      if (k == steps) break;
      Eigen::VectorXd next = x + h * (F[ks] * x);
      if (noise[ks].cols() > 0) {
        next += noise[ks] * draw(static_cast<int>(noise[ks].cols()));
      }
      x = std::move(next);
    }
    const double cost = integrate_samples(integrand, h);
    sum.add(cost);
    sum_sq.add(cost * cost);
  }

  const double count = options.paths;
  const double mean = sum.value() / count;
  const double var =
      std::max(0.0, (sum_sq.value() - count * mean * mean) / (count - 1.0));
  return {mean, std::sqrt(var / count), options.paths};
}

}  // namespace lqconic
