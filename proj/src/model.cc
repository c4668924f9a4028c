#include "lqconic/model.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "lqconic/error.h"

namespace lqconic {

TimeGrid::TimeGrid(double T, int steps) : T_(T), steps_(steps) {
  if (!(T > 0.0) || !std::isfinite(T) || steps < 1) {
    throw Error(ErrorCode::kBadHorizon,
                "TimeGrid requires T > 0 and steps >= 1, got T=" +
                    std::to_string(T) + " steps=" + std::to_string(steps));
  }
}

MatrixFunction::MatrixFunction(Eigen::MatrixXd constant)
    : constant_(std::move(constant)) {}

MatrixFunction MatrixFunction::Sampled(double T,
                                       std::vector<Eigen::MatrixXd> samples) {
  if (samples.size() < 2 || !(T > 0.0)) {
    throw Error(ErrorCode::kBadHorizon,
                "sampled matrix function needs T > 0 and at least 2 samples");
  }
  for (const auto& s : samples) {
    if (s.rows() != samples.front().rows() ||
        s.cols() != samples.front().cols()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "sampled matrix function has samples of differing shape");
    }
  }
  MatrixFunction f;
  f.samples_ = std::move(samples);
  f.T_ = T;
  return f;
}

Eigen::Index MatrixFunction::rows() const {
  return is_constant() ? constant_.rows() : samples_.front().rows();
}

Eigen::Index MatrixFunction::cols() const {
  return is_constant() ? constant_.cols() : samples_.front().cols();
}

Eigen::MatrixXd MatrixFunction::at(double t) const {
  if (is_constant()) return constant_;
  const int steps = static_cast<int>(samples_.size()) - 1;
  const double s = std::clamp(t / T_, 0.0, 1.0) * steps;
  const double nearest = std::round(s);
  if (std::abs(s - nearest) <= 1e-9) {
    return samples_[static_cast<std::size_t>(nearest)];
  }
  const int k = std::min(static_cast<int>(std::floor(s)), steps - 1);
  const double w = s - k;
  const auto uk = static_cast<std::size_t>(k);
  return (1.0 - w) * samples_[uk] + w * samples_[uk + 1];
}

std::string_view variant_name(const ProblemVariant& v) {
  struct Namer {
    std::string_view operator()(const LqrProblem&) const { return "lqr"; }
    std::string_view operator()(const StochLqrProblem&) const {
      return "slqr";
    }
    std::string_view operator()(const BoundedRealProblem&) const {
      return "bounded_real";
    }
    std::string_view operator()(const PositiveRealProblem&) const {
      return "positive_real";
    }
    std::string_view operator()(const GeneralIqcProblem&) const {
      return "iqc";
    }
  };
  return std::visit(Namer{}, v);
}

QuadForm::QuadForm(int n, int m, MatrixFunction q)
    : n_(n), m_(m), q_(std::move(q)) {
  if (q_.rows() != n + m || q_.cols() != n + m) {
    throw Error(ErrorCode::kDimensionMismatch,
                "QuadForm: matrix is not (n+m)x(n+m)");
  }
}

SymMat QuadForm::at(double t) const { return SymMat(q_.at(t)); }

Eigen::MatrixXd QuadForm::Q(double t) const {
  return at(t).matrix().topLeftCorner(n_, n_);
}

Eigen::MatrixXd QuadForm::N(double t) const {
  return at(t).matrix().topRightCorner(n_, m_);
}

Eigen::MatrixXd QuadForm::R(double t) const {
  return at(t).matrix().bottomRightCorner(m_, m_);
}

namespace {

class ViolationList {
 public:
  void add(ErrorCode code, std::string field, std::string message) {
    list_.push_back({code, std::move(field), std::move(message)});
  }
  bool empty() const { return list_.empty(); }
  std::vector<Violation> take() { return std::move(list_); }

 private:
  std::vector<Violation> list_;
};

std::string shape(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

// Every sample (or the constant) of a matrix function, for per-node checks.
std::vector<Eigen::MatrixXd> all_values(const MatrixFunction& f) {
  if (f.is_constant()) return {f.constant()};
  return f.samples();
}

void check_function(const MatrixFunction& f, const std::string& field,
                    Eigen::Index rows, Eigen::Index cols, const TimeGrid& grid,
                    ViolationList& out) {
  if (f.rows() != rows || f.cols() != cols) {
    out.add(ErrorCode::kDimensionMismatch, field,
            "expected " + shape(rows, cols) + ", got " +
                shape(f.rows(), f.cols()));
    return;
  }
  if (!f.is_constant()) {
    if (static_cast<int>(f.samples().size()) != grid.size() ||
        f.sample_horizon() != grid.horizon()) {
      out.add(ErrorCode::kDimensionMismatch, field,
              "sampled data must have steps+1 = " +
                  std::to_string(grid.size()) + " samples over [0, T]");
    }
  }
  for (const auto& v : all_values(f)) {
    if (!v.allFinite()) {
      out.add(ErrorCode::kNonFinite, field, "non-finite entry");
      return;
    }
  }
}

bool symmetric(const Eigen::MatrixXd& m, double tol) {
  return max_abs(Eigen::MatrixXd(m - m.transpose())) <=
         tol * std::max(1.0, max_abs(m));
}

bool strictly_pd(const Eigen::MatrixXd& m, double tol) {
  const SymMat s = SymMat::SymmetricPart(m);
  return min_eig(s) > relative_threshold(s, tol);
}

void check_cost(const CostData& cost, int n, int m, bool q_psd, double tol,
                ViolationList& out) {
  if (cost.Q.rows() != n || cost.Q.cols() != n) {
    out.add(ErrorCode::kDimensionMismatch, "variant.Q",
            "expected " + shape(n, n) + ", got " +
                shape(cost.Q.rows(), cost.Q.cols()));
  } else if (!cost.Q.allFinite()) {
    out.add(ErrorCode::kNonFinite, "variant.Q", "non-finite entry");
  } else if (!symmetric(cost.Q, tol)) {
    out.add(ErrorCode::kDimensionMismatch, "variant.Q", "Q is not symmetric");
  } else if (q_psd && !is_psd(SymMat(cost.Q), tol)) {
    out.add(ErrorCode::kQNotPsd, "variant.Q",
            "Q must be positive semidefinite, min eigenvalue " +
                std::to_string(min_eig(SymMat(cost.Q))));
  }
  if (cost.N.size() != 0 && (cost.N.rows() != n || cost.N.cols() != m)) {
    out.add(ErrorCode::kDimensionMismatch, "variant.N",
            "expected " + shape(n, m) + ", got " +
                shape(cost.N.rows(), cost.N.cols()));
  } else if (!cost.N.allFinite()) {
    out.add(ErrorCode::kNonFinite, "variant.N", "non-finite entry");
  }
  if (cost.R.rows() != m || cost.R.cols() != m) {
    out.add(ErrorCode::kDimensionMismatch, "variant.R",
            "expected " + shape(m, m) + ", got " +
                shape(cost.R.rows(), cost.R.cols()));
  } else if (!cost.R.allFinite()) {
    out.add(ErrorCode::kNonFinite, "variant.R", "non-finite entry");
  } else if (!symmetric(cost.R, tol)) {
    out.add(ErrorCode::kDimensionMismatch, "variant.R", "R is not symmetric");
  } else if (!strictly_pd(cost.R, tol)) {
    out.add(ErrorCode::kRNotPd, "variant.R",
            "R must be strictly positive definite");
  }
}

void check_x0(const Eigen::VectorXd& x0, int n, ViolationList& out) {
  if (x0.size() != n) {
    out.add(ErrorCode::kDimensionMismatch, "variant.x0",
            "expected length " + std::to_string(n) + ", got " +
                std::to_string(x0.size()));
  } else if (!x0.allFinite()) {
    out.add(ErrorCode::kNonFinite, "variant.x0", "non-finite entry");
  }
}

Eigen::MatrixXd full_n(const Eigen::MatrixXd& N, int n, int m) {
  return N.size() == 0 ? Eigen::MatrixXd::Zero(n, m) : N;
}

Eigen::MatrixXd block_form(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& N,
                           const Eigen::MatrixXd& R) {
  const auto n = Q.rows();
  const auto m = R.rows();
  Eigen::MatrixXd q(n + m, n + m);
  q.topLeftCorner(n, n) = Q;
  q.topRightCorner(n, m) = N;
  q.bottomLeftCorner(m, n) = N.transpose();
  q.bottomRightCorner(m, m) = R;
  return q;
}

// Evaluates `make` on the nodes of whichever input is sampled, or once if all
// inputs are constant.
template <typename Make>
MatrixFunction derived(std::initializer_list<const MatrixFunction*> inputs,
                       Make make) {
  const MatrixFunction* sampled = nullptr;
  for (const auto* f : inputs) {
    if (!f->is_constant()) sampled = f;
  }
  if (sampled == nullptr) return MatrixFunction(make(0.0));
  const double T = sampled->sample_horizon();
  const int steps = static_cast<int>(sampled->samples().size()) - 1;
  std::vector<Eigen::MatrixXd> samples;
  samples.reserve(static_cast<std::size_t>(steps + 1));
  for (int k = 0; k <= steps; ++k) samples.push_back(make(T * k / steps));
  return MatrixFunction::Sampled(T, std::move(samples));
}

Eigen::MatrixXd output_matrix(const StateSpace& sys, double t) {
  if (sys.C.rows() == 0) return Eigen::MatrixXd::Zero(0, sys.n());
  return sys.C.at(t);
}

Eigen::MatrixXd feedthrough(const StateSpace& sys, double t) {
  if (sys.D.rows() == 0 && sys.D.cols() == 0) {
    return Eigen::MatrixXd::Zero(sys.p(), sys.m());
  }
  return sys.D.at(t);
}

}  // namespace

void validate(const ProblemSpec& spec, double tol) {
  ViolationList out;
  const StateSpace& sys = spec.sys;
  const int n = sys.n();
  const int m = sys.m();
  if (n < 1) out.add(ErrorCode::kDimensionMismatch, "system.A", "empty A");
  if (m < 1) out.add(ErrorCode::kDimensionMismatch, "system.B", "empty B");
  if (!out.empty()) throw ValidationError(out.take());

  check_function(sys.A, "system.A", n, n, spec.grid, out);
  check_function(sys.B, "system.B", n, m, spec.grid, out);
  const int p = sys.C.rows() == 0 ? 0 : sys.p();
  if (p > 0) check_function(sys.C, "system.C", p, n, spec.grid, out);
  if (sys.D.rows() != 0 || sys.D.cols() != 0) {
    check_function(sys.D, "system.D", p, m, spec.grid, out);
  }

  struct Checker {
    const ProblemSpec& spec;
    int n, m, p;
    double tol;
    ViolationList& out;

    void operator()(const LqrProblem& v) const {
      check_cost(v.cost, n, m, /*q_psd=*/true, tol, out);
      check_x0(v.x0, n, out);
    }
    void operator()(const StochLqrProblem& v) const {
      check_cost(v.cost, n, m, /*q_psd=*/true, tol, out);
      if (v.Xi.dim() != n) {
        out.add(ErrorCode::kDimensionMismatch, "variant.Xi",
                "expected " + shape(n, n));
      } else if (!v.Xi.all_finite()) {
        out.add(ErrorCode::kNonFinite, "variant.Xi", "non-finite entry");
      } else if (!is_psd(v.Xi, tol)) {
        out.add(ErrorCode::kXiNotPsd, "variant.Xi",
                "initial covariance must be positive semidefinite");
      }
      check_function(v.W, "variant.W", n, n, spec.grid, out);
      if (v.W.rows() == n && v.W.cols() == n) {
        for (const auto& w : all_values(v.W)) {
          if (w.allFinite() && !is_psd(SymMat::SymmetricPart(w), tol)) {
            out.add(ErrorCode::kWNotPsd, "variant.W",
                    "noise intensity must be positive semidefinite");
            break;
          }
        }
      }
    }
    void operator()(const BoundedRealProblem& v) const {
      if (!(v.gamma > 0.0) || !std::isfinite(v.gamma)) {
        out.add(ErrorCode::kGammaNotPositive, "variant.gamma",
                "gamma must be a positive finite number, got " +
                    std::to_string(v.gamma));
      }
    }
    void operator()(const PositiveRealProblem&) const {
      if (p != m) {
        out.add(ErrorCode::kDimensionMismatch, "system.C",
                "passivity needs as many outputs as inputs (p=" +
                    std::to_string(p) + ", m=" + std::to_string(m) + ")");
        return;
      }
      if (spec.sys.D.rows() != p || spec.sys.D.cols() != m) {
        out.add(ErrorCode::kDNotStrictlyPassive, "system.D",
                "passivity requires D with D+Dᵀ positive definite");
        return;
      }
      for (const auto& d : all_values(spec.sys.D)) {
        if (d.allFinite() && !strictly_pd(d + d.transpose(), tol)) {
          out.add(ErrorCode::kDNotStrictlyPassive, "system.D",
                  "D+Dᵀ must be strictly positive definite");
          break;
        }
      }
    }
    void operator()(const GeneralIqcProblem& v) const {
      check_cost(v.cost, n, m, /*q_psd=*/false, tol, out);
      check_x0(v.x0, n, out);
    }
  };
  std::visit(Checker{spec, n, m, p, tol, out}, spec.variant);
  if (!out.empty()) throw ValidationError(out.take());
}

QuadForm quadform_from_cost(const CostData& cost, double tol) {
  const auto n = static_cast<int>(cost.Q.rows());
  const auto m = static_cast<int>(cost.R.rows());
  const Eigen::MatrixXd N = full_n(cost.N, n, m);
  if (cost.Q.cols() != n || N.rows() != n || N.cols() != m ||
      cost.R.cols() != m) {
    throw Error(ErrorCode::kDimensionMismatch,
                "cost blocks have inconsistent shapes");
  }
  if (m < 1 || !strictly_pd(cost.R, tol)) {
    throw Error(ErrorCode::kRNotPd, "R must be strictly positive definite");
  }
  return QuadForm(n, m, MatrixFunction(block_form(cost.Q, N, cost.R)));
}

QuadForm assemble_quadform(const ProblemSpec& spec, double tol) {
  const StateSpace& sys = spec.sys;
  const int n = sys.n();
  const int m = sys.m();
  struct Assembler {
    const StateSpace& sys;
    int n, m;
    double tol;

    QuadForm operator()(const LqrProblem& v) const {
      return quadform_from_cost(v.cost, tol);
    }
    QuadForm operator()(const StochLqrProblem& v) const {
      return quadform_from_cost(v.cost, tol);
    }
    QuadForm operator()(const GeneralIqcProblem& v) const {
      return quadform_from_cost(v.cost, tol);
    }
    QuadForm operator()(const BoundedRealProblem& v) const {
      if (!(v.gamma > 0.0)) {
        throw Error(ErrorCode::kRNotPd, "gamma^2 I is not positive definite");
      }
      const double g2 = v.gamma * v.gamma;
      return QuadForm(n, m, derived({&sys.C}, [&](double t) {
                        const Eigen::MatrixXd C = output_matrix(sys, t);
                        return block_form(-C.transpose() * C,
                                          Eigen::MatrixXd::Zero(n, m),
                                          g2 * Eigen::MatrixXd::Identity(m, m));
                      }));
    }
    QuadForm operator()(const PositiveRealProblem&) const {
      auto make = [&](double t) {
        const Eigen::MatrixXd C = output_matrix(sys, t);
        const Eigen::MatrixXd D = feedthrough(sys, t);
        if (C.rows() != m || D.rows() != m || D.cols() != m) {
          throw Error(ErrorCode::kDimensionMismatch,
                      "passivity needs square D and p = m");
        }
        const Eigen::MatrixXd R = 0.5 * (D + D.transpose());
        if (!strictly_pd(R, tol)) {
          throw Error(ErrorCode::kRNotPd, "D+Dᵀ is not positive definite");
        }
        return block_form(Eigen::MatrixXd::Zero(n, n),
                          0.5 * C.transpose(), R);
      };
      return QuadForm(n, m, derived({&sys.C, &sys.D}, make));
    }
  };
  return std::visit(Assembler{sys, n, m, tol}, spec.variant);
}

namespace {

void require_dim(const SymMat& s, int expected, const char* what) {
  if (s.dim() != expected) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(what) + ": expected dimension " +
                    std::to_string(expected) + ", got " +
                    std::to_string(s.dim()));
  }
}

}  // namespace

SymMat apply_E(const SymMat& s, int n) {
  if (n < 1 || s.dim() < n) {
    throw Error(ErrorCode::kDimensionMismatch, "apply_E: bad dimension");
  }
  return SymMat(Eigen::MatrixXd(s.matrix().topLeftCorner(n, n)));
}

SymMat apply_Aop(const SymMat& s, const StateSpace& sys, double t) {
  const int n = sys.n();
  require_dim(s, n + sys.m(), "apply_Aop");
  Eigen::MatrixXd ab(n, n + sys.m());
  ab << sys.A.at(t), sys.B.at(t);
  // [A B]·S·[I;0] is the first n columns of [A B]·S.
  const Eigen::MatrixXd half = (ab * s.matrix()).leftCols(n);
  return SymMat(Eigen::MatrixXd(half + half.transpose()));
}

SymMat apply_E_adj(const SymMat& y, int m) {
  const int n = y.dim();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n + m, n + m);
  out.topLeftCorner(n, n) = y.matrix();
  return SymMat(out);
}

SymMat apply_A_adj(const SymMat& y, const StateSpace& sys, double t) {
  const int n = sys.n();
  const int m = sys.m();
  require_dim(y, n, "apply_A_adj");
  Eigen::MatrixXd ab(n, n + m);
  ab << sys.A.at(t), sys.B.at(t);
  // [I;0]·Y·[A B] occupies the first n rows.
  Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(n + m, n + m);
  lower.topRows(n) = y.matrix() * ab;
  return SymMat(Eigen::MatrixXd(lower + lower.transpose()));
}

}  // namespace lqconic
