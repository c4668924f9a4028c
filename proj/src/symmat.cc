#include "lqconic/symmat.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lqconic/error.h"

namespace lqconic {

namespace {

void require_same_dim(const SymMat& a, const SymMat& b, const char* what) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(what) + ": dimension " + std::to_string(a.dim()) +
                    " vs " + std::to_string(b.dim()));
  }
}

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> decompose(const SymMat& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m.matrix());
}

}  // namespace

SymMat::SymMat() : m_(Eigen::MatrixXd::Zero(1, 1)) {}

SymMat::SymMat(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw Error(ErrorCode::kDimensionMismatch,
                "SymMat requires a non-empty square matrix, got " +
                    std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  m_ = m.triangularView<Eigen::Upper>();
  m_.triangularView<Eigen::StrictlyLower>() =
      m_.transpose().triangularView<Eigen::StrictlyLower>();
}

SymMat SymMat::Zero(int n) { return SymMat(Eigen::MatrixXd::Zero(n, n)); }

SymMat SymMat::Identity(int n) {
  return SymMat(Eigen::MatrixXd::Identity(n, n));
}

SymMat SymMat::Diagonal(const Eigen::VectorXd& d) {
  return SymMat(Eigen::MatrixXd(d.asDiagonal()));
}

SymMat SymMat::Outer(const Eigen::VectorXd& z) {
  return SymMat(z * z.transpose());
}

SymMat SymMat::SymmetricPart(const Eigen::MatrixXd& m) {
  return SymMat(0.5 * (m + m.transpose()));
}

SymMat SymMat::operator+(const SymMat& other) const {
  require_same_dim(*this, other, "SymMat +");
  return SymMat(m_ + other.m_);
}

SymMat SymMat::operator-(const SymMat& other) const {
  require_same_dim(*this, other, "SymMat -");
  return SymMat(m_ - other.m_);
}

SymMat SymMat::operator-() const { return SymMat(-m_); }

SymMat SymMat::operator*(double s) const { return SymMat(s * m_); }

double max_abs(const SymMat& m) { return max_abs(m.matrix()); }

double max_abs(const Eigen::MatrixXd& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

Eigen::VectorXd eigenvalues(const SymMat& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
             m.matrix(), Eigen::EigenvaluesOnly)
      .eigenvalues();
}

double min_eig(const SymMat& m) { return eigenvalues(m).minCoeff(); }

double max_eig(const SymMat& m) { return eigenvalues(m).maxCoeff(); }

double relative_threshold(const SymMat& m, double tol) {
  return tol * std::max(1.0, max_abs(m));
}

bool is_psd(const SymMat& m, double tol) {
  return min_eig(m) >= -relative_threshold(m, tol);
}

double trace_inner(const SymMat& h, const SymMat& m) {
  require_same_dim(h, m, "trace_inner");
  // tr(h·m) = Σᵢⱼ hᵢⱼ mᵢⱼ for symmetric arguments.
  return h.matrix().cwiseProduct(m.matrix()).sum();
}

double nuclear_norm(const SymMat& m) {
  return eigenvalues(m).cwiseAbs().sum();
}

double sigma_max_norm(const SymMat& m) {
  return eigenvalues(m).cwiseAbs().maxCoeff();
}

SymMat trace_duality_maximizer(const SymMat& h) {
  if (max_abs(h) == 0.0) {
    throw Error(ErrorCode::kZeroInput, "trace_duality_maximizer: h = 0");
  }
  const auto es = decompose(h);
  Eigen::Index top = 0;
  es.eigenvalues().cwiseAbs().maxCoeff(&top);
  const double sign = es.eigenvalues()(top) < 0.0 ? -1.0 : 1.0;
  const Eigen::VectorXd v = es.eigenvectors().col(top);
  return SymMat(sign * v * v.transpose());
}

SymFactor sym_factor(const SymMat& m, double tol) {
  const auto es = decompose(m);
  const double threshold = relative_threshold(m, tol);
  const Eigen::VectorXd& lambda = es.eigenvalues();
  if (lambda.minCoeff() < -threshold) {
    throw Error(ErrorCode::kNotPsd,
                "sym_factor: eigenvalue " + std::to_string(lambda.minCoeff()) +
                    " below -" + std::to_string(threshold));
  }
  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = lambda.size() - 1; i >= 0; --i) {
    if (lambda(i) > threshold) kept.push_back(i);
  }
  SymFactor f;
  f.U.resize(m.dim(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t c = 0; c < kept.size(); ++c) {
    f.U.col(static_cast<Eigen::Index>(c)) =
        std::sqrt(lambda(kept[c])) * es.eigenvectors().col(kept[c]);
  }
  return f;
}

int eps_rank(const SymMat& m, double tol) {
  const double threshold = relative_threshold(m, tol);
  return static_cast<int>(
      (eigenvalues(m).cwiseAbs().array() > threshold).count());
}

SymMat spd_sqrt(const SymMat& m) {
  const auto es = decompose(m);
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw Error(ErrorCode::kRNotPd, "spd_sqrt: matrix is not positive definite");
  }
  return SymMat(es.eigenvectors() *
                es.eigenvalues().cwiseSqrt().asDiagonal() *
                es.eigenvectors().transpose());
}

SymMat spd_inv_sqrt(const SymMat& m) {
  const auto es = decompose(m);
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw Error(ErrorCode::kRNotPd,
                "spd_inv_sqrt: matrix is not positive definite");
  }
  return SymMat(es.eigenvectors() *
                es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                es.eigenvectors().transpose());
}

SchurVerdict schur_psd_test(const SymMat& m11, const Eigen::MatrixXd& m12,
                            const SymMat& m22, double tol) {
  if (m12.rows() != m11.dim() || m12.cols() != m22.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "schur_psd_test: off-diagonal block has wrong shape");
  }
  if (min_eig(m22) <= tol) {
    throw Error(ErrorCode::kM22NotPd,
                "schur_psd_test: lower-right block is not positive definite");
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(m22.matrix());
  SchurVerdict v;
  v.complement =
      SymMat(m11.matrix() - m12 * ldlt.solve(Eigen::MatrixXd(m12.transpose())));
  v.complement_min_eig = min_eig(v.complement);
  v.psd = v.complement_min_eig >= -relative_threshold(v.complement, tol);
  return v;
}

OrthogonalityReport orthogonality_certificate(const SymMat& m1,
                                              const SymMat& m2, double tol) {
  require_same_dim(m1, m2, "orthogonality_certificate");
  const SymFactor f1 = sym_factor(m1, tol);
  const SymFactor f2 = sym_factor(m2, tol);

  OrthogonalityReport r;
  r.dim = m1.dim();
  r.inner = trace_inner(m1, m2);
  const double scale = std::max(1.0, max_abs(m1) * max_abs(m2));
  r.orthogonal = r.inner <= tol * scale;
  if (!r.orthogonal) return r;

  // ‖U1ᵀU2‖_F² = tr(m1·m2), so every entry is bounded by √inner.
  r.cross_max = (f1.width() == 0 || f2.width() == 0)
                    ? 0.0
                    : max_abs(Eigen::MatrixXd(f1.U.transpose() * f2.U));
  r.cross_bound = std::sqrt(std::max(r.inner, 0.0)) +
                  std::sqrt(tol) * std::max(1.0, std::sqrt(scale));
  r.cross_ok = r.cross_max <= r.cross_bound;
  r.rank1 = eps_rank(m1, tol);
  r.rank2 = eps_rank(m2, tol);
  r.rank_ok = r.rank1 + r.rank2 <= r.dim;
  return r;
}

}  // namespace lqconic
