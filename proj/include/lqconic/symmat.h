#pragma once

/// @file
/// Dense symmetric matrices and positive-cone utilities: the trace inner
/// product, its dual norm pair (nuclear / max singular value), eigenvalue
/// based factorizations and ranks, Schur-complement PSD tests, and
/// certificates for orthogonal pairs of PSD matrices.

#include <Eigen/Dense>

namespace lqconic {

/// Default relative tolerance for PSD and rank decisions.
inline constexpr double kDefaultTol = 1e-9;

/// A dense n×n real symmetric matrix, n ≥ 1.  Construction mirrors the upper
/// triangle into the lower one, so entries are exactly symmetric afterwards.
class SymMat {
 public:
  /// 1×1 zero.
  SymMat();
  explicit SymMat(const Eigen::MatrixXd& m);

  static SymMat Zero(int n);
  static SymMat Identity(int n);
  static SymMat Diagonal(const Eigen::VectorXd& d);
  /// z·zᵀ
  static SymMat Outer(const Eigen::VectorXd& z);
  /// Symmetric part (m + mᵀ)/2 of an arbitrary square matrix.
  static SymMat SymmetricPart(const Eigen::MatrixXd& m);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXd& matrix() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }
  bool all_finite() const { return m_.allFinite(); }

  SymMat operator+(const SymMat& other) const;
  SymMat operator-(const SymMat& other) const;
  SymMat operator-() const;
  SymMat operator*(double s) const;
  friend SymMat operator*(double s, const SymMat& m) { return m * s; }

 private:
  Eigen::MatrixXd m_;
};

/// Largest absolute entry, ‖m‖_∞ in the entrywise sense used for residuals.
double max_abs(const SymMat& m);
double max_abs(const Eigen::MatrixXd& m);

/// Eigenvalues in ascending order.
Eigen::VectorXd eigenvalues(const SymMat& m);
double min_eig(const SymMat& m);
double max_eig(const SymMat& m);

/// Threshold tol·max(1, ‖m‖_∞) shared by PSD and rank decisions.
double relative_threshold(const SymMat& m, double tol);

/// λ_min(m) ≥ −tol·max(1, ‖m‖_∞).
bool is_psd(const SymMat& m, double tol = kDefaultTol);

/// tr(h·m).
double trace_inner(const SymMat& h, const SymMat& m);

/// Σ|λᵢ|.
double nuclear_norm(const SymMat& m);

/// max|λᵢ|.
double sigma_max_norm(const SymMat& m);

/// Returns m with nuclear_norm(m) = 1 attaining tr(h·m) = sigma_max_norm(h):
/// the outer product of the eigenvector of largest |λ|, signed by λ.
/// Throws kZeroInput when h = 0.
SymMat trace_duality_maximizer(const SymMat& h);

/// m = U·Uᵀ with U of size n×r.
struct SymFactor {
  Eigen::MatrixXd U;

  int dim() const { return static_cast<int>(U.rows()); }
  int width() const { return static_cast<int>(U.cols()); }
  Eigen::MatrixXd reconstruct() const { return U * U.transpose(); }
};

/// Eigendecomposition factor: columns √λᵢ·vᵢ for every λᵢ above the relative
/// threshold.  Throws kNotPsd when some λᵢ is below minus the threshold.
SymFactor sym_factor(const SymMat& m, double tol = kDefaultTol);

/// Number of eigenvalues with |λ| > tol·max(1, ‖m‖_∞).
int eps_rank(const SymMat& m, double tol = kDefaultTol);

/// Symmetric square root and inverse square root of a positive definite
/// matrix.  Throws kRNotPd if m is not strictly positive definite.
SymMat spd_sqrt(const SymMat& m);
SymMat spd_inv_sqrt(const SymMat& m);

struct SchurVerdict {
  bool psd = false;
  double complement_min_eig = 0.0;
  SymMat complement;
};

/// PSD test for [m11 m12; m12ᵀ m22] through the complement
/// m11 − m12·m22⁻¹·m12ᵀ.  Requires λ_min(m22) > tol, else throws kM22NotPd.
SchurVerdict schur_psd_test(const SymMat& m11, const Eigen::MatrixXd& m12,
                            const SymMat& m22, double tol = kDefaultTol);

struct OrthogonalityReport {
  double inner = 0.0;
  /// inner ≤ tol·scale; the remaining checks are only evaluated when true.
  bool orthogonal = false;
  /// max|U1ᵀU2| and the bound √max(inner, 0) it must respect.
  double cross_max = 0.0;
  double cross_bound = 0.0;
  bool cross_ok = true;
  int rank1 = 0;
  int rank2 = 0;
  int dim = 0;
  bool rank_ok = true;
};

/// For PSD m1, m2: if ⟨m1, m2⟩ vanishes then their factors satisfy U1ᵀU2 ≈ 0
/// and rank(m1) + rank(m2) ≤ n.  Throws kNotPsd if either input is not PSD.
OrthogonalityReport orthogonality_certificate(const SymMat& m1,
                                              const SymMat& m2,
                                              double tol = kDefaultTol);

}  // namespace lqconic
