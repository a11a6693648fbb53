#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>

namespace fedgia {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class LossKind { LeastSquares, LogisticL2, LogisticNonconvex };

std::string_view to_string(LossKind kind);
/// Accepts the short CLI names (ls, logl2, lognc) as well as the enum spellings.
LossKind parse_loss_kind(std::string_view name);

struct LossModel {
  LossKind kind = LossKind::LeastSquares;
  double mu = 0.0;

  static LossModel least_squares() { return {LossKind::LeastSquares, 0.0}; }
  static LossModel logistic_l2(double mu = 1e-3) { return {LossKind::LogisticL2, mu}; }
  static LossModel logistic_nonconvex(double mu = 1e-2) {
    return {LossKind::LogisticNonconvex, mu};
  }
  /// Model of the given kind with its default regularization weight.
  static LossModel with_defaults(LossKind kind);

  bool is_logistic() const { return kind != LossKind::LeastSquares; }
};

/// One client's samples. Rows of `features` are the samples a_j. The Gram
/// matrix B = A^T A is formed once at construction and shared by every
/// curvature computation afterwards.
class ClientDataset {
 public:
  ClientDataset(Mat features, Vec labels);

  const Mat& features() const { return features_; }
  const Vec& labels() const { return labels_; }
  const Mat& gram() const { return gram_; }
  Eigen::Index samples() const { return features_.rows(); }
  Eigen::Index dim() const { return features_.cols(); }

 private:
  Mat features_;
  Vec labels_;
  Mat gram_;
};

enum class CurvatureVariant { Gram, Diagonal };

std::string_view to_string(CurvatureVariant variant);

/// PSD curvature matrix H. Gram stores the full n x n matrix, Diagonal stores
/// the scalar c standing for c * I.
struct CurvatureBound {
  CurvatureVariant variant = CurvatureVariant::Diagonal;
  Mat matrix;
  double scale = 0.0;

  Vec apply(const Vec& v) const;
  Mat dense(Eigen::Index n) const;
  /// Spectral norm; the scalar itself for Diagonal.
  double norm() const;
};

struct SpectralNormResult {
  double value = 0.0;
  bool converged = true;
  int iterations = 0;
};

/// Largest eigenvalue of a symmetric PSD matrix by power iteration from the
/// normalized all-ones vector.
SpectralNormResult spectral_norm(const Mat& b, double rel_tol = 1e-10, int max_iter = 10000);

double loss_value(const LossModel& model, const ClientDataset& data, const Vec& x);
Vec loss_gradient(const LossModel& model, const ClientDataset& data, const Vec& x);

/// Value and gradient sharing one pass over the features.
double loss_value_and_gradient(const LossModel& model, const ClientDataset& data, const Vec& x,
                               Vec& grad);

CurvatureBound curvature_bound(const LossModel& model, const ClientDataset& data,
                               CurvatureVariant variant);

/// log(1 + e^t) without overflow for large |t|.
double log1p_exp(double t);
double sigmoid(double t);

}  // namespace fedgia
