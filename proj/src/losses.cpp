#include "fedgia/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace fedgia {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::LeastSquares: return "ls";
    case LossKind::LogisticL2: return "logl2";
    case LossKind::LogisticNonconvex: return "lognc";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "ls" || name == "least_squares" || name == "LeastSquares") return LossKind::LeastSquares;
  if (name == "logl2" || name == "logistic_l2" || name == "LogisticL2") return LossKind::LogisticL2;
  if (name == "lognc" || name == "logistic_nonconvex" || name == "LogisticNonconvex")
    return LossKind::LogisticNonconvex;
  throw std::invalid_argument("unknown loss kind '" + std::string(name) + "'");
}

LossModel LossModel::with_defaults(LossKind kind) {
  switch (kind) {
    case LossKind::LeastSquares: return least_squares();
    case LossKind::LogisticL2: return logistic_l2();
    case LossKind::LogisticNonconvex: return logistic_nonconvex();
  }
  return least_squares();
}

std::string_view to_string(CurvatureVariant variant) {
  return variant == CurvatureVariant::Gram ? "gram" : "diag";
}

ClientDataset::ClientDataset(Mat features, Vec labels)
    : features_(std::move(features)), labels_(std::move(labels)) {
  if (features_.rows() < 1 || features_.cols() < 1)
    throw std::invalid_argument("client dataset needs at least one sample and one feature");
  if (labels_.size() != features_.rows())
    throw std::invalid_argument("label count " + std::to_string(labels_.size()) +
                                " does not match sample count " +
                                std::to_string(features_.rows()));
  gram_ = features_.transpose() * features_;
}

Vec CurvatureBound::apply(const Vec& v) const {
  if (variant == CurvatureVariant::Gram) return matrix * v;
  return scale * v;
}

Mat CurvatureBound::dense(Eigen::Index n) const {
  if (variant == CurvatureVariant::Gram) return matrix;
  return scale * Mat::Identity(n, n);
}

double CurvatureBound::norm() const {
  if (variant == CurvatureVariant::Gram) return spectral_norm(matrix).value;
  return scale;
}

SpectralNormResult spectral_norm(const Mat& b, double rel_tol, int max_iter) {
  if (b.rows() != b.cols()) throw std::invalid_argument("spectral_norm: matrix is not square");
  const Eigen::Index n = b.rows();
  SpectralNormResult out;
  if (n == 0) return out;

  Vec v = Vec::Ones(n).normalized();
  Vec bv = b * v;
  // The all-ones start can sit in the null space (e.g. [[1,-1],[-1,1]]);
  // fall back to a start vector with distinct entries.
  if (bv.norm() <= 1e-14 * std::max(1.0, b.norm())) {
    v = Vec::LinSpaced(n, 1.0, static_cast<double>(n)).normalized();
    bv = b * v;
    if (bv.norm() <= 1e-14 * std::max(1.0, b.norm())) return out;
  }

  double lambda = v.dot(bv);
  for (int it = 1; it <= max_iter; ++it) {
    out.iterations = it;
    v = bv.normalized();
    bv = b * v;
    lambda = v.dot(bv);
    const double residual = (bv - lambda * v).norm();
    if (residual <= rel_tol * std::abs(lambda)) {
      out.value = lambda;
      out.converged = true;
      return out;
    }
  }
  out.value = lambda;
  out.converged = false;
  return out;
}

double log1p_exp(double t) {
  if (t > 0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

namespace {

void check_dim(const ClientDataset& data, const Vec& x) {
  if (x.size() != data.dim())
    throw std::invalid_argument("parameter length " + std::to_string(x.size()) +
                                " does not match feature dimension " +
                                std::to_string(data.dim()));
}

}  // namespace

double loss_value_and_gradient(const LossModel& model, const ClientDataset& data, const Vec& x,
                               Vec& grad) {
  check_dim(data, x);
  const double d = static_cast<double>(data.samples());
  const Mat& a = data.features();
  const Vec& b = data.labels();
  const Vec ax = a * x;

  switch (model.kind) {
    case LossKind::LeastSquares: {
      const Vec res = ax - b;
      grad = a.transpose() * res / d;
      return res.squaredNorm() / (2.0 * d);
    }
    case LossKind::LogisticL2:
    case LossKind::LogisticNonconvex: {
      double sum = 0.0;
      Vec s(ax.size());
      for (Eigen::Index j = 0; j < ax.size(); ++j) {
        sum += log1p_exp(ax[j]) - b[j] * ax[j];
        s[j] = sigmoid(ax[j]) - b[j];
      }
      grad = a.transpose() * s / d;
      double value = sum / d;
      if (model.kind == LossKind::LogisticL2) {
        value += model.mu / (2.0 * d) * x.squaredNorm();
        grad += (model.mu / d) * x;
      } else {
        double reg = 0.0;
        for (Eigen::Index l = 0; l < x.size(); ++l) {
          const double q = 1.0 + x[l] * x[l];
          reg += x[l] * x[l] / q;
          grad[l] += (model.mu / d) * x[l] / (q * q);
        }
        value += model.mu / (2.0 * d) * reg;
      }
      return value;
    }
  }
  return 0.0;
}

double loss_value(const LossModel& model, const ClientDataset& data, const Vec& x) {
  check_dim(data, x);
  const double d = static_cast<double>(data.samples());
  const Vec ax = data.features() * x;
  const Vec& b = data.labels();

  if (model.kind == LossKind::LeastSquares) return (ax - b).squaredNorm() / (2.0 * d);

  double sum = 0.0;
  for (Eigen::Index j = 0; j < ax.size(); ++j) sum += log1p_exp(ax[j]) - b[j] * ax[j];
  double value = sum / d;
  if (model.kind == LossKind::LogisticL2) {
    value += model.mu / (2.0 * d) * x.squaredNorm();
  } else {
    double reg = 0.0;
    for (Eigen::Index l = 0; l < x.size(); ++l) reg += x[l] * x[l] / (1.0 + x[l] * x[l]);
    value += model.mu / (2.0 * d) * reg;
  }
  return value;
}

Vec loss_gradient(const LossModel& model, const ClientDataset& data, const Vec& x) {
  Vec grad;
  loss_value_and_gradient(model, data, x, grad);
  return grad;
}

CurvatureBound curvature_bound(const LossModel& model, const ClientDataset& data,
                               CurvatureVariant variant) {
  const double d = static_cast<double>(data.samples());
  // Logistic curvature is at most 1/4 per sample.
  const double factor = model.kind == LossKind::LeastSquares ? 1.0 : 0.25;

  CurvatureBound h;
  h.variant = variant;
  if (variant == CurvatureVariant::Gram) {
    h.matrix = data.gram() * (factor / d);
    if (model.kind == LossKind::LogisticNonconvex)
      h.matrix.diagonal().array() += model.mu / d;
    h.scale = 0.0;
  } else {
    const double b_norm = spectral_norm(data.gram()).value;
    if (model.kind == LossKind::LogisticNonconvex)
      h.scale = (b_norm + 4.0 * model.mu) / (4.0 * d);
    else
      h.scale = factor * b_norm / d;
  }
  return h;
}

}  // namespace fedgia
