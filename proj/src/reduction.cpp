#include "netid/reduction.hpp"

#include <cmath>
#include <string>

#include "netid/error.hpp"

namespace netid {

ReductionOperators compute_reduction_operators(const Matrix& a2, int n_observed, int n_missing,
                                               double rank_tol) {
  if (n_observed < 0 || n_missing < 0 || a2.cols() != n_observed + n_missing) {
    throw Error(ErrorCode::kInvalidDimension, "A2 column partition does not match its width");
  }
  const Eigen::Index m2 = a2.rows();
  const Eigen::Index no = n_observed;
  const Eigen::Index nm = n_missing;

  ReductionOperators ops;
  ops.n_observed = n_observed;
  ops.n_missing = n_missing;
  ops.a2o = a2.leftCols(no);
  const Matrix a2m = a2.rightCols(nm);

  Matrix u = Matrix::Identity(m2, m2);
  Matrix v = Matrix::Identity(nm, nm);
  Vector sv;
  if (m2 > 0 && nm > 0) {
    Eigen::BDCSVD<Matrix> svd(a2m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    u = svd.matrixU();
    v = svd.matrixV();
    sv = svd.singularValues();
  }
  Eigen::Index r = 0;
  if (sv.size() > 0 && sv(0) > 0.0) {
    const double cutoff = rank_tol * sv(0);
    while (r < sv.size() && sv(r) > cutoff) ++r;
  }
  ops.rank = static_cast<int>(r);
  ops.u1 = u.leftCols(r);
  ops.u2 = u.rightCols(m2 - r);
  ops.v1 = v.leftCols(r);
  ops.v2 = v.rightCols(nm - r);
  ops.sigma1 = sv.head(r);

  // Compress the constraint block U2^T A_2o = [A~ 0] W^T via QR of its transpose.
  const Eigen::Index hard = m2 - r;
  const Matrix a2o2 = ops.u2.transpose() * ops.a2o;
  if (hard > no) {
    throw Error(ErrorCode::kRankDeficient,
                "A is not of full row rank: " + std::to_string(hard) +
                    " interconnection constraints act on only " + std::to_string(no) +
                    " observed coordinates");
  }
  Matrix w = Matrix::Identity(no, no);
  if (hard > 0) {
    Eigen::HouseholderQR<Matrix> qr(a2o2.transpose());
    w = qr.householderQ() * Matrix::Identity(no, no);
    const Matrix rr = qr.matrixQR().topLeftCorner(hard, hard).triangularView<Eigen::Upper>();
    const double scale = std::max(1.0, a2o2.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < hard; ++i) {
      if (std::abs(rr(i, i)) <= rank_tol * scale) {
        throw Error(ErrorCode::kRankDeficient,
                    "observed interconnection block is row-rank deficient (A not of full row rank)");
      }
    }
  }
  ops.w1 = w.leftCols(hard);
  ops.w2 = w.rightCols(no - hard);

  const Matrix pivot = a2o2 * ops.w1;  // hard x hard, nonsingular
  ops.constraint_map = pivot * ops.w1.transpose();
  if (hard > 0) {
    ops.h = ops.w1 * pivot.partialPivLu().solve(ops.u2.transpose());
  } else {
    ops.h = Matrix::Zero(no, m2);
  }

  const Vector inv_sigma = ops.sigma1.cwiseInverse();
  const Matrix elim = ops.v1 * inv_sigma.asDiagonal() * ops.u1.transpose();  // nm x m2

  const Eigen::Index ko = no - hard;
  const Eigen::Index km = nm - r;
  ops.phi_map = Matrix::Zero(no + nm, ko + km);
  ops.phi_map.topLeftCorner(no, ko) = ops.w2;
  ops.phi_map.bottomLeftCorner(nm, ko) = -elim * ops.a2o * ops.w2;
  ops.phi_map.bottomRightCorner(nm, km) = ops.v2;

  ops.gamma_map = Matrix::Zero(no + nm, m2);
  ops.gamma_map.topRows(no) = ops.h;
  ops.gamma_map.bottomRows(nm) = elim * (Matrix::Identity(m2, m2) - ops.a2o * ops.h);
  return ops;
}

Matrix ReducedModel::phi() const {
  Matrix out(phi_o.rows(), phi_o.cols() + phi_m.cols());
  out << phi_o, phi_m;
  return out;
}

ReducedModel apply_reduction(const Matrix& a1, const Vector& b1, const Vector& b2,
                             const ReductionOperators& ops, bool check_singular) {
  if (a1.cols() != ops.phi_map.rows() || b1.size() != a1.rows() ||
      b2.size() != ops.gamma_map.cols()) {
    throw Error(ErrorCode::kInvalidDimension, "apply_reduction: dimensions do not match operators");
  }
  const Matrix phi = a1 * ops.phi_map;
  if (phi.rows() != phi.cols()) {
    throw Error(ErrorCode::kUnsupportedShape,
                "reduced Phi is " + std::to_string(phi.rows()) + " x " +
                    std::to_string(phi.cols()) +
                    "; non-square Phi needs column compression, which is not supported");
  }
  if (check_singular && phi.rows() > 0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(phi);
    qr.setThreshold(1e-12);
    if (qr.rank() < phi.cols()) {
      throw Error(ErrorCode::kSingularModel, "reduced Phi is singular");
    }
  }
  ReducedModel out;
  const Eigen::Index ko = ops.observed_free();
  out.phi_o = phi.leftCols(ko);
  out.phi_m = phi.rightCols(phi.cols() - ko);
  out.gamma = b1 - a1 * (ops.gamma_map * b2);
  out.obs_transform = ops.w2.transpose();
  return out;
}

ObservedTransform transform_observed(const Vector& x_o, const ReductionOperators& ops,
                                     const Vector& b2, double tolerance) {
  if (x_o.size() != ops.n_observed) {
    throw Error(ErrorCode::kInvalidDimension, "observed vector length does not match n_o");
  }
  ObservedTransform out;
  out.reduced = ops.w2.transpose() * x_o;
  if (ops.w1.cols() > 0) {
    const Vector violation = ops.constraint_map * x_o + ops.u2.transpose() * b2;
    out.consistency_residual = violation.cwiseAbs().maxCoeff();
  }
  if (tolerance < 0.0) {
    tolerance = 1e-6 * (1.0 + (x_o.size() > 0 ? x_o.cwiseAbs().maxCoeff() : 0.0));
  }
  if (out.consistency_residual > tolerance) {
    throw Error(ErrorCode::kInconsistentData,
                "observed data violate the interconnection constraints (residual " +
                    std::to_string(out.consistency_residual) + ")");
  }
  return out;
}

}  // namespace netid
