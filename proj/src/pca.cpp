#include <Eigen/Eigenvalues>

#include "spotcheck/common.hpp"
#include "spotcheck/embed.hpp"

namespace spotcheck {

Eigen::MatrixXd normalize_unit_square(const Eigen::MatrixXd& s) {
  Eigen::MatrixXd out(s.rows(), s.cols());
  for (Eigen::Index c = 0; c < s.cols(); ++c) {
    if (s.rows() == 0) break;
    const double lo = s.col(c).minCoeff();
    const double hi = s.col(c).maxCoeff();
    if (hi > lo) {
      out.col(c) = ((s.col(c).array() - lo) / (hi - lo)).matrix();
    } else {
      out.col(c).setConstant(0.5);
    }
  }
  return out;
}

Embedding2D reduce_pca2(const Eigen::MatrixXd& g) {
  require(g.rows() >= 2, ErrorKind::InvalidArgument, "PCA needs at least two rows");
  require(g.cols() >= 1, ErrorKind::InvalidArgument, "PCA needs at least one column");
  const Eigen::RowVectorXd mean = g.colwise().mean();
  const Eigen::MatrixXd centered = g.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(g.rows() - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  require(solver.info() == Eigen::Success, ErrorKind::NumericalError, "eigendecomposition failed");

  // Eigen returns ascending eigenvalues.
  const Eigen::Index d = g.cols();
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(d, 2);
  Embedding2D out;
  for (int k = 0; k < 2 && k < d; ++k) {
    Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - k);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    basis.col(k) = v;
    out.explained_variance[static_cast<std::size_t>(k)] = std::max(0.0, solver.eigenvalues()(d - 1 - k));
  }
  out.coords = centered * basis;
  out.normalized = normalize_unit_square(out.coords);
  return out;
}

}  // namespace spotcheck
