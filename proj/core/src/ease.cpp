#include <cmath>
#include <ostream>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "bpr/errors.hpp"
#include "bpr/eval.hpp"

namespace bpr {

EaseModel fit_ease(const InteractionLog& train, double l2, std::uint32_t item_cap,
                   std::ostream* diag) {
  if (train.events.empty()) throw DataError("cannot fit EASE on an empty log");
  if (!(l2 > 0)) throw ConfigError("EASE l2 must be positive");
  const std::uint32_t n = train.item_count;
  if (n > item_cap) {
    throw ConfigError("item count " + std::to_string(n) + " exceeds the EASE cap of " +
                      std::to_string(item_cap));
  }
  if (diag) {
    const double gib = 3.0 * double(n) * double(n) * sizeof(double) / (1024.0 * 1024.0 * 1024.0);
    (*diag) << "ease: " << n << "x" << n << " dense system, ~" << gib << " GiB\n";
  }

  Eigen::SparseMatrix<double> x(static_cast<Eigen::Index>(train.user_count),
                                static_cast<Eigen::Index>(n));
  {
    std::vector<Eigen::Triplet<double>> cells;
    cells.reserve(train.events.size());
    for (const Event& e : train.events) cells.emplace_back(e.user, e.item, 1.0);
    x.setFromTriplets(cells.begin(), cells.end());
  }

  Eigen::MatrixXd g = Eigen::MatrixXd(x.transpose() * x);
  g.diagonal().array() += l2;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
  if (ldlt.info() != Eigen::Success) {
    throw NumericsError("EASE Gram matrix factorization failed");
  }
  Eigen::MatrixXd p = ldlt.solve(Eigen::MatrixXd::Identity(n, n));
  if (!p.allFinite()) throw NumericsError("EASE inverse has non-finite entries");

  EaseModel model;
  model.items = n;
  model.l2 = l2;
  model.B.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (std::uint32_t j = 0; j < n; ++j) {
    const double pjj = p(j, j);
    if (pjj == 0.0 || !std::isfinite(1.0 / pjj)) {
      throw NumericsError("EASE diagonal pivot is zero at item " + std::to_string(j));
    }
    for (std::uint32_t i = 0; i < n; ++i) {
      if (i != j) model.B[static_cast<std::size_t>(i) * n + j] = -p(i, j) / pjj;
    }
  }
  return model;
}

}  // namespace bpr
