#pragma once

#include "wbmpc/types.hpp"

#include <vector>

namespace wbmpc {

/// Time-varying affine state feedback u_n(x) = u_ff_n + K_n (x - x_ref_n).
struct AffinePolicy {
  std::vector<VectorXd> u_ff;
  std::vector<MatrixXd> K;
  std::vector<VectorXd> x_ref;

  int size() const { return static_cast<int>(u_ff.size()); }
  VectorXd operator()(int stage, const VectorXd& x) const {
    const auto n = static_cast<std::size_t>(stage);
    if (K.empty()) return u_ff[n];
    return u_ff[n] + K[n] * (x - x_ref[n]);
  }
};

}  // namespace wbmpc
