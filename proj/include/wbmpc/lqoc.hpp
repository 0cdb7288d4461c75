#pragma once

#include "wbmpc/errors.hpp"
#include "wbmpc/types.hpp"

#include <Eigen/Cholesky>

#include <string>
#include <vector>

namespace wbmpc {

/// One stage of the linear-quadratic subproblem in increment variables:
///   dx+ = A dx + B du + c
///   l(dx, du) = q'dx + r'du + 1/2 dx'Q dx + 1/2 du'R du + du'P dx
template <typename Scalar>
struct LqocStage {
  MatrixX<Scalar> A;
  MatrixX<Scalar> B;
  VectorX<Scalar> c;
  MatrixX<Scalar> Q;
  MatrixX<Scalar> R;
  MatrixX<Scalar> P;
  VectorX<Scalar> q;
  VectorX<Scalar> r;
};

template <typename Scalar>
struct LqocProblem {
  std::vector<LqocStage<Scalar>> stages;
  MatrixX<Scalar> Q_final;
  VectorX<Scalar> q_final;
  VectorX<Scalar> dx0;  // fixed initial increment

  int horizon() const { return static_cast<int>(stages.size()); }
  int nx() const { return static_cast<int>(Q_final.rows()); }
  int nu() const { return stages.empty() ? 0 : static_cast<int>(stages.front().B.cols()); }
};

template <typename Scalar>
struct LqocSolution {
  std::vector<VectorX<Scalar>> du_ff;  // feedforward increments k_n
  std::vector<MatrixX<Scalar>> K;      // feedback gains
  std::vector<VectorX<Scalar>> dx;     // N + 1 predicted state increments
  std::vector<VectorX<Scalar>> du;     // N control increments k_n + K_n dx_n
  std::vector<MatrixX<Scalar>> S;      // value function Hessians, N + 1
  std::vector<VectorX<Scalar>> s;      // value function gradients, N + 1
  Scalar regularization = Scalar(0);   // value actually used on H_uu
};

struct RiccatiSettings {
  double regularization = 1e-9;
  bool adaptive = true;  // escalate x10 on a failed H_uu factorization
  int max_escalations = 12;
};

using LqocStaged = LqocStage<double>;
using LqocProblemd = LqocProblem<double>;
using LqocSolutiond = LqocSolution<double>;

template <typename Scalar>
void validate(const LqocProblem<Scalar>& problem) {
  const int nx = problem.nx();
  const int nu = problem.nu();
  if (problem.q_final.size() != nx || problem.Q_final.cols() != nx || problem.dx0.size() != nx)
    throw DimensionMismatch("LQOC: final stage / dx0 dimensions");
  for (std::size_t n = 0; n < problem.stages.size(); ++n) {
    const auto& s = problem.stages[n];
    const bool ok = s.A.rows() == nx && s.A.cols() == nx && s.B.rows() == nx && s.B.cols() == nu &&
                    s.c.size() == nx && s.Q.rows() == nx && s.Q.cols() == nx && s.R.rows() == nu &&
                    s.R.cols() == nu && s.P.rows() == nu && s.P.cols() == nx && s.q.size() == nx &&
                    s.r.size() == nu;
    if (!ok) throw DimensionMismatch("LQOC: inconsistent dimensions at stage " + std::to_string(n));
  }
}

namespace detail {

template <typename Scalar>
bool riccati_sweep(const LqocProblem<Scalar>& problem, Scalar reg, LqocSolution<Scalar>& sol,
                   int& failed_stage) {
  const int N = problem.horizon();
  const int nu = problem.nu();
  sol.S[static_cast<std::size_t>(N)] = problem.Q_final;
  sol.s[static_cast<std::size_t>(N)] = problem.q_final;
  MatrixX<Scalar> H;
  MatrixX<Scalar> G;
  VectorX<Scalar> g;
  for (int n = N - 1; n >= 0; --n) {
    const auto i = static_cast<std::size_t>(n);
    const auto& st = problem.stages[i];
    const MatrixX<Scalar>& S_next = sol.S[i + 1];
    const VectorX<Scalar> s_next = sol.s[i + 1] + S_next * st.c;
    const MatrixX<Scalar> SA = S_next * st.A;
    const MatrixX<Scalar> SB = S_next * st.B;

    H = st.R + st.B.transpose() * SB;
    H.diagonal().array() += reg;
    G = st.P + st.B.transpose() * SA;
    g = st.r + st.B.transpose() * s_next;

    Eigen::LLT<MatrixX<Scalar>> llt(H);
    if (nu > 0 && llt.info() != Eigen::Success) {
      failed_stage = n;
      return false;
    }
    if (nu > 0) {
      sol.K[i] = -llt.solve(G);
      sol.du_ff[i] = -llt.solve(g);
    } else {
      sol.K[i].setZero(0, problem.nx());
      sol.du_ff[i].setZero(0);
    }
    MatrixX<Scalar> S = st.Q + st.A.transpose() * SA + G.transpose() * sol.K[i];
    sol.S[i] = Scalar(0.5) * (S + S.transpose());
    sol.s[i] = st.q + st.A.transpose() * s_next + G.transpose() * sol.du_ff[i];
  }
  return true;
}

}  // namespace detail

/// Backward Riccati recursion on the value function followed by a forward pass.
/// Linear in the horizon length. Throws NotPositiveDefinite when H_uu + reg I cannot
/// be factorized (after escalation if enabled).
template <typename Scalar>
LqocSolution<Scalar> solve_riccati(const LqocProblem<Scalar>& problem,
                                   const RiccatiSettings& settings = {}) {
  validate(problem);
  const int N = problem.horizon();
  const auto Ns = static_cast<std::size_t>(N);
  LqocSolution<Scalar> sol;
  sol.K.resize(Ns);
  sol.du_ff.resize(Ns);
  sol.S.resize(Ns + 1);
  sol.s.resize(Ns + 1);

  if (settings.regularization < 0) throw Error("Riccati regularization must be >= 0");
  Scalar reg = Scalar(settings.regularization);
  int failed_stage = -1;
  int escalations = 0;
  while (!detail::riccati_sweep(problem, reg, sol, failed_stage)) {
    if (!settings.adaptive || escalations >= settings.max_escalations)
      throw NotPositiveDefinite(
          "H_uu not positive definite at stage " + std::to_string(failed_stage), failed_stage);
    reg = reg > Scalar(0) ? reg * Scalar(10) : Scalar(1e-9);
    ++escalations;
  }
  sol.regularization = reg;

  sol.dx.resize(Ns + 1);
  sol.du.resize(Ns);
  sol.dx[0] = problem.dx0;
  for (std::size_t n = 0; n < Ns; ++n) {
    const auto& st = problem.stages[n];
    sol.du[n] = sol.du_ff[n] + sol.K[n] * sol.dx[n];
    sol.dx[n + 1] = st.A * sol.dx[n] + st.B * sol.du[n] + st.c;
  }
  return sol;
}

}  // namespace wbmpc
