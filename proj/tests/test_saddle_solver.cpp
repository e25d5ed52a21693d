#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace hdivfwd;

namespace {

CompartmentTable two_table(double s1 = 1.0, double s2 = 1.0) {
  CompartmentTable t;
  t.add(1, "a", s1).add(2, "b", s2);
  return t;
}

SolverConfig config(PrecondKind p = PrecondKind::ssor) {
  SolverConfig c;
  c.precond = p;
  c.outer_tol = 1e-12;
  return c;
}

HexMesh layered_cube() {
  return oracle::box(4, 4, 4, 1.0, [](int i, int j, int k) {
    if (i == 3 && j == 3 && k == 3) return Label{0};
    return static_cast<Label>(k < 2 ? 1 : 2);
  });
}

std::vector<double> schur_of(const SchurSolver& s, const std::vector<double>& v) {
  std::vector<double> y(v.size());
  s.schur_apply(v, y);
  return y;
}

double dotv(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST(InnerSolve, TwoCellScalarInverse) {
  const auto sys = assemble_saddle_system(oracle::box(2, 1, 1), two_table());
  const SchurSolver s(sys, config());
  std::vector<double> y{1.0}, x(1);
  s.apply_A_inverse(y, x);
  EXPECT_NEAR(x[0], 1.5, 1e-15);
  y[0] = 0.0;
  s.apply_A_inverse(y, x);
  EXPECT_EQ(x[0], 0.0);
}

TEST(InnerSolve, ModesReachSmallResidual) {
  const auto sys = assemble_saddle_system(layered_cube(), two_table(0.33, 0.01));
  std::mt19937_64 rng(1);
  const auto y = oracle::random_vector(static_cast<std::size_t>(sys.face_dofs()), rng);
  const auto Ad = oracle::to_dense(sys.A);
  for (auto mode : {InnerSolve::exact_lines, InnerSolve::tolerance}) {
    auto c = config();
    c.inner = mode;
    const SchurSolver s(sys, c);
    std::vector<double> x(y.size());
    s.apply_A_inverse(y, x);
    const Eigen::VectorXd r = Ad * oracle::as_eigen(x) - oracle::as_eigen(y);
    EXPECT_LT(r.norm() / oracle::as_eigen(y).norm(), 1e-10);
  }
}

TEST(InnerSolve, FixedIterationsIsLinearSymmetricAndStartsAtJacobi) {
  const auto sys = assemble_saddle_system(layered_cube(), two_table(0.33, 1.79));
  const auto n = static_cast<std::size_t>(sys.face_dofs());
  for (int steps : {1, 3}) {
    auto c = config();
    c.inner = InnerSolve::fixed_iterations;
    c.inner_iters = steps;
    const SchurSolver s(sys, c);
    Eigen::MatrixXd M(n, n);
    std::vector<double> e(n, 0.0), x(n);
    for (std::size_t i = 0; i < n; ++i) {
      e[i] = 1.0;
      s.apply_A_inverse(e, x);
      M.col(static_cast<Eigen::Index>(i)) = oracle::as_eigen(x);
      e[i] = 0.0;
    }
    EXPECT_LT((M - M.transpose()).cwiseAbs().maxCoeff(), 1e-12 * M.cwiseAbs().maxCoeff());
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (M + M.transpose())).eigenvalues().minCoeff(), 0.0);
    if (steps == 1) {
      const auto d = sys.A.diagonal();
      Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
      for (std::size_t i = 0; i < n; ++i) J(i, i) = 1.0 / d[i];
      EXPECT_LT((M - J).cwiseAbs().maxCoeff(), 1e-15);
    }
  }
}

TEST(Schur, ConstantsAreInTheNullspace) {
  const auto sys = assemble_saddle_system(layered_cube(), two_table(0.33, 1.79));
  const SchurSolver s(sys, config());
  const auto y = schur_of(s, std::vector<double>(static_cast<std::size_t>(sys.element_dofs()), 3.0));
  for (double v : y) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Schur, SymmetricAndSemidefinite) {
  const auto sys = assemble_saddle_system(layered_cube(), two_table(0.33, 1.79));
  const SchurSolver s(sys, config());
  std::mt19937_64 rng(2);
  const auto n = static_cast<std::size_t>(sys.element_dofs());
  for (int t = 0; t < 10; ++t) {
    const auto a = oracle::random_vector(n, rng), b = oracle::random_vector(n, rng);
    const auto sa = schur_of(s, a), sb = schur_of(s, b);
    EXPECT_NEAR(dotv(sa, b), dotv(a, sb), 1e-12 * std::sqrt(dotv(sa, sa) * dotv(b, b)));
    EXPECT_GE(dotv(sa, a), 0.0);
  }
}

TEST(Preconditioner, DiagonalVariantsOnTwoCells) {
  const double h = 2.0, sigma = 0.5;
  CompartmentTable t;
  t.add(1, "a", sigma);
  const auto sys = assemble_saddle_system(oracle::box(2, 1, 1, h), t);
  const double expect = 2.0 * h * h * h / (3.0 * sigma);
  for (auto k : {DiagonalKind::l2_row, DiagonalKind::diagonal, DiagonalKind::row_sum})
    EXPECT_NEAR(diagonal_approximation(sys.A, k)[0], expect, 1e-13);
}

TEST(Preconditioner, DiagonalVariantsDifferInGeneral) {
  const auto sys = assemble_saddle_system(oracle::box(3, 1, 1), two_table());
  // interior x-face rows: [1/6, 2/3] or [2/3, 1/6] plus a neighbour
  const auto l2 = diagonal_approximation(sys.A, DiagonalKind::l2_row);
  const auto dg = diagonal_approximation(sys.A, DiagonalKind::diagonal);
  const auto rs = diagonal_approximation(sys.A, DiagonalKind::row_sum);
  EXPECT_NEAR(dg[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(rs[0], 2.0 / 3.0 + 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(l2[0], std::sqrt(4.0 / 9.0 + 1.0 / 36.0), 1e-15);
}

TEST(Preconditioner, ApproximationIsSymmetricPositiveOnMeanZero) {
  const auto sys = assemble_saddle_system(layered_cube(), two_table(0.33, 1.79));
  const auto P = schur_approximation(sys, DiagonalKind::l2_row);
  EXPECT_TRUE(P.is_symmetric(1e-14));
  for (auto kind : {PrecondKind::ssor, PrecondKind::amg}) {
    const SchurPreconditioner pc(sys, config(kind));
    const auto n = static_cast<std::size_t>(sys.element_dofs());
    std::mt19937_64 rng(4);
    for (int t = 0; t < 5; ++t) {
      const auto a = oracle::random_mean_zero(n, rng), b = oracle::random_mean_zero(n, rng);
      std::vector<double> pa(n), pb(n);
      pc.apply(a, pa);
      pc.apply(b, pb);
      EXPECT_NEAR(dotv(pa, b), dotv(a, pb), 1e-10 * std::sqrt(dotv(pa, pa) * dotv(b, b)));
      EXPECT_GT(dotv(pa, a), 0.0);
    }
  }
}

TEST(Solve, ZeroLoadGivesZeroSolution) {
  const auto sys = assemble_saddle_system(layered_cube(), two_table());
  const SchurSolver s(sys, config());
  const auto sol = s.solve_schur(std::vector<double>(static_cast<std::size_t>(sys.element_dofs()), 0.0));
  for (double v : sol.u) EXPECT_EQ(v, 0.0);
  RhsSpec empty;
  const auto p = s.solve_potential(empty);
  for (double v : p.j) EXPECT_EQ(v, 0.0);
}

TEST(Solve, MatchesDenseBlockSolve) {
  const auto m = layered_cube();
  const auto sys = assemble_saddle_system(m, two_table(0.33, 0.01));
  std::mt19937_64 rng(6);
  const auto h = oracle::random_mean_zero(static_cast<std::size_t>(sys.element_dofs()), rng);
  const auto ref = oracle::dense_block_solve(oracle::to_dense(sys.A), oracle::to_dense(sys.B),
                                             Eigen::VectorXd::Zero(sys.face_dofs()), oracle::as_eigen(h));
  for (auto p : {PrecondKind::none, PrecondKind::ssor, PrecondKind::amg}) {
    const SchurSolver s(sys, config(p));
    const auto sol = s.solve_schur(h);
    EXPECT_LT(oracle::rel_diff(oracle::as_eigen(sol.u), ref.u), 1e-9);
    EXPECT_NEAR(oracle::as_eigen(sol.u).mean(), 0.0, 1e-14);
  }
}

TEST(Solve, DirectDipoleMatchesDenseBlockSolveAndConservesCurrent) {
  const auto m = layered_cube();
  const auto sys = assemble_saddle_system(m, two_table(0.33, 1.79));
  const SchurSolver s(sys, config());
  const auto rhs = rhs_direct({{1.6, 2.3, 1.45}, {0.3, 0.2, 1.0}}, sys, m);
  const auto sol = s.solve_potential(rhs);
  const Eigen::VectorXd b = oracle::as_eigen(rhs.face.dense(static_cast<std::size_t>(sys.face_dofs())));
  const auto ref = oracle::dense_block_solve(oracle::to_dense(sys.A), oracle::to_dense(sys.B), b,
                                             Eigen::VectorXd::Zero(sys.element_dofs()));
  EXPECT_LT(oracle::rel_diff(oracle::as_eigen(sol.u), ref.u), 1e-9);
  EXPECT_LT(oracle::rel_diff(oracle::as_eigen(sol.j), ref.j), 1e-9);
  std::vector<double> div(static_cast<std::size_t>(sys.element_dofs()));
  sys.B.multiply(sol.j, div);
  EXPECT_LT(oracle::as_eigen(div).norm(), 1e-10 * b.norm());
}

TEST(Solve, ProjectedCurrentMatchesDenseBlockSolve) {
  const auto m = layered_cube();
  const auto sys = assemble_saddle_system(m, two_table(0.33, 1.79));
  const SchurSolver s(sys, config());
  const auto rhs = rhs_projected({{1.6, 2.3, 1.45}, {0.3, 0.2, 1.0}}, sys, m);
  const auto sol = s.solve_potential(rhs);
  const Eigen::VectorXd bpot = oracle::as_eigen(rhs.face.dense(static_cast<std::size_t>(sys.face_dofs())));
  // j = b_pot + j', with A j' - B^T u = 0 and B j' = -B b_pot
  const Eigen::MatrixXd Bd = oracle::to_dense(sys.B);
  const auto ref = oracle::dense_block_solve(oracle::to_dense(sys.A), Bd, Eigen::VectorXd::Zero(sys.face_dofs()),
                                             -Bd * bpot);
  EXPECT_LT(oracle::rel_diff(oracle::as_eigen(sol.u), ref.u), 1e-9);
  EXPECT_LT(oracle::rel_diff(oracle::as_eigen(sol.j), ref.j + bpot), 1e-9);
  EXPECT_LT((Bd * oracle::as_eigen(sol.j)).norm(), 1e-10 * (Bd * bpot).norm());
}

TEST(Solve, RejectsIncompatibleLoad) {
  const auto sys = assemble_saddle_system(layered_cube(), two_table());
  const SchurSolver s(sys, config());
  std::vector<double> h(static_cast<std::size_t>(sys.element_dofs()), 0.0);
  h[0] = 1.0;
  EXPECT_THROW(s.solve_schur(h), ValidationError);
  EXPECT_THROW(s.solve_schur(std::vector<double>(3, 0.0)), ValidationError);
}

TEST(Solve, NonConvergenceReportsHistory) {
  const auto sys = assemble_saddle_system(layered_cube(), two_table(0.33, 0.01));
  auto c = config(PrecondKind::none);
  c.outer_max_iter = 2;
  const SchurSolver s(sys, c);
  std::mt19937_64 rng(8);
  const auto h = oracle::random_mean_zero(static_cast<std::size_t>(sys.element_dofs()), rng);
  try {
    s.solve_schur(h);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.history().size(), 3u);
    EXPECT_EQ(e.code(), ExitCode::numerical);
  }
}

TEST(Solve, GaugeAndLinearity) {
  const auto m = layered_cube();
  const auto sys = assemble_saddle_system(m, two_table(0.33, 1.79));
  const SchurSolver s(sys, config());
  const auto n = static_cast<std::size_t>(sys.element_dofs());
  std::mt19937_64 rng(10);
  const auto h1 = oracle::random_mean_zero(n, rng), h2 = oracle::random_mean_zero(n, rng);
  std::vector<double> h3(n);
  for (std::size_t i = 0; i < n; ++i) h3[i] = 2.0 * h1[i] - 0.5 * h2[i];
  const auto u1 = oracle::as_eigen(s.solve_schur(h1).u), u2 = oracle::as_eigen(s.solve_schur(h2).u);
  const auto u3 = oracle::as_eigen(s.solve_schur(h3).u);
  EXPECT_LT(oracle::rel_diff(u3, 2.0 * u1 - 0.5 * u2), 1e-10);
  // a constant shift of u leaves B^T u, hence j, unchanged
  std::vector<double> u(u1.data(), u1.data() + n), shifted(u), t1(static_cast<std::size_t>(sys.face_dofs())), t2(t1);
  for (auto& v : shifted) v += 5.0;
  sys.Bt.multiply(u, t1);
  sys.Bt.multiply(shifted, t2);
  for (std::size_t i = 0; i < t1.size(); ++i) EXPECT_NEAR(t1[i], t2[i], 1e-12);
}

TEST(Solve, FixedInnerIterationsConverge) {
  const auto m = layered_cube();
  const auto sys = assemble_saddle_system(m, two_table(0.33, 1.79));
  auto c = config();
  c.inner = InnerSolve::fixed_iterations;
  c.inner_iters = 1;
  c.outer_tol = 1e-10;
  const SchurSolver s(sys, c);
  const auto rhs = rhs_projected({{1.6, 2.3, 1.45}, {0.0, 0.0, 1.0}}, sys, m);
  const auto sol = s.solve_potential(rhs);
  EXPECT_TRUE(sol.converged);
  // the history is the residual of the perturbed operator; it must end below tolerance
  EXPECT_LE(sol.history.back(), 1e-10);
}

TEST(Transfer, ReciprocityAndEdgeCases) {
  const auto m = layered_cube();
  const auto sys = assemble_saddle_system(m, two_table(0.33, 1.79));
  const SchurSolver s(sys, config());
  const auto n = static_cast<std::size_t>(sys.element_dofs());
  const std::vector<std::int32_t> sensors{5, 17, 40, 62};
  std::vector<std::vector<double>> R;
  for (std::size_t k = 1; k < sensors.size(); ++k) {
    std::vector<double> r(n, 0.0);
    r[static_cast<std::size_t>(sensors[k])] = 1.0;
    r[static_cast<std::size_t>(sensors[0])] = -1.0;
    R.push_back(r);
  }
  R.push_back(std::vector<double>(n, 0.0));
  const auto t = s.transfer_solve(R);
  for (double v : t.back()) EXPECT_EQ(v, 0.0);
  for (auto kind : {RhsKind::direct, RhsKind::projected}) {
    const auto rhs = make_rhs(kind, {{1.6, 2.3, 1.45}, {0.3, 0.2, 1.0}}, sys, m);
    const auto u = s.solve_potential(rhs).u;
    const auto h = s.element_load(rhs);
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
      const double direct = u[static_cast<std::size_t>(sensors[k + 1])] - u[static_cast<std::size_t>(sensors[0])];
      EXPECT_NEAR(dotv(t[k], h), direct, 1e-8 * std::abs(direct) + 1e-14);
    }
  }
  // the difference of two sensor rows solves the difference system
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = R[0][i] - R[1][i];
  const auto td = s.transfer_solve({d});
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(td[0][i], t[0][i] - t[1][i], 1e-9);
  EXPECT_THROW(s.transfer_solve({std::vector<double>(n, 1.0)}), ValidationError);
}

TEST(Solve, PreconditioningReducesIterationsOnSphere) {
  const auto m = generate_sphere_mesh(SphereSpec::four_layer(8.0));
  const auto sys = assemble_saddle_system(m, CompartmentTable::four_layer_sphere());
  const auto rhs = rhs_projected({{20.0, 10.0, 30.0}, {0.0, 0.6, 0.8}}, sys, m);
  auto c = config(PrecondKind::none);
  c.outer_tol = 1e-8;
  const int none = SchurSolver(sys, c).solve_potential(rhs).iterations;
  for (auto p : {PrecondKind::ssor, PrecondKind::amg}) {
    c.precond = p;
    EXPECT_LT(SchurSolver(sys, c).solve_potential(rhs).iterations, none);
  }
}

TEST(SolverConfig, Validation) {
  SolverConfig c;
  c.outer_tol = 0.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.inner = InnerSolve::fixed_iterations;
  c.inner_iters = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.ssor_omega = 2.0;
  EXPECT_THROW(c.validate(), ValidationError);
}
