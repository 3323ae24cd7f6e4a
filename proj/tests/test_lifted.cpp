#include <catch2/catch_amalgamated.hpp>

#include "privmon/lifted.hpp"
#include "support/test_models.hpp"

using namespace privmon;
using testing::reactor_model;
using testing::reactor_inputs;

TEST_CASE("build_lifted K=1 degenerates correctly") {
  const SystemModel m = reactor_model();
  const LiftedSystem l = build_lifted(m, 1);
  CHECK((l.F - Matrix::Identity(4, 4)).norm() == 0.0);
  CHECK(l.J.cols() == 0);
  CHECK(l.N.cols() == 0);
  CHECK((l.Q - m.Sigma_x1).norm() < 1e-14);
}

TEST_CASE("build_lifted scalar powers K=3") {
  SystemModel m = testing::scalar_toy_model();
  const double a = m.A(0, 0);
  const LiftedSystem l = build_lifted(m, 3);
  Vector f_expect(3);
  f_expect << 1.0, a, a * a;
  CHECK((l.F - f_expect).norm() < 1e-15);
  Matrix j_expect = Matrix::Zero(3, 2);
  j_expect(1, 0) = 1.0;
  j_expect(2, 0) = a;
  j_expect(2, 1) = 1.0;
  CHECK((l.J - j_expect).norm() < 1e-15);
}

TEST_CASE("build_lifted matches a brute-force unrolling of the recursion") {
  // Oracle: run the plant recursion symbolically on unit impulses to read
  // off the columns of [F_K J_K N_K] one by one.
  const SystemModel m = reactor_model();
  const int K = 5;
  const Index nx = m.nx(), nu = m.nu();
  const LiftedSystem l = build_lifted(m, K);

  auto unroll = [&](const Vector& x1, const std::vector<Vector>& t,
                    const std::vector<Vector>& u) {
    Matrix stacked(K * nx, 1);
    Vector x = x1;
    for (int k = 0; k < K; ++k) {
      stacked.block(k * nx, 0, nx, 1) = x;
      if (k + 1 < K) x = m.A * x + m.B * u[k] + t[k];
    }
    return stacked;
  };

  const std::vector<Vector> zero_t(K - 1, Vector::Zero(nx));
  const std::vector<Vector> zero_u(K - 1, Vector::Zero(nu));

  for (Index c = 0; c < nx; ++c) {
    const Matrix col = unroll(Vector::Unit(nx, c), zero_t, zero_u);
    CHECK((l.F.col(c) - col.col(0)).norm() < 1e-13);
  }
  for (int k = 0; k < K - 1; ++k)
    for (Index c = 0; c < nx; ++c) {
      auto t = zero_t;
      t[k] = Vector::Unit(nx, c);
      const Matrix col = unroll(Vector::Zero(nx), t, zero_u);
      CHECK((l.J.col(k * nx + c) - col.col(0)).norm() < 1e-13);
    }
  for (int k = 0; k < K - 1; ++k)
    for (Index c = 0; c < nu; ++c) {
      auto u = zero_u;
      u[k] = Vector::Unit(nu, c);
      const Matrix col = unroll(Vector::Zero(nx), zero_t, u);
      CHECK((l.N.col(k * nu + c) - col.col(0)).norm() < 1e-13);
    }
}

TEST_CASE("lifted stacked transition is block unit lower triangular") {
  const SystemModel m = reactor_model();
  const int K = 4;
  const LiftedSystem l = build_lifted(m, K);
  Matrix FJ(l.F.rows(), l.F.cols() + l.J.cols());
  FJ << l.F, l.J;
  for (int i = 0; i < K; ++i) {
    CHECK((FJ.block(i * 4, i * 4, 4, 4) - Matrix::Identity(4, 4)).norm() < 1e-14);
    for (int j = i + 1; j < K; ++j) CHECK(FJ.block(i * 4, j * 4, 4, 4).norm() == 0.0);
  }
  CHECK(min_eigenvalue(l.Q) > 0.0);
}

TEST_CASE("joint_law matches Monte Carlo over stacked trajectories") {
  const SystemModel m = reactor_model();
  const int K = 4;
  const LiftedSystem l = build_lifted(m, K);
  const auto inputs = reactor_inputs(K);
  const Matrix Sv = Matrix::Zero(2 * K, 2 * K);
  const JointLaw law = joint_law(l, m, inputs, Sv);

  const int N = 200000;
  const Index dim = 2 * K + K;  // stacked (y^K, s^K)
  Matrix acc = Matrix::Zero(dim, dim);
  Vector mean = Vector::Zero(dim);
  std::vector<Vector> draws;
  draws.reserve(N);
  for (int r = 0; r < N; ++r) {
    const Trajectory traj = simulate(m, inputs, 10000 + r);
    Vector z(dim);
    for (int k = 0; k < K; ++k) z.segment(2 * k, 2) = traj.y[k];
    for (int k = 0; k < K; ++k) z[2 * K + k] = traj.s[k][0];
    mean += z;
    draws.push_back(std::move(z));
  }
  mean /= N;
  for (const auto& z : draws) acc += (z - mean) * (z - mean).transpose();
  acc /= (N - 1);

  CHECK((acc - law.Sigma_joint).norm() / law.Sigma_joint.norm() <= 0.05);
  Vector mean_expect(dim);
  mean_expect << law.mean_y, law.mean_s;
  CHECK((mean - mean_expect).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("joint_law private block is independent of the mechanism noise") {
  const SystemModel m = reactor_model();
  const int K = 4;
  const LiftedSystem l = build_lifted(m, K);
  const auto inputs = reactor_inputs(K);
  const JointLaw a = joint_law(l, m, inputs, Matrix::Zero(2 * K, 2 * K));
  const JointLaw b = joint_law(l, m, inputs, Matrix::Identity(2 * K, 2 * K));
  CHECK((a.Sigma_s - b.Sigma_s).norm() == 0.0);
  CHECK((a.Sigma_sy - b.Sigma_sy).norm() == 0.0);
  CHECK((b.Sigma_y - a.Sigma_y - Matrix::Identity(2 * K, 2 * K)).norm() < 1e-12);
}

TEST_CASE("joint_law zero input and zero initial mean gives zero mean_s") {
  SystemModel m = reactor_model();
  m.mu_x1 = Vector::Zero(4);
  const int K = 5;
  const LiftedSystem l = build_lifted(m, K);
  const std::vector<Vector> inputs(K - 1, Vector::Zero(1));
  const JointLaw law = joint_law(l, m, inputs, Matrix::Zero(2 * K, 2 * K));
  CHECK(law.mean_s.norm() == 0.0);
  CHECK(law.mean_y.norm() == 0.0);
}

TEST_CASE("mutual_information trivial and scalar cases") {
  JointLaw law;
  law.mean_y = Vector::Zero(1);
  law.mean_s = Vector::Zero(1);
  law.Sigma_y = Matrix::Identity(1, 1);
  law.Sigma_s = Matrix::Identity(1, 1);

  law.Sigma_sy = Matrix::Zero(1, 1);
  law.Sigma_joint = Matrix::Identity(2, 2);
  CHECK(mutual_information(law) == Catch::Approx(0.0).margin(1e-12));

  for (double rho : {0.3, 0.8, -0.6}) {
    law.Sigma_sy = Matrix::Constant(1, 1, rho);
    law.Sigma_joint << 1.0, rho, rho, 1.0;
    CHECK(mutual_information(law) ==
          Catch::Approx(-0.5 * std::log(1.0 - rho * rho)).margin(1e-12));
  }
}

TEST_CASE("mutual_information decreases as mechanism noise grows") {
  const SystemModel m = reactor_model();
  const int K = 4;
  const LiftedSystem l = build_lifted(m, K);
  const auto inputs = reactor_inputs(K);
  double prev = std::numeric_limits<double>::infinity();
  for (double s2 : {0.0, 1.0, 10.0, 100.0}) {
    const JointLaw law = joint_law(l, m, inputs, s2 * Matrix::Identity(2 * K, 2 * K));
    const double mi = mutual_information(law);
    CHECK(mi >= 0.0);
    CHECK(mi < prev + 1e-12);
    prev = mi;
  }
}

TEST_CASE("mutual_information data-processing on nested noise") {
  const SystemModel m = reactor_model();
  const int K = 3;
  const LiftedSystem l = build_lifted(m, K);
  const auto inputs = reactor_inputs(K);
  RngStream rng(21, "dpi");
  for (int trial = 0; trial < 10; ++trial) {
    Matrix Aa = Matrix::NullaryExpr(2 * K, 2 * K, [&](Index, Index) { return rng.normal(); });
    Matrix Ab = Matrix::NullaryExpr(2 * K, 2 * K, [&](Index, Index) { return rng.normal(); });
    const Matrix S1 = Aa * Aa.transpose();
    const Matrix S2 = S1 + Ab * Ab.transpose();  // S2 dominates S1 in PSD order
    const double mi1 = mutual_information(joint_law(l, m, inputs, S1));
    const double mi2 = mutual_information(joint_law(l, m, inputs, S2));
    CHECK(mi2 <= mi1 + 1e-10);
  }
}

TEST_CASE("gaussian_entropy closed forms") {
  const double two_pi_e = 2.0 * std::numbers::pi * std::numbers::e;
  CHECK(gaussian_entropy(Matrix::Constant(1, 1, 1.0 / two_pi_e)) ==
        Catch::Approx(0.0).margin(1e-12));
  for (int mdim : {1, 2, 5}) {
    CHECK(gaussian_entropy(Matrix::Identity(mdim, mdim)) ==
          Catch::Approx(0.5 * mdim * (1.0 + std::log(2.0 * std::numbers::pi))).margin(1e-12));
  }
}

TEST_CASE("gaussian_entropy additive over block diagonals") {
  RngStream rng(33, "entropy-blocks");
  Matrix Aa = Matrix::NullaryExpr(3, 3, [&](Index, Index) { return rng.normal(); });
  Matrix Ab = Matrix::NullaryExpr(2, 2, [&](Index, Index) { return rng.normal(); });
  const Matrix S1 = Aa * Aa.transpose() + 0.5 * Matrix::Identity(3, 3);
  const Matrix S2 = Ab * Ab.transpose() + 0.5 * Matrix::Identity(2, 2);
  Matrix S = Matrix::Zero(5, 5);
  S.topLeftCorner(3, 3) = S1;
  S.bottomRightCorner(2, 2) = S2;
  CHECK(gaussian_entropy(S) ==
        Catch::Approx(gaussian_entropy(S1) + gaussian_entropy(S2)).margin(1e-12));
}

TEST_CASE("logconcave_bounds formula values") {
  // c(1) = e^2 / (12 sqrt(2)) by direct evaluation of the formula.
  const LogConcaveBounds b1 = logconcave_bounds(1, 0.0);
  const double c1_direct = std::exp(2.0) / (12.0 * std::sqrt(2.0));
  CHECK(b1.c_n == Catch::Approx(c1_direct).margin(1e-15));
  CHECK(b1.c_n == Catch::Approx(0.4354043061768065).margin(1e-12));

  for (int n = 1; n <= 10000; n = n < 10 ? n + 1 : n * 3) {
    const LogConcaveBounds b = logconcave_bounds(n, 0.0);
    CHECK(b.C_n > 0.0);
  }
}

TEST_CASE("logconcave_bounds dominate the Gaussian value") {
  RngStream rng(40, "lcb");
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform() * 40);
    const double I = rng.uniform() * 10.0;
    const LogConcaveBounds b = logconcave_bounds(n, I);
    CHECK(b.bound_prop1 >= I);
    CHECK(b.bound_prop2 >= I);
  }
  CHECK_THROWS_AS(logconcave_bounds(0, 1.0), DomainError);
}
