#include <catch2/catch_amalgamated.hpp>

#include "privmon/model.hpp"
#include "support/test_models.hpp"

using namespace privmon;
using testing::reactor_model;
using testing::reactor_inputs;

TEST_CASE("validate_model passes on the reactor") {
  const ValidationReport report = validate_model(reactor_model());
  for (const auto& c : report.checks) {
    INFO(c.name << " measured " << c.measured);
    CHECK(c.passed);
  }
  CHECK(report.all_passed());
}

TEST_CASE("validate_model flags rank-deficient D") {
  SystemModel m = reactor_model();
  m.D = Matrix::Zero(1, 4);
  const ValidationReport report = validate_model(m);
  bool found = false;
  for (const auto& c : report.checks)
    if (c.name == "D full row rank") {
      found = true;
      CHECK_FALSE(c.passed);
    }
  CHECK(found);
}

TEST_CASE("validate_model flags undetectable pair") {
  SystemModel m = reactor_model();
  m.A = 2.0 * Matrix::Identity(4, 4);
  m.C = Matrix::Zero(2, 4);
  const ValidationReport report = validate_model(m);
  bool found = false;
  for (const auto& c : report.checks)
    if (c.name == "(A, C) detectable") {
      found = true;
      CHECK_FALSE(c.passed);
    }
  CHECK(found);
}

TEST_CASE("validate_model reports dimension mismatch before invariants") {
  SystemModel m = reactor_model();
  m.B = Matrix::Zero(3, 1);
  CHECK_THROWS_AS(validate_model(m), DimensionMismatch);
}

TEST_CASE("simulate identity dynamics stays constant") {
  SystemModel m;
  m.A = Matrix::Identity(2, 2);
  m.B = Matrix::Zero(2, 1);
  m.C = Matrix::Identity(2, 2);
  m.D = Matrix::Identity(2, 2);
  m.G = Matrix::Zero(2, 1);
  m.H = Matrix::Zero(2, 1);
  m.Sigma_t = kTolPd * Matrix::Identity(2, 2);
  m.Sigma_w = kTolPd * Matrix::Identity(2, 2);
  m.mu_x1.resize(2);
  m.mu_x1 << 3.0, -1.0;
  m.Sigma_x1 = kTolPd * Matrix::Identity(2, 2);

  const auto inputs = std::vector<Vector>(9, Vector::Zero(1));
  const Trajectory traj = simulate(m, inputs, 1);
  for (int k = 0; k < traj.K; ++k) {
    CHECK((traj.x[k] - m.mu_x1).norm() < 1e-4);
    CHECK((traj.s[k] - m.mu_x1).norm() < 1e-4);
  }
}

TEST_CASE("simulate sample mean of s matches propagated mean") {
  const SystemModel m = reactor_model();
  const int K = 60;
  const auto inputs = reactor_inputs(K);

  // Analytic mean through the recursion.
  std::vector<Vector> mean_x{m.mu_x1};
  for (int k = 0; k + 1 < K; ++k)
    mean_x.push_back(m.A * mean_x.back() + m.B * inputs[k]);

  const int runs = 10000;
  std::vector<double> acc(K, 0.0);
  for (int r = 0; r < runs; ++r) {
    const Trajectory traj = simulate(m, inputs, 1000 + r);
    for (int k = 0; k < K; ++k) acc[k] += traj.s[k][0];
  }
  // Var(s_k) is bounded by the (1,1) entry of the state covariance; use a
  // conservative constant for the 3-sigma band.
  int checked = 0;
  for (int k = 0; k < K; k += 7) {
    const double sample_mean = acc[k] / runs;
    const double analytic = (m.D * mean_x[k])[0];
    const double sd_bound = 3.0;  // std of s_k stays below ~1.9 for this plant
    CHECK(std::abs(sample_mean - analytic) <= 3.0 * sd_bound / std::sqrt(runs));
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("simulate constant fault shifts measurement mean exactly") {
  SystemModel m = reactor_model();
  const int K = 30;
  const auto inputs = reactor_inputs(K);
  const std::vector<Vector> faults(K, Vector::Constant(1, 2.5));
  const Trajectory base = simulate(m, inputs, 42);
  const Trajectory faulty = simulate(m, inputs, faults, 42);
  for (int k = 0; k < K; ++k) {
    const Vector shift = faulty.y[k] - base.y[k];
    CHECK(shift[0] == Catch::Approx(0.0).margin(1e-12));
    CHECK(shift[1] == Catch::Approx(2.5).margin(1e-12));
  }
}

TEST_CASE("simulate is deterministic in the seed") {
  const SystemModel m = reactor_model();
  const auto inputs = reactor_inputs(12);
  const Trajectory a = simulate(m, inputs, 7);
  const Trajectory b = simulate(m, inputs, 7);
  const Trajectory c = simulate(m, inputs, 8);
  for (int k = 0; k < a.K; ++k) {
    CHECK(a.x[k] == b.x[k]);
    CHECK(a.y[k] == b.y[k]);
  }
  bool any_diff = false;
  for (int k = 0; k < a.K; ++k) any_diff = any_diff || a.y[k] != c.y[k];
  CHECK(any_diff);
}

TEST_CASE("simulate rejects mismatched fault horizon") {
  const SystemModel m = reactor_model();
  const auto inputs = reactor_inputs(10);
  const std::vector<Vector> faults(4, Vector::Zero(1));
  CHECK_THROWS_AS(simulate(m, inputs, faults, 1), HorizonMismatch);
}

TEST_CASE("apply_mechanism with zero covariances is the identity") {
  const SystemModel m = reactor_model();
  const int K = 8;
  const Trajectory traj = simulate(m, reactor_inputs(K), 3);
  const Matrix Sv = Matrix::Zero(2 * K, 2 * K);
  const Matrix Sj = Matrix::Zero(K - 1, K - 1);
  const DistortedTrajectory dist = apply_mechanism(traj, Sv, Sj, m, 5);
  for (int k = 0; k < K; ++k) {
    CHECK((dist.y_tilde[k] - traj.y[k]).norm() == 0.0);
    CHECK((dist.base.x[k] - traj.x[k]).norm() == 0.0);
  }
  for (int k = 0; k < K - 1; ++k) CHECK((dist.u_tilde[k] - traj.u[k]).norm() == 0.0);
}

TEST_CASE("apply_mechanism sample covariance matches identity input") {
  const SystemModel m = reactor_model();
  const int K = 60;
  const Trajectory traj = simulate(m, reactor_inputs(K), 11);
  const Matrix Sv = Matrix::Identity(2 * K, 2 * K);
  const Matrix Sj = Matrix::Zero(K - 1, K - 1);

  const int runs = 100000;
  Matrix acc = Matrix::Zero(2 * K, 2 * K);
  Vector mean = Vector::Zero(2 * K);
  std::vector<Vector> vs;
  vs.reserve(runs);
  for (int r = 0; r < runs; ++r) {
    const DistortedTrajectory dist = apply_mechanism(traj, Sv, Sj, m, 1000 + r);
    Vector v(2 * K);
    for (int k = 0; k < K; ++k) v.segment(2 * k, 2) = dist.v[k];
    mean += v;
    vs.push_back(std::move(v));
  }
  mean /= runs;
  for (const auto& v : vs) acc += (v - mean) * (v - mean).transpose();
  acc /= (runs - 1);
  const double rel = (acc - Sv).norm() / Sv.norm();
  CHECK(rel <= 0.05);
}

TEST_CASE("apply_mechanism per-step variances follow distinct blocks") {
  const SystemModel m = reactor_model();
  const int K = 4;
  const Trajectory traj = simulate(m, reactor_inputs(K), 23);
  Matrix Sv = Matrix::Zero(2 * K, 2 * K);
  const double scales[4] = {0.5, 1.0, 2.0, 4.0};
  for (int k = 0; k < K; ++k)
    Sv.block(2 * k, 2 * k, 2, 2) = scales[k] * Matrix::Identity(2, 2);
  const Matrix Sj = Matrix::Zero(K - 1, K - 1);

  const int runs = 100000;
  std::vector<Matrix> acc(K, Matrix::Zero(2, 2));
  for (int r = 0; r < runs; ++r) {
    const DistortedTrajectory dist = apply_mechanism(traj, Sv, Sj, m, 50000 + r);
    for (int k = 0; k < K; ++k) acc[k] += dist.v[k] * dist.v[k].transpose();
  }
  for (int k = 0; k < K; ++k) {
    acc[k] /= runs;
    const Matrix expect = scales[k] * Matrix::Identity(2, 2);
    CHECK((acc[k] - expect).norm() / expect.norm() <= 0.05);
  }
}

TEST_CASE("apply_mechanism distorted state follows the distorted input recursion") {
  const SystemModel m = reactor_model();
  const int K = 12;
  const Trajectory traj = simulate(m, reactor_inputs(K), 31);
  const Matrix Sv = 0.3 * Matrix::Identity(2 * K, 2 * K);
  const Matrix Sj = 2.0 * Matrix::Identity(K - 1, K - 1);
  const DistortedTrajectory dist = apply_mechanism(traj, Sv, Sj, m, 77);

  // Recover the hidden process noise from the base run and check that the
  // distorted state satisfies x_{k+1} = A x_k + B u_tilde_k + t_k.
  for (int k = 0; k + 1 < K; ++k) {
    const Vector t_k = traj.x[k + 1] - m.A * traj.x[k] - m.B * traj.u[k];
    const Vector expect = m.A * dist.base.x[k] + m.B * dist.u_tilde[k] + t_k;
    CHECK((dist.base.x[k + 1] - expect).norm() < 1e-10);
    CHECK((dist.y_tilde[k] - dist.base.y[k] - dist.v[k]).norm() == 0.0);
  }
}

TEST_CASE("apply_mechanism rejects indefinite covariance") {
  const SystemModel m = reactor_model();
  const int K = 3;
  const Trajectory traj = simulate(m, reactor_inputs(K), 2);
  Matrix Sv = Matrix::Identity(2 * K, 2 * K);
  Sv(0, 0) = -1.0;
  CHECK_THROWS_AS(apply_mechanism(traj, Sv, Matrix::Zero(K - 1, K - 1), m, 1), NotPsd);
}
