#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <string>
#include <thread>
#include <vector>

#include "privmon/detector.hpp"
#include "privmon/json_io.hpp"
#include "privmon/synthesis.hpp"

namespace privmon {

struct ExperimentConfig {
  std::string model_path;
  SystemModel model;
  int K = 10;
  double target_far = 0.1;
  std::vector<double> epsilons{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  std::vector<double> detection_epsilons{0.0, 0.1, 0.3, 0.5};
  std::vector<double> roc_epsilons{0.01, 0.3, 0.5};
  std::vector<double> delta_grid{0.0, 1.0, 2.0, 4.0, 8.0, 12.0, 16.0, 24.0, 40.0};
  std::vector<double> roc_deltas{0.1, 1.0, 2.0, 3.0, 4.0};
  double delta = 2.0;  // fixed fault for the privacy ROC
  std::int64_t samples = 100000;
  std::int64_t mc_runs = 20000;
  std::uint64_t seed = 20240811;
  std::string out_dir = ".";
  SolverOptions solver;
  MechanismStructure structure = MechanismStructure::full;
};

/// Named table of formatted cells plus reproducibility metadata. Cells are
/// frozen to strings on insertion so re-emission is byte-identical.
struct ExperimentResult {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  json metadata;
};

namespace edetail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline std::string fmt(int v) { return std::to_string(v); }

inline std::uint64_t fnv1a64_str(const std::string& s) { return detail::fnv1a64(s); }

inline std::vector<Vector> default_inputs(const SystemModel& m, int K) {
  // Reference input of the case study, u_k = 50 cos(0.5 k)^2, broadcast
  // over the input channels.
  std::vector<Vector> u;
  for (int k = 1; k < K; ++k)
    u.push_back(Vector::Constant(m.nu(), 50.0 * std::pow(std::cos(0.5 * k), 2)));
  return u;
}

template <typename Fn>
inline void parallel_rows(int n, Fn&& fn) {
  const unsigned workers =
      std::min<unsigned>(std::max(1u, std::thread::hardware_concurrency()), n > 0 ? n : 1);
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::future<void>> futs;
  for (unsigned w = 0; w < workers; ++w)
    futs.push_back(std::async(std::launch::async, [&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    }));
  for (auto& f : futs) f.get();
}

inline json config_json(const ExperimentConfig& c) {
  json j;
  j["model_path"] = c.model_path;
  j["model"] = to_json(c.model);
  j["K"] = c.K;
  j["target_far"] = c.target_far;
  j["epsilons"] = c.epsilons;
  j["detection_epsilons"] = c.detection_epsilons;
  j["roc_epsilons"] = c.roc_epsilons;
  j["delta_grid"] = c.delta_grid;
  j["roc_deltas"] = c.roc_deltas;
  j["delta"] = c.delta;
  j["samples"] = c.samples;
  j["mc_runs"] = c.mc_runs;
  j["seed"] = c.seed;
  j["structure"] = c.structure == MechanismStructure::full ? "full" : "block_diagonal";
  j["solver"] = {{"gap_tol", c.solver.gap_tol},   {"sigma_min", c.solver.sigma_min},
                 {"cap", c.solver.cap},           {"max_outer", c.solver.max_outer},
                 {"max_inner", c.solver.max_inner}};
  return j;
}

inline std::string config_hash(const json& cfg) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64_str(cfg.dump())));
  return buf;
}

inline json base_metadata(const ExperimentConfig& c) {
  json meta;
  meta["config"] = config_json(c);
  meta["config_hash"] = config_hash(meta["config"]);
  meta["seeds"] = {{"base", c.seed}};
  return meta;
}

}  // namespace edetail

/// Writes `<dir>/<result.name>.csv` (RFC 4180: CRLF, '.' decimal, header
/// row) plus a `<name>.meta.json` sidecar with the config hash and seeds.
/// Wall time stays in the in-memory metadata only, so identical
/// config+seed reruns produce byte-identical files.
inline std::filesystem::path write_csv(const ExperimentResult& result,
                                       const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto csv_path = dir / (result.name + ".csv");
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw DomainError("cannot write " + csv_path.string());
  for (std::size_t i = 0; i < result.columns.size(); ++i)
    out << (i ? "," : "") << result.columns[i];
  out << "\r\n";
  for (const auto& row : result.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\r\n";
  }
  json sidecar = result.metadata;
  sidecar.erase("wall_time_s");
  save_json_file((dir / (result.name + ".meta.json")).string(), sidecar);
  return csv_path;
}

/// Optimal-cost-versus-epsilon sweep. Rows that fail to assemble or solve
/// carry a status instead of aborting the sweep.
inline ExperimentResult run_cost_vs_epsilon(const ExperimentConfig& c) {
  const auto t_start = std::chrono::steady_clock::now();
  const KalmanDesign design = solve_dare(c.model);
  ExperimentResult res;
  res.name = "cost_vs_epsilon";
  res.columns = {"epsilon", "cost", "iterations", "min_margin", "status"};
  res.rows.resize(c.epsilons.size());

  edetail::parallel_rows(static_cast<int>(c.epsilons.size()), [&](int i) {
    const double eps = c.epsilons[i];
    std::vector<std::string> row{edetail::fmt(eps), "", "", "", "ok"};
    try {
      const SynthesisProblem problem =
          assemble(c.model, design, c.K, c.target_far, eps, c.structure);
      const MechanismDesign mech = solve(problem, c.solver);
      double min_margin = mech.lmi_margin;
      for (double m : mech.constraint_margins) min_margin = std::min(min_margin, m);
      row[1] = edetail::fmt(mech.cost);
      row[2] = edetail::fmt(mech.iterations);
      row[3] = edetail::fmt(min_margin);
    } catch (const InfeasibleConfig&) {
      row[4] = "infeasible";
    } catch (const NotConverged&) {
      row[4] = "not_converged";
    } catch (const LineSearchStall&) {
      row[4] = "line_search_stall";
    }
    res.rows[i] = std::move(row);
  });

  res.metadata = edetail::base_metadata(c);
  res.metadata["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return res;
}

/// One simulated trajectory per epsilon with the adversary's MMSE estimates
/// from the undistorted and distorted joint laws.
inline ExperimentResult run_trajectory_comparison(const ExperimentConfig& c) {
  const auto t_start = std::chrono::steady_clock::now();
  const KalmanDesign design = solve_dare(c.model);
  const LiftedSystem lifted = build_lifted(c.model, c.K);
  const std::vector<Vector> inputs = edetail::default_inputs(c.model, c.K);
  const Index ny = c.model.ny(), ns = c.model.ns();

  ExperimentResult res;
  res.name = "trajectory_comparison";
  res.columns = {"epsilon", "k", "y1", "ytilde1", "s", "s_hat_clean", "s_hat_distorted"};

  const Matrix Sigma_v_zero = Matrix::Zero(c.K * ny, c.K * ny);
  const JointLaw clean_law = joint_law(lifted, c.model, inputs, Sigma_v_zero);

  for (std::size_t i = 0; i < c.epsilons.size(); ++i) {
    const double eps = c.epsilons[i];
    const SynthesisProblem problem =
        assemble(c.model, design, c.K, c.target_far, eps, c.structure);
    const MechanismDesign mech = solve(problem, c.solver);

    const Trajectory traj = simulate(c.model, inputs, c.seed + i);
    const DistortedTrajectory dist =
        apply_mechanism(traj, mech.Sigma_v_K, mech.Sigma_j_K, c.model, c.seed + 1000 + i);

    Vector y_obs(c.K * ny), yt_obs(c.K * ny);
    for (int k = 0; k < c.K; ++k) {
      y_obs.segment(k * ny, ny) = traj.y[k];
      yt_obs.segment(k * ny, ny) = dist.y_tilde[k];
    }
    const JointLaw dist_law = joint_law(lifted, c.model, inputs, mech.Sigma_v_K);
    const MmseEstimate clean = mmse_estimate(clean_law.mean_s, clean_law.mean_y,
                                             clean_law.Sigma_s, clean_law.Sigma_sy,
                                             clean_law.Sigma_y, y_obs);
    const MmseEstimate distorted = mmse_estimate(dist_law.mean_s, dist_law.mean_y,
                                                 dist_law.Sigma_s, dist_law.Sigma_sy,
                                                 dist_law.Sigma_y, yt_obs);
    for (int k = 0; k < c.K; ++k) {
      res.rows.push_back({edetail::fmt(eps), edetail::fmt(k + 1),
                          edetail::fmt(traj.y[k][0]), edetail::fmt(dist.y_tilde[k][0]),
                          edetail::fmt(dist.base.s[k][0]),
                          edetail::fmt(clean.s_hat[k * ns]),
                          edetail::fmt(distorted.s_hat[k * ns])});
    }
  }
  res.metadata = edetail::base_metadata(c);
  res.metadata["input"] = "u_k = 50 cos(0.5 k)^2";
  res.metadata["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return res;
}

/// False-alarm-rate sweep: Welch-Satterthwaite analytic rate versus a Monte
/// Carlo estimate over draws of the distorted residual law at the
/// representative step k* = K-1, against the designed bound A* + epsilon.
inline ExperimentResult run_far_sweep(const ExperimentConfig& c) {
  const auto t_start = std::chrono::steady_clock::now();
  const KalmanDesign design = solve_dare(c.model);
  const Index ny = c.model.ny(), nu = c.model.nu();
  ExperimentResult res;
  res.name = "far_sweep";
  res.columns = {"epsilon", "far_analytic", "far_empirical", "far_stderr", "bound", "status"};
  res.rows.resize(c.epsilons.size());

  edetail::parallel_rows(static_cast<int>(c.epsilons.size()), [&](int i) {
    const double eps = c.epsilons[i];
    const double bound = std::min(1.0, c.target_far + eps);
    std::vector<std::string> row{edetail::fmt(eps), "", "", "", edetail::fmt(bound), "ok"};
    try {
      const SynthesisProblem problem =
          assemble(c.model, design, c.K, c.target_far, eps, c.structure);
      const MechanismDesign mech = solve(problem, c.solver);
      const int k = std::max(0, c.K - 2);  // step K-1: has both v and j blocks
      const Matrix Svk = mech.Sigma_v_K.block(k * ny, k * ny, ny, ny);
      const Matrix Sjk = c.K > 1 ? Matrix(mech.Sigma_j_K.block(
                                       std::min(k, problem.j_blocks - 1) * nu,
                                       std::min(k, problem.j_blocks - 1) * nu, nu, nu))
                                 : mech.Sigma_j_K;
      const Matrix Sigma_tilde = distorted_residual_cov(design, c.model, Svk, Sjk);
      const double ana = false_alarm_rate_analytic(Sigma_tilde, design.Sigma_r, problem.alpha);
      const Matrix root = symmetric_sqrt(Sigma_tilde);
      const Matrix sigma_prime = root * inverse_pd_guarded(design.Sigma_r) * root;
      const McProbability cdf = generalized_chi2_cdf_mc(
          sigma_prime, Vector::Zero(ny), problem.alpha, c.samples, c.seed + 97 * i);
      const double emp = 1.0 - cdf.value;
      row[1] = edetail::fmt(ana);
      row[2] = edetail::fmt(emp);
      row[3] = edetail::fmt(cdf.std_error);
      if (emp > bound + 3.0 * cdf.std_error) row[5] = "bound_violated";
    } catch (const InfeasibleConfig&) {
      row[5] = "infeasible";
    } catch (const NotConverged&) {
      row[5] = "not_converged";
    }
    res.rows[i] = std::move(row);
  });

  res.metadata = edetail::base_metadata(c);
  res.metadata["evaluation_step"] = c.K - 1;
  res.metadata["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return res;
}

struct DetectionRocResult {
  ExperimentResult detection;
  ExperimentResult roc;
};

/// Detection-rate-versus-fault table for each configured epsilon, plus ROC
/// tables: no-privacy curves over roc_deltas and privacy curves at the fixed
/// fault for each roc epsilon. The target_far = 0.3 row is flagged.
inline DetectionRocResult run_detection_and_roc(const ExperimentConfig& c) {
  const auto t_start = std::chrono::steady_clock::now();
  const KalmanDesign design = solve_dare(c.model);
  const Index ny = c.model.ny(), nu = c.model.nu();
  const double alpha = threshold_alpha(c.target_far, static_cast<int>(ny));
  const Vector delta_dir = Vector::Ones(c.model.ndelta());

  auto sigma_tilde_for = [&](double eps) {
    const SynthesisProblem problem =
        assemble(c.model, design, c.K, c.target_far, eps, c.structure);
    const MechanismDesign mech = solve(problem, c.solver);
    const int k = std::max(0, c.K - 2);
    const Matrix Svk = mech.Sigma_v_K.block(k * ny, k * ny, ny, ny);
    const Matrix Sjk = c.K > 1 ? Matrix(mech.Sigma_j_K.block(
                                     std::min(k, problem.j_blocks - 1) * nu,
                                     std::min(k, problem.j_blocks - 1) * nu, nu, nu))
                               : mech.Sigma_j_K;
    return distorted_residual_cov(design, c.model, Svk, Sjk);
  };

  DetectionRocResult out;
  out.detection.name = "detection_rates";
  out.detection.columns = {"epsilon", "delta", "det_rate", "std_error"};
  for (double eps : c.detection_epsilons) {
    Matrix Sigma_tilde;
    const bool with_privacy = eps > 0.0;
    if (with_privacy) Sigma_tilde = sigma_tilde_for(eps);
    for (std::size_t di = 0; di < c.delta_grid.size(); ++di) {
      const double delta = c.delta_grid[di];
      const Vector rdel =
          fault_residual_mean_steady(c.model, design, delta * delta_dir);
      double rate, se;
      if (with_privacy) {
        const McProbability mc = detection_rate_with_privacy(
            rdel, Sigma_tilde, design.Sigma_r, alpha, c.samples,
            c.seed + 131 * di + static_cast<std::uint64_t>(1000 * eps));
        rate = mc.value;
        se = mc.std_error;
      } else {
        rate = detection_rate_no_privacy(rdel, design.Sigma_r, alpha);
        se = 0.0;
      }
      out.detection.rows.push_back({edetail::fmt(eps), edetail::fmt(delta),
                                    edetail::fmt(rate), edetail::fmt(se)});
    }
  }

  // Threshold sweep grid: wide log-then-linear coverage so every curve spans
  // the full achievable false-alarm range; includes the flagged 0.3 point.
  std::vector<double> far_grid;
  for (int i = 0; i < 18; ++i) far_grid.push_back(std::pow(10.0, -10.0 + 9.0 * i / 17.0));
  for (int i = 0; i < 18; ++i) far_grid.push_back(0.12 + (0.98 - 0.12) * i / 17.0);
  far_grid.push_back(0.3);
  std::sort(far_grid.begin(), far_grid.end());
  far_grid.erase(std::unique(far_grid.begin(), far_grid.end()), far_grid.end());

  out.roc.name = "roc";
  out.roc.columns = {"kind",     "delta", "epsilon",  "target_far", "alpha",
                     "far",      "det_rate", "std_error", "flagged"};
  auto emit_curve = [&](const std::string& kind, double delta, double eps,
                        const RocCurve& curve) {
    for (const auto& p : curve.points)
      out.roc.rows.push_back({kind, edetail::fmt(delta), edetail::fmt(eps),
                              edetail::fmt(p.target_far), edetail::fmt(p.alpha),
                              edetail::fmt(p.far), edetail::fmt(p.det_rate),
                              edetail::fmt(p.std_error), p.flagged ? "1" : "0"});
  };
  for (double delta : c.roc_deltas) {
    const Vector rdel = fault_residual_mean_steady(c.model, design, delta * delta_dir);
    emit_curve("no_privacy", delta, 0.0,
               roc_curve(rdel, design.Sigma_r, design.Sigma_r, far_grid, c.samples,
                         c.seed + static_cast<std::uint64_t>(10 * delta), 0.3));
  }
  {
    const Vector rdel = fault_residual_mean_steady(c.model, design, c.delta * delta_dir);
    for (double eps : c.roc_epsilons) {
      const Matrix Sigma_tilde = sigma_tilde_for(eps);
      emit_curve("privacy", c.delta, eps,
                 roc_curve(rdel, Sigma_tilde, design.Sigma_r, far_grid, c.samples,
                           c.seed + static_cast<std::uint64_t>(100000 * eps), 0.3));
    }
  }

  out.detection.metadata = edetail::base_metadata(c);
  out.roc.metadata = out.detection.metadata;
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  out.detection.metadata["wall_time_s"] = wall;
  out.roc.metadata["wall_time_s"] = wall;
  return out;
}

}  // namespace privmon
