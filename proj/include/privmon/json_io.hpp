#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "privmon/common.hpp"
#include "privmon/estimation.hpp"
#include "privmon/model.hpp"
#include "privmon/synthesis.hpp"

namespace privmon {

using nlohmann::json;

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, const std::string& name) {
  if (!j.is_array()) throw DomainError("matrix field '" + name + "' must be an array of rows");
  const Index rows = static_cast<Index>(j.size());
  if (rows == 0) return Matrix(0, 0);
  const Index cols = static_cast<Index>(j[0].size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (static_cast<Index>(j[i].size()) != cols)
      throw DomainError("matrix field '" + name + "' has ragged rows");
    for (Index c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

inline json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Vector vector_from_json(const json& j, const std::string& name) {
  if (!j.is_array()) throw DomainError("vector field '" + name + "' must be an array");
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

inline json to_json(const SystemModel& m) {
  json j;
  j["A"] = matrix_to_json(m.A);
  j["B"] = matrix_to_json(m.B);
  j["C"] = matrix_to_json(m.C);
  j["D"] = matrix_to_json(m.D);
  j["G"] = matrix_to_json(m.G);
  j["H"] = matrix_to_json(m.H);
  j["Sigma_t"] = matrix_to_json(m.Sigma_t);
  j["Sigma_w"] = matrix_to_json(m.Sigma_w);
  j["mu_x1"] = vector_to_json(m.mu_x1);
  j["Sigma_x1"] = matrix_to_json(m.Sigma_x1);
  return j;
}

inline SystemModel system_model_from_json(const json& j) {
  SystemModel m;
  m.A = matrix_from_json(j.at("A"), "A");
  m.B = matrix_from_json(j.at("B"), "B");
  m.C = matrix_from_json(j.at("C"), "C");
  m.D = matrix_from_json(j.at("D"), "D");
  m.G = matrix_from_json(j.at("G"), "G");
  m.H = matrix_from_json(j.at("H"), "H");
  m.Sigma_t = matrix_from_json(j.at("Sigma_t"), "Sigma_t");
  m.Sigma_w = matrix_from_json(j.at("Sigma_w"), "Sigma_w");
  m.mu_x1 = vector_from_json(j.at("mu_x1"), "mu_x1");
  m.Sigma_x1 = matrix_from_json(j.at("Sigma_x1"), "Sigma_x1");
  return m;
}

inline json to_json(const KalmanDesign& d) {
  json j;
  j["P"] = matrix_to_json(d.P);
  j["L"] = matrix_to_json(d.L);
  j["Sigma_r"] = matrix_to_json(d.Sigma_r);
  return j;
}

inline KalmanDesign kalman_design_from_json(const json& j) {
  KalmanDesign d;
  d.P = matrix_from_json(j.at("P"), "P");
  d.L = matrix_from_json(j.at("L"), "L");
  d.Sigma_r = matrix_from_json(j.at("Sigma_r"), "Sigma_r");
  return d;
}

inline json to_json(const MechanismDesign& d) {
  json j;
  j["Sigma_v_K"] = matrix_to_json(d.Sigma_v_K);
  j["Sigma_j_K"] = matrix_to_json(d.Sigma_j_K);
  j["Pi_K"] = matrix_to_json(d.Pi_K);
  j["cost"] = d.cost;
  j["objective"] = d.objective;
  j["constraint_margins"] = d.constraint_margins;
  j["lmi_margin"] = d.lmi_margin;
  j["iterations"] = d.iterations;
  j["gap"] = d.gap;
  j["status"] = d.solve_status == SolveStatus::converged ? "converged" : "not_converged";
  j["cap_active"] = d.cap_active;
  return j;
}

inline MechanismDesign mechanism_design_from_json(const json& j) {
  MechanismDesign d;
  d.Sigma_v_K = matrix_from_json(j.at("Sigma_v_K"), "Sigma_v_K");
  d.Sigma_j_K = matrix_from_json(j.at("Sigma_j_K"), "Sigma_j_K");
  d.Pi_K = matrix_from_json(j.at("Pi_K"), "Pi_K");
  d.cost = j.at("cost").get<double>();
  d.objective = j.at("objective").get<double>();
  d.constraint_margins = j.at("constraint_margins").get<std::vector<double>>();
  d.lmi_margin = j.at("lmi_margin").get<double>();
  d.iterations = j.at("iterations").get<int>();
  d.gap = j.at("gap").get<double>();
  d.solve_status = j.at("status").get<std::string>() == "converged"
                       ? SolveStatus::converged
                       : SolveStatus::not_converged;
  d.cap_active = j.at("cap_active").get<bool>();
  return d;
}

inline json to_json(const VerificationReport& r) {
  json j;
  j["constraint_margins"] = r.constraint_margins;
  j["lmi_margin"] = r.lmi_margin;
  j["cost_recomputed"] = r.cost_recomputed;
  j["cost_reported"] = r.cost_reported;
  j["far_empirical"] = r.far_empirical;
  j["far_std_error"] = r.far_std_error;
  j["far_bound"] = r.far_bound;
  j["margins_ok"] = r.margins_ok;
  j["cost_ok"] = r.cost_ok;
  j["far_ok"] = r.far_ok;
  return j;
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open file: " + path);
  json j;
  in >> j;
  return j;
}

inline void save_json_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

inline SystemModel load_model(const std::string& path) {
  return system_model_from_json(load_json_file(path));
}

}  // namespace privmon
