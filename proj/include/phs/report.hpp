#pragma once

// JSON views of the analysis results. Complex matrices are written as rows of [re, im] pairs.

#include <nlohmann/json.hpp>

#include "phs/control_sim.hpp"
#include "phs/scalar_semigroups.hpp"

namespace phs {

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline nlohmann::json to_json(const CMatrix& m) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    out.push_back(std::move(row));
  }
  return out;
}

inline nlohmann::json to_json(const AssumptionVerdicts& v) {
  return {{"delta_bounded", {{"sup", finite_or_null(v.delta_sup)}, {"passed", v.a_pass}}},
          {"S_isomorphism", {{"pencil_min", finite_or_null(v.pencil_min)}, {"pencil_max", finite_or_null(v.pencil_max)}, {"passed", v.b_pass}}},
          {"B_bounded", {{"K1", finite_or_null(v.K1)}, {"passed", v.c_pass}}},
          {"C_well_defined", {{"K2", finite_or_null(v.K2)}, {"passed", v.d_pass}}},
          {"W_B_rank", {{"rank", v.rank_W_B}, {"passed", v.e_pass}}},
          {"note", v.note}};
}

inline nlohmann::json to_json(const GenerationReport& r) {
  return {{"generator", r.generator},
          {"n_plus", r.n_plus},
          {"n_minus", r.n_minus},
          {"branch", r.branch},
          {"U1", to_json(r.U1)},
          {"U2", to_json(r.U2)},
          {"sigma_min_U2", r.sigma_min_U2},
          {"sigma_max_U2", r.sigma_max_U2},
          {"Z_minus_basis", to_json(r.Z_minus_basis)},
          {"rank_cross", r.rank_cross},
          {"criterion_U2_invertible", r.verdict_ii},
          {"criterion_trace_range", r.verdict_iii},
          {"criterion_agree", r.criterion_agree},
          {"assumptions", to_json(r.assumptions)},
          {"P0_present", r.P0_present},
          {"H_bound", r.H_bound},
          {"derivative_mode", r.derivative_mode},
          {"notes", r.notes}};
}

inline nlohmann::json to_json(const AuditReport& a) {
  return {{"max_residual", finite_or_null(a.max_residual)},
          {"bound", a.bound},
          {"multipliers", a.multipliers},
          {"passed", a.passed}};
}

inline nlohmann::json to_json(const CertificateReport& c) {
  nlohmann::json ratios = nlohmann::json::array();
  for (double r : c.ratios) ratios.push_back(finite_or_null(r));
  return {{"tau", c.tau},
          {"trials", c.trials},
          {"ratios", ratios},
          {"m_tau", finite_or_null(c.m_tau)},
          {"m_tau_refined", finite_or_null(c.m_tau_refined)},
          {"drift", finite_or_null(c.drift)},
          {"finite", c.finite},
          {"stable", c.stable},
          {"passed", c.passed}};
}

inline nlohmann::json to_json(const PropertyReport& r) {
  auto props = nlohmann::json::array();
  for (const auto& p : r.properties)
    props.push_back({{"name", p.name},
                     {"passed", p.passed},
                     {"max_residual", finite_or_null(p.max_residual)},
                     {"tolerance", p.tolerance},
                     {"note", p.note}});
  return {{"suite", r.suite}, {"passed", r.passed()}, {"properties", props}};
}

}  // namespace phs
