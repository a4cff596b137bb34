#pragma once

#include <iosfwd>
#include <string>

#include "scgoal/adaptive.hpp"
#include "scgoal/problems.hpp"

namespace scgoal {

inline constexpr const char* kHistoryHeader =
    "iter,dofs,n_points,n_vertices,refine_type,mu_bar,tau_bar,eta_bar,sigma_bar,"
    "mu,tau,eta,sigma,Q_uncorrected,Q_corrected,estimate";

std::string format_double(double v);  // 17 significant digits
std::string history_csv(const std::vector<HistoryRow>& rows);

std::string qoi_json(const std::vector<std::pair<int, QoiRecord>>& records);
std::string report_json(const EstimatorReport& report);
std::string index_set_json(const MultiIndexSet& iset);
std::string summary_json(const ProblemDefinition& problem, const RunConfig& config,
                         const RunResult& result);

/// Flat key=value configuration file; '#' starts a comment.
struct FileConfig {
  RunConfig run;
  int setup_id = 0;                 // 0: custom problem
  std::string out_dir = "out";
  bool has_custom = false;
  ProblemDefinition custom;
  std::string custom_transform = "affine";
  int custom_M = 4;
  double custom_amplitude = 1.0;
  std::vector<FourierMode> custom_modes;  // explicit mode table, optional
};

FileConfig parse_config_file(const std::string& path);
void apply_config_line(FileConfig& cfg, const std::string& key, const std::string& value);

}  // namespace scgoal
