#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace clickrender {

/// Fixed-rate recording of the virtual force sensor and displacement probes.
/// All channels share one sample period; sample i sits at t0_s + i * sample_period_s.
struct Trace {
  double sample_period_s = 1e-5;
  double t0_s = 0.0;
  Eigen::VectorXd lateral_mN;
  Eigen::VectorXd normal_mN;
  Eigen::VectorXd command_mN;  // commanded lateral force, kept for comparisons; not exported
  std::vector<std::pair<std::string, Eigen::VectorXd>> displacement_um;

  Eigen::Index size() const { return lateral_mN.size(); }
  double time(Eigen::Index i) const { return t0_s + static_cast<double>(i) * sample_period_s; }
  double duration_s() const { return static_cast<double>(size()) * sample_period_s; }

  /// Throws std::out_of_range for an unknown finger.
  const Eigen::VectorXd& displacement(const std::string& finger_id) const;

  /// Checks the shared-length/period invariants; throws std::logic_error.
  void validate() const;
};

/// Header `t_s,lateral_mN,normal_mN,disp_um_<finger_id>...`.
void write_trace_csv(std::ostream& os, const Trace& trace);
Trace read_trace_csv(std::istream& is);

}  // namespace clickrender
