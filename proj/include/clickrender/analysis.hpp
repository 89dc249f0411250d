#pragma once

#include "clickrender/protocol.hpp"
#include "clickrender/session.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace clickrender {

inline constexpr int kMapDutyMin = 5;
inline constexpr int kMapDutyMax = 50;

/// A subject's acceptable region in (duration, duty) space: boundaries at the
/// measured duties joined linearly. Nothing is extrapolated past the outermost
/// measured duties.
class RegionPolygon {
 public:
  explicit RegionPolygon(const AcceptRegion& region);

  /// Interpolated (min, max) duration at `duty_pct`, or nullopt outside the span.
  std::optional<DutyRegion> at(double duty_pct) const;
  bool contains(double duration_ms, double duty_pct) const;
  /// Outline as (duration, duty) pairs, min side up then max side down; the last vertex joins the first.
  std::vector<std::pair<double, double>> vertices() const;
  bool degenerate() const { return region_.by_duty.size() < 2; }

 private:
  AcceptRegion region_;
};

RegionPolygon subject_region_polygon(const AcceptRegion& region);

/// Subjects agreeing per 1 ms x 1 % cell. Rows: duty 5..50, columns: 1..251 ms.
struct OverlapMap {
  Eigen::MatrixXi counts;
  int n_subjects = 0;

  int at(int duty_pct, int duration_ms) const { return counts(duty_pct - kMapDutyMin, duration_ms - kMinDurationMs); }
  /// [first, last] duration with count == n_subjects in the duty row.
  std::optional<std::pair<int, int>> unanimous_range(int duty_pct) const;
  /// Longest duration any subject accepts in the duty row.
  std::optional<int> max_accepted(int duty_pct) const;
};

OverlapMap overlap_map(const std::vector<AcceptRegion>& regions);

struct PercentCell {
  int n = 0;
  int good = 0;
  int pulse = 0;
  bool flagged = false;  // n differs from 2 x subjects
  double pct_good() const { return n ? 100.0 * good / n : 0.0; }
  double pct_pulse() const { return n ? 100.0 * pulse / n : 0.0; }
};

/// duty -> duration -> cell, from section-1 trials of every session.
using PercentCurves = std::map<int, std::map<int, PercentCell>>;
PercentCurves percentage_curves(const std::vector<SessionRecord>& sessions);

/// Longest sweep duration up to which every trial so far reported a pulse.
std::optional<int> pulse_unanimity_threshold(const std::map<int, PercentCell>& curve);

struct QuadFit {
  double a = 0.0, b = 0.0, c = 0.0;  // rating ~ a d^2 + b d + c
  double rms = 0.0;
  double argmax_ms = 0.0;
  std::size_t n = 0;

  double operator()(double d) const { return (a * d + b) * d + c; }
};

/// Least squares on (duration ms, rating). Needs >= 3 points; with only two
/// distinct durations the curvature is unidentifiable and a line is fitted
/// (a = 0). Throws std::invalid_argument when all durations coincide.
QuadFit fit_quadratic(const std::vector<std::pair<double, double>>& points);

struct GroupAssignment {
  std::string subject;
  int group = 0;  // 0: ungrouped (a duty is missing)
  std::map<int, int> best_ms;
  std::map<int, double> initial_width_ms;
  std::array<int, 3> violations{};  // per group 1..3
};

/// Group 2 when every best pick lies in the shortest third of that duty's
/// acceptable range, group 3 when every pick lies in the longest third, group 1
/// when the pick strictly shortens as duty rises; otherwise the group whose
/// rule is violated least (ties to the lower group). Ranges are optional; with
/// none, only the group-1 rule can match.
GroupAssignment pulse_width_grouping(const std::string& subject, const std::map<int, int>& best_ms,
                                     const std::optional<AcceptRegion>& region = std::nullopt);

struct SubjectFit {
  std::string subject;
  int duty_pct;
  std::vector<std::pair<double, double>> points;  // (duration, rating), all rounds
  QuadFit fit;
};

struct AnalysisResult {
  std::vector<std::string> subjects;
  std::vector<AcceptRegion> regions;
  OverlapMap overlap;
  PercentCurves curves;
  std::vector<SubjectFit> fits;
  std::vector<GroupAssignment> groups;
};

/// Only complete sessions contribute to rating fits and grouping.
AnalysisResult analyze(const std::vector<SessionRecord>& sessions);
nlohmann::json summary_json(const AnalysisResult& r);

/// overlap.csv, percentages.csv, fits.csv, grouping.csv, summary.json and,
/// optionally, SVG renderings.
void write_artifacts(const std::filesystem::path& dir, const AnalysisResult& r, bool svg);
std::vector<std::string> artifact_names(bool svg);
/// Throws std::invalid_argument for a name not in artifact_names(true).
void write_artifact(std::ostream& os, const AnalysisResult& r, const std::string& name);

void write_overlap_svg(std::ostream& os, const AnalysisResult& r);
void write_percentages_svg(std::ostream& os, const AnalysisResult& r);
void write_ratings_svg(std::ostream& os, const AnalysisResult& r);
void write_grouping_svg(std::ostream& os, const AnalysisResult& r);

}  // namespace clickrender
