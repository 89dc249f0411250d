#include "clickrender/analysis.hpp"

#include "clickrender/format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace clickrender {

RegionPolygon::RegionPolygon(const AcceptRegion& region) : region_(region) {
  if (region_.empty()) throw std::invalid_argument("region polygon needs at least one duty");
}

std::optional<DutyRegion> RegionPolygon::at(double duty_pct) const {
  const auto& m = region_.by_duty;
  if (duty_pct < m.begin()->first || duty_pct > m.rbegin()->first) return std::nullopt;
  auto hi = m.lower_bound(static_cast<int>(std::ceil(duty_pct)));
  if (hi->first == duty_pct || hi == m.begin()) return hi->second;
  auto lo = std::prev(hi);
  const double f = (duty_pct - lo->first) / (hi->first - lo->first);
  return DutyRegion{lo->second.min_ms + f * (hi->second.min_ms - lo->second.min_ms),
                    lo->second.max_ms + f * (hi->second.max_ms - lo->second.max_ms)};
}

bool RegionPolygon::contains(double duration_ms, double duty_pct) const {
  const auto r = at(duty_pct);
  return r && duration_ms >= r->min_ms && duration_ms <= r->max_ms;
}

std::vector<std::pair<double, double>> RegionPolygon::vertices() const {
  std::vector<std::pair<double, double>> v;
  for (const auto& [duty, r] : region_.by_duty) v.emplace_back(r.min_ms, duty);
  for (auto it = region_.by_duty.rbegin(); it != region_.by_duty.rend(); ++it) v.emplace_back(it->second.max_ms, it->first);
  return v;
}

RegionPolygon subject_region_polygon(const AcceptRegion& region) { return RegionPolygon(region); }

std::optional<std::pair<int, int>> OverlapMap::unanimous_range(int duty_pct) const {
  std::optional<std::pair<int, int>> out;
  if (n_subjects == 0) return out;
  for (int d = kMinDurationMs; d <= kMaxDurationMs; ++d) {
    if (at(duty_pct, d) != n_subjects) continue;
    if (!out) out = std::pair{d, d};
    out->second = d;
  }
  return out;
}

std::optional<int> OverlapMap::max_accepted(int duty_pct) const {
  for (int d = kMaxDurationMs; d >= kMinDurationMs; --d)
    if (at(duty_pct, d) > 0) return d;
  return std::nullopt;
}

OverlapMap overlap_map(const std::vector<AcceptRegion>& regions) {
  OverlapMap m;
  m.n_subjects = static_cast<int>(regions.size());
  m.counts = Eigen::MatrixXi::Zero(kMapDutyMax - kMapDutyMin + 1, kMaxDurationMs - kMinDurationMs + 1);
  for (const auto& region : regions) {
    if (region.empty()) continue;
    const RegionPolygon poly(region);
    for (int duty = kMapDutyMin; duty <= kMapDutyMax; ++duty) {
      const auto r = poly.at(duty);
      if (!r) continue;
      for (int d = kMinDurationMs; d <= kMaxDurationMs; ++d)
        if (d >= r->min_ms && d <= r->max_ms) ++m.counts(duty - kMapDutyMin, d - kMinDurationMs);
    }
  }
  return m;
}

PercentCurves percentage_curves(const std::vector<SessionRecord>& sessions) {
  PercentCurves curves;
  for (int duty : kDutyLevels)
    for (int d : sweep_durations(Direction::Increasing)) curves[duty][d];
  for (const auto& s : sessions) {
    for (const auto& t : s.trials) {
      if (t.section != 1) continue;
      PercentCell& c = curves[t.duty_pct][t.duration_ms];
      ++c.n;
      c.good += *t.acceptable ? 1 : 0;
      c.pulse += *t.percept == Percept::Pulse ? 1 : 0;
    }
  }
  const int expected = 2 * static_cast<int>(sessions.size());
  for (auto& [duty, row] : curves)
    for (auto& [d, c] : row) c.flagged = c.n != expected;
  return curves;
}

std::optional<int> pulse_unanimity_threshold(const std::map<int, PercentCell>& curve) {
  std::optional<int> last;
  for (const auto& [d, c] : curve) {
    if (c.n == 0 || c.pulse != c.n) break;
    last = d;
  }
  return last;
}

QuadFit fit_quadratic(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw std::invalid_argument("fit_quadratic: need at least 3 points");
  std::set<double> distinct;
  for (const auto& [d, r] : points) {
    if (!std::isfinite(d) || !std::isfinite(r)) throw std::invalid_argument("fit_quadratic: non-finite point");
    distinct.insert(d);
  }
  if (distinct.size() < 2) throw std::invalid_argument("fit_quadratic: all durations coincide");

  // Center and scale durations so the design stays well conditioned.
  const double lo = *distinct.begin(), hi = *distinct.rbegin();
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  const int cols = distinct.size() >= 3 ? 3 : 2;
  Eigen::MatrixXd X(n, cols);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = (points[i].first - mid) / half;
    X(i, 0) = 1.0;
    X(i, 1) = x;
    if (cols == 3) X(i, 2) = x * x;
    y(i) = points[i].second;
  }
  const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
  const double c0 = beta(0), c1 = beta(1), c2 = cols == 3 ? beta(2) : 0.0;

  QuadFit f;
  f.n = points.size();
  f.a = c2 / (half * half);
  f.b = c1 / half - 2.0 * c2 * mid / (half * half);
  f.c = c0 - c1 * mid / half + c2 * mid * mid / (half * half);
  f.rms = std::sqrt((X * beta - y).squaredNorm() / static_cast<double>(n));

  const double vertex_x = c2 < 0.0 ? -c1 / (2.0 * c2) : 0.0;
  if (c2 < 0.0 && vertex_x >= -1.0 && vertex_x <= 1.0) {
    f.argmax_ms = mid + half * vertex_x;
  } else {
    const double at_lo = c0 - c1 + c2, at_hi = c0 + c1 + c2;
    f.argmax_ms = at_hi > at_lo ? hi : lo;
  }
  return f;
}

GroupAssignment pulse_width_grouping(const std::string& subject, const std::map<int, int>& best_ms,
                                     const std::optional<AcceptRegion>& region) {
  GroupAssignment g;
  g.subject = subject;
  g.best_ms = best_ms;
  for (const auto& [duty, d] : best_ms) g.initial_width_ms[duty] = duty / 100.0 * d;
  for (int duty : kDutyLevels)
    if (!best_ms.count(duty)) return g;

  // Group 1: strictly shorter pick at each higher duty.
  for (std::size_t i = 1; i < kDutyLevels.size(); ++i)
    if (!(best_ms.at(kDutyLevels[i]) < best_ms.at(kDutyLevels[i - 1]))) ++g.violations[0];
  // Groups 2/3: position of the pick within that duty's acceptable range.
  for (int duty : kDutyLevels) {
    const DutyRegion* r = region ? region->at(duty) : nullptr;
    if (!r || r->max_ms <= r->min_ms) {
      ++g.violations[1];
      ++g.violations[2];
      continue;
    }
    const double u = (best_ms.at(duty) - r->min_ms) / (r->max_ms - r->min_ms);
    if (u > 1.0 / 3.0) ++g.violations[1];
    if (u < 2.0 / 3.0) ++g.violations[2];
  }
  if (g.violations[1] == 0) g.group = 2;
  else if (g.violations[2] == 0) g.group = 3;
  else if (g.violations[0] == 0) g.group = 1;
  else g.group = 1 + static_cast<int>(std::min_element(g.violations.begin(), g.violations.end()) - g.violations.begin());
  return g;
}

AnalysisResult analyze(const std::vector<SessionRecord>& sessions) {
  AnalysisResult out;
  for (const auto& s : sessions) {
    out.subjects.push_back(s.subject_label);
    if (s.region) out.regions.push_back(*s.region);
  }
  out.overlap = overlap_map(out.regions);
  out.curves = percentage_curves(sessions);

  for (const auto& s : sessions) {
    if (s.status != SessionStatus::Complete) continue;
    std::map<int, std::vector<std::pair<double, double>>> points;
    for (const auto& t : s.trials)
      if (t.section == 2) points[t.duty_pct].emplace_back(t.duration_ms, *t.rating);
    for (auto& [duty, pts] : points) {
      SubjectFit sf{s.subject_label, duty, std::move(pts), {}};
      std::set<double> distinct;
      for (const auto& p : sf.points) distinct.insert(p.first);
      if (sf.points.size() >= 3 && distinct.size() >= 2) sf.fit = fit_quadratic(sf.points);
      out.fits.push_back(std::move(sf));
    }
    std::map<int, int> best;
    if (!s.rounds.empty())
      for (const auto& d : s.rounds.back().duties)
        if (d.best_ms) best[d.duty_pct] = *d.best_ms;
    out.groups.push_back(pulse_width_grouping(s.subject_label, best, s.region));
  }
  return out;
}

nlohmann::json summary_json(const AnalysisResult& r) {
  nlohmann::json duties = nlohmann::json::object();
  for (int duty : kDutyLevels) {
    nlohmann::json d;
    const auto u = r.overlap.unanimous_range(duty);
    d["unanimous_yes_ms"] = u ? nlohmann::json::array({u->first, u->second}) : nlohmann::json();
    const auto m = r.overlap.max_accepted(duty);
    d["max_accepted_ms"] = m ? nlohmann::json(*m) : nlohmann::json();
    auto it = r.curves.find(duty);
    const auto g = it == r.curves.end() ? std::nullopt : pulse_unanimity_threshold(it->second);
    d["pulse_unanimity_ms"] = g ? nlohmann::json(*g) : nlohmann::json();
    duties[std::to_string(duty)] = d;
  }
  std::map<int, int> sizes{{1, 0}, {2, 0}, {3, 0}};
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : r.groups) {
    ++sizes[g.group];
    nlohmann::json best = nlohmann::json::object(), width = nlohmann::json::object();
    for (const auto& [duty, ms] : g.best_ms) best[std::to_string(duty)] = ms;
    for (const auto& [duty, w] : g.initial_width_ms) width[std::to_string(duty)] = w;
    groups.push_back({{"subject", g.subject}, {"group", g.group}, {"best_ms", best}, {"initial_width_ms", width}});
  }
  nlohmann::json size_json = nlohmann::json::object();
  for (const auto& [k, v] : sizes) size_json[std::to_string(k)] = v;
  return {{"schema", "clickrender.summary/1"},
          {"subjects", r.subjects},
          {"n_regions", r.overlap.n_subjects},
          {"duties", duties},
          {"group_sizes", size_json},
          {"groups", groups}};
}

std::vector<std::string> artifact_names(bool svg) {
  std::vector<std::string> names{"overlap.csv", "percentages.csv", "fits.csv", "grouping.csv", "summary.json"};
  if (svg) names.insert(names.end(), {"overlap.svg", "percentages.svg", "ratings.svg", "grouping.svg"});
  return names;
}

void write_artifact(std::ostream& os, const AnalysisResult& r, const std::string& name) {
  if (name == "overlap.csv") {
    os << "duty_pct,duration_ms,count\n";
    for (int duty = kMapDutyMin; duty <= kMapDutyMax; ++duty)
      for (int d = kMinDurationMs; d <= kMaxDurationMs; ++d) os << duty << ',' << d << ',' << r.overlap.at(duty, d) << '\n';
  } else if (name == "percentages.csv") {
    os << "duty_pct,duration_ms,n,pct_good,pct_pulse,flagged\n";
    for (const auto& [duty, row] : r.curves)
      for (const auto& [d, c] : row)
        os << duty << ',' << d << ',' << c.n << ',' << fmt_double(c.pct_good()) << ',' << fmt_double(c.pct_pulse())
           << ',' << (c.flagged ? 1 : 0) << '\n';
  } else if (name == "fits.csv") {
    os << "subject,duty_pct,n,a,b,c,rms,argmax_ms\n";
    for (const auto& f : r.fits)
      os << f.subject << ',' << f.duty_pct << ',' << f.fit.n << ',' << fmt_double(f.fit.a) << ','
         << fmt_double(f.fit.b) << ',' << fmt_double(f.fit.c) << ',' << fmt_double(f.fit.rms) << ','
         << fmt_double(f.fit.argmax_ms) << '\n';
  } else if (name == "grouping.csv") {
    os << "subject,group,best_5,best_25,best_50,width_5,width_25,width_50\n";
    for (const auto& g : r.groups) {
      os << g.subject << ',' << g.group;
      for (int duty : kDutyLevels) {
        os << ',';
        if (g.best_ms.count(duty)) os << g.best_ms.at(duty);
      }
      for (int duty : kDutyLevels) {
        os << ',';
        if (g.initial_width_ms.count(duty)) os << fmt_double(g.initial_width_ms.at(duty));
      }
      os << '\n';
    }
  } else if (name == "summary.json") {
    os << summary_json(r).dump(2) << '\n';
  } else if (name == "overlap.svg") {
    write_overlap_svg(os, r);
  } else if (name == "percentages.svg") {
    write_percentages_svg(os, r);
  } else if (name == "ratings.svg") {
    write_ratings_svg(os, r);
  } else if (name == "grouping.svg") {
    write_grouping_svg(os, r);
  } else {
    throw std::invalid_argument("unknown analysis artifact '" + name + "'");
  }
}

void write_artifacts(const std::filesystem::path& dir, const AnalysisResult& r, bool svg) {
  std::filesystem::create_directories(dir);
  for (const auto& name : artifact_names(svg)) {
    std::ofstream os(dir / name);
    if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
    write_artifact(os, r, name);
  }
}

}  // namespace clickrender
