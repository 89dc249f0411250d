#include "clickrender/analysis.hpp"

#include <doctest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

using namespace clickrender;

namespace {

using Points = std::vector<std::pair<double, double>>;

AcceptRegion fig_region() {
  AcceptRegion r;
  r.by_duty = {{5, {70, 130}}, {25, {25, 55}}, {50, {10, 30}}};
  return r;
}

// Independent least squares: raw-power normal equations solved by Cramer's
// rule in 50-digit arithmetic, so conditioning of the raw basis does not matter.
using Wide = boost::multiprecision::cpp_bin_float_50;

std::array<Wide, 3> normal_equations(const Points& pts) {
  Wide s[5] = {}, t[3] = {};
  for (const auto& [x, y] : pts) {
    Wide p = 1;
    for (int k = 0; k < 5; ++k) {
      s[k] += p;
      if (k < 3) t[k] += p * y;
      p *= x;
    }
  }
  using M = std::array<std::array<Wide, 3>, 3>;
  auto det = [](const M& m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  };
  const M m{{{s[4], s[3], s[2]}, {s[3], s[2], s[1]}, {s[2], s[1], s[0]}}};
  const Wide rhs[3] = {t[2], t[1], t[0]};
  const Wide d = det(m);
  std::array<Wide, 3> out;
  for (int c = 0; c < 3; ++c) {
    M mc = m;
    for (int i = 0; i < 3; ++i) mc[i][c] = rhs[i];
    out[c] = det(mc) / d;
  }
  return out;
}

// Relative error, measured against the coefficient or, when that is (near) zero,
// against the size the term needs to move a rating by max|y| at max|x|.
bool rel_close(double got, const Wide& want, double tol, const Points& pts, int power) {
  double xmax = 0, ymax = 0;
  for (const auto& [x, y] : pts) xmax = std::max(xmax, std::abs(x)), ymax = std::max(ymax, std::abs(y));
  const Wide scale = std::max(abs(want), Wide(std::max(ymax, 1.0) / std::pow(xmax, power)));
  return abs(Wide(got) - want) <= tol * scale;
}

double rms_of(const Points& pts, double a, double b, double c) {
  double sq = 0;
  for (const auto& [x, y] : pts) sq += std::pow(a * x * x + b * x + c - y, 2);
  return std::sqrt(sq / pts.size());
}

}  // namespace

TEST_CASE("region polygon") {
  const RegionPolygon poly = subject_region_polygon(fig_region());
  CHECK(poly.contains(40, 25));
  CHECK_FALSE(poly.contains(95, 50));
  REQUIRE(poly.at(15));
  CHECK(poly.at(15)->min_ms == doctest::Approx(47.5));
  CHECK(poly.at(15)->max_ms == doctest::Approx(92.5));
  CHECK_FALSE(poly.at(60));
  CHECK_FALSE(poly.at(4));
  CHECK_FALSE(poly.degenerate());
  const auto v = poly.vertices();
  REQUIRE(v.size() == 6);  // three per side
  CHECK(v.front() == std::pair{70.0, 5.0});
  CHECK(v[2] == std::pair{10.0, 50.0});
  CHECK(v[3] == std::pair{30.0, 50.0});
  CHECK(v.back() == std::pair{130.0, 5.0});

  AcceptRegion one;
  one.by_duty = {{25, {25, 55}}};
  const RegionPolygon line(one);
  CHECK(line.degenerate());
  CHECK(line.contains(30, 25));
  CHECK_FALSE(line.contains(30, 26));
}

TEST_CASE("overlap map") {
  const OverlapMap single = overlap_map({fig_region()});
  CHECK(single.counts.rows() == 46);
  CHECK(single.counts.cols() == 251);
  CHECK(single.counts.minCoeff() == 0);
  CHECK(single.counts.maxCoeff() == 1);
  CHECK(single.at(25, 40) == 1);
  CHECK(single.at(50, 95) == 0);

  AcceptRegion narrow = fig_region();
  for (auto& [duty, r] : narrow.by_duty) r.max_ms -= 5;
  const OverlapMap two = overlap_map({fig_region(), narrow});
  CHECK(two.n_subjects == 2);
  CHECK(two.unanimous_range(25) == std::pair{25, 50});
  CHECK(two.max_accepted(25) == 55);
  CHECK(two.at(25, 53) == 1);
  // Adding a subject never lowers a count.
  CHECK(((two.counts - single.counts).array() >= 0).all());
  CHECK_FALSE(overlap_map({}).unanimous_range(25));
}

TEST_CASE("population overlap and curves") {
  const auto sessions = run_population(20200101);
  const AnalysisResult r = analyze(sessions);
  CHECK(r.overlap.n_subjects == 10);
  CHECK(r.overlap.counts.maxCoeff() <= 10);
  int peak_in_window = 0;
  for (int d = 70; d <= 130; ++d) peak_in_window = std::max(peak_in_window, r.overlap.at(5, d));
  CHECK(peak_in_window == 10);
  CHECK(r.overlap.at(5, 210) == 0);

  CHECK(r.curves.at(50).at(11).pct_good() == doctest::Approx(100).epsilon(0.1));
  CHECK(r.curves.at(25).at(31).pct_good() == doctest::Approx(95).epsilon(0.06));
  CHECK(r.curves.at(25).at(41).pct_good() == doctest::Approx(95).epsilon(0.06));
  for (const auto& [duty, curve] : r.curves)
    for (const auto& [d, cell] : curve) {
      CHECK(cell.n == 20);
      CHECK_FALSE(cell.flagged);
    }
  CHECK(r.groups.size() == 10);
  CHECK(r.fits.size() == 30);
}

TEST_CASE("percentage curves on synthetic input") {
  auto s = run_simulated_session(default_population(1)[0], 1);
  for (auto& t : s.trials)
    if (t.section == 1) t.acceptable = false, t.percept = Percept::Oscillation;
  const PercentCurves c = percentage_curves({s});
  for (const auto& [duty, curve] : c)
    for (const auto& [d, cell] : curve) {
      CHECK(cell.pct_good() == 0);
      CHECK(cell.pct_pulse() == 0);
      CHECK(cell.n == 2);
    }
  CHECK_FALSE(pulse_unanimity_threshold(c.at(25)));

  std::map<int, PercentCell> curve{{1, {2, 0, 2}}, {11, {2, 1, 2}}, {21, {2, 2, 1}}, {31, {2, 0, 2}}};
  CHECK(pulse_unanimity_threshold(curve) == 11);
}

TEST_CASE("quadratic fit: exact recovery") {
  Points pts;
  for (double d : {10.0, 30.0, 50.0, 70.0, 90.0, 110.0}) pts.emplace_back(d, -0.01 * d * d + 1.4 * d + 2);
  const QuadFit f = fit_quadratic(pts);
  CHECK(std::abs(f.a + 0.01) <= 1e-9 * 0.01);
  CHECK(std::abs(f.b - 1.4) <= 1e-9 * 1.4);
  CHECK(std::abs(f.c - 2) <= 1e-9 * 2);
  CHECK(f.rms <= 1e-9);
  CHECK(f.argmax_ms == doctest::Approx(70));
  CHECK(f.n == 6);
}

TEST_CASE("quadratic fit: three points equal the direct 3x3 solve") {
  const Points pts{{10, 3}, {50, 6}, {90, 4}};
  const QuadFit f = fit_quadratic(pts);
  const auto o = normal_equations(pts);
  CHECK(rel_close(f.a, o[0], 1e-9, pts, 2));
  CHECK(rel_close(f.b, o[1], 1e-9, pts, 1));
  CHECK(rel_close(f.c, o[2], 1e-9, pts, 0));
  for (const auto& [x, y] : pts) CHECK(f(x) == doctest::Approx(y).epsilon(1e-9));
}

TEST_CASE("quadratic fit: random instances against normal equations") {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> center(5, 240), spread(2, 60), count(3, 21), rating(0, 7);
  for (int k = 0; k < 100; ++k) {
    Points pts;
    const int c0 = center(gen), w = spread(gen);
    const int n = count(gen);
    for (int i = 0; i < n; ++i) pts.emplace_back(std::clamp(c0 + w * (i % 5 - 2), 1, 251), rating(gen));
    if (std::all_of(pts.begin(), pts.end(), [&](const auto& p) { return p.first == pts[0].first; })) continue;
    const QuadFit f = fit_quadratic(pts);
    std::set<double> distinct;
    for (const auto& p : pts) distinct.insert(p.first);
    if (distinct.size() < 3) continue;  // line fallback, covered below
    const auto o = normal_equations(pts);
    CHECK(rel_close(f.a, o[0], 1e-9, pts, 2));
    CHECK(rel_close(f.b, o[1], 1e-9, pts, 1));
    CHECK(rel_close(f.c, o[2], 1e-9, pts, 0));
  }
}

TEST_CASE("quadratic fit: no parabola on a grid beats the fit") {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> noise(0, 0.7);
  Points pts;
  for (double d = 20; d <= 120; d += 10) pts.emplace_back(d, -0.002 * (d - 70) * (d - 70) + 6 + noise(gen));
  const QuadFit f = fit_quadratic(pts);
  std::uniform_real_distribution<double> da(-0.001, 0.001), db(-0.05, 0.05), dc(-1, 1);
  for (int k = 0; k < 2000; ++k) CHECK(f.rms <= rms_of(pts, f.a + da(gen), f.b + db(gen), f.c + dc(gen)) + 1e-12);
}

TEST_CASE("quadratic fit: argmax rules and degenerate input") {
  // Concave, vertex inside span.
  CHECK(fit_quadratic({{10, 1}, {20, 5}, {30, 1}}).argmax_ms == doctest::Approx(20));
  // Convex: best endpoint.
  CHECK(fit_quadratic({{10, 6}, {20, 1}, {30, 4}}).argmax_ms == 10);
  // Concave with vertex beyond the span: endpoint.
  CHECK(fit_quadratic({{10, 1}, {20, 3}, {30, 4}}).argmax_ms == 30);
  // Two distinct durations: a line.
  const QuadFit line = fit_quadratic({{10, 2}, {10, 4}, {30, 7}});
  CHECK(line.a == 0);
  CHECK(line.b == doctest::Approx(0.2));
  CHECK(line.argmax_ms == 30);
  CHECK_THROWS_AS(fit_quadratic({{10, 2}, {10, 4}, {10, 7}}), std::invalid_argument);
  CHECK_THROWS_AS(fit_quadratic({{10, 2}, {20, 4}}), std::invalid_argument);
  // Shifting every duration shifts the vertex by the same amount.
  const Points base{{40, 2}, {60, 6}, {70, 6.5}, {90, 3}};
  Points moved = base;
  for (auto& p : moved) p.first += 100;
  CHECK(fit_quadratic(moved).argmax_ms == doctest::Approx(fit_quadratic(base).argmax_ms + 100).epsilon(1e-9));
}

TEST_CASE("grouping rules") {
  const GroupAssignment g1 = pulse_width_grouping("a", {{5, 100}, {25, 40}, {50, 20}});
  CHECK(g1.group == 1);
  CHECK(g1.initial_width_ms.at(5) == doctest::Approx(5));
  CHECK(g1.initial_width_ms.at(25) == doctest::Approx(10));
  CHECK(g1.initial_width_ms.at(50) == doctest::Approx(10));

  AcceptRegion region;
  region.by_duty = {{5, {10, 190}}, {25, {10, 130}}, {50, {10, 70}}};
  const GroupAssignment g2 = pulse_width_grouping("b", {{5, 20}, {25, 20}, {50, 20}}, region);
  CHECK(g2.group == 2);
  const GroupAssignment g3 = pulse_width_grouping("c", {{5, 180}, {25, 120}, {50, 65}}, region);
  CHECK(g3.group == 3);  // long picks also shorten with duty: group 3 takes precedence
  const GroupAssignment missing = pulse_width_grouping("d", {{5, 100}, {25, 40}});
  CHECK(missing.group == 0);
  // Nothing matches cleanly: fewest violations, ties to the lower group.
  const GroupAssignment near = pulse_width_grouping("e", {{5, 100}, {25, 100}, {50, 20}}, region);
  CHECK(near.group == 1);
  CHECK(near.violations[0] == 1);
}

TEST_CASE("population grouping and summary") {
  const AnalysisResult r = analyze(run_population(20200101));
  int sizes[4] = {};
  for (const auto& g : r.groups) ++sizes[g.group];
  CHECK(sizes[1] == 6);
  CHECK(sizes[2] == 3);
  CHECK(sizes[3] == 1);
  const auto j = summary_json(r);
  CHECK(j.at("schema") == "clickrender.summary/1");
  CHECK(j.at("group_sizes").at("1") == 6);
  CHECK(j.at("duties").at("25").at("unanimous_yes_ms").size() == 2);
}

TEST_CASE("partial sessions add to the map but not to fits") {
  auto sessions = run_population(5);
  sessions.push_back(run_simulated_session(default_population(5)[0], 6, 120));
  const AnalysisResult r = analyze(sessions);
  CHECK(r.groups.size() == 10);
  CHECK(r.subjects.size() == 11);
}

TEST_CASE("artifacts") {
  const AnalysisResult r = analyze(run_population(3));
  CHECK(artifact_names(false).size() == 5);
  CHECK(artifact_names(true).size() == 9);
  for (const auto& name : artifact_names(true)) {
    std::ostringstream a, b;
    write_artifact(a, r, name);
    write_artifact(b, r, name);
    CHECK(!a.str().empty());
    CHECK(a.str() == b.str());
  }
  std::ostringstream os;
  CHECK_THROWS_AS(write_artifact(os, r, "nope.csv"), std::invalid_argument);
  const auto dir = std::filesystem::temp_directory_path() / "clickrender-test-artifacts";
  std::filesystem::remove_all(dir);
  write_artifacts(dir, r, true);
  for (const auto& name : artifact_names(true)) CHECK(std::filesystem::exists(dir / name));
}
