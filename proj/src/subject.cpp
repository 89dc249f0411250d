#include "clickrender/subject.hpp"

#include "clickrender/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace clickrender {

const char* to_string(Percept p) {
  return p == Percept::Pulse ? "PULSE" : "OSCILLATION";
}

Percept percept_from_string(const std::string& s) {
  if (s == "PULSE") return Percept::Pulse;
  if (s == "OSCILLATION") return Percept::Oscillation;
  throw std::invalid_argument("percept must be PULSE or OSCILLATION, got '" + s + "'");
}

void SubjectModel::validate() const {
  if (group < 1 || group > 3) throw std::invalid_argument("subject group must be 1, 2 or 3");
  if (!(detect_width_ms > 0.0)) throw std::invalid_argument("detect width must be positive");
  if (!(max_width_ms >= detect_width_ms)) throw std::invalid_argument("max width must be at least the detect width");
  if (!(fusion_ms > 0.0)) throw std::invalid_argument("fusion window must be positive");
  for (double onset : osc_onset_ms)
    if (!(onset > 0.0)) throw std::invalid_argument("oscillation onsets must be positive");
  if (!(sweep_persistence >= 0.0 && sweep_persistence < 1.0))
    throw std::invalid_argument("sweep persistence must lie in [0, 1)");
  if (!(preferred_width_ms > 0.0)) throw std::invalid_argument("preferred width must be positive");
  if (!(rating_peak >= 0.0 && rating_peak <= 7.0)) throw std::invalid_argument("rating peak must lie in [0, 7]");
  if (!(rating_tolerance > 0.0)) throw std::invalid_argument("rating tolerance must be positive");
  if (!(judgment_noise >= 0.0 && judgment_noise <= 1.0)) throw std::invalid_argument("judgment noise must be a probability");
}

double SubjectModel::osc_onset_at(double duty_pct) const {
  if (duty_pct <= kDutyLevels.front()) return osc_onset_ms.front();
  if (duty_pct >= kDutyLevels.back()) return osc_onset_ms.back();
  for (std::size_t i = 1; i < kDutyLevels.size(); ++i) {
    if (duty_pct <= kDutyLevels[i]) {
      const double lo = kDutyLevels[i - 1], hi = kDutyLevels[i];
      const double f = (duty_pct - lo) / (hi - lo);
      return osc_onset_ms[i - 1] + f * (osc_onset_ms[i] - osc_onset_ms[i - 1]);
    }
  }
  return osc_onset_ms.back();
}

namespace {

double effective_onset(const SubjectModel& s, const Presentation& p) {
  const double onset = s.osc_onset_at(p.params.duty_pct);
  switch (p.sweep) {
    case SweepContext::Increasing: return onset * (1.0 + s.sweep_persistence);
    case SweepContext::Decreasing: return onset * (1.0 - s.sweep_persistence);
    case SweepContext::None: break;
  }
  return onset;
}

bool lapse(const SubjectModel& s, std::uint64_t trial_index) {
  if (s.judgment_noise <= 0.0) return false;
  const CounterRng stream = CounterRng(s.seed).split(static_cast<std::uint64_t>(s.id));
  return stream.uniform(trial_index) < s.judgment_noise;
}

}  // namespace

Percept percept(const SubjectModel& subject, const Presentation& p) {
  p.params.validate();
  const double duration = p.params.duration_ms;
  if (duration <= subject.fusion_ms) return Percept::Pulse;
  const bool leading_pulse_felt = p.params.initial_width_ms() >= subject.detect_width_ms;
  return leading_pulse_felt && duration <= effective_onset(subject, p) ? Percept::Pulse : Percept::Oscillation;
}

Percept percept(const SubjectModel& subject, const StimulusParams& params) {
  return percept(subject, Presentation{params});
}

bool acceptable(const SubjectModel& subject, const Presentation& p) {
  const double width = p.params.initial_width_ms();
  return percept(subject, p) == Percept::Pulse && width >= subject.detect_width_ms &&
         width <= subject.max_width_ms && p.envelope_um >= kPerceptionThresholdUm;
}

bool judge(const SubjectModel& subject, const Presentation& p) {
  return acceptable(subject, p) && !lapse(subject, p.trial_index);
}

bool judge(const SubjectModel& subject, const StimulusParams& params) {
  return judge(subject, Presentation{params});
}

int rate(const SubjectModel& subject, const Presentation& p) {
  if (!judge(subject, p)) return 0;
  const double z = std::log(p.params.initial_width_ms() / subject.preferred_width_ms) / subject.rating_tolerance;
  const double value = subject.rating_peak * std::exp(-0.5 * z * z);
  return static_cast<int>(std::clamp<long>(std::lround(value), 0, 7));
}

int rate(const SubjectModel& subject, const StimulusParams& params) {
  return rate(subject, Presentation{params});
}

std::vector<SubjectModel> default_population(std::uint64_t seed) {
  struct Row {
    int group;
    double detect, max_width, fusion;
    std::array<double, 3> onset;
    double preferred, tolerance;
  };
  // Hand-calibrated so that section-1 sweeps of the whole roster reproduce the
  // group-level overlap region, unanimous-reject cutoffs and pulse-unanimity
  // thresholds, and section-2 picks split 6/3/1 across the preference groups.
  static constexpr std::array<Row, 10> rows{{
      {1, 2.0, 30.0, 15.0, {130.0, 95.0, 85.0}, 5.5, 0.45},
      {1, 2.2, 25.0, 13.0, {150.0, 60.0, 75.0}, 5.0, 0.45},
      {1, 2.5, 35.0, 16.0, {175.0, 120.0, 95.0}, 7.0, 0.45},
      {1, 1.8, 28.0, 14.0, {160.0, 100.0, 80.0}, 6.0, 0.45},
      {1, 2.4, 32.0, 17.0, {185.0, 130.0, 90.0}, 8.0, 0.45},
      {1, 1.6, 26.0, 18.0, {145.0, 85.0, 80.0}, 5.0, 0.45},
      {2, 0.5, 16.0, 14.0, {150.0, 100.0, 90.0}, 1.5, 0.5},
      {2, 1.0, 22.0, 16.0, {160.0, 110.0, 95.0}, 2.5, 0.5},
      {2, 1.5, 25.0, 12.0, {170.0, 120.0, 100.0}, 3.0, 0.5},
      {3, 2.8, 70.0, 15.0, {205.0, 150.0, 100.0}, 50.0, 1.0},
  }};
  std::vector<SubjectModel> roster;
  roster.reserve(rows.size());
  const CounterRng seeds(seed);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    SubjectModel s;
    s.id = static_cast<int>(i) + 1;
    s.group = r.group;
    s.detect_width_ms = r.detect;
    s.max_width_ms = r.max_width;
    s.fusion_ms = r.fusion;
    s.osc_onset_ms = r.onset;
    s.preferred_width_ms = r.preferred;
    s.rating_tolerance = r.tolerance;
    s.seed = seeds.bits(i);
    s.validate();
    roster.push_back(s);
  }
  return roster;
}

nlohmann::json to_json(const SubjectModel& s) {
  nlohmann::json onset = nlohmann::json::object();
  for (std::size_t i = 0; i < kDutyLevels.size(); ++i) onset[std::to_string(kDutyLevels[i])] = s.osc_onset_ms[i];
  return {{"id", s.id},
          {"group", s.group},
          {"detect_width_ms", s.detect_width_ms},
          {"max_width_ms", s.max_width_ms},
          {"fusion_ms", s.fusion_ms},
          {"osc_onset_ms", onset},
          {"sweep_persistence", s.sweep_persistence},
          {"preferred_width_ms", s.preferred_width_ms},
          {"rating_peak", s.rating_peak},
          {"rating_tolerance", s.rating_tolerance},
          {"judgment_noise", s.judgment_noise},
          {"seed", s.seed}};
}

SubjectModel subject_from_json(const nlohmann::json& j) {
  SubjectModel s;
  try {
    s.id = j.at("id").get<int>();
    s.group = j.at("group").get<int>();
    s.detect_width_ms = j.at("detect_width_ms").get<double>();
    s.max_width_ms = j.at("max_width_ms").get<double>();
    s.fusion_ms = j.at("fusion_ms").get<double>();
    for (std::size_t i = 0; i < kDutyLevels.size(); ++i)
      s.osc_onset_ms[i] = j.at("osc_onset_ms").at(std::to_string(kDutyLevels[i])).get<double>();
    s.sweep_persistence = j.at("sweep_persistence").get<double>();
    s.preferred_width_ms = j.at("preferred_width_ms").get<double>();
    s.rating_peak = j.at("rating_peak").get<double>();
    s.rating_tolerance = j.at("rating_tolerance").get<double>();
    s.judgment_noise = j.at("judgment_noise").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed subject: ") + e.what());
  }
  s.validate();
  return s;
}

}  // namespace clickrender
