#include "clickrender/protocol.hpp"

#include "clickrender/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

namespace clickrender {

const char* to_string(Direction d) {
  return d == Direction::Increasing ? "INCREASING" : "DECREASING";
}

Direction direction_from_string(const std::string& s) {
  if (s == "INCREASING") return Direction::Increasing;
  if (s == "DECREASING") return Direction::Decreasing;
  throw std::invalid_argument("direction must be INCREASING or DECREASING, got '" + s + "'");
}

std::vector<int> sweep_durations(Direction direction) {
  std::vector<int> d(kSweepLevels);
  for (int i = 0; i < kSweepLevels; ++i) d[i] = kMinDurationMs + i * kSweepStepMs;
  if (direction == Direction::Decreasing) std::reverse(d.begin(), d.end());
  return d;
}

std::vector<BlockPlan> plan_section1(std::uint64_t seed) {
  std::vector<BlockPlan> blocks;
  for (int duty : kDutyLevels)
    for (Direction dir : {Direction::Increasing, Direction::Decreasing})
      blocks.push_back({duty, dir, sweep_durations(dir)});
  shuffle(blocks, CounterRng(seed).split(hash_string("section1")));
  return blocks;
}

StimulusParams TrialRecord::params() const {
  return {static_cast<double>(duty_pct), static_cast<double>(duration_ms), amplitude_pp_mN};
}

void TrialRecord::validate() const {
  if (section == 1) {
    if (!acceptable || !percept) throw std::invalid_argument("section-1 trial needs both answers");
    if (!direction) throw std::invalid_argument("section-1 trial needs a sweep direction");
    if (rating) throw std::invalid_argument("section-1 trial cannot carry a rating");
  } else if (section == 2) {
    if (!rating) throw std::invalid_argument("section-2 trial needs a rating");
    if (*rating < 0 || *rating > 7) throw std::invalid_argument("rating must lie in 0..7");
    if (acceptable || percept) throw std::invalid_argument("section-2 trial cannot carry YES/NO or percept answers");
  } else {
    throw std::invalid_argument("section must be 1 or 2");
  }
  params().validate();
}

const DutyRegion* AcceptRegion::at(int duty_pct) const {
  auto it = by_duty.find(duty_pct);
  return it == by_duty.end() ? nullptr : &it->second;
}

AcceptRegion extract_boundaries(const std::vector<TrialRecord>& section1) {
  struct Sweep {
    bool seen = false;
    std::optional<int> lo, hi;
  };
  std::map<int, std::array<Sweep, 2>> sweeps;
  for (const auto& t : section1) {
    if (t.section != 1) continue;
    if (!t.direction || !t.acceptable) throw std::invalid_argument("extract_boundaries: incomplete section-1 record");
    Sweep& s = sweeps[t.duty_pct][*t.direction == Direction::Increasing ? 0 : 1];
    s.seen = true;
    if (*t.acceptable) {
      s.lo = std::min(s.lo.value_or(t.duration_ms), t.duration_ms);
      s.hi = std::max(s.hi.value_or(t.duration_ms), t.duration_ms);
    }
  }
  AcceptRegion region;
  for (const auto& [duty, pair] : sweeps) {
    if (!pair[0].seen || !pair[1].seen)
      throw std::invalid_argument("extract_boundaries: duty " + std::to_string(duty) + " lacks one sweep direction");
    std::vector<const Sweep*> yes;
    for (const auto& s : pair)
      if (s.lo) yes.push_back(&s);
    if (yes.empty()) continue;
    // With YES in only one sweep, that sweep alone defines the boundaries.
    double lo = 0.0, hi = 0.0;
    for (const Sweep* s : yes) {
      lo += *s->lo;
      hi += *s->hi;
    }
    region.by_duty[duty] = {lo / yes.size(), hi / yes.size()};
  }
  return region;
}

std::vector<int> plan_round1(double min_ms, double max_ms) {
  if (!(min_ms <= max_ms)) throw std::invalid_argument("plan_round1: min must not exceed max");
  const double s = (max_ms - min_ms) / 4.0;
  std::vector<int> d;
  for (int k = 0; k < 5; ++k) {
    const double v = k == 4 ? max_ms : min_ms + k * s;
    const int ms = static_cast<int>(std::lround(v));
    if (d.empty() || d.back() != ms) d.push_back(ms);
  }
  return d;
}

namespace {

// Neighbours of `center` in a sorted set; missing ones are unbounded.
std::pair<double, double> neighbours(int center, std::vector<int> set) {
  std::sort(set.begin(), set.end());
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (int v : set) {
    if (v < center) lo = v;
    if (v > center && v < hi) hi = v;
  }
  return {lo, hi};
}

std::vector<int> centered(int center, int step, std::pair<double, double> bounds) {
  std::vector<int> out{center};
  for (int v = center - step; v >= kMinDurationMs && v > bounds.first; v -= step) out.push_back(v);
  for (int v = center + step; v <= kMaxDurationMs && v < bounds.second; v += step) out.push_back(v);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<int> plan_round2(int best_ms, const std::vector<int>& round1) {
  if (std::find(round1.begin(), round1.end(), best_ms) == round1.end())
    throw std::invalid_argument("plan_round2: best duration was not rated in round 1");
  return centered(best_ms, 10, neighbours(best_ms, round1));
}

std::vector<int> plan_round3(int best2_ms, const std::vector<int>& round2) {
  if (!round2.empty() && std::find(round2.begin(), round2.end(), best2_ms) == round2.end())
    throw std::invalid_argument("plan_round3: best duration was not rated in round 2");
  const auto [lo, hi] = neighbours(best2_ms, round2);
  std::vector<int> out;
  for (int v : {best2_ms - 5, best2_ms, best2_ms + 5})
    if (v == best2_ms || (v >= kMinDurationMs && v <= kMaxDurationMs && v > lo && v < hi)) out.push_back(v);
  return out;
}

int best_duration(const std::vector<TrialRecord>& ratings) {
  std::map<int, std::pair<double, int>> sums;  // ordered by duration, so ties resolve short
  for (const auto& t : ratings) {
    if (!t.rating) throw std::invalid_argument("best_duration: trial without a rating");
    auto& [sum, n] = sums[t.duration_ms];
    sum += *t.rating;
    ++n;
  }
  if (sums.empty()) throw std::invalid_argument("best_duration: no ratings");
  int best = sums.begin()->first;
  double best_mean = -1.0;
  for (const auto& [d, sn] : sums) {
    const double mean = sn.first / sn.second;
    if (mean > best_mean) {
      best_mean = mean;
      best = d;
    }
  }
  return best;
}

const DutyRound* RoundPlan::duty(int duty_pct) const {
  for (const auto& d : duties)
    if (d.duty_pct == duty_pct) return &d;
  return nullptr;
}

StimulusParams Prompt::params() const {
  return {static_cast<double>(duty_pct), static_cast<double>(duration_ms), amplitude_pp_mN};
}

SweepContext Prompt::sweep() const {
  if (!direction) return SweepContext::None;
  return *direction == Direction::Increasing ? SweepContext::Increasing : SweepContext::Decreasing;
}

std::string Prompt::phase() const {
  return expects == ResponseKind::JudgeAndPercept ? "section1 expects YES/NO + percept" : "section2 expects rating 0-7";
}

ProtocolEngine::ProtocolEngine(std::uint64_t seed, double amplitude_pp_mN)
    : seed_(seed), amplitude_(amplitude_pp_mN), blocks_(plan_section1(seed)) {
  if (!(amplitude_pp_mN > 0.0)) throw std::invalid_argument("amplitude must be positive");
}

std::optional<Prompt> ProtocolEngine::next() const {
  if (complete_) return std::nullopt;
  const std::size_t i = trials_.size();
  Prompt p;
  p.trial_index = i;
  p.amplitude_pp_mN = amplitude_;
  if (i < static_cast<std::size_t>(kSection1Trials)) {
    const BlockPlan& b = blocks_[i / kSweepLevels];
    p.section = 1;
    p.block = static_cast<int>(i / kSweepLevels) + 1;
    p.duty_pct = b.duty_pct;
    p.direction = b.direction;
    p.position = static_cast<int>(i % kSweepLevels);
    p.duration_ms = b.durations[p.position];
    p.count = kSweepLevels;
    p.expects = ResponseKind::JudgeAndPercept;
    return p;
  }
  const RoundPlan& r = rounds_.back();
  const std::size_t pos = i - round_start_;
  p.section = 2;
  p.round = r.round;
  p.duty_pct = r.order[pos].duty_pct;
  p.duration_ms = r.order[pos].duration_ms;
  p.position = static_cast<int>(pos);
  p.count = static_cast<int>(r.order.size());
  p.expects = ResponseKind::Rating;
  return p;
}

std::string ProtocolEngine::phase() const {
  auto p = next();
  return p ? p->phase() : "complete";
}

const TrialRecord& ProtocolEngine::submit(const Response& response, double t_s, const std::string& responder) {
  auto prompt = next();
  if (!prompt) throw PhaseError("session is complete", "complete");
  TrialRecord t;
  t.index = prompt->trial_index;
  t.section = prompt->section;
  t.block = prompt->block;
  t.round = prompt->round;
  t.duty_pct = prompt->duty_pct;
  t.duration_ms = prompt->duration_ms;
  t.amplitude_pp_mN = amplitude_;
  t.direction = prompt->direction;
  t.t_s = t_s;
  t.responder = responder;
  if (prompt->expects == ResponseKind::JudgeAndPercept) {
    if (response.rating || !response.acceptable || !response.percept)
      throw PhaseError("expected YES/NO and PULSE/OSCILLATION answers", prompt->phase());
    t.acceptable = response.acceptable;
    t.percept = response.percept;
  } else {
    if (!response.rating || response.acceptable || response.percept)
      throw PhaseError("expected a 0-7 rating", prompt->phase());
    if (*response.rating < 0 || *response.rating > 7) throw PhaseError("rating must lie in 0..7", prompt->phase());
    t.rating = response.rating;
  }
  if (!trials_.empty() && t_s < trials_.back().t_s) throw std::invalid_argument("trial timestamps must not decrease");
  trials_.push_back(std::move(t));

  if (trials_.size() == static_cast<std::size_t>(kSection1Trials)) {
    close_section1();
  } else if (!rounds_.empty() && trials_.size() - round_start_ == rounds_.back().order.size()) {
    close_round();
  }
  return trials_.back();
}

void ProtocolEngine::close_section1() {
  region_ = extract_boundaries(trials_);
  round_start_ = trials_.size();
  if (region_->empty()) {
    complete_ = true;
    return;
  }
  plan_next_round(1);
}

void ProtocolEngine::close_round() {
  RoundPlan& r = rounds_.back();
  for (auto& d : r.duties) {
    std::vector<TrialRecord> rated;
    for (std::size_t i = round_start_; i < trials_.size(); ++i)
      if (trials_[i].duty_pct == d.duty_pct) rated.push_back(trials_[i]);
    d.best_ms = best_duration(rated);
  }
  round_start_ = trials_.size();
  if (r.round == kRatingRounds) {
    complete_ = true;
    return;
  }
  plan_next_round(r.round + 1);
}

void ProtocolEngine::plan_next_round(int round) {
  RoundPlan plan;
  plan.round = round;
  for (const auto& [duty, bounds] : region_->by_duty) {
    DutyRound d;
    d.duty_pct = duty;
    if (round == 1) {
      d.durations = plan_round1(bounds.min_ms, bounds.max_ms);
    } else {
      const DutyRound* prev = rounds_.back().duty(duty);
      d.durations = round == 2 ? plan_round2(*prev->best_ms, prev->durations)
                               : plan_round3(*prev->best_ms, prev->durations);
    }
    for (int ms : d.durations)
      for (int k = 0; k < kRatingRepeats; ++k) plan.order.push_back({duty, ms});
    plan.duties.push_back(std::move(d));
  }
  shuffle(plan.order, CounterRng(seed_).split(hash_string("section2")).split(static_cast<std::uint64_t>(round)));
  rounds_.push_back(std::move(plan));
}

ProtocolEngine ProtocolEngine::replay(std::uint64_t seed, const std::vector<TrialRecord>& trials,
                                      double amplitude_pp_mN) {
  ProtocolEngine engine(seed, amplitude_pp_mN);
  for (const auto& t : trials) {
    auto p = engine.next();
    if (!p || p->trial_index != t.index || p->section != t.section || p->duty_pct != t.duty_pct ||
        p->duration_ms != t.duration_ms || p->direction != t.direction || p->block != t.block || p->round != t.round)
      throw std::invalid_argument("replay: trial " + std::to_string(t.index) + " does not match the seeded plan");
    engine.submit({t.acceptable, t.percept, t.rating}, t.t_s, t.responder);
  }
  return engine;
}

SimulatedResponder::SimulatedResponder(SubjectModel subject, double envelope_um)
    : subject_(std::move(subject)), envelope_um_(envelope_um) {
  subject_.validate();
}

std::string SimulatedResponder::id() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "sim-s%02d", subject_.id);
  return buf;
}

Presentation SimulatedResponder::present(const Prompt& prompt) const {
  return {prompt.params(), prompt.sweep(), prompt.trial_index, envelope_um_};
}

Section1Answer SimulatedResponder::judge(const Prompt& prompt) {
  const Presentation p = present(prompt);
  return {clickrender::judge(subject_, p), clickrender::percept(subject_, p)};
}

int SimulatedResponder::rate(const Prompt& prompt) {
  return clickrender::rate(subject_, present(prompt));
}

bool drive(ProtocolEngine& engine, Responder& responder, std::optional<std::size_t> max_trials) {
  std::size_t taken = 0;
  while (auto prompt = engine.next()) {
    if (max_trials && taken >= *max_trials) break;
    Response r;
    try {
      if (prompt->expects == ResponseKind::JudgeAndPercept) {
        const auto a = responder.judge(*prompt);
        r.acceptable = a.acceptable;
        r.percept = a.percept;
      } else {
        r.rating = responder.rate(*prompt);
      }
    } catch (const ResponderAbort&) {
      return false;
    }
    engine.submit(r, static_cast<double>(prompt->trial_index) * kSimulatedTrialPeriodS, responder.id());
    ++taken;
  }
  return true;
}

nlohmann::json to_json(const TrialRecord& t) {
  nlohmann::json j{{"index", t.index},   {"section", t.section},         {"block", t.block},
                   {"round", t.round},   {"duty_pct", t.duty_pct},       {"duration_ms", t.duration_ms},
                   {"amplitude_pp_mN", t.amplitude_pp_mN}, {"t_s", t.t_s}, {"responder", t.responder}};
  if (t.direction) j["direction"] = to_string(*t.direction);
  if (t.acceptable) j["acceptable"] = *t.acceptable ? "YES" : "NO";
  if (t.percept) j["percept"] = to_string(*t.percept);
  if (t.rating) j["rating"] = *t.rating;
  return j;
}

TrialRecord trial_from_json(const nlohmann::json& j) {
  TrialRecord t;
  try {
    t.index = j.at("index").get<std::uint64_t>();
    t.section = j.at("section").get<int>();
    t.block = j.at("block").get<int>();
    t.round = j.at("round").get<int>();
    t.duty_pct = j.at("duty_pct").get<int>();
    t.duration_ms = j.at("duration_ms").get<int>();
    t.amplitude_pp_mN = j.at("amplitude_pp_mN").get<double>();
    t.t_s = j.at("t_s").get<double>();
    t.responder = j.at("responder").get<std::string>();
    if (j.contains("direction")) t.direction = direction_from_string(j["direction"].get<std::string>());
    if (j.contains("acceptable")) {
      const auto a = j["acceptable"].get<std::string>();
      if (a != "YES" && a != "NO") throw std::invalid_argument("acceptable must be YES or NO");
      t.acceptable = a == "YES";
    }
    if (j.contains("percept")) t.percept = percept_from_string(j["percept"].get<std::string>());
    if (j.contains("rating")) t.rating = j["rating"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed trial record: ") + e.what());
  }
  t.validate();
  return t;
}

nlohmann::json to_json(const BlockPlan& b) {
  return {{"duty_pct", b.duty_pct}, {"direction", to_string(b.direction)}, {"durations", b.durations}};
}

nlohmann::json to_json(const AcceptRegion& r) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [duty, d] : r.by_duty) j[std::to_string(duty)] = {{"min_ms", d.min_ms}, {"max_ms", d.max_ms}};
  return j;
}

AcceptRegion region_from_json(const nlohmann::json& j) {
  AcceptRegion r;
  try {
    for (const auto& [key, v] : j.items()) {
      DutyRegion d{v.at("min_ms").get<double>(), v.at("max_ms").get<double>()};
      if (!(d.min_ms <= d.max_ms)) throw std::invalid_argument("region min exceeds max at duty " + key);
      r.by_duty[std::stoi(key)] = d;
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed region: ") + e.what());
  }
  return r;
}

nlohmann::json to_json(const RoundPlan& r) {
  nlohmann::json duties = nlohmann::json::array();
  for (const auto& d : r.duties) {
    nlohmann::json dj{{"duty_pct", d.duty_pct}, {"durations", d.durations}};
    if (d.best_ms) dj["best_ms"] = *d.best_ms;
    duties.push_back(dj);
  }
  nlohmann::json order = nlohmann::json::array();
  for (const auto& o : r.order) order.push_back({o.duty_pct, o.duration_ms});
  return {{"round", r.round}, {"duties", duties}, {"order", order}};
}

nlohmann::json to_json(const Prompt& p) {
  nlohmann::json j{{"trial_index", p.trial_index}, {"section", p.section}, {"block", p.block},
                   {"round", p.round},             {"duty_pct", p.duty_pct}, {"duration_ms", p.duration_ms},
                   {"amplitude_pp_mN", p.amplitude_pp_mN}, {"position", p.position},       {"count", p.count},     {"phase", p.phase()}};
  if (p.direction) j["direction"] = to_string(*p.direction);
  return j;
}

}  // namespace clickrender
