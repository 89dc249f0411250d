#pragma once

#include "clickrender/signal.hpp"
#include "clickrender/subject.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace clickrender {

inline constexpr int kMinDurationMs = 1;
inline constexpr int kMaxDurationMs = 251;
inline constexpr int kSweepStepMs = 10;
inline constexpr int kSweepLevels = 26;
inline constexpr int kSection1Blocks = 6;
inline constexpr int kSection1Trials = kSection1Blocks * kSweepLevels;
inline constexpr int kRatingRepeats = 3;
inline constexpr int kRatingRounds = 3;

enum class Direction { Increasing, Decreasing };
const char* to_string(Direction d);
Direction direction_from_string(const std::string& s);

struct BlockPlan {
  int duty_pct = 25;
  Direction direction = Direction::Increasing;
  std::vector<int> durations;
};

/// 1, 11, ..., 251 ms, reversed for a decreasing sweep.
std::vector<int> sweep_durations(Direction direction);

/// Three duties x two directions, block order shuffled by `seed`.
std::vector<BlockPlan> plan_section1(std::uint64_t seed);

struct TrialRecord {
  std::uint64_t index = 0;
  int section = 1;
  int block = 0;  // section 1: 1..6 in presentation order; 0 in section 2
  int round = 0;  // section 2: 1..3; 0 in section 1
  int duty_pct = 25;
  int duration_ms = 1;
  double amplitude_pp_mN = kDefaultAmplitudePpMn;
  std::optional<Direction> direction;  // section 1 only
  std::optional<bool> acceptable;
  std::optional<Percept> percept;
  std::optional<int> rating;
  double t_s = 0.0;  // seconds since session start
  std::string responder;

  StimulusParams params() const;
  /// Section-1 records carry both answers, section-2 records a rating.
  void validate() const;
};

struct DutyRegion {
  double min_ms = 0.0;
  double max_ms = 0.0;
};

/// Per-duty acceptable durations; a duty with no YES in either sweep is absent.
struct AcceptRegion {
  std::map<int, DutyRegion> by_duty;

  bool empty() const { return by_duty.empty(); }
  const DutyRegion* at(int duty_pct) const;
};

/// Smallest and largest YES duration of each sweep, averaged over the two
/// directions. A duty needs both directions recorded; throws std::invalid_argument
/// otherwise.
AcceptRegion extract_boundaries(const std::vector<TrialRecord>& section1);

/// {min, min+s, min+2s, min+3s, max}, s = (max-min)/4, rounded to whole ms.
std::vector<int> plan_round1(double min_ms, double max_ms);

/// Center plus 10 ms steps lying strictly between the center's neighbours in
/// `previous` (a missing neighbour is unbounded), clipped to [1, 251].
std::vector<int> plan_round2(int best_ms, const std::vector<int>& round1);

/// {best-5, best, best+5}, clipped to [1, 251] and strictly between the
/// center's neighbours in `round2`.
std::vector<int> plan_round3(int best2_ms, const std::vector<int>& round2 = {});

/// Highest mean rating; ties toward the shorter duration.
int best_duration(const std::vector<TrialRecord>& ratings);

struct DutyRound {
  int duty_pct = 25;
  std::vector<int> durations;
  std::optional<int> best_ms;  // filled once the round is complete
};

struct RoundItem {
  int duty_pct;
  int duration_ms;
};

struct RoundPlan {
  int round = 1;
  std::vector<DutyRound> duties;
  std::vector<RoundItem> order;  // shuffled presentations (durations x 3, all duties)

  const DutyRound* duty(int duty_pct) const;
};

enum class ResponseKind { JudgeAndPercept, Rating };

/// What the engine wants presented next.
struct Prompt {
  std::uint64_t trial_index = 0;
  int section = 1;
  int block = 0;
  int round = 0;
  int duty_pct = 25;
  int duration_ms = 1;
  double amplitude_pp_mN = kDefaultAmplitudePpMn;
  std::optional<Direction> direction;
  int position = 0;  // within the block or round
  int count = 0;     // trials in the block or round
  ResponseKind expects = ResponseKind::JudgeAndPercept;

  StimulusParams params() const;
  SweepContext sweep() const;
  std::string phase() const;
};

struct Response {
  std::optional<bool> acceptable;
  std::optional<Percept> percept;
  std::optional<int> rating;
};

/// Raised when a response does not fit the current phase.
struct PhaseError : std::invalid_argument {
  PhaseError(const std::string& what, std::string phase_descriptor)
      : std::invalid_argument(what), phase(std::move(phase_descriptor)) {}
  std::string phase;
};

/// Pull-based two-section experiment. next() yields the pending stimulus,
/// submit() records the answer and plans whatever follows. All planning is a
/// pure function of (seed, trials so far), so replaying the trial log through
/// a fresh engine reproduces every plan.
class ProtocolEngine {
 public:
  explicit ProtocolEngine(std::uint64_t seed, double amplitude_pp_mN = kDefaultAmplitudePpMn);

  std::optional<Prompt> next() const;
  const TrialRecord& submit(const Response& response, double t_s, const std::string& responder);
  bool complete() const { return complete_; }
  std::string phase() const;

  std::uint64_t seed() const { return seed_; }
  double amplitude_pp_mN() const { return amplitude_; }
  const std::vector<BlockPlan>& blocks() const { return blocks_; }
  const std::vector<TrialRecord>& trials() const { return trials_; }
  const std::optional<AcceptRegion>& region() const { return region_; }
  const std::vector<RoundPlan>& rounds() const { return rounds_; }

  /// Re-submits `trials` in order; throws if any record disagrees with the plan.
  static ProtocolEngine replay(std::uint64_t seed, const std::vector<TrialRecord>& trials,
                               double amplitude_pp_mN = kDefaultAmplitudePpMn);

 private:
  void close_section1();
  void close_round();
  void plan_next_round(int round);

  std::uint64_t seed_;
  double amplitude_;
  std::vector<BlockPlan> blocks_;
  std::vector<TrialRecord> trials_;
  std::optional<AcceptRegion> region_;
  std::vector<RoundPlan> rounds_;
  std::size_t round_start_ = 0;  // trial index where the current round begins
  bool complete_ = false;
};

struct Section1Answer {
  bool acceptable;
  Percept percept;
};

class Responder {
 public:
  virtual ~Responder() = default;
  virtual std::string id() const = 0;
  virtual Section1Answer judge(const Prompt& prompt) = 0;
  virtual int rate(const Prompt& prompt) = 0;
};

/// Thrown by a responder to stop a session early; the run is kept as partial.
struct ResponderAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class SimulatedResponder : public Responder {
 public:
  explicit SimulatedResponder(SubjectModel subject, double envelope_um = kEnergizedEnvelopeTargetUm);
  std::string id() const override;
  Section1Answer judge(const Prompt& prompt) override;
  int rate(const Prompt& prompt) override;
  const SubjectModel& subject() const { return subject_; }

 private:
  Presentation present(const Prompt& prompt) const;
  SubjectModel subject_;
  double envelope_um_;
};

/// Simulated trials are stamped on a fixed pacing grid so records stay reproducible.
inline constexpr double kSimulatedTrialPeriodS = 11.5;

/// Drives `engine` with `responder` until complete or `max_trials` more
/// trials were taken. Returns false when the responder aborted.
bool drive(ProtocolEngine& engine, Responder& responder, std::optional<std::size_t> max_trials = std::nullopt);

nlohmann::json to_json(const TrialRecord& t);
TrialRecord trial_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BlockPlan& b);
nlohmann::json to_json(const AcceptRegion& r);
AcceptRegion region_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RoundPlan& r);
nlohmann::json to_json(const Prompt& p);

}  // namespace clickrender
