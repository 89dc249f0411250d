#pragma once

#include "clickrender/device.hpp"
#include "clickrender/signal.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace clickrender {

enum class Percept { Pulse, Oscillation };

/// Trial context of a method-of-limits sweep; None outside section-1 blocks.
enum class SweepContext { None, Increasing, Decreasing };

const char* to_string(Percept p);
Percept percept_from_string(const std::string& s);

inline constexpr std::array<int, 3> kDutyLevels{5, 25, 50};

/// Simulated observer. Stands in for a human subject with a small set of
/// perceptual parameters:
///
/// - A stimulus is felt as one PULSE when the whole cycle fits inside the
///   temporal fusion window, or when the leading positive pulse is wide enough
///   to detect and the cycle is no longer than the oscillation onset for the
///   duty cycle. Otherwise it is felt as an OSCILLATION.
/// - During a sweep the reported pulse/oscillation transition persists in the
///   sweep direction by `sweep_persistence` x onset (errors of habituation).
/// - A click is acceptable when it is felt as a pulse, its initial width lies in
///   [detect_width, max_width], and the fingertip vibration clears the 10 Hz
///   detection threshold. `judgment_noise` is a lapse rate: the probability that
///   an acceptable click is reported as NO on a given trial.
/// - Ratings are a rounded log-normal bump in initial width around
///   `preferred_width_ms` with relative spread `rating_tolerance`.
struct SubjectModel {
  int id = 0;
  int group = 1;
  double detect_width_ms = 2.0;
  double max_width_ms = 30.0;
  double fusion_ms = 15.0;
  std::array<double, 3> osc_onset_ms{150.0, 100.0, 80.0};  // at kDutyLevels
  double sweep_persistence = 0.25;
  double preferred_width_ms = 6.0;
  double rating_peak = 7.0;
  double rating_tolerance = 0.5;
  double judgment_noise = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
  /// Linear in duty between calibration levels, clamped outside [5, 50] %.
  double osc_onset_at(double duty_pct) const;
};

struct Presentation {
  StimulusParams params;
  SweepContext sweep = SweepContext::None;
  std::uint64_t trial_index = 0;
  double envelope_um = kEnergizedEnvelopeTargetUm;  // 10 Hz fingertip vibration at the pressing finger
};

Percept percept(const SubjectModel& subject, const Presentation& p);
Percept percept(const SubjectModel& subject, const StimulusParams& params);

/// Noise-free acceptability.
bool acceptable(const SubjectModel& subject, const Presentation& p);

/// Reported acceptability, lapse noise keyed by (subject seed, subject id, trial index).
bool judge(const SubjectModel& subject, const Presentation& p);
bool judge(const SubjectModel& subject, const StimulusParams& params);

/// 0..7; 0 whenever judge() says NO.
int rate(const SubjectModel& subject, const Presentation& p);
int rate(const SubjectModel& subject, const StimulusParams& params);

inline constexpr std::uint64_t kDefaultRosterSeed = 20200101;

/// Ten calibrated subjects: ids 1-6 in group 1, 7-9 in group 2, 10 in group 3.
/// The seed only keys per-subject noise streams; perceptual parameters are fixed.
std::vector<SubjectModel> default_population(std::uint64_t seed = kDefaultRosterSeed);

nlohmann::json to_json(const SubjectModel& s);
SubjectModel subject_from_json(const nlohmann::json& j);

}  // namespace clickrender
