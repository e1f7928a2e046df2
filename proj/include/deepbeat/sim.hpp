#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deepbeat/random.hpp"
#include "deepbeat/types.hpp"

namespace deepbeat::sim {

/// Two-Gaussian pulse shape. Positions and widths are fractions of the beat's
/// RR interval, so the shape is rate invariant.
struct PulseTemplate {
  double systolic_pos = 0.30;
  double systolic_amp = 1.00;
  double systolic_width = 0.10;
  double dicrotic_pos = 0.65;
  double dicrotic_amp = 0.35;
  double dicrotic_width = 0.15;

  /// Shape at normalized beat time tau in [0, 1]. The linear trend between the
  /// two endpoints is removed so every beat starts and ends at zero and beats
  /// never overlap.
  double evaluate(double tau) const;

  /// Maximum of evaluate() over [0, 1].
  double peak() const;
};

struct SimConfig {
  double bpm = 60.0;
  double duration_s = 25.0;
  double fs = 128.0;
  Rhythm rhythm = Rhythm::Sinus;
  double bw_amp = 0.0;
  double bw_freq = 0.2;
  double am_depth = 0.0;
  double am_freq = 0.2;
  /// AF: coefficient of variation of RR intervals. Sinus: any positive value
  /// switches on the respiratory RR modulation below; zero disables it.
  double fm_cv = 0.0;
  double noise_factor = 0.0;
  std::uint64_t seed = 0;

  double rsa_depth = 0.05;
  double rsa_freq = 0.25;
  PulseTemplate pulse;

  /// Throws Config on any invariant violation.
  void validate() const;
};

std::vector<double> gen_rr(const SimConfig& config, Rng& rng);

Signal synth_ppg(const std::vector<double>& rr, const SimConfig& config);

/// x + noise_factor * std(x) * N(0, 1), sample by sample.
Signal corrupt(const Signal& x, double noise_factor, Rng& rng);

/// Convenience: gen_rr + synth_ppg + corrupt with streams derived from config.seed.
struct SimulatedPair {
  Signal clean;
  Signal noisy;
  std::vector<double> rr;
};
SimulatedPair simulate(const SimConfig& config);

/// Noise-factor thresholds behind the QA proxy label.
struct QaThresholds {
  double excellent_max = 0.15;
  double acceptable_max = 0.75;
};

Quality qa_proxy(double noise_factor, const QaThresholds& thresholds = {});

const std::vector<double>& default_noise_factors();
const std::vector<double>& methods_noise_factors();
const std::vector<double>& figure_noise_factors();

/// Dataset recipe. Records are assigned to (rhythm, noise factor) cells round
/// robin, so per-cell counts are as even as the totals allow. With
/// pair_all_noise_factors every clean signal is corrupted at every factor.
struct DatasetRecipe {
  std::vector<double> noise_factors = default_noise_factors();
  std::vector<Rhythm> rhythms = {Rhythm::Sinus, Rhythm::AF};
  std::size_t train_count = 0;
  std::size_t val_count = 0;
  std::size_t test_count = 0;
  bool pair_all_noise_factors = false;

  double duration_s = 25.0;
  double fs = 128.0;
  double bpm_min = 50.0;
  double bpm_max = 110.0;
  double af_cv_min = 0.15;
  double af_cv_max = 0.30;
  double sinus_fm_cv = 0.05;
  double bw_amp_max = 0.2;
  double bw_freq_min = 0.05;
  double bw_freq_max = 0.35;
  double am_depth_max = 0.2;
  double am_freq_min = 0.1;
  double am_freq_max = 0.4;
  QaThresholds qa;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SimRecord {
  std::size_t index = 0;
  std::string subject_id;
  Partition partition = Partition::Train;
  Rhythm rhythm = Rhythm::Sinus;
  double noise_factor = 0.0;
  Quality qa = Quality::Excellent;
  Signal clean;
  Signal noisy;
};

std::vector<SimRecord> make_sim_dataset(const DatasetRecipe& recipe);

}  // namespace deepbeat::sim
