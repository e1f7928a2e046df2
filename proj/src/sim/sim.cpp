#include "deepbeat/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "deepbeat/error.hpp"
#include "deepbeat/parallel.hpp"

namespace deepbeat::sim {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double gaussian(double x, double mu, double sigma) {
  const double d = (x - mu) / sigma;
  return std::exp(-0.5 * d * d);
}

double raw_shape(const PulseTemplate& p, double tau) {
  return p.systolic_amp * gaussian(tau, p.systolic_pos, p.systolic_width) +
         p.dicrotic_amp * gaussian(tau, p.dicrotic_pos, p.dicrotic_width);
}

double sample_std(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

}  // namespace

double PulseTemplate::evaluate(double tau) const {
  const double start = raw_shape(*this, 0.0);
  const double end = raw_shape(*this, 1.0);
  return raw_shape(*this, tau) - (start + (end - start) * tau);
}

double PulseTemplate::peak() const {
  // Dense scan then golden-section refinement around the best grid point.
  constexpr int kGrid = 4000;
  int best = 0;
  double best_v = evaluate(0.0);
  for (int i = 1; i <= kGrid; ++i) {
    const double v = evaluate(static_cast<double>(i) / kGrid);
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  double lo = std::max(0.0, (best - 1.0) / kGrid);
  double hi = std::min(1.0, (best + 1.0) / kGrid);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 60; ++it) {
    const double a = hi - g * (hi - lo);
    const double b = lo + g * (hi - lo);
    if (evaluate(a) > evaluate(b)) hi = b; else lo = a;
  }
  return std::max(best_v, evaluate(0.5 * (lo + hi)));
}

void SimConfig::validate() const {
  auto check = [](bool ok, const std::string& msg) { require(ok, ErrorKind::Config, "SimConfig: " + msg); };
  check(std::isfinite(bpm) && bpm >= 30.0 && bpm <= 220.0, "bpm must lie in [30, 220]");
  check(std::isfinite(duration_s) && duration_s > 0.0, "duration_s must be positive");
  check(std::isfinite(fs) && fs > 0.0, "fs must be positive");
  check(bw_amp >= 0.0 && am_depth >= 0.0 && am_depth < 1.0, "modulation depths must be in range");
  check(bw_freq >= 0.0 && am_freq >= 0.0 && rsa_freq >= 0.0, "modulation frequencies must be non-negative");
  check(noise_factor >= 0.0, "noise_factor must be non-negative");
  check(fm_cv >= 0.0, "fm_cv must be non-negative");
  if (rhythm == Rhythm::AF) {
    check(fm_cv > 0.0, "AF rhythm requires fm_cv > 0");
    // Uniform(-sqrt(3) cv, sqrt(3) cv) must stay above -1 for positive intervals.
    check(fm_cv * std::sqrt(3.0) < 0.9, "fm_cv too large for positive RR intervals");
  }
  check(rsa_depth >= 0.0 && rsa_depth < 0.5, "rsa_depth must be in [0, 0.5)");
  const double highest = std::max({bpm / 60.0, bw_freq, am_freq, rsa_freq});
  check(fs > 2.0 * highest, "fs must exceed twice the highest simulated frequency");
  check(pulse.systolic_width > 0.0 && pulse.dicrotic_width > 0.0, "pulse widths must be positive");
}

std::vector<double> gen_rr(const SimConfig& config, Rng& rng) {
  config.validate();
  const double base = 60.0 / config.bpm;
  std::vector<double> rr;
  rr.reserve(static_cast<std::size_t>(config.duration_s / base * 1.5) + 4);
  double t = 0.0;
  if (config.rhythm == Rhythm::Sinus) {
    const double depth = config.fm_cv > 0.0 ? config.rsa_depth : 0.0;
    while (t < config.duration_s) {
      const double interval = base * (1.0 + depth * std::sin(kTwoPi * config.rsa_freq * t));
      rr.push_back(interval);
      t += interval;
    }
  } else {
    const double half_width = std::sqrt(3.0) * config.fm_cv;
    std::uniform_real_distribution<double> jitter(-half_width, half_width);
    while (t < config.duration_s) {
      const double interval = base * (1.0 + jitter(rng));
      rr.push_back(interval);
      t += interval;
    }
  }
  return rr;
}

Signal synth_ppg(const std::vector<double>& rr, const SimConfig& config) {
  config.validate();
  require(!rr.empty(), ErrorKind::Domain, "synth_ppg: empty RR sequence");
  for (double v : rr)
    require(std::isfinite(v) && v > 0.0, ErrorKind::Domain, "synth_ppg: RR intervals must be positive");

  const auto n = static_cast<std::size_t>(std::llround(config.duration_s * config.fs));
  require(n > 0, ErrorKind::Config, "synth_ppg: signal would be empty");

  std::vector<double> onsets(rr.size() + 1, 0.0);
  for (std::size_t k = 0; k < rr.size(); ++k) onsets[k + 1] = onsets[k] + rr[k];

  Signal out;
  out.fs = config.fs;
  out.samples.resize(n);
  std::size_t beat = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / config.fs;
    while (beat < rr.size() && t >= onsets[beat + 1]) ++beat;
    double pulse = 0.0;
    if (beat < rr.size()) {
      const double tau = (t - onsets[beat]) / rr[beat];
      const double systole = onsets[beat] + config.pulse.systolic_pos * rr[beat];
      const double amp = 1.0 + config.am_depth * std::sin(kTwoPi * config.am_freq * systole);
      pulse = amp * config.pulse.evaluate(tau);
    }
    out.samples[i] = pulse + config.bw_amp * std::sin(kTwoPi * config.bw_freq * t);
  }
  out.meta = SignalMeta{"", config.rhythm, 0.0};
  return out;
}

Signal corrupt(const Signal& x, double noise_factor, Rng& rng) {
  require(std::isfinite(noise_factor) && noise_factor >= 0.0, ErrorKind::Domain,
          "corrupt: noise_factor must be non-negative");
  require(!x.samples.empty(), ErrorKind::Domain, "corrupt: empty signal");
  Signal out = x;
  if (noise_factor == 0.0) return out;
  const double sigma = noise_factor * sample_std(x.samples);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : out.samples) v += sigma * normal(rng);
  if (out.meta) out.meta->noise_factor = noise_factor;
  return out;
}

SimulatedPair simulate(const SimConfig& config) {
  Rng rr_rng = make_rng(config.seed, {1});
  Rng noise_rng = make_rng(config.seed, {2});
  SimulatedPair pair;
  pair.rr = gen_rr(config, rr_rng);
  pair.clean = synth_ppg(pair.rr, config);
  pair.noisy = corrupt(pair.clean, config.noise_factor, noise_rng);
  return pair;
}

Quality qa_proxy(double noise_factor, const QaThresholds& thresholds) {
  if (noise_factor <= thresholds.excellent_max) return Quality::Excellent;
  if (noise_factor <= thresholds.acceptable_max) return Quality::Acceptable;
  return Quality::Poor;
}

const std::vector<double>& methods_noise_factors() {
  static const std::vector<double> v{0.001, 0.5, 0.25, 0.75, 1.0, 2.0, 5.0};
  return v;
}

const std::vector<double>& figure_noise_factors() {
  static const std::vector<double> v{0.001, 0.15, 0.5, 0.75, 1.0, 2.0, 5.0};
  return v;
}

const std::vector<double>& default_noise_factors() {
  static const std::vector<double> v{0.001, 0.15, 0.25, 0.5, 0.75, 1.0, 2.0, 5.0};
  return v;
}

void DatasetRecipe::validate() const {
  auto check = [](bool ok, const std::string& msg) { require(ok, ErrorKind::Config, "recipe: " + msg); };
  check(!noise_factors.empty(), "noise_factors must not be empty");
  check(!rhythms.empty(), "rhythms must not be empty");
  check(train_count + val_count + test_count > 0, "at least one record is required");
  for (double nf : noise_factors) check(std::isfinite(nf) && nf >= 0.0, "noise factors must be non-negative");
  check(bpm_min >= 30.0 && bpm_max <= 220.0 && bpm_min <= bpm_max, "bpm range must lie in [30, 220]");
  check(af_cv_min > 0.0 && af_cv_min <= af_cv_max, "AF cv range must be positive and ordered");
  check(sinus_fm_cv >= 0.0, "sinus_fm_cv must be non-negative");
  check(duration_s > 0.0 && fs > 0.0, "duration and fs must be positive");
  check(bw_freq_min <= bw_freq_max && am_freq_min <= am_freq_max, "frequency ranges must be ordered");
  check(qa.excellent_max <= qa.acceptable_max, "QA thresholds must be ordered");
}

std::vector<SimRecord> make_sim_dataset(const DatasetRecipe& recipe) {
  recipe.validate();
  const std::size_t subjects = recipe.train_count + recipe.val_count + recipe.test_count;
  const std::size_t copies = recipe.pair_all_noise_factors ? recipe.noise_factors.size() : 1;
  const std::size_t n_rhythms = recipe.rhythms.size();

  std::vector<SimRecord> records(subjects * copies);
  parallel_for(subjects, [&](std::size_t s) {
    Rng param_rng = make_rng(recipe.seed, {s, 0});
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(param_rng); };

    SimConfig cfg;
    cfg.fs = recipe.fs;
    cfg.duration_s = recipe.duration_s;
    cfg.rhythm = recipe.rhythms[s % n_rhythms];
    cfg.bpm = between(recipe.bpm_min, recipe.bpm_max);
    cfg.fm_cv = cfg.rhythm == Rhythm::AF ? between(recipe.af_cv_min, recipe.af_cv_max) : recipe.sinus_fm_cv;
    cfg.bw_amp = between(0.0, recipe.bw_amp_max);
    cfg.bw_freq = between(recipe.bw_freq_min, recipe.bw_freq_max);
    cfg.am_depth = between(0.0, recipe.am_depth_max);
    cfg.am_freq = between(recipe.am_freq_min, recipe.am_freq_max);
    cfg.rsa_freq = between(0.15, 0.35);
    cfg.seed = derive_seed(recipe.seed, {s, 1});

    Rng rr_rng = make_rng(cfg.seed, {1});
    const auto rr = gen_rr(cfg, rr_rng);
    Signal clean = synth_ppg(rr, cfg);

    Partition partition = Partition::Test;
    if (s < recipe.train_count) partition = Partition::Train;
    else if (s < recipe.train_count + recipe.val_count) partition = Partition::Val;

    std::ostringstream id;
    id << "S" << s;

    for (std::size_t c = 0; c < copies; ++c) {
      const double nf = recipe.pair_all_noise_factors
                            ? recipe.noise_factors[c]
                            : recipe.noise_factors[(s / n_rhythms) % recipe.noise_factors.size()];
      Rng noise_rng = make_rng(cfg.seed, {2, c});
      SimRecord& rec = records[s * copies + c];
      rec.index = s * copies + c;
      rec.subject_id = id.str();
      rec.partition = partition;
      rec.rhythm = cfg.rhythm;
      rec.noise_factor = nf;
      rec.qa = qa_proxy(nf, recipe.qa);
      rec.clean = clean;
      rec.clean.meta = SignalMeta{rec.subject_id, cfg.rhythm, 0.0};
      rec.noisy = corrupt(rec.clean, nf, noise_rng);
      rec.noisy.meta = SignalMeta{rec.subject_id, cfg.rhythm, nf};
    }
  });
  return records;
}

}  // namespace deepbeat::sim
