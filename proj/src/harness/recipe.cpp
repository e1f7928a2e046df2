#include "deepbeat/harness/recipe.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "deepbeat/error.hpp"

namespace deepbeat::harness {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  require(ec == std::errc() && p == v.data() + v.size(), ErrorKind::Config,
          "recipe: " + key + " expects a number, got '" + v + "'");
  return x;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  require(ec == std::errc() && p == v.data() + v.size(), ErrorKind::Config,
          "recipe: " + key + " expects a non-negative integer, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorKind::Config, "recipe: " + key + " expects true or false, got '" + v + "'");
}

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

sim::DatasetRecipe parse_recipe(std::string_view text) {
  sim::DatasetRecipe r;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const auto real = [](double& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) { field = to_double(k, v); };
  };
  const auto count = [](std::size_t& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) { field = static_cast<std::size_t>(to_uint(k, v)); };
  };
  const std::map<std::string, Setter> setters = {
      {"noise_factors",
       [&](const std::string& k, const std::string& v) {
         if (v == "default") r.noise_factors = sim::default_noise_factors();
         else if (v == "methods") r.noise_factors = sim::methods_noise_factors();
         else if (v == "figure") r.noise_factors = sim::figure_noise_factors();
         else {
           r.noise_factors.clear();
           for (const auto& item : split_list(v)) r.noise_factors.push_back(to_double(k, item));
         }
       }},
      {"rhythms",
       [&](const std::string& k, const std::string& v) {
         r.rhythms.clear();
         for (const auto& item : split_list(v)) {
           auto rh = parse_rhythm(item);
           require(rh.has_value(), ErrorKind::Config, "recipe: " + k + " has unknown rhythm '" + item + "'");
           r.rhythms.push_back(*rh);
         }
       }},
      {"train_count", count(r.train_count)},
      {"val_count", count(r.val_count)},
      {"test_count", count(r.test_count)},
      {"pair_all_noise_factors",
       [&](const std::string& k, const std::string& v) { r.pair_all_noise_factors = to_bool(k, v); }},
      {"duration_s", real(r.duration_s)},
      {"fs", real(r.fs)},
      {"bpm_min", real(r.bpm_min)},
      {"bpm_max", real(r.bpm_max)},
      {"af_cv_min", real(r.af_cv_min)},
      {"af_cv_max", real(r.af_cv_max)},
      {"sinus_fm_cv", real(r.sinus_fm_cv)},
      {"bw_amp_max", real(r.bw_amp_max)},
      {"bw_freq_min", real(r.bw_freq_min)},
      {"bw_freq_max", real(r.bw_freq_max)},
      {"am_depth_max", real(r.am_depth_max)},
      {"am_freq_min", real(r.am_freq_min)},
      {"am_freq_max", real(r.am_freq_max)},
      {"qa_excellent_max", real(r.qa.excellent_max)},
      {"qa_acceptable_max", real(r.qa.acceptable_max)},
      {"seed", [&](const std::string& k, const std::string& v) { r.seed = to_uint(k, v); }},
  };

  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    require(eq != std::string::npos, ErrorKind::Config,
            "recipe line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const auto it = setters.find(key);
    require(it != setters.end(), ErrorKind::Config, "recipe line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    require(seen.insert(key).second, ErrorKind::Config, "recipe: key '" + key + "' given twice");
    it->second(key, value);
  }
  r.validate();
  return r;
}

sim::DatasetRecipe load_recipe(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::Io, "cannot read recipe " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_recipe(ss.str());
}

std::string format_recipe(const sim::DatasetRecipe& r) {
  std::ostringstream o;
  o << "noise_factors = ";
  for (std::size_t i = 0; i < r.noise_factors.size(); ++i) o << (i ? ", " : "") << num(r.noise_factors[i]);
  o << "\nrhythms = ";
  for (std::size_t i = 0; i < r.rhythms.size(); ++i) o << (i ? ", " : "") << to_string(r.rhythms[i]);
  o << "\ntrain_count = " << r.train_count << "\nval_count = " << r.val_count << "\ntest_count = " << r.test_count
    << "\npair_all_noise_factors = " << (r.pair_all_noise_factors ? "true" : "false")
    << "\nduration_s = " << num(r.duration_s) << "\nfs = " << num(r.fs) << "\nbpm_min = " << num(r.bpm_min)
    << "\nbpm_max = " << num(r.bpm_max) << "\naf_cv_min = " << num(r.af_cv_min) << "\naf_cv_max = " << num(r.af_cv_max)
    << "\nsinus_fm_cv = " << num(r.sinus_fm_cv) << "\nbw_amp_max = " << num(r.bw_amp_max)
    << "\nbw_freq_min = " << num(r.bw_freq_min) << "\nbw_freq_max = " << num(r.bw_freq_max)
    << "\nam_depth_max = " << num(r.am_depth_max) << "\nam_freq_min = " << num(r.am_freq_min)
    << "\nam_freq_max = " << num(r.am_freq_max) << "\nqa_excellent_max = " << num(r.qa.excellent_max)
    << "\nqa_acceptable_max = " << num(r.qa.acceptable_max) << "\nseed = " << r.seed << "\n";
  return o.str();
}

}  // namespace deepbeat::harness
