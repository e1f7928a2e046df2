#include "deepbeat/harness/dataset_io.hpp"

#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "deepbeat/dsp.hpp"
#include "deepbeat/error.hpp"
#include "fileio.hpp"

namespace deepbeat::harness {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

std::vector<double> DatasetBundle::window(std::size_t i) const {
  require(i < count(), ErrorKind::Shape, "dataset: window index out of range");
  return {windows.begin() + static_cast<std::ptrdiff_t>(i * window_length),
          windows.begin() + static_cast<std::ptrdiff_t>((i + 1) * window_length)};
}

DatasetBundle build_dataset(const sim::DatasetRecipe& recipe) {
  const auto records = sim::make_sim_dataset(recipe);
  DatasetBundle b;
  b.seed = recipe.seed;
  b.source_fs = recipe.fs;
  for (const auto& rec : records) {
    const double stride = rec.partition == Partition::Train ? dsp::kTrainStride : dsp::kEvalStride;
    const auto noisy = dsp::preprocess(rec.noisy, stride);
    const auto clean = dsp::preprocess(rec.clean, stride);
    require(noisy.size() == clean.size(), ErrorKind::Data, "dataset: clean and noisy window counts differ");
    for (std::size_t k = 0; k < noisy.size(); ++k) {
      WindowLabel l;
      l.window_id = rec.subject_id + "-r" + std::to_string(rec.index) + "-w" + std::to_string(k);
      l.subject_id = rec.subject_id;
      l.partition = rec.partition;
      l.rhythm = rec.rhythm;
      l.qa = rec.qa;
      // One record is one uninterrupted rhythm run of its subject.
      l.episode_id = rec.subject_id + "-e0";
      l.noise_factor = rec.noise_factor;
      b.labels.push_back(std::move(l));
      for (double v : noisy[k].samples) b.windows.push_back(static_cast<float>(v));
      for (double v : clean[k].samples) b.clean.push_back(static_cast<float>(v));
    }
  }
  return b;
}

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void check_bundle(const DatasetBundle& b) {
  require(b.window_length == kWindowLength, ErrorKind::Format, "dataset: window_length must be 800");
  require(b.windows.size() == b.count() * b.window_length, ErrorKind::Format,
          "dataset: windows blob does not match the label count");
  require(b.clean.empty() || b.clean.size() == b.windows.size(), ErrorKind::Format,
          "dataset: clean blob does not match the windows blob");
  std::map<std::string, Partition> owner;
  std::set<std::string> ids;
  for (const auto& l : b.labels) {
    require(!l.window_id.empty() && !l.subject_id.empty(), ErrorKind::Format, "dataset: empty window or subject id");
    require(ids.insert(l.window_id).second, ErrorKind::Format, "dataset: duplicate window id " + l.window_id);
    auto [it, fresh] = owner.try_emplace(l.subject_id, l.partition);
    require(fresh || it->second == l.partition, ErrorKind::Format,
            "dataset: subject " + l.subject_id + " appears in more than one partition");
  }
}

ordered_json nested_counts(const DatasetBundle& b) {
  ordered_json counts = ordered_json::object();
  for (Partition p : {Partition::Train, Partition::Val, Partition::Test}) {
    ordered_json by_rhythm = ordered_json::object();
    for (Rhythm r : {Rhythm::Sinus, Rhythm::AF}) {
      ordered_json by_qa = ordered_json::object();
      for (Quality q : {Quality::Excellent, Quality::Acceptable, Quality::Poor}) {
        std::size_t n = 0;
        for (const auto& l : b.labels) n += (l.partition == p && l.rhythm == r && l.qa == q) ? 1 : 0;
        by_qa[std::string(to_string(q))] = n;
      }
      by_rhythm[std::string(to_string(r))] = by_qa;
    }
    counts[std::string(to_string(p))] = by_rhythm;
  }
  return counts;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

constexpr const char* kLabelHeader = "window_id\tsubject_id\tpartition\trhythm\tqa\tepisode_id\tnoise_factor";

}  // namespace

void save_dataset(const DatasetBundle& b, const fs::path& dir) {
  check_bundle(b);
  detail::ensure_dir(dir);
  std::string blob;
  detail::append_raw(blob, b.windows.data(), b.windows.size());
  detail::atomic_write(dir / "windows.f32", blob);
  if (!b.clean.empty()) {
    std::string c;
    detail::append_raw(c, b.clean.data(), b.clean.size());
    detail::atomic_write(dir / "clean.f32", c);
  }
  std::string tsv = std::string(kLabelHeader) + "\n";
  for (const auto& l : b.labels) {
    tsv += l.window_id + "\t" + l.subject_id + "\t" + std::string(to_string(l.partition)) + "\t" +
           std::string(to_string(l.rhythm)) + "\t" + std::string(to_string(l.qa)) + "\t" + l.episode_id + "\t" +
           fmt(l.noise_factor) + "\n";
  }
  detail::atomic_write(dir / "labels.tsv", tsv);

  ordered_json m;
  m["format"] = "deepbeat-dataset";
  m["version"] = kDatasetVersion;
  m["count"] = b.count();
  m["window_length"] = b.window_length;
  m["fs"] = b.fs;
  m["source_fs"] = b.source_fs;
  m["seed"] = b.seed;
  m["counts"] = nested_counts(b);
  ordered_json blobs = ordered_json::object();
  blobs["windows"] = {{"file", "windows.f32"}, {"dtype", "f32"}, {"shape", {b.count(), b.window_length}}};
  if (!b.clean.empty())
    blobs["clean"] = {{"file", "clean.f32"}, {"dtype", "f32"}, {"shape", {b.count(), b.window_length}}};
  m["blobs"] = blobs;
  // Manifest last: a directory with a manifest is complete.
  detail::atomic_write(dir / "manifest.json", m.dump(2) + "\n");
}

DatasetBundle load_dataset(const fs::path& dir) {
  ordered_json m;
  try {
    m = ordered_json::parse(detail::read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, "dataset manifest: " + std::string(e.what()));
  }
  DatasetBundle b;
  std::size_t count = 0;
  bool has_clean = false;
  try {
    require(m.at("format").get<std::string>() == "deepbeat-dataset", ErrorKind::Format,
            "dataset manifest: field 'format' is not deepbeat-dataset");
    const int version = m.at("version").get<int>();
    require(version == kDatasetVersion, ErrorKind::Format,
            "dataset manifest: field 'version' is " + std::to_string(version) + ", this reader supports " +
                std::to_string(kDatasetVersion));
    count = m.at("count").get<std::size_t>();
    b.window_length = m.at("window_length").get<std::size_t>();
    b.fs = m.at("fs").get<double>();
    b.source_fs = m.at("source_fs").get<double>();
    b.seed = m.at("seed").get<std::uint64_t>();
    has_clean = m.at("blobs").contains("clean");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, "dataset manifest: " + std::string(e.what()));
  }
  require(b.window_length == kWindowLength, ErrorKind::Format, "dataset manifest: field 'window_length' must be 800");

  const auto read_blob = [&](const char* file) {
    const std::string raw = detail::read_file(dir / file);
    require(raw.size() == count * b.window_length * sizeof(float), ErrorKind::Format,
            std::string("dataset: ") + file + " holds " + std::to_string(raw.size()) + " bytes, manifest field 'count' implies " +
                std::to_string(count * b.window_length * sizeof(float)));
    return detail::take_raw<float>(raw, 0, count * b.window_length, file);
  };
  b.windows = read_blob("windows.f32");
  if (has_clean) b.clean = read_blob("clean.f32");

  std::istringstream tsv(detail::read_file(dir / "labels.tsv"));
  std::string line;
  require(std::getline(tsv, line) && line == kLabelHeader, ErrorKind::Format, "labels.tsv: unexpected header");
  for (std::size_t row = 1; std::getline(tsv, line); ++row) {
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    const std::string where = "labels.tsv row " + std::to_string(row) + ": ";
    require(f.size() == 7, ErrorKind::Format, where + "expected 7 columns");
    WindowLabel l;
    l.window_id = f[0];
    l.subject_id = f[1];
    const auto p = parse_partition(f[2]);
    const auto r = parse_rhythm(f[3]);
    const auto q = parse_quality(f[4]);
    require(p.has_value(), ErrorKind::Format, where + "field 'partition' has unknown value '" + f[2] + "'");
    require(r.has_value(), ErrorKind::Format, where + "field 'rhythm' has unknown value '" + f[3] + "'");
    require(q.has_value(), ErrorKind::Format, where + "field 'qa' has unknown value '" + f[4] + "'");
    l.partition = *p;
    l.rhythm = *r;
    l.qa = *q;
    l.episode_id = f[5];
    try {
      std::size_t used = 0;
      l.noise_factor = std::stod(f[6], &used);
      require(used == f[6].size(), ErrorKind::Format, where + "field 'noise_factor' is not a number");
    } catch (const std::logic_error&) {
      fail(ErrorKind::Format, where + "field 'noise_factor' is not a number");
    }
    b.labels.push_back(std::move(l));
  }
  require(b.labels.size() == count, ErrorKind::Format,
          "dataset: manifest field 'count' is " + std::to_string(count) + " but labels.tsv has " +
              std::to_string(b.labels.size()) + " rows");
  check_bundle(b);
  return b;
}

std::vector<std::size_t> partition_indices(const DatasetBundle& b, Partition p) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < b.count(); ++i)
    if (b.labels[i].partition == p) idx.push_back(i);
  return idx;
}

std::vector<double> gather_windows(const DatasetBundle& b, const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  out.reserve(idx.size() * b.window_length);
  for (std::size_t i : idx)
    for (std::size_t k = 0; k < b.window_length; ++k) out.push_back(b.windows[i * b.window_length + k]);
  return out;
}

net::LabeledSet labeled_set(const DatasetBundle& b, Partition p) {
  const auto idx = partition_indices(b, p);
  net::LabeledSet s;
  s.count = idx.size();
  s.x = gather_windows(b, idx);
  for (std::size_t i : idx) {
    s.rhythm.push_back(static_cast<int>(b.labels[i].rhythm));
    s.qa.push_back(static_cast<int>(b.labels[i].qa));
  }
  return s;
}

cdae::PairSet pair_set(const DatasetBundle& b, Partition p) {
  require(!b.clean.empty(), ErrorKind::Data, "dataset has no clean targets for autoencoder pretraining");
  const auto idx = partition_indices(b, p);
  cdae::PairSet s;
  s.count = idx.size();
  s.noisy = gather_windows(b, idx);
  s.clean.reserve(s.noisy.size());
  for (std::size_t i : idx)
    for (std::size_t k = 0; k < b.window_length; ++k) s.clean.push_back(b.clean[i * b.window_length + k]);
  return s;
}

}  // namespace deepbeat::harness
