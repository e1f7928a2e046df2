#include "deepbeat/harness/checkpoint.hpp"

#include <json.hpp>

#include "deepbeat/error.hpp"
#include "fileio.hpp"

namespace deepbeat::harness {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Cdae: return "cdae";
    case ModelKind::DeepBeat: return "deepbeat";
    case ModelKind::Forest: return "forest";
  }
  return "unknown";
}

std::optional<ModelKind> parse_model_kind(std::string_view s) {
  for (ModelKind k : {ModelKind::Cdae, ModelKind::DeepBeat, ModelKind::Forest})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

namespace {

ordered_json spec_json(const nn::LayerSpec& s) {
  ordered_json j;
  j["kind"] = std::string(nn::to_string(s.kind));
  switch (s.kind) {
    case nn::LayerKind::Conv1D:
      j["filters"] = s.filters;
      j["kernel"] = s.kernel;
      j["stride"] = s.stride;
      j["padding"] = std::string(nn::to_string(s.padding));
      j["activation"] = std::string(nn::to_string(s.activation));
      j["slope"] = s.slope;
      break;
    case nn::LayerKind::Dense:
      j["units"] = s.units;
      j["activation"] = std::string(nn::to_string(s.activation));
      j["slope"] = s.slope;
      break;
    case nn::LayerKind::MaxPool1D: j["pool"] = s.pool; break;
    case nn::LayerKind::UpSample1D: j["factor"] = s.factor; break;
    case nn::LayerKind::BatchNorm:
      j["momentum"] = s.momentum;
      j["epsilon"] = s.epsilon;
      break;
    case nn::LayerKind::Dropout: j["rate"] = s.rate; break;
    case nn::LayerKind::LeakyReLU: j["slope"] = s.slope; break;
    default: break;
  }
  return j;
}

nn::LayerSpec spec_from_json(const ordered_json& j) {
  const auto kind_name = j.at("kind").get<std::string>();
  const auto kind = nn::parse_layer_kind(kind_name);
  require(kind.has_value(), ErrorKind::Format, "checkpoint: unknown layer kind '" + kind_name + "'");
  nn::LayerSpec s;
  s.kind = *kind;
  const auto activation = [&]() {
    const auto a = nn::parse_activation(j.at("activation").get<std::string>());
    require(a.has_value(), ErrorKind::Format, "checkpoint: unknown activation");
    return *a;
  };
  switch (s.kind) {
    case nn::LayerKind::Conv1D: {
      s.filters = j.at("filters").get<std::size_t>();
      s.kernel = j.at("kernel").get<std::size_t>();
      s.stride = j.at("stride").get<std::size_t>();
      const auto pad = nn::parse_padding(j.at("padding").get<std::string>());
      require(pad.has_value(), ErrorKind::Format, "checkpoint: unknown padding");
      s.padding = *pad;
      s.activation = activation();
      s.slope = j.at("slope").get<double>();
      break;
    }
    case nn::LayerKind::Dense:
      s.units = j.at("units").get<std::size_t>();
      s.activation = activation();
      s.slope = j.at("slope").get<double>();
      break;
    case nn::LayerKind::MaxPool1D: s.pool = j.at("pool").get<std::size_t>(); break;
    case nn::LayerKind::UpSample1D: s.factor = j.at("factor").get<std::size_t>(); break;
    case nn::LayerKind::BatchNorm:
      s.momentum = j.at("momentum").get<double>();
      s.epsilon = j.at("epsilon").get<double>();
      break;
    case nn::LayerKind::Dropout: s.rate = j.at("rate").get<double>(); break;
    case nn::LayerKind::LeakyReLU: s.slope = j.at("slope").get<double>(); break;
    default: break;
  }
  return s;
}

ordered_json specs_json(const std::vector<nn::LayerSpec>& specs) {
  ordered_json a = ordered_json::array();
  for (const auto& s : specs) a.push_back(spec_json(s));
  return a;
}

std::vector<nn::LayerSpec> specs_from_json(const ordered_json& a) {
  std::vector<nn::LayerSpec> out;
  for (const auto& j : a) out.push_back(spec_from_json(j));
  return out;
}

// Collects named tensors into the manifest table and the blob.
class BlobWriter {
 public:
  template <class T>
  void add(const std::string& name, const std::vector<std::size_t>& shape, const T* data, std::size_t n,
           const char* dtype) {
    ordered_json t;
    t["name"] = name;
    t["shape"] = shape;
    t["dtype"] = dtype;
    t["offset"] = blob_.size();
    table_.push_back(t);
    detail::append_raw(blob_, data, n);
  }

  void add_f32(const std::string& name, const nn::Tensor& t) {
    std::vector<float> v(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) v[i] = static_cast<float>(t[i]);
    add(name, t.shape(), v.data(), v.size(), "f32");
  }

  const ordered_json& table() const { return table_; }
  const std::string& blob() const { return blob_; }

 private:
  ordered_json table_ = ordered_json::array();
  std::string blob_;
};

// Looks tensors up by name and checks dtype and shape.
class BlobReader {
 public:
  BlobReader(const ordered_json& table, std::string blob) : blob_(std::move(blob)) {
    for (const auto& t : table) {
      const auto name = t.at("name").get<std::string>();
      require(!index_.count(name), ErrorKind::Format, "checkpoint: tensor '" + name + "' listed twice");
      index_[name] = t;
    }
  }

  template <class T>
  std::vector<T> get(const std::string& name, const std::vector<std::size_t>& shape, const char* dtype) {
    const auto it = index_.find(name);
    require(it != index_.end(), ErrorKind::Format, "checkpoint: tensor '" + name + "' missing");
    const auto& t = it->second;
    require(t.at("dtype").get<std::string>() == dtype, ErrorKind::Format,
            "checkpoint: tensor '" + name + "' has dtype " + t.at("dtype").get<std::string>() + ", expected " + dtype);
    const auto stored = t.at("shape").get<std::vector<std::size_t>>();
    require(stored == shape, ErrorKind::Format,
            "checkpoint: tensor '" + name + "' has shape " + nn::shape_string(stored) + ", model expects " +
                nn::shape_string(shape));
    ++used_;
    return detail::take_raw<T>(blob_, t.at("offset").get<std::size_t>(), nn::shape_size(shape), "checkpoint tensor '" + name + "'");
  }

  /// Stored shape of a tensor (forest tables have data-dependent sizes).
  std::vector<std::size_t> shape_of(const std::string& name) const {
    const auto it = index_.find(name);
    require(it != index_.end(), ErrorKind::Format, "checkpoint: tensor '" + name + "' missing");
    return it->second.at("shape").get<std::vector<std::size_t>>();
  }

  void load_f32(const std::string& name, nn::Tensor& into) {
    const auto v = get<float>(name, into.shape(), "f32");
    for (std::size_t i = 0; i < v.size(); ++i) into[i] = v[i];
  }

  void expect_all_used() const {
    require(used_ == index_.size(), ErrorKind::Format, "checkpoint: weights table lists tensors the model does not have");
  }

 private:
  std::string blob_;
  std::map<std::string, ordered_json> index_;
  std::size_t used_ = 0;
};

void add_section(BlobWriter& w, const std::string& section, const nn::Sequential& s) {
  for (std::size_t i = 0; i < s.size(); ++i)
    for (const nn::Parameter* p : s.layer(i).parameters())
      w.add_f32(section + "/" + std::to_string(i) + "/" + p->name, p->value);
}

void load_section(BlobReader& r, const std::string& section, nn::Sequential& s) {
  for (std::size_t i = 0; i < s.size(); ++i)
    for (nn::Parameter* p : s.layer(i).parameters()) r.load_f32(section + "/" + std::to_string(i) + "/" + p->name, p->value);
}

ordered_json training_object(const std::string& text) {
  if (text.empty()) return ordered_json::object();
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, "training configuration is not valid JSON: " + std::string(e.what()));
  }
  require(j.is_object(), ErrorKind::Config, "training configuration must be a JSON object");
  return j;
}

ordered_json header(ModelKind kind, std::uint64_t seed, const std::string& training_json) {
  ordered_json m;
  m["format"] = "deepbeat-checkpoint";
  m["version"] = kCheckpointVersion;
  m["kind"] = std::string(to_string(kind));
  m["seed"] = seed;
  m["training"] = training_object(training_json);
  return m;
}

void write(const fs::path& dir, ordered_json manifest, const BlobWriter& w) {
  detail::ensure_dir(dir);
  manifest["weights"] = {{"file", "weights.bin"}, {"bytes", w.blob().size()}};
  manifest["tensors"] = w.table();
  detail::atomic_write(dir / "weights.bin", w.blob());
  detail::atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
}

ordered_json read_manifest(const fs::path& dir) {
  ordered_json m;
  try {
    m = ordered_json::parse(detail::read_file(dir / "manifest.json"));
    require(m.at("format").get<std::string>() == "deepbeat-checkpoint", ErrorKind::Format,
            "checkpoint manifest: field 'format' is not deepbeat-checkpoint");
    const int version = m.at("version").get<int>();
    require(version == kCheckpointVersion, ErrorKind::Format,
            "checkpoint manifest: field 'version' is " + std::to_string(version) + ", this reader supports " +
                std::to_string(kCheckpointVersion));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, "checkpoint manifest: " + std::string(e.what()));
  }
  return m;
}

ModelKind kind_of(const ordered_json& m) {
  const auto name = m.at("kind").get<std::string>();
  const auto k = parse_model_kind(name);
  require(k.has_value(), ErrorKind::Format, "checkpoint manifest: unknown model kind '" + name + "'");
  return *k;
}

BlobReader open_blob(const fs::path& dir, const ordered_json& m) {
  std::string blob = detail::read_file(dir / "weights.bin");
  const auto bytes = m.at("weights").at("bytes").get<std::size_t>();
  require(blob.size() == bytes, ErrorKind::Format,
          "checkpoint: weights.bin holds " + std::to_string(blob.size()) + " bytes, manifest says " + std::to_string(bytes));
  return BlobReader(m.at("tensors"), std::move(blob));
}

cdae::Profile profile_of(const ordered_json& m) {
  const auto p = cdae::parse_profile(m.at("profile").get<std::string>());
  require(p.has_value(), ErrorKind::Format, "checkpoint manifest: unknown profile");
  return *p;
}

// Wraps nlohmann and shape errors raised while decoding into Format errors.
template <class F>
auto decode(F f) -> decltype(f()) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, "checkpoint manifest: " + std::string(e.what()));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Shape || e.kind() == ErrorKind::Config)
      fail(ErrorKind::Format, std::string("checkpoint: ") + e.what());
    throw;
  }
}

}  // namespace

void save_checkpoint(const cdae::CdaeModel& model, const fs::path& dir, const std::string& training_json) {
  ordered_json m = header(ModelKind::Cdae, model.seed, training_json);
  m["profile"] = std::string(cdae::to_string(model.profile));
  m["trained"] = model.trained;
  m["sections"] = {{"net", specs_json(model.net.specs())}};
  ordered_json hist = ordered_json::array();
  for (const auto& h : model.history)
    hist.push_back({{"epoch", h.epoch}, {"train_mse", h.train_mse}, {"val_mse", h.val_mse}, {"lr", h.lr}});
  m["history"] = hist;
  BlobWriter w;
  add_section(w, "net", model.net);
  write(dir, m, w);
}

void save_checkpoint(const net::DeepBeatModel& model, const fs::path& dir, const std::string& training_json) {
  ordered_json m = header(ModelKind::DeepBeat, model.seed, training_json);
  m["profile"] = std::string(cdae::to_string(model.profile));
  m["trained"] = model.trained;
  m["pretrained"] = model.pretrained;
  m["lambda_qa"] = model.lambda_qa;
  m["sections"] = {{"encoder", specs_json(model.encoder.specs())},
                   {"shared", specs_json(model.shared.specs())},
                   {"rhythm", specs_json(model.rhythm.specs())},
                   {"qa", specs_json(model.qa.specs())}};
  ordered_json hist = ordered_json::array();
  for (const auto& h : model.history)
    hist.push_back({{"epoch", h.epoch},
                    {"train_rhythm", h.train_rhythm},
                    {"train_qa", h.train_qa},
                    {"train_total", h.train_total},
                    {"val_rhythm", h.val_rhythm},
                    {"val_qa", h.val_qa},
                    {"val_total", h.val_total},
                    {"val_rhythm_acc", h.val_rhythm_acc},
                    {"val_qa_acc", h.val_qa_acc}});
  m["history"] = hist;
  BlobWriter w;
  add_section(w, "encoder", model.encoder);
  add_section(w, "shared", model.shared);
  add_section(w, "rhythm", model.rhythm);
  add_section(w, "qa", model.qa);
  write(dir, m, w);
}

void save_checkpoint(const baseline::Forest& f, const fs::path& dir, const std::string& training_json) {
  ordered_json m = header(ModelKind::Forest, f.config.seed, training_json);
  m["n_features"] = f.n_features;
  m["config"] = {{"n_estimators", f.config.n_estimators},
                 {"seed", f.config.seed},
                 {"max_features", f.config.max_features},
                 {"bootstrap", f.config.bootstrap}};
  BlobWriter w;
  ordered_json ensembles = ordered_json::object();
  for (const auto& [name, e] : {std::pair<std::string, const baseline::Ensemble*>{"rhythm", &f.rhythm},
                                std::pair<std::string, const baseline::Ensemble*>{"qa", &f.qa}}) {
    ensembles[name] = {{"n_classes", e->n_classes}, {"trees", e->trees.size()}};
    for (std::size_t t = 0; t < e->trees.size(); ++t) {
      const baseline::Tree& tree = e->trees[t];
      const std::string p = name + "/" + std::to_string(t) + "/";
      const std::size_t n = tree.node_count();
      w.add(p + "feature", {n}, tree.feature.data(), n, "i32");
      // Thresholds are midpoints of feature values; keep them exact.
      w.add(p + "threshold", {n}, tree.threshold.data(), n, "f64");
      w.add(p + "left", {n}, tree.left.data(), n, "i32");
      w.add(p + "right", {n}, tree.right.data(), n, "i32");
      w.add(p + "counts", {n, tree.n_classes}, tree.counts.data(), tree.counts.size(), "f64");
    }
  }
  m["ensembles"] = ensembles;
  write(dir, m, w);
}

ModelKind checkpoint_kind(const fs::path& dir) {
  const auto m = read_manifest(dir);
  return decode([&] { return kind_of(m); });
}

cdae::CdaeModel load_cdae(const fs::path& dir) {
  const auto m = read_manifest(dir);
  return decode([&] {
    require(kind_of(m) == ModelKind::Cdae, ErrorKind::Format,
            "checkpoint holds a " + m.at("kind").get<std::string>() + " model, expected cdae");
    auto model = cdae::build_cdae(profile_of(m), m.at("seed").get<std::uint64_t>(),
                                  specs_from_json(m.at("sections").at("net")));
    BlobReader r = open_blob(dir, m);
    load_section(r, "net", model.net);
    r.expect_all_used();
    model.trained = m.at("trained").get<bool>();
    for (const auto& h : m.at("history"))
      model.history.push_back({h.at("epoch").get<std::size_t>(), h.at("train_mse").get<double>(),
                               h.at("val_mse").get<double>(), h.at("lr").get<double>()});
    return model;
  });
}

net::DeepBeatModel load_deepbeat(const fs::path& dir) {
  const auto m = read_manifest(dir);
  return decode([&] {
    require(kind_of(m) == ModelKind::DeepBeat, ErrorKind::Format,
            "checkpoint holds a " + m.at("kind").get<std::string>() + " model, expected deepbeat");
    const auto& sec = m.at("sections");
    net::DeepBeatSpecs specs{specs_from_json(sec.at("encoder")), specs_from_json(sec.at("shared")),
                             specs_from_json(sec.at("rhythm")), specs_from_json(sec.at("qa"))};
    auto model = net::build_deepbeat(profile_of(m), m.at("seed").get<std::uint64_t>(), specs);
    BlobReader r = open_blob(dir, m);
    load_section(r, "encoder", model.encoder);
    load_section(r, "shared", model.shared);
    load_section(r, "rhythm", model.rhythm);
    load_section(r, "qa", model.qa);
    r.expect_all_used();
    model.trained = m.at("trained").get<bool>();
    model.pretrained = m.at("pretrained").get<bool>();
    model.lambda_qa = m.at("lambda_qa").get<double>();
    for (const auto& h : m.at("history")) {
      net::EpochRecord e;
      e.epoch = h.at("epoch").get<std::size_t>();
      e.train_rhythm = h.at("train_rhythm").get<double>();
      e.train_qa = h.at("train_qa").get<double>();
      e.train_total = h.at("train_total").get<double>();
      e.val_rhythm = h.at("val_rhythm").get<double>();
      e.val_qa = h.at("val_qa").get<double>();
      e.val_total = h.at("val_total").get<double>();
      e.val_rhythm_acc = h.at("val_rhythm_acc").get<double>();
      e.val_qa_acc = h.at("val_qa_acc").get<double>();
      model.history.push_back(e);
    }
    return model;
  });
}

baseline::Forest load_forest(const fs::path& dir) {
  const auto m = read_manifest(dir);
  return decode([&] {
    require(kind_of(m) == ModelKind::Forest, ErrorKind::Format,
            "checkpoint holds a " + m.at("kind").get<std::string>() + " model, expected forest");
    baseline::Forest f;
    const auto& c = m.at("config");
    f.config.n_estimators = c.at("n_estimators").get<std::size_t>();
    f.config.seed = c.at("seed").get<std::uint64_t>();
    f.config.max_features = c.at("max_features").get<std::size_t>();
    f.config.bootstrap = c.at("bootstrap").get<bool>();
    f.n_features = m.at("n_features").get<std::size_t>();
    require(f.n_features == baseline::kFeatureCount, ErrorKind::Format, "forest checkpoint: unexpected feature count");
    BlobReader r = open_blob(dir, m);
    for (auto [name, e] : {std::pair<std::string, baseline::Ensemble*>{"rhythm", &f.rhythm},
                           std::pair<std::string, baseline::Ensemble*>{"qa", &f.qa}}) {
      const auto& meta = m.at("ensembles").at(name);
      e->n_classes = meta.at("n_classes").get<std::size_t>();
      const auto trees = meta.at("trees").get<std::size_t>();
      for (std::size_t t = 0; t < trees; ++t) {
        const std::string p = name + "/" + std::to_string(t) + "/";
        baseline::Tree tree;
        tree.n_classes = e->n_classes;
        const auto shape = r.shape_of(p + "feature");
        require(shape.size() == 1, ErrorKind::Format, "forest checkpoint: bad node table shape");
        const std::size_t n = shape[0];
        tree.feature = r.get<int>(p + "feature", {n}, "i32");
        tree.threshold = r.get<double>(p + "threshold", {n}, "f64");
        tree.left = r.get<int>(p + "left", {n}, "i32");
        tree.right = r.get<int>(p + "right", {n}, "i32");
        tree.counts = r.get<double>(p + "counts", {n, e->n_classes}, "f64");
        for (std::size_t k = 0; k < n; ++k) {
          const bool leaf = tree.feature[k] < 0;
          require(leaf || (tree.feature[k] < static_cast<int>(f.n_features) && tree.left[k] > static_cast<int>(k) &&
                           tree.right[k] > static_cast<int>(k) && tree.left[k] < static_cast<int>(n) &&
                           tree.right[k] < static_cast<int>(n)),
                  ErrorKind::Format, "forest checkpoint: corrupt node table in " + p);
        }
        e->trees.push_back(std::move(tree));
      }
    }
    r.expect_all_used();
    return f;
  });
}

}  // namespace deepbeat::harness
