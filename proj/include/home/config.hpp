#pragma once

// Run configuration: a flat key/value text format with [sections].
//
//   # comment (also ';')
//   [train]
//   epochs = 200
//   base_lr = 0.05
//
// A key inside [section] is addressed as section.key. Keys before the first
// section header must already be qualified (train.epochs = 10). Every key
// must be known; values are validated before any computation. Later
// assignments (and command-line overrides) replace earlier ones.

#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "home/error.hpp"
#include "home/loss.hpp"
#include "home/trainer.hpp"
#include "home/variants.hpp"

namespace home {

struct KeyInfo {
  const char* key;
  const char* default_value;
  const char* help;
};

inline const std::vector<KeyInfo>& config_keys() {
  static const std::vector<KeyInfo> keys = {
      {"run.seed", "1", "master seed for every random stream"},
      {"run.variant", "HOME-T2-O3-Self-All", "loss plan name"},
      {"run.threads", "1", "worker threads (1 = sequential)"},
      {"model.encoder_widths", "256,128", "encoder hidden widths, comma separated"},
      {"model.projector_width", "64", "projector width D"},
      {"data.classes", "4", "number of classes C"},
      {"data.dim", "32", "input dimension P"},
      {"data.samples", "1024", "training samples"},
      {"data.holdout", "1024", "held-out samples for probe and audits"},
      {"data.prototype_scale", "1", "scale of class prototypes"},
      {"data.noise", "1", "per-sample Gaussian noise"},
      {"data.seed", "", "dataset seed (empty: run.seed)"},
      {"views.noise", "0.5", "additive noise per view"},
      {"views.mask_prob", "0.2", "coordinate dropout probability"},
      {"views.gain_lo", "0.8", "lower per-sample gain"},
      {"views.gain_hi", "1.2", "upper per-sample gain"},
      {"loss.lambda", "1", "redundancy weight"},
      {"loss.epsilon", "1e-12", "normalization epsilon"},
      {"loss.sampling", "full", "full | sampled"},
      {"loss.sample_counts", "", "sampled tuples per order, e.g. 2:500,3:2000"},
      {"train.batch_size", "256", "batch size"},
      {"train.epochs", "200", "epochs"},
      {"train.base_lr", "0.05", "peak learning rate"},
      {"train.final_lr", "0.002", "learning rate at the last step (capped at base_lr)"},
      {"train.warmup_epochs", "10", "linear warmup epochs"},
      {"train.momentum", "0.9", "SGD momentum"},
      {"train.weight_decay", "0.0005", "weight decay on weights"},
      {"probe.iterations", "500", "probe gradient-descent iterations"},
      {"probe.lr", "0.1", "probe learning rate"},
      {"probe.standardize", "true", "z-score representations before probing"},
      {"audit.orders", "2,3", "moment orders to audit"},
      {"audit.sampling", "sampled", "full | sampled"},
      {"audit.sample_counts", "2:2016,3:10000", "sampled tuples per order"},
      {"audit.seed", "", "audit tuple seed (empty: run.seed)"},
      {"diagnose.samples", "10000", "samples for the XOR / total-correlation check"},
  };
  return keys;
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

}  // namespace detail

class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : config_keys()) values_[k.key] = k.default_value;
  }

  static bool known(const std::string& key) {
    for (const auto& k : config_keys())
      if (key == k.key) return true;
    return false;
  }

  void set(const std::string& key, const std::string& value) {
    if (!known(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  // "section.key=value"
  void set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("override '" + assignment + "' is not key=value");
    }
    set(detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
  }

  void parse(std::istream& is, const std::string& source = "<config>") {
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      const auto where = source + ":" + std::to_string(line_no);
      const auto comment = line.find_first_of("#;");
      if (comment != std::string::npos) line.erase(comment);
      line = detail::trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError(where + ": malformed section header");
        section = detail::trim(line.substr(1, line.size() - 2));
        if (section.empty() || section.find_first_of(". ") != std::string::npos) {
          throw ConfigError(where + ": bad section name");
        }
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
      const auto key = detail::trim(line.substr(0, eq));
      const auto full = section.empty() ? key : section + "." + key;
      if (!known(full)) throw ConfigError(where + ": unknown key '" + full + "'");
      values_[full] = detail::trim(line.substr(eq + 1));
    }
  }

  void load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file '" + path + "'");
    parse(f, path);
  }

  const std::string& raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
  }

  double get_double(const std::string& key) const {
    const auto& s = raw(key);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
      throw ConfigError(key + ": expected a number, got '" + s + "'");
    }
    return v;
  }

  std::uint64_t get_u64(const std::string& key) const {
    const auto& s = raw(key);
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
      throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
    }
    return v;
  }

  std::size_t get_size(const std::string& key) const {
    return static_cast<std::size_t>(get_u64(key));
  }

  bool get_bool(const std::string& key) const {
    const auto& s = raw(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(key + ": expected true/false, got '" + s + "'");
  }

  std::vector<std::size_t> get_size_list(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const auto& item : detail::split(raw(key), ',')) {
      std::size_t v = 0;
      const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || p != item.data() + item.size() || item.empty()) {
        throw ConfigError(key + ": bad list item '" + item + "'");
      }
      out.push_back(v);
    }
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
  }

  std::map<int, std::uint64_t> get_order_counts(const std::string& key) const {
    std::map<int, std::uint64_t> out;
    if (raw(key).empty()) return out;
    for (const auto& item : detail::split(raw(key), ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) {
        throw ConfigError(key + ": expected order:count, got '" + item + "'");
      }
      int order = 0;
      std::uint64_t count = 0;
      const auto a = item.substr(0, colon);
      const auto b = item.substr(colon + 1);
      const auto r1 = std::from_chars(a.data(), a.data() + a.size(), order);
      const auto r2 = std::from_chars(b.data(), b.data() + b.size(), count);
      if (r1.ec != std::errc() || r2.ec != std::errc() || r1.ptr != a.data() + a.size() ||
          r2.ptr != b.data() + b.size()) {
        throw ConfigError(key + ": bad entry '" + item + "'");
      }
      out[order] = count;
    }
    return out;
  }

  std::uint64_t seed() const { return get_u64("run.seed"); }
  int threads() const {
    const auto t = get_u64("run.threads");
    if (t < 1 || t > 256) throw ConfigError("run.threads must be in 1..256");
    return static_cast<int>(t);
  }

  Variant variant() const {
    const auto v = parse_variant(raw("run.variant"));
    if (!v) throw ConfigError("run.variant: unknown variant '" + raw("run.variant") + "'");
    return *v;
  }

  std::uint64_t seed_or_run(const std::string& key) const {
    return raw(key).empty() ? seed() : get_u64(key);
  }

  DatasetParams dataset() const {
    DatasetParams p;
    p.classes = get_size("data.classes");
    p.dim = get_size("data.dim");
    p.samples = get_size("data.samples");
    p.prototype_scale = get_double("data.prototype_scale");
    p.noise = get_double("data.noise");
    p.seed = seed_or_run("data.seed");
    p.validate();
    return p;
  }

  std::size_t holdout() const {
    const auto n = get_size("data.holdout");
    if (n < 2) throw ConfigError("data.holdout must be >= 2");
    return n;
  }

  static Sampling sampling_from(const std::string& mode, std::map<int, std::uint64_t> counts,
                                std::uint64_t seed, const std::string& what) {
    if (mode == "full") return Sampling::all();
    if (mode == "sampled") {
      if (counts.empty()) throw ConfigError(what + ": sampled mode needs sample_counts");
      return Sampling::sampled(std::move(counts), seed);
    }
    throw ConfigError(what + ".sampling must be 'full' or 'sampled'");
  }

  LossConfig loss() const {
    LossConfig c;
    c.lambda = get_double("loss.lambda");
    c.epsilon = get_double("loss.epsilon");
    c.sampling = sampling_from(raw("loss.sampling"), get_order_counts("loss.sample_counts"),
                               seed(), "loss");
    c.threads = threads();
    try {
      c.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    return c;
  }

  TrainerConfig trainer() const {
    TrainerConfig t;
    t.data = dataset();
    t.shape.input_dim = t.data.dim;
    t.shape.encoder_widths = get_size_list("model.encoder_widths");
    t.shape.projector_width = get_size("model.projector_width");
    t.views.noise = get_double("views.noise");
    t.views.mask_prob = get_double("views.mask_prob");
    t.views.gain_lo = get_double("views.gain_lo");
    t.views.gain_hi = get_double("views.gain_hi");
    t.variant = variant();
    t.loss = loss();
    t.batch_size = get_size("train.batch_size");
    t.epochs = get_size("train.epochs");
    t.base_lr = get_double("train.base_lr");
    t.final_lr = get_double("train.final_lr");
    t.warmup_epochs = get_size("train.warmup_epochs");
    t.momentum = get_double("train.momentum");
    t.weight_decay = get_double("train.weight_decay");
    t.seed = seed();
    if (t.shape.projector_width < 3) throw ConfigError("model.projector_width must be >= 3");
    try {
      t.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    return t;
  }

  ProbeConfig probe() const {
    ProbeConfig p;
    p.iterations = static_cast<int>(get_u64("probe.iterations"));
    p.lr = get_double("probe.lr");
    p.standardize = get_bool("probe.standardize");
    return p;
  }

  MomentSpec audit_spec(std::size_t dim) const {
    MomentSpec spec;
    spec.dim = dim;
    for (auto k : get_size_list("audit.orders")) spec.orders.push_back(static_cast<int>(k));
    spec.sampling = sampling_from(raw("audit.sampling"), get_order_counts("audit.sample_counts"),
                                  seed_or_run("audit.seed"), "audit");
    if (!spec.sampling.full) {
      // Cap counts at C(D,K) so one config serves any embedding width.
      for (auto& [k, c] : spec.sampling.per_order_count) {
        if (k >= 2 && static_cast<std::size_t>(k) <= dim) {
          const Count total = binomial(dim, static_cast<std::size_t>(k));
          if (static_cast<Count>(c) > total) c = static_cast<std::uint64_t>(total);
        }
      }
    }
    try {
      spec.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("audit: ") + e.what());
    }
    return spec;
  }

  // Sorted key=value lines; the config hash is taken over this text.
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
  }

  std::string hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : canonical()) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace home
