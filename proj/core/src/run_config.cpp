/*=========================================================================
 *
 *  Copyright the geoflow project contributors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *         http://www.apache.org/licenses/LICENSE-2.0.txt
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 *
 *=========================================================================*/
#include "geoflow/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace geoflow {

namespace {

using nlohmann::json;

/// Object wrapper that records which keys were consumed so finish() can
/// reject anything unknown.
class Obj {
public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) {
      throw Error("bad_config", (path_.empty() ? std::string("config root")
                                               : path_) +
                                    " must be a JSON object");
    }
  }

  std::string dotted(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* opt(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& req(const std::string& key) {
    const json* v = opt(key);
    if (v == nullptr) {
      throw Error("bad_config", "missing key '" + dotted(key) + "'");
    }
    return *v;
  }

  double num(const std::string& key, double def) {
    const json* v = opt(key);
    if (v == nullptr) return def;
    if (!v->is_number()) {
      throw Error("bad_config", "'" + dotted(key) + "' must be a number");
    }
    return v->get<double>();
  }

  int integer(const std::string& key, int def) {
    const json* v = opt(key);
    if (v == nullptr) return def;
    if (!v->is_number_integer()) {
      throw Error("bad_config", "'" + dotted(key) + "' must be an integer");
    }
    return v->get<int>();
  }

  std::uint64_t u64(const std::string& key, std::uint64_t def) {
    const json* v = opt(key);
    if (v == nullptr) return def;
    if (!v->is_number_unsigned() && !(v->is_number_integer() &&
                                      v->get<std::int64_t>() >= 0)) {
      throw Error("bad_config",
                  "'" + dotted(key) + "' must be a non-negative integer");
    }
    return v->get<std::uint64_t>();
  }

  std::string str(const std::string& key, const std::string& def) {
    const json* v = opt(key);
    if (v == nullptr) return def;
    if (!v->is_string()) {
      throw Error("bad_config", "'" + dotted(key) + "' must be a string");
    }
    return v->get<std::string>();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw Error("bad_config", "unknown key '" + dotted(it.key()) + "'");
      }
    }
  }

private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<double> num_array(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) {
    throw Error("bad_config", "'" + where + "' must be a non-empty array");
  }
  std::vector<double> out;
  out.reserve(v.size());
  for (const json& e : v) {
    if (!e.is_number()) {
      throw Error("bad_config", "'" + where + "' must hold numbers");
    }
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<int> int_array(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) {
    throw Error("bad_config", "'" + where + "' must be a non-empty array");
  }
  std::vector<int> out;
  out.reserve(v.size());
  for (const json& e : v) {
    if (!e.is_number_integer()) {
      throw Error("bad_config", "'" + where + "' must hold integers");
    }
    out.push_back(e.get<int>());
  }
  return out;
}

json config_to_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["grid"] = {{"dim", cfg.dim}, {"size", cfg.size}};
  if (cfg.has_kernel) {
    json sig = json::array();
    json wts = json::array();
    for (const KernelSpec::Component& c : cfg.kernel.components) {
      sig.push_back(c.sigma);
      wts.push_back(c.weight);
    }
    j["kernel"] = {{"sigmas", sig}, {"weights", wts}};
  }
  j["shoot"] = {{"steps_per_unit_time", cfg.reg.shoot.steps_per_unit_time}};
  j["registration"] = {
      {"similarity", cfg.reg.similarity == Similarity::SSD ? "ssd" : "lncc"},
      {"lncc_window", cfg.reg.lncc_window},
      {"sim_weight", cfg.reg.sim_weight},
      {"max_iters", cfg.reg.optimizer.max_iters},
      {"step_size", cfg.reg.optimizer.step_size},
      {"shrink", cfg.reg.optimizer.shrink},
      {"grad_tol", cfg.reg.optimizer.grad_tol},
      {"multiscale", cfg.reg.multiscale},
      {"level_iters", cfg.reg.level_iters},
  };
  j["sampler"] = {{"t_min", cfg.sampler.t_min},
                  {"t_max", cfg.sampler.t_max},
                  {"k", cfg.sampler.K}};
  j["pipeline"] = {{"n_out", cfg.pipeline.n_out},
                   {"n_views", cfg.pipeline.n_views},
                   {"variant", cfg.pipeline.variant}};
  json settings = json::array();
  for (const BsplineSetting& s : cfg.bspline.settings) {
    settings.push_back(
        {{"control_points", s.control_points}, {"sigma", s.sigma_mm}});
  }
  j["bspline"] = {{"settings", settings}};
  j["population"] = {{"n", cfg.population.n},
                     {"center", cfg.population.scales.center_mm},
                     {"radii", cfg.population.scales.radii_rel},
                     {"intensity", cfg.population.scales.intensity}};
  return j;
}

RunConfig config_from_json(const json& j) {
  Obj root(j, "");
  RunConfig cfg = default_run_config();
  cfg.seed = root.u64("seed", cfg.seed);
  if (const json* g = root.opt("grid")) {
    Obj o(*g, "grid");
    cfg.dim = o.integer("dim", cfg.dim);
    cfg.size = o.integer("size", cfg.size);
    o.finish();
  }
  if (const json* k = root.opt("kernel")) {
    Obj o(*k, "kernel");
    const std::vector<double> sigmas = num_array(o.req("sigmas"), "kernel.sigmas");
    std::vector<double> weights;
    if (const json* w = o.opt("weights")) {
      weights = num_array(*w, "kernel.weights");
    } else {
      weights.assign(sigmas.size(), 1.0 / static_cast<double>(sigmas.size()));
    }
    o.finish();
    cfg.kernel = KernelSpec::multi(sigmas, weights);
    cfg.has_kernel = true;
  }
  if (const json* s = root.opt("shoot")) {
    Obj o(*s, "shoot");
    const int spu =
        o.integer("steps_per_unit_time", cfg.reg.shoot.steps_per_unit_time);
    o.finish();
    cfg.reg.shoot.steps_per_unit_time = spu;
    cfg.sampler.shoot.steps_per_unit_time = spu;
  }
  if (const json* r = root.opt("registration")) {
    Obj o(*r, "registration");
    const std::string sim = o.str(
        "similarity", cfg.reg.similarity == Similarity::SSD ? "ssd" : "lncc");
    if (sim == "ssd") {
      cfg.reg.similarity = Similarity::SSD;
    } else if (sim == "lncc") {
      cfg.reg.similarity = Similarity::LNCC;
    } else {
      throw Error("bad_config", "'registration.similarity' must be 'ssd' or "
                                "'lncc'");
    }
    cfg.reg.lncc_window = o.integer("lncc_window", cfg.reg.lncc_window);
    cfg.reg.sim_weight = o.num("sim_weight", cfg.reg.sim_weight);
    cfg.reg.optimizer.max_iters =
        o.integer("max_iters", cfg.reg.optimizer.max_iters);
    cfg.reg.optimizer.step_size =
        o.num("step_size", cfg.reg.optimizer.step_size);
    cfg.reg.optimizer.shrink = o.num("shrink", cfg.reg.optimizer.shrink);
    cfg.reg.optimizer.grad_tol = o.num("grad_tol", cfg.reg.optimizer.grad_tol);
    if (const json* m = o.opt("multiscale")) {
      cfg.reg.multiscale = int_array(*m, "registration.multiscale");
    }
    if (const json* li = o.opt("level_iters")) {
      cfg.reg.level_iters = int_array(*li, "registration.level_iters");
    }
    o.finish();
  }
  if (const json* s = root.opt("sampler")) {
    Obj o(*s, "sampler");
    cfg.sampler.t_min = o.num("t_min", cfg.sampler.t_min);
    cfg.sampler.t_max = o.num("t_max", cfg.sampler.t_max);
    cfg.sampler.K = o.integer("k", cfg.sampler.K);
    o.finish();
  }
  if (const json* p = root.opt("pipeline")) {
    Obj o(*p, "pipeline");
    cfg.pipeline.n_out = o.integer("n_out", cfg.pipeline.n_out);
    cfg.pipeline.n_views = o.integer("n_views", cfg.pipeline.n_views);
    cfg.pipeline.variant = o.str("variant", cfg.pipeline.variant);
    o.finish();
  }
  if (const json* b = root.opt("bspline")) {
    Obj o(*b, "bspline");
    const json& arr = o.req("settings");
    if (!arr.is_array() || arr.empty()) {
      throw Error("bad_config",
                  "'bspline.settings' must be a non-empty array");
    }
    cfg.bspline.settings.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Obj e(arr[i], "bspline.settings[" + std::to_string(i) + "]");
      BsplineSetting s;
      s.control_points = e.integer("control_points", s.control_points);
      s.sigma_mm = e.num("sigma", s.sigma_mm);
      e.finish();
      cfg.bspline.settings.push_back(s);
    }
    o.finish();
  }
  if (const json* p = root.opt("population")) {
    Obj o(*p, "population");
    cfg.population.n = o.integer("n", cfg.population.n);
    cfg.population.scales.center_mm =
        o.num("center", cfg.population.scales.center_mm);
    cfg.population.scales.radii_rel =
        o.num("radii", cfg.population.scales.radii_rel);
    cfg.population.scales.intensity =
        o.num("intensity", cfg.population.scales.intensity);
    o.finish();
  }
  root.finish();
  cfg.sampler.rng_seed = cfg.seed;
  cfg.bspline.rng_seed = cfg.seed;
  cfg.validate();
  return cfg;
}

}  // namespace

void RunConfig::validate() const {
  if (dim != 2 && dim != 3) {
    throw Error("bad_config", "grid.dim must be 2 or 3");
  }
  if (size < 32) {
    throw Error("bad_config", "grid.size must be at least 32");
  }
  if (has_kernel) kernel.validate();
  if (reg.shoot.steps_per_unit_time < 1) {
    throw Error("bad_config", "steps_per_unit_time must be >= 1");
  }
  // Structural registration checks without the (possibly defaulted)
  // kernel; the resolved config re-validates in full.
  RegConfig probe = reg;
  probe.shoot.kernel = KernelSpec::single(1.0);
  probe.validate();
  if (!(sampler.t_min <= sampler.t_max)) {
    throw Error("bad_config", "sampler.t_min must not exceed sampler.t_max");
  }
  if (sampler.K < 1) {
    throw Error("bad_config", "sampler.k must be >= 1");
  }
  if (pipeline.n_out < 0) {
    throw Error("bad_config", "pipeline.n_out must be non-negative");
  }
  if (pipeline.n_views < 1) {
    throw Error("bad_config", "pipeline.n_views must be >= 1");
  }
  parse_oneshot_variant(pipeline.variant);
  if (bspline.settings.empty()) {
    throw Error("bad_config", "bspline.settings must not be empty");
  }
  for (const BsplineSetting& s : bspline.settings) {
    if (s.control_points < 2) {
      throw Error("bad_config", "bspline control_points must be >= 2");
    }
    if (!(s.sigma_mm >= 0.0)) {
      throw Error("bad_config", "bspline sigma must be non-negative");
    }
  }
  if (population.n < 1) {
    throw Error("bad_config", "population.n must be >= 1");
  }
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.bspline = BsplineConfig::reference_defaults();
  cfg.sampler.rng_seed = cfg.seed;
  cfg.bspline.rng_seed = cfg.seed;
  return cfg;
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error("bad_config",
                std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("io_error", "cannot open config '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string serialize_run_config(const RunConfig& cfg) {
  return config_to_json(cfg).dump(2) + "\n";
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t config_hash(const RunConfig& cfg) {
  return fnv1a(config_to_json(cfg).dump());
}

ResolvedConfigs resolve_configs(const RunConfig& cfg, const GridSpec& grid) {
  grid.validate();
  ResolvedConfigs out;
  const KernelSpec kernel =
      cfg.has_kernel ? cfg.kernel : KernelSpec::default_for(grid);
  out.reg = cfg.reg;
  out.reg.shoot.kernel = kernel;
  out.sampler = cfg.sampler;
  out.sampler.shoot = out.reg.shoot;
  out.sampler.rng_seed = cfg.seed;
  out.reg.validate();
  out.sampler.validate();
  return out;
}

std::string write_manifest(const RunConfig& cfg, const std::string& subcommand,
                           const std::map<std::string, std::string>& inputs,
                           const std::string& path) {
  json j;
  j["subcommand"] = subcommand;
  j["toolkit_version"] = kToolkitVersion;
  j["config"] = config_to_json(cfg);
  j["config_hash"] = config_hash(cfg);
  j["inputs"] = json::object();
  for (const auto& [k, v] : inputs) j["inputs"][k] = v;
  const std::string text = j.dump(2) + "\n";
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    throw Error("io_error", "cannot write manifest '" + path + "'");
  }
  return text;
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("io_error", "cannot open manifest '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::exception& e) {
    throw Error("bad_manifest",
                std::string("manifest is not valid JSON: ") + e.what());
  }
  Manifest m;
  try {
    Obj root(j, "");
    const json& sub = root.req("subcommand");
    if (!sub.is_string()) {
      throw Error("bad_manifest", "'subcommand' must be a string");
    }
    m.subcommand = sub.get<std::string>();
    m.toolkit_version = root.str("toolkit_version", "");
    m.config = config_from_json(root.req("config"));
    m.config_hash = root.u64("config_hash", 0);
    if (const json* inp = root.opt("inputs")) {
      if (!inp->is_object()) {
        throw Error("bad_manifest", "'inputs' must be an object");
      }
      for (auto it = inp->begin(); it != inp->end(); ++it) {
        if (!it.value().is_string()) {
          throw Error("bad_manifest", "'inputs' values must be strings");
        }
        m.inputs[it.key()] = it.value().get<std::string>();
      }
    }
    root.finish();
  } catch (const Error& e) {
    // Strict-parser complaints surface under the manifest's own code.
    if (e.code() == "bad_config")
      throw Error("bad_manifest", e.what());
    throw;
  }
  if (m.config_hash != config_hash(m.config)) {
    throw Error("bad_manifest",
                "stored config hash does not match the stored config");
  }
  return m;
}

}  // namespace geoflow
