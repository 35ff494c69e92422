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
#include "geoflow/augment.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "geoflow/field_io.hpp"
#include "geoflow/shooting.hpp"

namespace geoflow {

namespace {

std::uint64_t fnv1a_bytes(const void* data, std::size_t n,
                          std::uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fnv1a_str(const std::string& s,
                        std::uint64_t h = 1469598103934665603ull) {
  return fnv1a_bytes(s.data(), s.size(), h);
}

std::string to_hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setfill('0') << std::setw(16) << v;
  return os.str();
}

std::uint64_t image_digest(const ScalarField& f) {
  std::uint64_t h = fnv1a_bytes(f.grid.dims.data(), sizeof(f.grid.dims));
  h = fnv1a_bytes(f.grid.spacing.data(), sizeof(f.grid.spacing), h);
  h = fnv1a_bytes(f.grid.origin.data(), sizeof(f.grid.origin), h);
  if (!f.values.empty()) {
    h = fnv1a_bytes(f.values.data(), f.values.size() * sizeof(double), h);
  }
  return h;
}

void append_double(std::ostringstream& os, double v) {
  os << std::setprecision(17) << v << ';';
}

void check_dataset(const Dataset& dataset) {
  if (dataset.empty()) {
    throw Error("bad_input", "dataset is empty");
  }
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const LabeledImage& it = dataset[i];
    if (it.id.empty()) {
      throw Error("bad_input", "dataset item " + std::to_string(i) +
                                   " has an empty id");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (dataset[j].id == it.id) {
        throw Error("bad_input", "duplicate dataset id '" + it.id + "'");
      }
    }
    if (!(it.image.grid == dataset[0].image.grid)) {
      throw Error("grid_mismatch",
                  "dataset item '" + it.id + "' is on a different grid");
    }
    if (!(it.labels.grid == it.image.grid)) {
      throw Error("grid_mismatch",
                  "labels of '" + it.id + "' are on a different grid");
    }
    it.labels.validate();
  }
}

/// k distinct indices from [0, n) excluding `exclude` (pass -1 for none),
/// order-sensitive partial shuffle so the draw is reproducible.
std::vector<int> pick_distinct(Rng& rng, int n, int k, int exclude) {
  std::vector<int> pool;
  pool.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (i != exclude) pool.push_back(i);
  }
  if (k < 1 || static_cast<std::size_t>(k) > pool.size()) {
    throw Error("bad_config",
                "cannot pick " + std::to_string(k) + " distinct targets from " +
                    std::to_string(pool.size()) + " candidates");
  }
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    const int last = static_cast<int>(pool.size()) - 1;
    const int pick = j + static_cast<int>(rng.uniform_int(
                             0, static_cast<std::uint64_t>(last - j)));
    std::swap(pool[static_cast<std::size_t>(j)],
              pool[static_cast<std::size_t>(pick)]);
    out.push_back(pool[static_cast<std::size_t>(j)]);
  }
  return out;
}

void check_folds(const DeformationMap& phi_inv, const Lineage& lin) {
  const ScalarField det = jacobian_determinant(phi_inv);
  const double lo = min_value(det);
  if (!(lo > 0.0)) {
    std::ostringstream os;
    os << "non-positive jacobian determinant (min " << lo
       << ") in sample from '" << lin.source_id << "' (t=" << lin.t
       << ", seed=" << lin.seed << ")";
    throw Error("fold_detected", os.str());
  }
}

MomentumSet gather_set(const std::string& source_id, const ScalarField& source,
                       const Dataset& dataset, const std::vector<int>& targets,
                       const RegConfig& reg, MomentumCache& cache) {
  MomentumSet set;
  set.source_id = source_id;
  for (int j : targets) {
    const LabeledImage& tgt = dataset[static_cast<std::size_t>(j)];
    MomentumCache::Entry e =
        cache.get(source_id, source, tgt.id, tgt.image, reg);
    set.momenta.push_back(std::move(e.m0));
    set.provenance.push_back({tgt.id, e.regularity, e.similarity});
  }
  return set;
}

AugmentedExample make_train_item(const Dataset& dataset, std::uint64_t seed,
                                 const SamplerConfig& cfg, const RegConfig& reg,
                                 MomentumCache& cache) {
  Rng rng(seed);
  const int n = static_cast<int>(dataset.size());
  const int src = static_cast<int>(
      rng.uniform_int(0, static_cast<std::uint64_t>(n - 1)));
  const std::vector<int> targets = pick_distinct(rng, n, cfg.K, src);
  const std::uint64_t draw_seed = rng.raw();

  const LabeledImage& source = dataset[static_cast<std::size_t>(src)];
  const MomentumSet set =
      gather_set(source.id, source.image, dataset, targets, reg, cache);
  const SubspaceSample s = draw_sample(set, cfg, draw_seed);

  AugmentedExample ex;
  ex.lineage.pipeline = "augment_train";
  ex.lineage.source_id = source.id;
  for (int j : targets) {
    ex.lineage.target_ids.push_back(dataset[static_cast<std::size_t>(j)].id);
  }
  ex.lineage.lambda = s.lambda;
  ex.lineage.t = s.t;
  ex.lineage.seed = seed;
  check_folds(s.phi_inv, ex.lineage);
  ex.image = interpolate(source.image, s.phi_inv);
  ex.labels = warp_labels(source.labels, s.phi_inv);
  return ex;
}

void verify_lineage(const Lineage& got, const Lineage& want) {
  const bool ok = got.pipeline == want.pipeline &&
                  got.source_id == want.source_id &&
                  got.appearance_id == want.appearance_id &&
                  got.target_ids == want.target_ids &&
                  got.lambda == want.lambda && got.t == want.t &&
                  got.seed == want.seed &&
                  got.setting_index == want.setting_index;
  if (!ok) {
    throw Error("lineage_mismatch",
                "regenerated draw does not reproduce the recorded lineage; "
                "the dataset or configuration differs from the original run");
  }
}

double bspline_basis(int l, double f) {
  const double f2 = f * f;
  const double f3 = f2 * f;
  switch (l) {
    case 0:
      return (1.0 - 3.0 * f + 3.0 * f2 - f3) / 6.0;
    case 1:
      return (3.0 * f3 - 6.0 * f2 + 4.0) / 6.0;
    case 2:
      return (-3.0 * f3 + 3.0 * f2 + 3.0 * f + 1.0) / 6.0;
    default:
      return f3 / 6.0;
  }
}

AugmentedExample make_bspline_item(const Dataset& dataset,
                                   const BsplineConfig& cfg,
                                   std::uint64_t seed) {
  Rng rng(seed);
  const int n = static_cast<int>(dataset.size());
  const int src = static_cast<int>(
      rng.uniform_int(0, static_cast<std::uint64_t>(n - 1)));
  const int setting = static_cast<int>(rng.uniform_int(
      0, static_cast<std::uint64_t>(cfg.settings.size() - 1)));

  const LabeledImage& source = dataset[static_cast<std::size_t>(src)];
  const DeformationMap map = bspline_displacement_map(
      source.image.grid, cfg.settings[static_cast<std::size_t>(setting)], rng);

  AugmentedExample ex;
  ex.image = interpolate(source.image, map);
  ex.labels = warp_labels(source.labels, map);
  ex.lineage.pipeline = "bspline";
  ex.lineage.source_id = source.id;
  ex.lineage.seed = seed;
  ex.lineage.setting_index = setting;
  return ex;
}

AugmentedExample make_oneshot_item(const ScalarField& atlas,
                                   const LabelMap& atlas_labels,
                                   const Dataset& unlabeled,
                                   std::uint64_t seed,
                                   const SamplerConfig& cfg,
                                   const RegConfig& reg,
                                   OneshotVariant variant,
                                   MomentumCache& cache) {
  Rng rng(seed);
  const int n = static_cast<int>(unlabeled.size());
  const int app = static_cast<int>(
      rng.uniform_int(0, static_cast<std::uint64_t>(n - 1)));
  const int k_geo = variant == OneshotVariant::BrainstormReal ? 1 : cfg.K;
  const std::vector<int> targets = pick_distinct(rng, n, k_geo, -1);
  const std::uint64_t draw_seed = rng.raw();

  // Appearance: donor warped into atlas space by its registration to the
  // atlas.
  const LabeledImage& donor = unlabeled[static_cast<std::size_t>(app)];
  MomentumCache::Entry ea =
      cache.get(donor.id, donor.image, "atlas", atlas, reg);
  const GeodesicState app_state = shoot(ea.m0, 1.0, reg.shoot);
  const ScalarField appearance = interpolate(donor.image, app_state.phi_inv);

  // Geometry: atlas-anchored momentum set toward the picked targets.
  MomentumSet set;
  set.source_id = "atlas";
  for (int j : targets) {
    const LabeledImage& tgt = unlabeled[static_cast<std::size_t>(j)];
    MomentumCache::Entry e = cache.get("atlas", atlas, tgt.id, tgt.image, reg);
    set.momenta.push_back(std::move(e.m0));
    set.provenance.push_back({tgt.id, e.regularity, e.similarity});
  }

  AugmentedExample ex;
  ex.lineage.pipeline = "oneshot_" + oneshot_variant_name(variant);
  ex.lineage.source_id = "atlas";
  ex.lineage.appearance_id = donor.id;
  for (int j : targets) {
    ex.lineage.target_ids.push_back(unlabeled[static_cast<std::size_t>(j)].id);
  }
  ex.lineage.seed = seed;

  DeformationMap map;
  if (variant == OneshotVariant::BrainstormReal) {
    // Comparator: replay the raw registration map of the single donor.
    const GeodesicState st = shoot(set.momenta[0], 1.0, cfg.shoot);
    map = st.phi_inv;
    ex.lineage.lambda = {1.0};
    ex.lineage.t = 1.0;
  } else {
    SamplerConfig draw_cfg = cfg;
    draw_cfg.K = k_geo;
    if (variant == OneshotVariant::FluidRealT1) {
      draw_cfg.t_min = 1.0;
      draw_cfg.t_max = 1.0;
    }
    const SubspaceSample s = draw_sample(set, draw_cfg, draw_seed);
    map = s.phi_inv;
    ex.lineage.lambda = s.lambda;
    ex.lineage.t = s.t;
  }
  check_folds(map, ex.lineage);
  ex.image = interpolate(appearance, map);
  ex.labels = warp_labels(atlas_labels, map);
  return ex;
}

Dataset wrap_unlabeled(const ScalarField& atlas,
                       const std::vector<ScalarField>& unlabeled) {
  Dataset ds;
  ds.reserve(unlabeled.size());
  for (std::size_t i = 0; i < unlabeled.size(); ++i) {
    if (!(unlabeled[i].grid == atlas.grid)) {
      throw Error("grid_mismatch", "unlabeled image " + std::to_string(i) +
                                       " is on a different grid");
    }
    LabeledImage it;
    it.id = "unlabeled_" + std::to_string(i);
    it.image = unlabeled[i];
    it.labels.grid = unlabeled[i].grid;
    it.labels.labels.assign(unlabeled[i].grid.num_points(), 0);
    ds.push_back(std::move(it));
  }
  return ds;
}

}  // namespace

std::uint64_t reg_config_digest(const RegConfig& cfg) {
  std::ostringstream os;
  os << "sim=" << (cfg.similarity == Similarity::SSD ? "ssd" : "lncc") << ';';
  os << "win=" << cfg.lncc_window << ';';
  append_double(os, cfg.sim_weight);
  os << "spu=" << cfg.shoot.steps_per_unit_time << ';';
  for (const KernelSpec::Component& c : cfg.shoot.kernel.components) {
    append_double(os, c.sigma);
    append_double(os, c.weight);
  }
  os << "iters=" << cfg.optimizer.max_iters << ';';
  append_double(os, cfg.optimizer.step_size);
  append_double(os, cfg.optimizer.shrink);
  append_double(os, cfg.optimizer.grad_tol);
  os << "levels=";
  for (int f : cfg.multiscale) os << f << ',';
  os << ';' << "level_iters=";
  for (int it : cfg.level_iters) os << it << ',';
  os << ';';
  return fnv1a_str(os.str());
}

MomentumCache::MomentumCache(std::string dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) {
      throw Error("io_error", "cannot create cache directory '" + dir_ +
                                  "': " + ec.message());
    }
  }
}

MomentumCache::Entry MomentumCache::get(const std::string& source_id,
                                        const ScalarField& source,
                                        const std::string& target_id,
                                        const ScalarField& target,
                                        const RegConfig& cfg) {
  std::ostringstream key_os;
  key_os << source_id << '\x1f' << target_id << '\x1f'
         << to_hex(reg_config_digest(cfg)) << '\x1f'
         << to_hex(image_digest(source)) << '\x1f'
         << to_hex(image_digest(target));
  const std::string key = key_os.str();
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = memory_.find(key);
    if (it != memory_.end()) return it->second;
  }
  const std::string base =
      dir_.empty() ? std::string()
                   : dir_ + "/m_" + to_hex(fnv1a_str(key));
  if (!base.empty() && std::filesystem::exists(base + ".meta")) {
    std::ifstream meta(base + ".meta");
    std::string stored_key;
    Entry e;
    std::string line;
    while (std::getline(meta, line)) {
      const std::size_t sp = line.find(' ');
      if (sp == std::string::npos) continue;
      const std::string name = line.substr(0, sp);
      const std::string rest = line.substr(sp + 1);
      if (name == "key") stored_key = rest;
      if (name == "regularity") e.regularity = std::stod(rest);
      if (name == "similarity") e.similarity = std::stod(rest);
    }
    if (stored_key != key) {
      throw Error("cache_collision",
                  "cache file '" + base + "' belongs to a different entry");
    }
    e.m0 = read_vector(base + ".field");
    std::lock_guard<std::mutex> lock(mutex_);
    memory_.emplace(key, e);
    return e;
  }
  const RegResult r = register_pair(source, target, cfg);
  Entry e;
  e.m0 = r.m0;
  if (!r.energy_trace.empty()) {
    e.regularity = r.energy_trace.back().regularity;
    e.similarity = r.energy_trace.back().similarity;
  }
  if (!base.empty()) {
    write_vector(base + ".field", e.m0, FieldDtype::F64);
    std::ofstream meta(base + ".meta");
    meta << "key " << key << '\n';
    meta << std::setprecision(17);
    meta << "regularity " << e.regularity << '\n';
    meta << "similarity " << e.similarity << '\n';
    if (!meta) {
      throw Error("io_error", "cannot write cache meta '" + base + ".meta'");
    }
  }
  std::lock_guard<std::mutex> lock(mutex_);
  memory_.emplace(key, e);
  return e;
}

TrainAugmentResult augment_train(const Dataset& dataset, int n_out,
                                 const SamplerConfig& cfg, const RegConfig& reg,
                                 MomentumCache* cache) {
  check_dataset(dataset);
  cfg.validate();
  reg.validate();
  if (n_out < 0) {
    throw Error("bad_config", "n_out must be non-negative");
  }
  if (static_cast<int>(dataset.size()) < cfg.K + 1) {
    throw Error("bad_config",
                "dataset must hold at least K+1 images, got " +
                    std::to_string(dataset.size()) + " for K=" +
                    std::to_string(cfg.K));
  }
  MomentumCache local;
  if (cache == nullptr) cache = &local;

  TrainAugmentResult out;
  for (int i = 0; i < n_out; ++i) {
    const std::uint64_t seed = Rng::derive(cfg.rng_seed, static_cast<std::uint64_t>(i));
    try {
      out.examples.push_back(make_train_item(dataset, seed, cfg, reg, *cache));
    } catch (const Error& e) {
      if (e.code() == "fold_detected") throw;
      out.failures.push_back("output " + std::to_string(i) + ": " + e.code() +
                             ": " + e.what());
    }
  }
  if (n_out > 0 && out.examples.empty()) {
    throw Error("pipeline_failed", "all " + std::to_string(n_out) +
                                       " outputs failed; first failure: " +
                                       out.failures.front());
  }
  return out;
}

TestAugmentResult augment_test(const ScalarField& image,
                               const std::vector<ScalarField>& train_images,
                               const SegmenterIface& seg, int n_views,
                               const SamplerConfig& cfg, const RegConfig& reg,
                               MomentumCache* cache) {
  cfg.validate();
  reg.validate();
  if (n_views < 1) {
    throw Error("bad_config", "n_views must be at least 1");
  }
  if (!seg) {
    throw Error("bad_config", "segmenter callable is empty");
  }
  if (static_cast<int>(train_images.size()) < cfg.K) {
    throw Error("bad_config", "need at least K training images");
  }
  Dataset targets;
  targets.reserve(train_images.size());
  for (std::size_t i = 0; i < train_images.size(); ++i) {
    if (!(train_images[i].grid == image.grid)) {
      throw Error("grid_mismatch", "training image " + std::to_string(i) +
                                       " is on a different grid");
    }
    LabeledImage it;
    it.id = "train_" + std::to_string(i);
    it.image = train_images[i];
    it.labels.grid = train_images[i].grid;
    it.labels.labels.assign(train_images[i].grid.num_points(), 0);
    targets.push_back(std::move(it));
  }
  MomentumCache local;
  if (cache == nullptr) cache = &local;

  std::vector<SoftLabelField> predictions;
  TestAugmentResult out;
  int label_count = 0;
  for (int v = 0; v < n_views; ++v) {
    ViewDiagnostic dg;
    dg.view = v;
    dg.seed = Rng::derive(cfg.rng_seed, static_cast<std::uint64_t>(v));
    try {
      Rng rng(dg.seed);
      const std::vector<int> picks = pick_distinct(
          rng, static_cast<int>(targets.size()), cfg.K, -1);
      const std::uint64_t draw_seed = rng.raw();
      const MomentumSet set =
          gather_set("test", image, targets, picks, reg, *cache);
      for (int j : picks) {
        dg.target_ids.push_back(targets[static_cast<std::size_t>(j)].id);
      }
      const SubspaceSample s = draw_sample(set, cfg, draw_seed);
      dg.lambda = s.lambda;
      dg.t = s.t;
      const ScalarField det = jacobian_determinant(s.phi_inv);
      if (!(min_value(det) > 0.0)) {
        throw Error("fold_detected",
                    "view deformation folds (min jacobian determinant " +
                        std::to_string(min_value(det)) + ")");
      }
      const ScalarField view = interpolate(image, s.phi_inv);
      SoftLabelField soft = seg(view);
      if (!(soft.grid == image.grid)) {
        throw Error("grid_mismatch", "segmenter output is on a different grid");
      }
      if (label_count == 0) {
        label_count = soft.label_count;
      } else if (soft.label_count != label_count) {
        throw Error("bad_input", "segmenter label count changed across views");
      }
      predictions.push_back(warp_soft(soft, s.phi));
      dg.used = true;
    } catch (const Error& e) {
      dg.used = false;
      dg.error = std::string(e.code()) + ": " + e.what();
    }
    out.views.push_back(std::move(dg));
  }
  if (predictions.empty()) {
    throw Error("pipeline_failed",
                "all " + std::to_string(n_views) + " views failed; first: " +
                    out.views.front().error);
  }
  out.fused = label_fusion(predictions);
  return out;
}

BsplineConfig BsplineConfig::reference_defaults() {
  BsplineConfig cfg;
  cfg.settings = {{10, 3.0}, {10, 4.0}, {20, 2.0}};
  return cfg;
}

DeformationMap bspline_displacement_map(const GridSpec& grid,
                                        const BsplineSetting& setting,
                                        Rng& rng) {
  grid.validate();
  const int nc = setting.control_points;
  if (nc < 2) {
    throw Error("bad_config", "need at least 2 control points per axis");
  }
  if (!(setting.sigma_mm >= 0.0)) {
    throw Error("bad_config", "control sigma must be non-negative");
  }
  const int d = grid.dim;
  // Lattice indices -1 .. nc+1 per axis so every point has full support.
  const int lat = nc + 3;
  double delta[3] = {1.0, 1.0, 1.0};
  for (int a = 0; a < d; ++a) {
    delta[a] = grid.extent(a) / static_cast<double>(nc - 1);
  }
  std::size_t lat_n = 1;
  for (int a = 0; a < d; ++a) lat_n *= static_cast<std::size_t>(lat);
  std::vector<double> ctrl(lat_n * static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < ctrl.size(); ++i) {
    ctrl[i] = setting.sigma_mm * rng.normal();
  }

  const int lat_z = d == 3 ? lat : 1;
  DeformationMap map = identity_map(grid);
  const int nz = grid.dim == 3 ? grid.dims[2] : 1;
  for (int z = 0; z < nz; ++z) {
    for (int y = 0; y < grid.dims[1]; ++y) {
      for (int x = 0; x < grid.dims[0]; ++x) {
        const std::size_t p = grid.index(x, y, z);
        const int ijk[3] = {x, y, z};
        int base[3] = {0, 0, 0};
        double w[3][4];
        for (int a = 0; a < d; ++a) {
          const double pos = grid.origin[a] +
                             static_cast<double>(ijk[a]) * grid.spacing[a];
          double s = (pos - grid.origin[a]) / delta[a];
          int cell = static_cast<int>(std::floor(s));
          if (cell < 0) cell = 0;
          if (cell > nc - 2) cell = nc - 2;
          const double f = s - static_cast<double>(cell);
          base[a] = cell;
          for (int l = 0; l < 4; ++l) w[a][l] = bspline_basis(l, f);
        }
        double u[3] = {0.0, 0.0, 0.0};
        const int l_hi = d == 3 ? 4 : 1;
        for (int lz = 0; lz < l_hi; ++lz) {
          const double wz = d == 3 ? w[2][lz] : 1.0;
          const int cz = d == 3 ? base[2] + lz : 0;
          for (int ly = 0; ly < 4; ++ly) {
            const double wzy = wz * w[1][ly];
            const int cy = base[1] + ly;
            for (int lx = 0; lx < 4; ++lx) {
              const double wt = wzy * w[0][lx];
              const int cx = base[0] + lx;
              // Stored lattice offset +0 corresponds to control index -1.
              const std::size_t ci =
                  (static_cast<std::size_t>(cz % lat_z) *
                       static_cast<std::size_t>(lat) +
                   static_cast<std::size_t>(cy)) *
                      static_cast<std::size_t>(lat) +
                  static_cast<std::size_t>(cx);
              for (int c = 0; c < d; ++c) {
                u[c] += wt * ctrl[ci * static_cast<std::size_t>(d) +
                                  static_cast<std::size_t>(c)];
              }
            }
          }
        }
        for (int c = 0; c < d; ++c) {
          map.coords[p * static_cast<std::size_t>(d) +
                     static_cast<std::size_t>(c)] += u[c];
        }
      }
    }
  }
  return map;
}

std::vector<AugmentedExample> bspline_augment(const Dataset& dataset, int n_out,
                                              const BsplineConfig& cfg) {
  check_dataset(dataset);
  if (n_out < 0) {
    throw Error("bad_config", "n_out must be non-negative");
  }
  if (cfg.settings.empty()) {
    throw Error("bad_config", "no b-spline settings given");
  }
  for (const BsplineSetting& s : cfg.settings) {
    if (s.control_points < 2) {
      throw Error("bad_config", "need at least 2 control points per axis");
    }
    if (!(s.sigma_mm >= 0.0)) {
      throw Error("bad_config", "control sigma must be non-negative");
    }
  }
  std::vector<AugmentedExample> out;
  out.reserve(static_cast<std::size_t>(n_out));
  for (int i = 0; i < n_out; ++i) {
    const std::uint64_t seed =
        Rng::derive(cfg.rng_seed, static_cast<std::uint64_t>(i));
    out.push_back(make_bspline_item(dataset, cfg, seed));
  }
  return out;
}

std::string oneshot_variant_name(OneshotVariant v) {
  switch (v) {
    case OneshotVariant::FluidReal:
      return "fluid_real";
    case OneshotVariant::FluidRealT1:
      return "fluid_real_t1";
    default:
      return "brainstorm_real";
  }
}

OneshotVariant parse_oneshot_variant(const std::string& name) {
  if (name == "fluid_real") return OneshotVariant::FluidReal;
  if (name == "fluid_real_t1") return OneshotVariant::FluidRealT1;
  if (name == "brainstorm_real") return OneshotVariant::BrainstormReal;
  throw Error("bad_config", "unknown one-shot variant '" + name + "'");
}

OneshotResult oneshot_synthesize(const ScalarField& atlas,
                                 const LabelMap& atlas_labels,
                                 const std::vector<ScalarField>& unlabeled,
                                 int n_out, const SamplerConfig& cfg,
                                 const RegConfig& reg, OneshotVariant variant,
                                 MomentumCache* cache) {
  cfg.validate();
  reg.validate();
  atlas_labels.validate();
  if (!(atlas_labels.grid == atlas.grid)) {
    throw Error("grid_mismatch", "atlas labels are on a different grid");
  }
  if (n_out < 0) {
    throw Error("bad_config", "n_out must be non-negative");
  }
  const int k_geo = variant == OneshotVariant::BrainstormReal ? 1 : cfg.K;
  if (static_cast<int>(unlabeled.size()) < k_geo) {
    throw Error("bad_config", "need at least " + std::to_string(k_geo) +
                                  " unlabeled images");
  }
  const Dataset pool = wrap_unlabeled(atlas, unlabeled);
  MomentumCache local;
  if (cache == nullptr) cache = &local;

  OneshotResult out;
  for (int i = 0; i < n_out; ++i) {
    const std::uint64_t seed =
        Rng::derive(cfg.rng_seed, static_cast<std::uint64_t>(i));
    try {
      out.examples.push_back(make_oneshot_item(atlas, atlas_labels, pool, seed,
                                               cfg, reg, variant, *cache));
    } catch (const Error& e) {
      if (e.code() == "fold_detected") throw;
      out.failures.push_back("output " + std::to_string(i) + ": " + e.code() +
                             ": " + e.what());
    }
  }
  if (n_out > 0 && out.examples.empty()) {
    throw Error("pipeline_failed", "all " + std::to_string(n_out) +
                                       " outputs failed; first failure: " +
                                       out.failures.front());
  }
  return out;
}

SegmenterIface atlas_segmenter(const ScalarField& atlas,
                               const LabelMap& atlas_labels,
                               const RegConfig& reg) {
  atlas_labels.validate();
  if (!(atlas_labels.grid == atlas.grid)) {
    throw Error("grid_mismatch", "atlas labels are on a different grid");
  }
  reg.validate();
  return [atlas, atlas_labels, reg](const ScalarField& img) {
    const RegResult r = register_pair(atlas, img, reg);
    const GeodesicState st = shoot(r.m0, 1.0, reg.shoot);
    const LabelMap warped = warp_labels(atlas_labels, st.phi_inv);
    const int nl = warped.label_count;
    SoftLabelField soft;
    soft.grid = img.grid;
    soft.label_count = nl;
    const double spread = 0.01 / static_cast<double>(nl);
    soft.probs.assign(img.grid.num_points() * static_cast<std::size_t>(nl),
                      spread);
    for (std::size_t p = 0; p < warped.labels.size(); ++p) {
      soft.probs[p * static_cast<std::size_t>(nl) + warped.labels[p]] += 0.99;
    }
    return soft;
  };
}

AugmentedExample regenerate_train_example(const Dataset& dataset,
                                          const Lineage& lin,
                                          const SamplerConfig& cfg,
                                          const RegConfig& reg,
                                          MomentumCache* cache) {
  check_dataset(dataset);
  if (lin.pipeline != "augment_train") {
    throw Error("lineage_mismatch",
                "lineage pipeline is '" + lin.pipeline + "'");
  }
  MomentumCache local;
  if (cache == nullptr) cache = &local;
  AugmentedExample ex = make_train_item(dataset, lin.seed, cfg, reg, *cache);
  verify_lineage(ex.lineage, lin);
  return ex;
}

AugmentedExample regenerate_bspline_example(const Dataset& dataset,
                                            const BsplineConfig& cfg,
                                            const Lineage& lin) {
  check_dataset(dataset);
  if (lin.pipeline != "bspline") {
    throw Error("lineage_mismatch",
                "lineage pipeline is '" + lin.pipeline + "'");
  }
  if (cfg.settings.empty()) {
    throw Error("bad_config", "no b-spline settings given");
  }
  AugmentedExample ex = make_bspline_item(dataset, cfg, lin.seed);
  verify_lineage(ex.lineage, lin);
  return ex;
}

AugmentedExample regenerate_oneshot_example(
    const ScalarField& atlas, const LabelMap& atlas_labels,
    const std::vector<ScalarField>& unlabeled, const Lineage& lin,
    const SamplerConfig& cfg, const RegConfig& reg, MomentumCache* cache) {
  if (lin.pipeline.rfind("oneshot_", 0) != 0) {
    throw Error("lineage_mismatch",
                "lineage pipeline is '" + lin.pipeline + "'");
  }
  const OneshotVariant variant =
      parse_oneshot_variant(lin.pipeline.substr(std::string("oneshot_").size()));
  const Dataset pool = wrap_unlabeled(atlas, unlabeled);
  MomentumCache local;
  if (cache == nullptr) cache = &local;
  AugmentedExample ex = make_oneshot_item(atlas, atlas_labels, pool, lin.seed,
                                          cfg, reg, variant, *cache);
  verify_lineage(ex.lineage, lin);
  return ex;
}

}  // namespace geoflow
