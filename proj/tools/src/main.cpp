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
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "geoflow/augment.hpp"
#include "geoflow/field_io.hpp"
#include "geoflow/registration.hpp"
#include "geoflow/run_config.hpp"
#include "geoflow/shooting.hpp"
#include "geoflow/subspace.hpp"
#include "geoflow/synthdata.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace geoflow;

namespace {

/// Shortest round-trip decimal for a double, shared with the config
/// serializer so console lines and files agree on number text.
std::string fmt(double v) { return json(v).dump(); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec && !fs::is_directory(dir))
    throw Error("io_error", "cannot create output directory " + dir);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io_error", "cannot open " + path + " for writing");
  out << text;
  if (!out) throw Error("io_error", "write failed for " + path);
}

/// Options common to every subcommand. The run configuration is read from
/// --config (or a manifest), then --set overrides are applied onto the
/// JSON before the strict parse, so every config field has a flag form.
struct CommonOpts {
  std::string config_path;
  std::string manifest_path;
  std::string output_dir = "out";
  std::vector<std::string> sets;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "run configuration JSON file");
    cmd->add_option("--from-manifest", manifest_path,
                    "rerun from a previously written manifest");
    cmd->add_option("--output-dir", output_dir, "output directory")
        ->capture_default_str();
    cmd->add_option("--set", sets,
                    "override a config value, dotted path, e.g. "
                    "--set sampler.k=3");
  }
};

json parse_override_value(const std::string& text) {
  const json v = json::parse(text, nullptr, false);
  if (v.is_discarded()) return json(text);  // bare string value
  return v;
}

void apply_set(json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw Error("bad_config", "--set needs key=value, got '" + assignment +
                                  "'");
  const std::string dotted = assignment.substr(0, eq);
  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot - start);
    if (key.empty())
      throw Error("bad_config", "--set key has an empty segment: '" +
                                    dotted + "'");
    if (dot == std::string::npos) {
      (*node)[key] = parse_override_value(assignment.substr(eq + 1));
      return;
    }
    node = &(*node)[key];
    if (!node->is_object() && !node->is_null())
      throw Error("bad_config",
                  "--set path '" + dotted + "' descends into a non-object");
    start = dot + 1;
  }
}

struct LoadedRun {
  RunConfig cfg;
  std::map<std::string, std::string> manifest_inputs;
  std::string subcommand_in_manifest;
};

LoadedRun load_run(const CommonOpts& opts, const std::string& subcommand) {
  LoadedRun run;
  json base = json::object();
  if (!opts.manifest_path.empty()) {
    const Manifest m = read_manifest(opts.manifest_path);
    if (m.subcommand != subcommand)
      throw Error("bad_manifest", "manifest was written by '" +
                                      m.subcommand + "', not '" +
                                      subcommand + "'");
    base = json::parse(serialize_run_config(m.config));
    run.manifest_inputs = m.inputs;
    run.subcommand_in_manifest = m.subcommand;
  } else if (!opts.config_path.empty()) {
    base = json::parse(read_text_file(opts.config_path), nullptr, false);
    if (base.is_discarded())
      throw Error("bad_config", opts.config_path + " is not valid JSON");
  }
  for (const std::string& s : opts.sets) apply_set(base, s);
  run.cfg = parse_run_config(base.dump());
  return run;
}

/// Input path for a role: an explicit flag wins, else the manifest's
/// recorded path, else an error naming the missing role.
std::string resolve_input(const LoadedRun& run, const std::string& flag_value,
                          const std::string& role, bool required = true) {
  if (!flag_value.empty()) return flag_value;
  const auto it = run.manifest_inputs.find(role);
  if (it != run.manifest_inputs.end()) return it->second;
  if (required)
    throw Error("bad_input", "missing input '" + role + "'");
  return "";
}

void emit_manifest(const RunConfig& cfg, const std::string& subcommand,
                   const std::map<std::string, std::string>& inputs,
                   const std::string& outdir) {
  write_manifest(cfg, subcommand, inputs, outdir + "/manifest.json");
}

std::string item_name(const char* prefix, std::size_t i, const char* suffix) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%03zu%s", prefix, i, suffix);
  return buf;
}

Dataset load_dataset(const std::string& dir) {
  std::vector<std::string> image_files, label_files;
  const fs::path images = fs::path(dir) / "images";
  const fs::path labels = fs::path(dir) / "labels";
  if (!fs::is_directory(images) || !fs::is_directory(labels))
    throw Error("bad_input",
                dir + " needs images/ and labels/ subdirectories");
  for (const auto& e : fs::directory_iterator(images))
    if (e.path().extension() == ".field") image_files.push_back(e.path());
  for (const auto& e : fs::directory_iterator(labels))
    if (e.path().extension() == ".field") label_files.push_back(e.path());
  std::sort(image_files.begin(), image_files.end());
  std::sort(label_files.begin(), label_files.end());
  if (image_files.empty())
    throw Error("bad_input", dir + " holds no image fields");
  if (image_files.size() != label_files.size())
    throw Error("bad_input", dir + " image and label counts differ");
  Dataset ds;
  for (std::size_t i = 0; i < image_files.size(); ++i) {
    LabeledImage it;
    it.id = fs::path(image_files[i]).stem();
    it.image = read_scalar(image_files[i]);
    it.labels = read_labels(label_files[i]);
    ds.push_back(std::move(it));
  }
  return ds;
}

std::string lineage_json(const Lineage& lin) {
  json j;
  j["pipeline"] = lin.pipeline;
  j["source_id"] = lin.source_id;
  if (!lin.appearance_id.empty()) j["appearance_id"] = lin.appearance_id;
  j["target_ids"] = lin.target_ids;
  j["lambda"] = lin.lambda;
  j["t"] = lin.t;
  j["seed"] = lin.seed;
  if (lin.setting_index >= 0) j["setting_index"] = lin.setting_index;
  return j.dump();
}

void write_examples(const std::vector<AugmentedExample>& examples,
                    const char* prefix, const std::string& outdir,
                    const char* tag) {
  std::string lineage_text;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const std::string img = item_name(prefix, i, "_img.field");
    const std::string lab = item_name(prefix, i, "_lab.field");
    write_scalar(outdir + "/" + img, examples[i].image);
    write_labels(outdir + "/" + lab, examples[i].labels);
    lineage_text += lineage_json(examples[i].lineage) + "\n";
    std::printf("%s: wrote %s %s source=%s t=%s\n", tag, img.c_str(),
                lab.c_str(), examples[i].lineage.source_id.c_str(),
                fmt(examples[i].lineage.t).c_str());
  }
  write_text_file(outdir + "/lineage.txt", lineage_text);
}

std::vector<double> parse_double_list(const std::string& text,
                                      const char* what) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string tok =
        text.substr(start, comma == std::string::npos ? std::string::npos
                                                      : comma - start);
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw Error("bad_input", std::string(what) + ": '" + tok +
                                   "' is not a number");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw Error("bad_input", std::string(what) + " is empty");
  return out;
}

// ---------------------------------------------------------------- gen --

int cmd_gen(const CommonOpts& opts) {
  const LoadedRun run = load_run(opts, "gen");
  const RunConfig& cfg = run.cfg;
  ensure_dir(opts.output_dir);
  ensure_dir(opts.output_dir + "/images");
  ensure_dir(opts.output_dir + "/labels");
  emit_manifest(cfg, "gen", {}, opts.output_dir);

  const ShapeSceneSpec scene = default_scene(cfg.dim, cfg.size);
  const auto pop = generate_population(scene, cfg.population.n,
                                       cfg.population.scales, cfg.seed);
  std::printf("gen: n=%d grid=%d^%d seed=%llu\n", cfg.population.n, cfg.size,
              cfg.dim, static_cast<unsigned long long>(cfg.seed));
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const std::string img = "images/" + item_name("img_", i, ".field");
    const std::string lab = "labels/" + item_name("lab_", i, ".field");
    write_scalar(opts.output_dir + "/" + img, pop[i].first);
    write_labels(opts.output_dir + "/" + lab, pop[i].second);
    std::printf("gen: wrote %s %s\n", img.c_str(), lab.c_str());
  }
  return 0;
}

// ----------------------------------------------------------- register --

int cmd_register(const CommonOpts& opts, const std::string& source_flag,
                 const std::string& target_flag) {
  const LoadedRun run = load_run(opts, "register");
  const std::string source = resolve_input(run, source_flag, "source");
  const std::string target = resolve_input(run, target_flag, "target");
  ensure_dir(opts.output_dir);
  emit_manifest(run.cfg, "register", {{"source", source}, {"target", target}},
                opts.output_dir);

  const ScalarField I0 = read_scalar(source);
  const ScalarField I1 = read_scalar(target);
  const ResolvedConfigs rc = resolve_configs(run.cfg, I0.grid);
  const RegResult res = register_pair(I0, I1, rc.reg);

  write_vector(opts.output_dir + "/m0.field", res.m0);
  write_scalar(opts.output_dir + "/warped.field", res.final_warped);
  std::string trace;
  for (const EnergyRecord& r : res.energy_trace)
    trace += std::to_string(r.iteration) + " " + std::to_string(r.level) +
             " " + fmt(r.regularity) + " " + fmt(r.similarity) + " " +
             fmt(r.total()) + "\n";
  write_text_file(opts.output_dir + "/trace.txt", trace);

  const double mnorm = std::sqrt(inner_product(res.m0, res.m0));
  const EnergyRecord& last = res.energy_trace.back();
  std::printf("register: converged=%s reason=\"%s\"\n",
              res.converged ? "yes" : "no", res.reason.c_str());
  std::printf("register: regularity=%s similarity=%s total=%s\n",
              fmt(last.regularity).c_str(), fmt(last.similarity).c_str(),
              fmt(last.total()).c_str());
  std::printf("register: momentum_norm=%s below_tolerance=%s\n",
              fmt(mnorm).c_str(), mnorm < 1e-8 ? "yes" : "no");
  return 0;
}

// -------------------------------------------------------------- shoot --

int cmd_shoot(const CommonOpts& opts, const std::string& momentum_flag,
              const std::string& image_flag, const std::string& t_list) {
  const LoadedRun run = load_run(opts, "shoot");
  const std::string momentum = resolve_input(run, momentum_flag, "momentum");
  const std::string image = resolve_input(run, image_flag, "image", false);
  ensure_dir(opts.output_dir);
  std::map<std::string, std::string> inputs = {{"momentum", momentum}};
  if (!image.empty()) inputs["image"] = image;
  emit_manifest(run.cfg, "shoot", inputs, opts.output_dir);

  const VectorField m0 = read_vector(momentum);
  const ResolvedConfigs rc = resolve_configs(run.cfg, m0.grid);
  std::vector<double> ts = parse_double_list(t_list, "--t");
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

  ScalarField src;
  if (!image.empty()) src = read_scalar(image);

  const std::vector<GeodesicState> states =
      shoot_sequence(m0, ts, rc.reg.shoot);
  for (const GeodesicState& st : states) {
    const std::string tr = fmt(st.t);
    write_map(opts.output_dir + "/phi_t" + tr + ".field", st.phi);
    write_map(opts.output_dir + "/phi_inv_t" + tr + ".field", st.phi_inv);
    write_vector(opts.output_dir + "/m_t" + tr + ".field", st.m);
    if (!image.empty())
      write_scalar(opts.output_dir + "/warped_t" + tr + ".field",
                   interpolate(src, st.phi_inv));
    const double mj = min_value(jacobian_determinant(st.phi_inv));
    std::printf("shoot: t=%s min_jacdet=%s\n", tr.c_str(), fmt(mj).c_str());
  }
  return 0;
}

// ----------------------------------------------------------- subspace --

int cmd_subspace(const CommonOpts& opts, const std::string& source_flag,
                 std::vector<std::string> momenta_flags, int draws,
                 int lambda_steps, const std::string& t_grid) {
  const LoadedRun run = load_run(opts, "subspace");
  const std::string source = resolve_input(run, source_flag, "source");
  if (momenta_flags.empty()) {
    for (std::size_t j = 0;; ++j) {
      const auto it = run.manifest_inputs.find("momentum_" +
                                               std::to_string(j));
      if (it == run.manifest_inputs.end()) break;
      momenta_flags.push_back(it->second);
    }
  }
  if (momenta_flags.empty())
    throw Error("bad_input", "subspace needs at least one --momenta file");
  ensure_dir(opts.output_dir);
  std::map<std::string, std::string> inputs = {{"source", source}};
  for (std::size_t j = 0; j < momenta_flags.size(); ++j)
    inputs["momentum_" + std::to_string(j)] = momenta_flags[j];
  emit_manifest(run.cfg, "subspace", inputs, opts.output_dir);

  const ScalarField src = read_scalar(source);
  ResolvedConfigs rc = resolve_configs(run.cfg, src.grid);
  MomentumSet set;
  set.source_id = "source";
  for (const std::string& p : momenta_flags)
    set.momenta.push_back(read_vector(p));
  set.validate();
  rc.sampler.K = static_cast<int>(set.momenta.size());

  if (draws > 0) {
    for (int i = 0; i < draws; ++i) {
      const std::uint64_t seed = Rng::derive(run.cfg.seed, i);
      const SubspaceSample s = draw_sample(set, rc.sampler, seed);
      const std::string name = item_name("draw_", i, "_warp.field");
      write_scalar(opts.output_dir + "/" + name,
                   interpolate(src, s.phi_inv));
      std::string lam;
      for (std::size_t j = 0; j < s.lambda.size(); ++j)
        lam += (j ? "," : "") + fmt(s.lambda[j]);
      std::printf("subspace: draw=%d seed=%llu lambda=%s t=%s\n", i,
                  static_cast<unsigned long long>(seed), lam.c_str(),
                  fmt(s.t).c_str());
    }
    return 0;
  }

  if (set.momenta.size() != 2)
    throw Error("bad_input", "the lambda-by-t grid needs exactly 2 momenta");
  if (lambda_steps < 2)
    throw Error("bad_input", "--lambda-steps must be at least 2");
  const std::vector<double> ts = parse_double_list(t_grid, "--t-grid");
  for (int li = 0; li < lambda_steps; ++li) {
    const double l1 = static_cast<double>(li) / (lambda_steps - 1);
    const VectorField mt = convex_combination(set, {l1, 1.0 - l1});
    for (const double t : ts) {
      const GeodesicState st = shoot(mt, t, rc.sampler.shoot);
      const ScalarField warped = interpolate(src, st.phi_inv);
      const std::string base =
          "cell_l" + fmt(l1) + "_t" + fmt(t);
      write_scalar(opts.output_dir + "/" + base + ".field", warped);
      if (src.grid.dim == 2)
        export_image_2d(warped, opts.output_dir + "/" + base + ".pgm");
      std::printf("subspace: lambda=%s t=%s min_jacdet=%s\n",
                  fmt(l1).c_str(), fmt(t).c_str(),
                  fmt(min_value(jacobian_determinant(st.phi_inv))).c_str());
    }
  }
  return 0;
}

// ------------------------------------------------------ augment-train --

int cmd_augment_train(const CommonOpts& opts, const std::string& data_flag,
                      const std::string& cache_dir) {
  const LoadedRun run = load_run(opts, "augment-train");
  const std::string data = resolve_input(run, data_flag, "data");
  ensure_dir(opts.output_dir);
  emit_manifest(run.cfg, "augment-train", {{"data", data}}, opts.output_dir);

  const Dataset ds = load_dataset(data);
  const ResolvedConfigs rc = resolve_configs(run.cfg, ds[0].image.grid);
  std::unique_ptr<MomentumCache> cache;
  if (!cache_dir.empty()) cache = std::make_unique<MomentumCache>(cache_dir);

  const TrainAugmentResult res = augment_train(
      ds, run.cfg.pipeline.n_out, rc.sampler, rc.reg, cache.get());
  write_examples(res.examples, "aug_", opts.output_dir, "augment-train");
  for (const std::string& f : res.failures)
    std::printf("augment-train: failure %s\n", f.c_str());
  std::printf("augment-train: wrote %zu examples, %zu failures\n",
              res.examples.size(), res.failures.size());
  return 0;
}

// ------------------------------------------------------- augment-test --

int cmd_augment_test(const CommonOpts& opts, const std::string& data_flag,
                     const std::string& image_flag,
                     const std::string& cache_dir) {
  const LoadedRun run = load_run(opts, "augment-test");
  const std::string data = resolve_input(run, data_flag, "data");
  const std::string image = resolve_input(run, image_flag, "image");
  ensure_dir(opts.output_dir);
  emit_manifest(run.cfg, "augment-test", {{"data", data}, {"image", image}},
                opts.output_dir);

  const Dataset ds = load_dataset(data);
  const ScalarField test = read_scalar(image);
  const ResolvedConfigs rc = resolve_configs(run.cfg, test.grid);
  std::unique_ptr<MomentumCache> cache;
  if (!cache_dir.empty()) cache = std::make_unique<MomentumCache>(cache_dir);

  const SegmenterIface seg =
      atlas_segmenter(ds[0].image, ds[0].labels, rc.reg);
  std::vector<ScalarField> train;
  for (const LabeledImage& it : ds) train.push_back(it.image);

  const TestAugmentResult res =
      augment_test(test, train, seg, run.cfg.pipeline.n_views, rc.sampler,
                   rc.reg, cache.get());
  write_labels(opts.output_dir + "/fused.field", res.fused);
  std::string views;
  int used = 0;
  for (const ViewDiagnostic& v : res.views) {
    std::string targets;
    for (std::size_t j = 0; j < v.target_ids.size(); ++j)
      targets += (j ? "," : "") + v.target_ids[j];
    views += "view=" + std::to_string(v.view) +
             " used=" + (v.used ? "1" : "0") +
             " seed=" + std::to_string(v.seed) + " t=" + fmt(v.t) +
             " targets=" + targets +
             (v.error.empty() ? "" : " error=" + v.error) + "\n";
    if (v.used) ++used;
    std::printf("augment-test: view=%d used=%s t=%s\n", v.view,
                v.used ? "yes" : "no", fmt(v.t).c_str());
  }
  write_text_file(opts.output_dir + "/views.txt", views);
  std::printf("augment-test: fused from %d/%zu views\n", used,
              res.views.size());
  return 0;
}

// ------------------------------------------------------------ oneshot --

int cmd_oneshot(const CommonOpts& opts, const std::string& data_flag,
                const std::string& cache_dir) {
  const LoadedRun run = load_run(opts, "oneshot");
  const std::string data = resolve_input(run, data_flag, "data");
  ensure_dir(opts.output_dir);
  emit_manifest(run.cfg, "oneshot", {{"data", data}}, opts.output_dir);

  const Dataset ds = load_dataset(data);
  if (ds.size() < 2)
    throw Error("bad_input", "oneshot needs an atlas plus unlabeled images");
  const ResolvedConfigs rc = resolve_configs(run.cfg, ds[0].image.grid);
  const OneshotVariant variant =
      parse_oneshot_variant(run.cfg.pipeline.variant);
  std::unique_ptr<MomentumCache> cache;
  if (!cache_dir.empty()) cache = std::make_unique<MomentumCache>(cache_dir);

  std::vector<ScalarField> unlabeled;
  for (std::size_t i = 1; i < ds.size(); ++i)
    unlabeled.push_back(ds[i].image);

  const OneshotResult res = oneshot_synthesize(
      ds[0].image, ds[0].labels, unlabeled, run.cfg.pipeline.n_out,
      rc.sampler, rc.reg, variant, cache.get());
  std::printf("oneshot: variant=%s atlas=%s\n",
              run.cfg.pipeline.variant.c_str(), ds[0].id.c_str());
  write_examples(res.examples, "ex_", opts.output_dir, "oneshot");
  for (const std::string& f : res.failures)
    std::printf("oneshot: failure %s\n", f.c_str());
  std::printf("oneshot: wrote %zu examples, %zu failures\n",
              res.examples.size(), res.failures.size());
  return 0;
}

// ------------------------------------------------------------ bspline --

int cmd_bspline(const CommonOpts& opts, const std::string& data_flag) {
  const LoadedRun run = load_run(opts, "bspline");
  const std::string data = resolve_input(run, data_flag, "data");
  ensure_dir(opts.output_dir);
  emit_manifest(run.cfg, "bspline", {{"data", data}}, opts.output_dir);

  const Dataset ds = load_dataset(data);
  const auto examples =
      bspline_augment(ds, run.cfg.pipeline.n_out, run.cfg.bspline);
  write_examples(examples, "bsp_", opts.output_dir, "bspline");
  std::printf("bspline: wrote %zu examples\n", examples.size());
  return 0;
}

// ----------------------------------------------------------- jacobian --

int cmd_jacobian(const CommonOpts& opts, const std::string& map_flag) {
  const LoadedRun run = load_run(opts, "jacobian");
  const std::string map_path = resolve_input(run, map_flag, "map");
  ensure_dir(opts.output_dir);
  emit_manifest(run.cfg, "jacobian", {{"map", map_path}}, opts.output_dir);

  const DeformationMap map = read_map(map_path);
  const ScalarField jd = jacobian_determinant(map);
  write_scalar(opts.output_dir + "/jacdet.field", jd);
  double mn = jd.values[0], acc = 0.0;
  std::size_t neg = 0;
  for (const double v : jd.values) {
    mn = std::min(mn, v);
    acc += v;
    if (v <= 0.0) ++neg;
  }
  std::printf("jacobian: min=%s mean=%s nonpositive=%zu\n", fmt(mn).c_str(),
              fmt(acc / static_cast<double>(jd.values.size())).c_str(), neg);
  return 0;
}

// --------------------------------------------------------------- dice --

int cmd_dice(const CommonOpts& opts, const std::string& a_flag,
             const std::string& b_flag) {
  const LoadedRun run = load_run(opts, "dice");
  const std::string a_path = resolve_input(run, a_flag, "a");
  const std::string b_path = resolve_input(run, b_flag, "b");
  ensure_dir(opts.output_dir);
  emit_manifest(run.cfg, "dice", {{"a", a_path}, {"b", b_path}},
                opts.output_dir);

  const DiceResult d = dice(read_labels(a_path), read_labels(b_path));
  std::string text;
  for (std::size_t l = 1; l < d.per_label.size(); ++l)
    text += "label=" + std::to_string(l) + " dice=" + fmt(d.per_label[l]) +
            "\n";
  text += "mean_foreground=" + fmt(d.mean_foreground) + "\n";
  write_text_file(opts.output_dir + "/dice.txt", text);
  std::fputs(text.c_str(), stdout);
  return 0;
}

// ------------------------------------------------------------- export --

int cmd_export(const CommonOpts& opts, const std::string& field_flag,
               const std::string& name, int axis, int slice) {
  const LoadedRun run = load_run(opts, "export");
  const std::string field = resolve_input(run, field_flag, "field");
  ensure_dir(opts.output_dir);
  emit_manifest(run.cfg, "export", {{"field", field}}, opts.output_dir);

  const FieldKind kind = read_field_kind(field);
  if (kind == FieldKind::Scalar) {
    const std::string out = name + ".pgm";
    export_image_2d(read_scalar(field), opts.output_dir + "/" + out, axis,
                    slice);
    std::printf("export: wrote %s\n", out.c_str());
  } else if (kind == FieldKind::Labels) {
    const std::string out = name + ".ppm";
    export_labels_2d(read_labels(field), opts.output_dir + "/" + out, axis,
                     slice);
    std::printf("export: wrote %s\n", out.c_str());
  } else {
    throw Error("bad_input",
                "export handles scalar images and label maps only");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fluid registration and augmentation toolkit"};
  app.set_version_flag("--version", std::string(kToolkitVersion));
  app.require_subcommand(1);

  std::function<int()> action;

  auto* gen = app.add_subcommand("gen", "generate a synthetic population");
  auto gen_opts = std::make_shared<CommonOpts>();
  gen_opts->attach(gen);
  gen->callback([gen_opts, &action] {
    action = [gen_opts] { return cmd_gen(*gen_opts); };
  });

  auto* reg = app.add_subcommand("register", "register a pair of images");
  auto reg_opts = std::make_shared<CommonOpts>();
  auto reg_source = std::make_shared<std::string>();
  auto reg_target = std::make_shared<std::string>();
  reg_opts->attach(reg);
  reg->add_option("--source", *reg_source, "source (moving) image field");
  reg->add_option("--target", *reg_target, "target (fixed) image field");
  reg->callback([reg_opts, reg_source, reg_target, &action] {
    action = [reg_opts, reg_source, reg_target] {
      return cmd_register(*reg_opts, *reg_source, *reg_target);
    };
  });

  auto* shoot_cmd = app.add_subcommand("shoot", "integrate a geodesic");
  auto shoot_opts = std::make_shared<CommonOpts>();
  auto shoot_m = std::make_shared<std::string>();
  auto shoot_img = std::make_shared<std::string>();
  auto shoot_t = std::make_shared<std::string>("1");
  shoot_opts->attach(shoot_cmd);
  shoot_cmd->add_option("--momentum", *shoot_m, "initial momentum field");
  shoot_cmd->add_option("--image", *shoot_img,
                        "optional image to carry along");
  shoot_cmd->add_option("--t", *shoot_t, "comma-separated times")
      ->capture_default_str();
  shoot_cmd->callback([shoot_opts, shoot_m, shoot_img, shoot_t, &action] {
    action = [shoot_opts, shoot_m, shoot_img, shoot_t] {
      return cmd_shoot(*shoot_opts, *shoot_m, *shoot_img, *shoot_t);
    };
  });

  auto* sub = app.add_subcommand("subspace",
                                 "evaluate the geodesic subspace");
  auto sub_opts = std::make_shared<CommonOpts>();
  auto sub_source = std::make_shared<std::string>();
  auto sub_momenta = std::make_shared<std::vector<std::string>>();
  auto sub_draws = std::make_shared<int>(0);
  auto sub_lsteps = std::make_shared<int>(5);
  auto sub_tgrid = std::make_shared<std::string>("0,0.5,1");
  sub_opts->attach(sub);
  sub->add_option("--source", *sub_source, "source image field");
  sub->add_option("--momenta", *sub_momenta,
                  "momentum fields anchored at the source")
      ->delimiter(',');
  sub->add_option("--draws", *sub_draws,
                  "random draws instead of the lambda-by-t grid");
  sub->add_option("--lambda-steps", *sub_lsteps, "grid steps for lambda_1")
      ->capture_default_str();
  sub->add_option("--t-grid", *sub_tgrid, "comma-separated grid times")
      ->capture_default_str();
  sub->callback(
      [sub_opts, sub_source, sub_momenta, sub_draws, sub_lsteps, sub_tgrid,
       &action] {
        action = [sub_opts, sub_source, sub_momenta, sub_draws, sub_lsteps,
                  sub_tgrid] {
          return cmd_subspace(*sub_opts, *sub_source, *sub_momenta,
                              *sub_draws, *sub_lsteps, *sub_tgrid);
        };
      });

  auto* atr = app.add_subcommand("augment-train",
                                 "synthesize labeled training examples");
  auto atr_opts = std::make_shared<CommonOpts>();
  auto atr_data = std::make_shared<std::string>();
  auto atr_cache = std::make_shared<std::string>();
  atr_opts->attach(atr);
  atr->add_option("--data", *atr_data, "dataset directory from gen");
  atr->add_option("--cache", *atr_cache, "momentum cache directory");
  atr->callback([atr_opts, atr_data, atr_cache, &action] {
    action = [atr_opts, atr_data, atr_cache] {
      return cmd_augment_train(*atr_opts, *atr_data, *atr_cache);
    };
  });

  auto* ate = app.add_subcommand("augment-test",
                                 "multi-view test-time segmentation");
  auto ate_opts = std::make_shared<CommonOpts>();
  auto ate_data = std::make_shared<std::string>();
  auto ate_image = std::make_shared<std::string>();
  auto ate_cache = std::make_shared<std::string>();
  ate_opts->attach(ate);
  ate->add_option("--data", *ate_data,
                  "dataset directory (item 0 is the atlas)");
  ate->add_option("--image", *ate_image, "test image field");
  ate->add_option("--cache", *ate_cache, "momentum cache directory");
  ate->callback([ate_opts, ate_data, ate_image, ate_cache, &action] {
    action = [ate_opts, ate_data, ate_image, ate_cache] {
      return cmd_augment_test(*ate_opts, *ate_data, *ate_image, *ate_cache);
    };
  });

  auto* osh = app.add_subcommand("oneshot",
                                 "one-shot synthesis from a single atlas");
  auto osh_opts = std::make_shared<CommonOpts>();
  auto osh_data = std::make_shared<std::string>();
  auto osh_cache = std::make_shared<std::string>();
  osh_opts->attach(osh);
  osh->add_option("--data", *osh_data,
                  "dataset directory (item 0 is the labeled atlas)");
  osh->add_option("--cache", *osh_cache, "momentum cache directory");
  osh->callback([osh_opts, osh_data, osh_cache, &action] {
    action = [osh_opts, osh_data, osh_cache] {
      return cmd_oneshot(*osh_opts, *osh_data, *osh_cache);
    };
  });

  auto* bsp = app.add_subcommand("bspline",
                                 "random B-spline augmentation baseline");
  auto bsp_opts = std::make_shared<CommonOpts>();
  auto bsp_data = std::make_shared<std::string>();
  bsp_opts->attach(bsp);
  bsp->add_option("--data", *bsp_data, "dataset directory from gen");
  bsp->callback([bsp_opts, bsp_data, &action] {
    action = [bsp_opts, bsp_data] {
      return cmd_bspline(*bsp_opts, *bsp_data);
    };
  });

  auto* jac = app.add_subcommand("jacobian",
                                 "Jacobian determinant of a map");
  auto jac_opts = std::make_shared<CommonOpts>();
  auto jac_map = std::make_shared<std::string>();
  jac_opts->attach(jac);
  jac->add_option("--map", *jac_map, "deformation map field");
  jac->callback([jac_opts, jac_map, &action] {
    action = [jac_opts, jac_map] { return cmd_jacobian(*jac_opts, *jac_map); };
  });

  auto* dic = app.add_subcommand("dice", "Dice overlap of two label maps");
  auto dic_opts = std::make_shared<CommonOpts>();
  auto dic_a = std::make_shared<std::string>();
  auto dic_b = std::make_shared<std::string>();
  dic_opts->attach(dic);
  dic->add_option("--a", *dic_a, "first label field");
  dic->add_option("--b", *dic_b, "second label field");
  dic->callback([dic_opts, dic_a, dic_b, &action] {
    action = [dic_opts, dic_a, dic_b] {
      return cmd_dice(*dic_opts, *dic_a, *dic_b);
    };
  });

  auto* exp = app.add_subcommand("export", "render a field to PGM/PPM");
  auto exp_opts = std::make_shared<CommonOpts>();
  auto exp_field = std::make_shared<std::string>();
  auto exp_name = std::make_shared<std::string>("export");
  auto exp_axis = std::make_shared<int>(2);
  auto exp_slice = std::make_shared<int>(0);
  exp_opts->attach(exp);
  exp->add_option("--field", *exp_field, "field file to render");
  exp->add_option("--name", *exp_name, "output base name")
      ->capture_default_str();
  exp->add_option("--axis", *exp_axis, "slicing axis for 3D fields")
      ->capture_default_str();
  exp->add_option("--slice", *exp_slice, "slice index for 3D fields")
      ->capture_default_str();
  exp->callback([exp_opts, exp_field, exp_name, exp_axis, exp_slice,
                 &action] {
    action = [exp_opts, exp_field, exp_name, exp_axis, exp_slice] {
      return cmd_export(*exp_opts, *exp_field, *exp_name, *exp_axis,
                        *exp_slice);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    json err;
    err["error"] = "bad_usage";
    err["message"] = e.what();
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 2;
  }

  try {
    return action ? action() : 2;
  } catch (const Error& e) {
    json err;
    err["error"] = e.code();
    err["message"] = e.what();
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 1;
  } catch (const std::exception& e) {
    json err;
    err["error"] = "internal";
    err["message"] = e.what();
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 1;
  }
}
