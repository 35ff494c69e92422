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
#ifndef GEOFLOW_RUN_CONFIG_HPP
#define GEOFLOW_RUN_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>

#include "geoflow/augment.hpp"
#include "geoflow/registration.hpp"
#include "geoflow/subspace.hpp"
#include "geoflow/synthdata.hpp"

namespace geoflow {

inline constexpr const char* kToolkitVersion = "0.1.0";

struct PipelineParams {
  int n_out = 50;
  int n_views = 20;
  std::string variant = "fluid_real";
};

struct PopulationParams {
  int n = 10;
  PerturbationScales scales{2.0, 0.10, 0.0};
};

/// One declarative description of a run. Parsed strictly (unknown keys
/// are errors), serialized canonically (sorted keys, round-trip exact
/// numbers), and hashed for the manifest. The single seed governs every
/// random draw of the run.
/// The output directory is deliberately not part of the config: runs are
/// reproducible into any destination, and manifests stay byte-identical
/// across destinations.
struct RunConfig {
  std::uint64_t seed = 1234;
  int dim = 2;
  int size = 64;
  bool has_kernel = false;  // explicit kernel given; else grid defaults
  KernelSpec kernel;
  RegConfig reg;
  SamplerConfig sampler;
  PipelineParams pipeline;
  BsplineConfig bspline;
  PopulationParams population;

  void validate() const;
};

RunConfig default_run_config();
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

/// Canonical JSON with every field materialized.
std::string serialize_run_config(const RunConfig& cfg);

/// FNV-1a over the canonical serialization.
std::uint64_t config_hash(const RunConfig& cfg);

/// Registration and sampler configs with the kernel, step count, and seed
/// injected; the kernel defaults from the grid when none was given.
struct ResolvedConfigs {
  RegConfig reg;
  SamplerConfig sampler;
};
ResolvedConfigs resolve_configs(const RunConfig& cfg, const GridSpec& grid);

/// Execution record: the resolved config, its hash, the subcommand, the
/// toolkit version, and the input paths by role. No timestamps, so a
/// rerun writes byte-identical manifests.
struct Manifest {
  std::string subcommand;
  std::string toolkit_version = kToolkitVersion;
  RunConfig config;
  std::uint64_t config_hash = 0;
  std::map<std::string, std::string> inputs;
};

/// Writes the manifest JSON to `path` and returns the text.
std::string write_manifest(const RunConfig& cfg, const std::string& subcommand,
                           const std::map<std::string, std::string>& inputs,
                           const std::string& path);

/// Strict parse; verifies the stored hash against the stored config.
Manifest read_manifest(const std::string& path);

std::uint64_t fnv1a(const std::string& text);

}  // namespace geoflow

#endif
