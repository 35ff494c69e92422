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
#ifndef GEOFLOW_AUGMENT_HPP
#define GEOFLOW_AUGMENT_HPP

#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "geoflow/labels.hpp"
#include "geoflow/registration.hpp"
#include "geoflow/subspace.hpp"

namespace geoflow {

/// Segmenter seam: any callable mapping an image to per-label
/// probabilities on the same grid.
using SegmenterIface = std::function<SoftLabelField(const ScalarField&)>;

struct LabeledImage {
  std::string id;
  ScalarField image;
  LabelMap labels;
};
using Dataset = std::vector<LabeledImage>;

/// Everything needed to regenerate one augmented example bit-exactly:
/// the item stream seed plus the ids and draw values it produced (the
/// latter are verified on regeneration).
struct Lineage {
  std::string pipeline;
  std::string source_id;
  std::string appearance_id;            // one-shot only
  std::vector<std::string> target_ids;  // geometry targets
  std::vector<double> lambda;
  double t = 0.0;
  std::uint64_t seed = 0;
  int setting_index = -1;  // bspline only
};

struct AugmentedExample {
  ScalarField image;
  LabelMap labels;
  Lineage lineage;
};

/// Digest of every numeric registration setting; part of cache keys so a
/// config change can never reuse stale momenta.
std::uint64_t reg_config_digest(const RegConfig& cfg);

/// Registration results keyed by (source id, target id, config digest,
/// image content digests), kept in memory and optionally persisted under a
/// directory. Concurrent readers are safe; inserts are serialized.
class MomentumCache {
public:
  MomentumCache() = default;
  explicit MomentumCache(std::string dir);

  struct Entry {
    VectorField m0;
    double regularity = 0.0;
    double similarity = 0.0;
  };

  /// The momentum registering source -> target, computed on miss.
  Entry get(const std::string& source_id, const ScalarField& source,
            const std::string& target_id, const ScalarField& target,
            const RegConfig& cfg);

private:
  std::string dir_;
  std::mutex mutex_;
  std::map<std::string, Entry> memory_;
};

struct TrainAugmentResult {
  std::vector<AugmentedExample> examples;
  std::vector<std::string> failures;  // one message per skipped output
};

/// Training-phase augmentation: per output, pick a source and K distinct
/// targets, draw from the source's geodesic subspace, warp image and
/// labels by phi_inv. Registration failures skip the output and are
/// listed; a folded deformation aborts the pipeline.
TrainAugmentResult augment_train(const Dataset& dataset, int n_out,
                                 const SamplerConfig& cfg,
                                 const RegConfig& reg,
                                 MomentumCache* cache = nullptr);

struct ViewDiagnostic {
  int view = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> target_ids;
  std::vector<double> lambda;
  double t = 0.0;
  bool used = false;
  std::string error;
};

struct TestAugmentResult {
  LabelMap fused;
  std::vector<ViewDiagnostic> views;
};

/// Testing-phase augmentation: per view, draw a subspace sample anchored
/// at the test image toward K training targets (re-drawn each view), warp
/// the image by phi_inv, segment, warp the soft prediction back through
/// phi, then fuse by summed softmax and argmax. A failed view is dropped
/// and reported; zero surviving views is an error.
TestAugmentResult augment_test(const ScalarField& image,
                               const std::vector<ScalarField>& train_images,
                               const SegmenterIface& seg, int n_views,
                               const SamplerConfig& cfg, const RegConfig& reg,
                               MomentumCache* cache = nullptr);

struct BsplineSetting {
  int control_points = 10;  // per axis
  double sigma_mm = 3.0;    // control displacement standard deviation
};

struct BsplineConfig {
  std::vector<BsplineSetting> settings;
  std::uint64_t rng_seed = 0;

  /// The published baseline triple (10^3,3), (10^3,4), (20^3,2).
  static BsplineConfig reference_defaults();
};

/// Random cubic free-form deformation: x + u(x) with control-point
/// displacements drawn from a zero-mean normal.
DeformationMap bspline_displacement_map(const GridSpec& grid,
                                        const BsplineSetting& setting,
                                        Rng& rng);

/// Baseline augmentation: per output, pick a source image and one of the
/// settings at random, then warp through a random B-spline displacement.
/// Folds are possible by design and not checked.
std::vector<AugmentedExample> bspline_augment(const Dataset& dataset,
                                              int n_out,
                                              const BsplineConfig& cfg);

enum class OneshotVariant { FluidReal, FluidRealT1, BrainstormReal };

std::string oneshot_variant_name(OneshotVariant v);
OneshotVariant parse_oneshot_variant(const std::string& name);

struct OneshotResult {
  std::vector<AugmentedExample> examples;
  std::vector<std::string> failures;
};

/// One-shot synthesis: appearance donors are warped into atlas space via
/// their registration to the atlas; geometry comes from the atlas-anchored
/// subspace toward the unlabeled images (or a single raw registration map
/// for the Brainstorm comparator). Labels always come from the atlas.
OneshotResult oneshot_synthesize(const ScalarField& atlas,
                                 const LabelMap& atlas_labels,
                                 const std::vector<ScalarField>& unlabeled,
                                 int n_out, const SamplerConfig& cfg,
                                 const RegConfig& reg, OneshotVariant variant,
                                 MomentumCache* cache = nullptr);

/// Toy stand-in segmenter: registers the atlas to the input image and
/// returns the warped atlas labels as 0.99-sharp soft probabilities.
SegmenterIface atlas_segmenter(const ScalarField& atlas,
                               const LabelMap& atlas_labels,
                               const RegConfig& reg);

/// Regeneration from lineage; each verifies that the recorded ids and
/// draw values reappear and errors on any mismatch.
AugmentedExample regenerate_train_example(const Dataset& dataset,
                                          const Lineage& lin,
                                          const SamplerConfig& cfg,
                                          const RegConfig& reg,
                                          MomentumCache* cache = nullptr);
AugmentedExample regenerate_bspline_example(const Dataset& dataset,
                                            const BsplineConfig& cfg,
                                            const Lineage& lin);
AugmentedExample regenerate_oneshot_example(
    const ScalarField& atlas, const LabelMap& atlas_labels,
    const std::vector<ScalarField>& unlabeled, const Lineage& lin,
    const SamplerConfig& cfg, const RegConfig& reg,
    MomentumCache* cache = nullptr);

}  // namespace geoflow

#endif
