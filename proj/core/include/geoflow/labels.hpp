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
#ifndef GEOFLOW_LABELS_HPP
#define GEOFLOW_LABELS_HPP

#include <cstdint>
#include <vector>

#include "geoflow/grid.hpp"

namespace geoflow {

/// Integer segmentation, one label id per grid point, ids in [0, L).
/// Label 0 is background by convention.
struct LabelMap {
  GridSpec grid;
  std::vector<std::uint16_t> labels;
  int label_count = 1;  // L

  LabelMap() = default;
  LabelMap(const GridSpec& g, int count)
      : grid(g), labels(g.num_points(), 0), label_count(count) {}

  std::uint16_t& at(int x, int y, int z = 0) {
    return labels[grid.index(x, y, z)];
  }
  std::uint16_t at(int x, int y, int z = 0) const {
    return labels[grid.index(x, y, z)];
  }

  void validate() const;
};

/// L per-label reals per grid point, interleaved. Segmenter outputs are
/// probability rows summing to 1; fused accumulators are pre-argmax sums
/// and may exceed 1.
struct SoftLabelField {
  GridSpec grid;
  int label_count = 0;
  std::vector<double> probs;

  SoftLabelField() = default;
  SoftLabelField(const GridSpec& g, int count)
      : grid(g), label_count(count),
        probs(g.num_points() * static_cast<std::size_t>(count), 0.0) {}

  double& at(std::size_t point, int l) { return probs[point * label_count + l]; }
  double at(std::size_t point, int l) const {
    return probs[point * label_count + l];
  }
};

SoftLabelField one_hot(const LabelMap& labels);

/// Channel-wise multilinear interpolation of soft labels at the map's
/// coordinates.
SoftLabelField warp_soft(const SoftLabelField& soft, const DeformationMap& map);

/// Per-point argmax; ties break toward the smaller label id.
LabelMap argmax_labels(const SoftLabelField& soft);

/// One-hot encode, warp each channel multilinearly, argmax.
LabelMap warp_labels(const LabelMap& labels, const DeformationMap& map);

/// Pointwise sum of the inputs followed by argmax.
LabelMap label_fusion(const std::vector<SoftLabelField>& softs);

struct DiceResult {
  /// Indexed by label id; per_label[0] is background, reported but
  /// excluded from the mean. Empty-empty pairs score 1.
  std::vector<double> per_label;
  double mean_foreground = 0.0;
};

DiceResult dice(const LabelMap& a, const LabelMap& b);

}  // namespace geoflow

#endif
