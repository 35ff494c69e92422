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
#include "geoflow/labels.hpp"

namespace geoflow {

void LabelMap::validate() const {
  if (label_count < 1)
    throw Error("bad_labels", "label_count must be >= 1");
  if (labels.size() != grid.num_points())
    throw Error("bad_labels", "label buffer does not match grid");
  for (std::uint16_t l : labels)
    if (l >= label_count)
      throw Error("bad_labels", "label id out of range");
}

SoftLabelField one_hot(const LabelMap& labels) {
  labels.validate();
  SoftLabelField out(labels.grid, labels.label_count);
  const std::size_t n = labels.grid.num_points();
  for (std::size_t p = 0; p < n; ++p)
    out.probs[p * labels.label_count + labels.labels[p]] = 1.0;
  return out;
}

SoftLabelField warp_soft(const SoftLabelField& soft, const DeformationMap& map) {
  if (soft.grid.dim != map.grid.dim)
    throw Error("dim_mismatch", "soft labels and map differ in dimensionality");
  SoftLabelField out(map.grid, soft.label_count);
  const int d = map.grid.dim;
  const std::size_t n = map.grid.num_points();
  for (std::size_t p = 0; p < n; ++p)
    detail::sample(soft.grid, soft.probs.data(), soft.label_count,
                   &map.coords[p * d], &out.probs[p * soft.label_count]);
  return out;
}

LabelMap argmax_labels(const SoftLabelField& soft) {
  if (soft.label_count < 1)
    throw Error("bad_labels", "argmax needs at least one channel");
  LabelMap out(soft.grid, soft.label_count);
  const std::size_t n = soft.grid.num_points();
  for (std::size_t p = 0; p < n; ++p) {
    int best = 0;
    double best_val = soft.probs[p * soft.label_count];
    for (int l = 1; l < soft.label_count; ++l) {
      const double v = soft.probs[p * soft.label_count + l];
      if (v > best_val) {
        best_val = v;
        best = l;
      }
    }
    out.labels[p] = static_cast<std::uint16_t>(best);
  }
  return out;
}

LabelMap warp_labels(const LabelMap& labels, const DeformationMap& map) {
  return argmax_labels(warp_soft(one_hot(labels), map));
}

LabelMap label_fusion(const std::vector<SoftLabelField>& softs) {
  if (softs.empty())
    throw Error("bad_input", "label fusion needs at least one input");
  const SoftLabelField& first = softs.front();
  SoftLabelField acc(first.grid, first.label_count);
  for (const auto& s : softs) {
    if (!(s.grid == first.grid) || s.label_count != first.label_count)
      throw Error("grid_mismatch", "label fusion inputs must match");
    for (std::size_t i = 0; i < acc.probs.size(); ++i)
      acc.probs[i] += s.probs[i];
  }
  return argmax_labels(acc);
}

DiceResult dice(const LabelMap& a, const LabelMap& b) {
  if (!(a.grid == b.grid) || a.label_count != b.label_count)
    throw Error("grid_mismatch", "dice needs matching label maps");
  a.validate();
  b.validate();
  const int L = a.label_count;
  std::vector<std::size_t> na(L, 0), nb(L, 0), nab(L, 0);
  const std::size_t n = a.grid.num_points();
  for (std::size_t p = 0; p < n; ++p) {
    ++na[a.labels[p]];
    ++nb[b.labels[p]];
    if (a.labels[p] == b.labels[p]) ++nab[a.labels[p]];
  }
  DiceResult res;
  res.per_label.resize(L);
  double sum = 0.0;
  for (int l = 0; l < L; ++l) {
    const std::size_t denom = na[l] + nb[l];
    res.per_label[l] =
        denom == 0 ? 1.0 : 2.0 * static_cast<double>(nab[l]) / denom;
    if (l >= 1) sum += res.per_label[l];
  }
  res.mean_foreground = L > 1 ? sum / (L - 1) : 1.0;
  return res;
}

}  // namespace geoflow
