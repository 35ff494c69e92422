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
#ifndef GEOFLOW_RNG_HPP
#define GEOFLOW_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace geoflow {

/// Deterministic random stream. Wraps the (fully specified) mt19937_64
/// engine and derives every variate from raw engine output, so sequences
/// are identical across platforms and standard libraries. Streams for
/// parallel work items come from stream(seed, index): identical results
/// whether items run serially or concurrently.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Seed for work item `index` of a run seeded with `seed` (splitmix64
  /// mix). Pipelines record the derived value so one item can be
  /// regenerated without replaying the run.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    return Rng(derive(seed, index));
  }

  std::uint64_t raw() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  int uniform_int(int lo, int hi_inclusive) {
    const std::uint64_t span =
        static_cast<std::uint64_t>(hi_inclusive - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }

  double exponential() { return -std::log1p(-uniform01()); }

  /// Standard normal via Box-Muller (no state between calls).
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

private:
  std::mt19937_64 engine_;
};

}  // namespace geoflow

#endif
