// SPDX-License-Identifier: Apache-2.0
//
// wrfsplat - wireless radiance field reconstruction via deformable 2D Gaussian splatting
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef WRFSPLAT_COMMON_HPP
#define WRFSPLAT_COMMON_HPP

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace wrfsplat
{

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian and read/written without byte swapping");

inline constexpr double pi = 3.141592653589793238462643383279502884;

// Deterministic random source. std::mt19937_64 produces an identical bit
// stream on every conforming implementation, but the std distributions do
// not, so uniform/normal variates are derived here by hand. Every consumer
// that needs reproducible draws (init, samplers, noise, position placement)
// goes through this class and documents its draw order.
class Rng
{
  public:
    explicit Rng(std::uint64_t seed) : gen(seed) {}

    // Raw 64 random bits
    std::uint64_t raw() { return gen(); }

    // Uniform double in [0, 1), 53-bit resolution
    double uniform() { return double(gen() >> 11) * 0x1.0p-53; }

    // Uniform double in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), n >= 1 (Lemire-style rejection-free modulo
    // is avoided; plain scaling is fine for the small n used here and stays
    // deterministic)
    std::uint64_t index(std::uint64_t n) { return std::uint64_t(uniform() * double(n)) % n; }

    // Standard normal via Box-Muller on two fresh uniforms (no cached spare,
    // so the draw count per variate is always exactly two)
    double normal();

    // Normal with the given mean / standard deviation
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

  private:
    std::mt19937_64 gen;
};

// FNV-1a 64-bit hash, used to fingerprint dataset manifests inside checkpoints
std::uint64_t fnv1a64(const void *data, std::size_t size);
std::string to_hex(std::uint64_t value);

// Worker-thread count used by parallel regions. Defaults to the WRF_THREADS
// environment variable if set, else the OpenMP default; the CLI --threads
// flag overrides both. Results are identical for any value (fixed-order
// reductions everywhere), only throughput changes.
int thread_count();
void set_thread_count(int n);

// ------------------------------------------------------------------ binary IO
// Little-endian primitive readers/writers shared by the dataset, checkpoint
// and model-file code. All throw std::runtime_error on short reads/writes.
namespace io
{
    void put_bytes(std::ostream &os, const void *p, std::size_t n);
    void put_u32(std::ostream &os, std::uint32_t v);
    void put_u64(std::ostream &os, std::uint64_t v);
    void put_f32(std::ostream &os, float v);
    void put_f32_array(std::ostream &os, const float *p, std::size_t n);

    void get_bytes(std::istream &is, void *p, std::size_t n);
    std::uint32_t get_u32(std::istream &is);
    std::uint64_t get_u64(std::istream &is);
    float get_f32(std::istream &is);
    void get_f32_array(std::istream &is, float *p, std::size_t n);

    // 4-character section/file magics, compared byte-wise
    void put_magic(std::ostream &os, const char magic[5]);
    void expect_magic(std::istream &is, const char magic[5], const char *what);
} // namespace io

// Format a double for CSV/console output: shortest of %.9g, locale-free.
// Used everywhere a floating-point number lands in a text deliverable so
// fixed seeds yield byte-identical files.
std::string fmt_g9(double v);

} // namespace wrfsplat

#endif // WRFSPLAT_COMMON_HPP
