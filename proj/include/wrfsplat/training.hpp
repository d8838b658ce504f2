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

#ifndef WRFSPLAT_TRAINING_HPP
#define WRFSPLAT_TRAINING_HPP

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "wrfsplat/common.hpp"
#include "wrfsplat/deform.hpp"
#include "wrfsplat/spectrum.hpp"
#include "wrfsplat/splat.hpp"
#include "wrfsplat/wavesim.hpp"

namespace wrfsplat::train
{

// ------------------------------------------------------------------- optimizer

struct AdamParams
{
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam moments for one parameter array. step() applies the canonical
// bias-corrected update p -= lr * m_hat / (sqrt(v_hat) + eps) in place.
template <class T>
struct AdamStateT
{
    std::vector<T> m, v;
    std::int64_t t = 0;

    void reset(std::size_t n);
    void step(T *params, const T *grads, std::size_t n, const AdamParams &hp);
};

using AdamState = AdamStateT<float>;

// ------------------------------------------------------------------------ loss

// Hybrid reconstruction loss L = lambda1 * L1 + (1 - lambda1) * (1 - SSIM),
// with l1_term / ssim_term the two additive contributions.
struct LossTerms
{
    double loss = 0.0;
    double l1_term = 0.0;  // lambda1 * L1
    double ssim_term = 0.0; // (1 - lambda1) * (1 - SSIM)
};

// Evaluate the loss and, if `grad` is non-null, dLoss/dprediction into a
// spectrum of the same shape. Throws std::runtime_error on a non-finite loss.
template <class T>
LossTerms hybrid_loss(const SpectrumT<T> &prediction, const SpectrumT<T> &target,
                      double lambda1, SpectrumT<T> *grad);

// ------------------------------------------------------------------- schedule

// Linearly annealed coordinate noise: before `threshold` iterations the
// normalized position is perturbed per axis by
//   scale * N(0,1) * (2 / cbrt(train_count)) * (1 - iter / threshold),
// afterwards the position passes through untouched (and no normals are
// drawn). Three normals are consumed per perturbed call, axis order x, y, z.
struct NoiseSchedule
{
    double scale = 1.0;        // gamma, 0 disables the perturbation
    std::int64_t threshold = 10000; // tau, iterations of nonzero noise
    int train_count = 1;       // spectra in the training split (amplitude normalizer)
};

std::array<float, 3> smoothed_position(const std::array<float, 3> &normalized,
                                       std::int64_t iteration, const NoiseSchedule &sched,
                                       Rng &rng);

// --------------------------------------------------------------------- config

struct TrainConfig
{
    int primitives = 10000;          // Gaussian count
    deform::EncodingSpec enc;        // positional encoding bands (10 / 6)
    int width = 156;                 // deform-net hidden width
    splat::RasterParams raster;      // cutoff radius 3, tile 16
    double lr_gaussian = 1e-2;       // Adam lr for Gaussian fields
    double lr_mlp = 8e-3;            // Adam lr for the deform net
    double lambda1 = 0.7;            // L1 weight in the hybrid loss
    std::int64_t coarse_iters = 10000;
    std::int64_t fine_iters = 100000;
    double anneal_scale = 1.0;       // coordinate-noise gamma (0 = off)
    std::int64_t anneal_threshold = 10000; // coordinate-noise tau
    std::uint64_t seed = 1234;

    bool operator==(const TrainConfig &) const = default;
};

// ----------------------------------------------------------------- checkpoint

// Everything needed to render and to resume the schedule. Optimizer moments
// are intentionally not persisted; resuming restarts them fresh.
struct Checkpoint
{
    splat::GaussianSet set;   // includes the angular grid
    deform::DeformNet net;
    TrainConfig config;
    std::int64_t iteration = 0;       // completed iterations (coarse + fine)
    std::uint64_t manifest_hash = 0;  // FNV-1a of the training dataset manifest
    std::array<double, 3> bbox_min{}; // position-normalization box from the dataset
    std::array<double, 3> bbox_max{};
};

// Single-file container "WRFC": header, section table, then the Gaussian
// section, deform section and a JSON trailer (config echo, iteration,
// manifest hash, grid, bbox).
void save_checkpoint(const std::string &path, const Checkpoint &ck);
Checkpoint load_checkpoint(const std::string &path);

// Same container with extra keys merged into / read back from the JSON
// trailer (the task heads persist their calibration this way)
void save_checkpoint_with_extra(const std::string &path, const Checkpoint &ck,
                                const std::string &extra_json);
Checkpoint load_checkpoint_with_extra(const std::string &path, std::string *extra_json);

// Raised when a checkpoint's manifest fingerprint does not match the dataset
// it is being used with (the CLI maps this to its own exit code)
struct hash_mismatch : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

// Map a position in meters into the checkpoint's normalization cube
std::array<float, 3> normalize_position(const Checkpoint &ck, const std::array<float, 3> &pos);

// Render the spectrum at a device position in meters: normalize, run the
// deform net, rasterize. Zero-residual (canonical-frame) rendering is
// splat::rasterize on ck.set directly.
Spectrum render_at(const Checkpoint &ck, const std::array<float, 3> &position);

// ------------------------------------------------------------------- training

// Optimize against the dataset's train split: a coarse stage (`coarse_iters`
// iterations, Gaussian fields only, zero residuals), then a fine stage
// (`fine_iters` iterations) that trains the deform net at lr_mlp jointly with
// the non-center Gaussian fields at lr_gaussian while center_raw stays
// frozen. Batch size 1, uniform with-replacement sampling. When `log_path` is
// non-empty a CSV "iteration,stage,loss,l1_term,ssim_term,wall_ms" is written
// with one row per iteration. `resume` continues that checkpoint's iteration
// counter through the remaining schedule (its config must match). Training is
// deterministic for a fixed seed, independent of thread count.
Checkpoint train(const sim::Dataset &ds, const TrainConfig &cfg,
                 const std::string &log_path = {}, const Checkpoint *resume = nullptr);

enum class Split
{
    train,
    test,
    all
};
Split split_from_string(const std::string &s);

// Render every sample of the split at its recorded position and score it
// against the stored spectrum. Row order follows the split's index order.
std::vector<MetricRow> evaluate(const Checkpoint &ck, const sim::Dataset &ds, Split split);

} // namespace wrfsplat::train

#endif // WRFSPLAT_TRAINING_HPP
