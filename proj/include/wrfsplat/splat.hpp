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

#ifndef WRFSPLAT_SPLAT_HPP
#define WRFSPLAT_SPLAT_HPP

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "wrfsplat/common.hpp"
#include "wrfsplat/spectrum.hpp"

namespace wrfsplat::splat
{

// Angular component order is (elevation, azimuth) everywhere in this module:
// center_raw pairs, materialized centers, displacement vectors, residual
// center offsets, and the Cholesky factor (l1 scales elevation, l3 azimuth).

// Diagonal Cholesky entries are clamped to this floor during materialization;
// the gradient is zero for entries below it.
inline constexpr float chol_floor = 1e-4f;

// A set of 2D Gaussian primitives over the angular domain, struct-of-arrays.
// Each primitive carries an unconstrained center (squashed onto the
// hemisphere on materialization), a lower-triangular covariance factor
// L = [[l1, 0], [l2, l3]] with Sigma = L*L^T, an attenuation logit a with
// delta = sigmoid(a), and a complex response (re, im).
template <class T>
struct GaussianSetT
{
    AngularGrid grid;             // grid the set renders onto
    int n = 0;                    // primitive count
    std::vector<T> center_raw;    // n x 2, pre-tanh (elevation, azimuth)
    std::vector<T> cholesky;      // n x 3, (l1, l2, l3)
    std::vector<T> atten_logit;   // n x 1
    std::vector<T> response;      // n x 2, (re, im)

    void resize(int count);       // zero-filled arrays for `count` primitives
};

using GaussianSet = GaussianSetT<float>;

// Per-primitive deformation offsets predicted by the deform net (or zero).
// Offsets apply to the *materialized* parameters: center angles, complex
// response, and attenuation delta (clamped back to [0, 1]).
template <class T>
struct ResidualsT
{
    int n = 0;
    std::vector<T> d_center;   // n x 2, (d_elevation, d_azimuth) in radians
    std::vector<T> d_response; // n x 2
    std::vector<T> d_atten;    // n x 1, offset on delta (not on the logit)

    void resize(int count);
};

using Residuals = ResidualsT<float>;

// Gradients of a scalar loss w.r.t. every Gaussian field and every residual
// field; entries stay exactly zero for primitives that influenced no cell.
template <class T>
struct RenderGradsT
{
    int n = 0;
    std::vector<T> center_raw;  // n x 2
    std::vector<T> cholesky;    // n x 3
    std::vector<T> atten_logit; // n x 1
    std::vector<T> response;    // n x 2
    std::vector<T> d_center;    // n x 2
    std::vector<T> d_response;  // n x 2
    std::vector<T> d_atten;     // n x 1

    void resize(int count);
};

using RenderGrads = RenderGradsT<float>;

// Hemisphere-valued center from the unconstrained parameters:
//   elevation = (pi/4) * (tanh(raw_elevation) + 1)   in (0, pi/2)
//   azimuth   =  pi    * (tanh(raw_azimuth)  + 1)    in (0, 2pi)
template <class T>
struct CenterT
{
    T elevation;
    T azimuth;
};
template <class T>
CenterT<T> materialize_center(T raw_elevation, T raw_azimuth);

// Rasterization controls. cutoff_radius is in Mahalanobis units (contributions
// with distance above it are dropped); <= 0 disables the cutoff entirely.
template <class T>
struct RasterParamsT
{
    T cutoff_radius = T(3);
    int tile = 16; // square tile edge in cells for the tiled forward/backward

    bool operator==(const RasterParamsT &) const = default;
};

using RasterParams = RasterParamsT<float>;

// Kernel weight of primitive `idx` at one direction (reference scalar path,
// shared by tests and the dense oracle): K = delta' * exp(-Q/2) where Q is the
// Mahalanobis distance of the wrapped displacement under Sigma, evaluated via
// the triangular solve with L. No cutoff is applied here.
template <class T>
T kernel_weight(const GaussianSetT<T> &set, int idx, T azimuth, T elevation,
                const ResidualsT<T> *residuals = nullptr);

// Reusable scratch for the tiled rasterizer (per-primitive materialized
// state, tile bins, per-tile gradient slots). Contents are internal.
template <class T>
struct RasterWorkspaceT
{
    std::vector<T> state;           // per-primitive materialized render state
    std::vector<int> row_range;     // per-primitive clipped row interval
    std::vector<int> col_range;     // per-primitive wrapped column interval
    std::vector<int> tile_count;    // per-tile primitive counts
    std::vector<int> tile_offset;   // CSR offsets into tile_prims
    std::vector<int> tile_prims;    // per-tile primitive indices (CSR data)
    std::vector<T> grad_slots;      // per (tile, primitive) gradient partials
    std::vector<T> el_center;       // cached grid row/column direction centers
    std::vector<T> az_center;
    std::vector<T> plane;           // de-interleaved re/im accumulation planes
};

using RasterWorkspace = RasterWorkspaceT<float>;

// Unordered weighted sum of all primitives over the grid:
//   A(cell) = sum_n (response_n + d_response_n) * K_n(cell).
// Tile-parallel, bit-deterministic for any thread count (tiles own disjoint
// cell ranges; per-primitive work is accumulated in fixed order).
template <class T>
SpectrumT<T> rasterize(const GaussianSetT<T> &set, const ResidualsT<T> *residuals,
                       const RasterParamsT<T> &params);
template <class T>
void rasterize(const GaussianSetT<T> &set, const ResidualsT<T> *residuals,
               const RasterParamsT<T> &params, SpectrumT<T> &out,
               RasterWorkspaceT<T> &ws);

// Reverse-mode gradients for a scalar loss with the given upstream dL/dA.
// Per-tile partials are merged in fixed tile order, so results are
// bit-identical for any thread count.
template <class T>
RenderGradsT<T> rasterize_backward(const GaussianSetT<T> &set, const ResidualsT<T> *residuals,
                                   const RasterParamsT<T> &params, const SpectrumT<T> &upstream);
template <class T>
void rasterize_backward(const GaussianSetT<T> &set, const ResidualsT<T> *residuals,
                        const RasterParamsT<T> &params, const SpectrumT<T> &upstream,
                        RenderGradsT<T> &grads, RasterWorkspaceT<T> &ws);

// Random initialization: centers_raw ~ U[-2, 2], Cholesky diagonal set to a
// two-cell standard deviation per axis (l2 = 0), attenuation logit 0
// (delta = 0.5), response ~ N(0, 0.01). Draw order: all center pairs
// (elevation, azimuth per primitive), then all response pairs. Throws on
// count < 1 or an empty grid.
GaussianSet init_random(const AngularGrid &grid, int count, Rng &rng);

// Binary section format "WRF2": magic, u32 version (1), u32 primitive count,
// u32 reserved, then float32 arrays in field order center_raw, cholesky,
// atten_logit, response. The grid is not part of the section (the enclosing
// checkpoint records it).
void write_gaussian_section(std::ostream &os, const GaussianSet &set);
void read_gaussian_section(std::istream &is, GaussianSet &set);

} // namespace wrfsplat::splat

#endif // WRFSPLAT_SPLAT_HPP
