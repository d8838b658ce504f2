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

#ifndef WRFSPLAT_DEFORM_HPP
#define WRFSPLAT_DEFORM_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "wrfsplat/common.hpp"
#include "wrfsplat/splat.hpp"

namespace wrfsplat::deform
{

// Sinusoidal positional encoding sizes. A d-dimensional input encodes to
// d * (2 * bands + 1) values: the raw block first, then per frequency band k
// a sin(2^k * pi * v) block and a cos(2^k * pi * v) block.
struct EncodingSpec
{
    int bands_center = 10;  // frequency bands for the 2D Gaussian center
    int bands_position = 6; // frequency bands for the normalized 3D position

    int center_dim() const { return 2 * (2 * bands_center + 1); }
    int position_dim() const { return 3 * (2 * bands_position + 1); }
    int input_dim() const { return center_dim() + position_dim(); }

    bool operator==(const EncodingSpec &) const = default;
};

// Encode `count` scalars with `bands` frequency bands into
// out[count * (2*bands + 1)] using the block layout described above.
template <class T>
void encode(const T *values, int count, int bands, T *out);

// Deformation MLP: 8 fully connected trunk layers of `width` units with ReLU
// activations; the full input encoding is re-concatenated onto the hidden
// state at layers 3, 5 and 7. Three linear heads map the final hidden state
// to the center offset (2), response offset (2) and attenuation offset (1).
// Weights are row-major [rows x cols]; layer order everywhere (IO, gradient
// containers) is trunk 1..8, then the center / response / attenuation heads.
template <class T>
struct DeformNetT
{
    struct Layer
    {
        int rows = 0, cols = 0;
        std::vector<T> w; // rows x cols, row-major
        std::vector<T> b; // rows

        void resize(int r, int c);
    };

    EncodingSpec enc;
    int width = 156;
    std::vector<Layer> trunk; // 8 layers
    Layer head_center;        // 2 x width
    Layer head_response;      // 2 x width
    Layer head_atten;         // 1 x width

    // Allocate layers for (enc, width) and initialize: trunk weights
    // Kaiming-uniform over the fan-in (U[-sqrt(6/cols), sqrt(6/cols)], zero
    // bias, drawn row-major layer by layer), heads all-zero so a fresh net
    // predicts exactly zero residuals. Throws on width < 1.
    void init(Rng &rng);

    std::size_t parameter_count() const;
};

using DeformNet = DeformNetT<float>;

// Cached forward state (input matrix and per-layer activations) reused by the
// backward pass and across training iterations to avoid reallocation.
template <class T>
struct DeformWorkspaceT
{
    int n = 0;                      // batch rows currently held
    std::vector<T> input;           // n x input_dim
    std::vector<std::vector<T>> h;  // post-ReLU activation per trunk layer, n x width
    std::vector<std::vector<T>> zcat; // skip-layer concatenated inputs, n x (width+input_dim)
    std::vector<T> dh;              // backward scratch
    std::vector<T> dcat;            // backward scratch
};

using DeformWorkspace = DeformWorkspaceT<float>;

// Predict per-primitive residuals for one device position (already normalized
// into [0,1]^3). The input row for primitive i is
// [encode(materialized center_i), encode(position)]. Batched over primitives
// with single-threaded GEMMs, so results do not depend on the thread count.
template <class T>
void predict_residuals(const DeformNetT<T> &net, const splat::GaussianSetT<T> &set,
                       const std::array<T, 3> &position, DeformWorkspaceT<T> &ws,
                       splat::ResidualsT<T> &out);

// Parameter gradients, same shapes as the net
template <class T>
struct DeformGradsT
{
    std::vector<typename DeformNetT<T>::Layer> trunk;
    typename DeformNetT<T>::Layer head_center, head_response, head_atten;

    void resize_like(const DeformNetT<T> &net);
    void zero();
};

using DeformGrads = DeformGradsT<float>;

// Compute dLoss/dWeights from the residual gradients of the last forward
// pass recorded in `ws`, overwriting `grads`. Gradients w.r.t. the network
// *input* are discarded (they would otherwise flow into the Gaussian centers;
// the centers are trained only by the direct path, never through the encoding).
template <class T>
void deform_backward(const DeformNetT<T> &net, DeformWorkspaceT<T> &ws,
                     const splat::ResidualsT<T> &upstream, DeformGradsT<T> &grads);

// Binary section format "WRFD": magic, u32 version (1), u32 layer count (11),
// u32 width, u32 bands_center, u32 bands_position, then per layer u32 rows /
// u32 cols, then per layer the float32 weight matrix (row-major) followed by
// the float32 bias vector, in layer order.
void write_deform_section(std::ostream &os, const DeformNet &net);
void read_deform_section(std::istream &is, DeformNet &net);

} // namespace wrfsplat::deform

#endif // WRFSPLAT_DEFORM_HPP
