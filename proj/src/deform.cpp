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

#include "wrfsplat/deform.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <Eigen/Core>

namespace wrfsplat::deform
{

namespace
{
    template <class T>
    using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    template <class T>
    using MapMat = Eigen::Map<RowMat<T>>;
    template <class T>
    using CMapMat = Eigen::Map<const RowMat<T>>;
    template <class T>
    using CMapVec = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

    // Trunk layers (0-based) that see [hidden, input] instead of hidden alone
    constexpr bool is_skip_layer(int i) { return i == 2 || i == 4 || i == 6; }
    constexpr int trunk_layers = 8;
} // namespace

template <class T>
void DeformNetT<T>::Layer::resize(int r, int c)
{
    rows = r;
    cols = c;
    w.assign(std::size_t(r) * c, T(0));
    b.assign(std::size_t(r), T(0));
}

template <class T>
void encode(const T *values, int count, int bands, T *out)
{
    for (int i = 0; i < count; i++)
        out[i] = values[i];
    T *block = out + count;
    for (int k = 0; k < bands; k++)
    {
        const T f = T(std::ldexp(pi, k)); // 2^k * pi
        for (int i = 0; i < count; i++)
            block[i] = std::sin(f * values[i]);
        block += count;
        for (int i = 0; i < count; i++)
            block[i] = std::cos(f * values[i]);
        block += count;
    }
}

template <class T>
void DeformNetT<T>::init(Rng &rng)
{
    if (width < 1)
        throw std::invalid_argument("deform-net width must be >= 1");
    const int in = enc.input_dim();
    trunk.assign(trunk_layers, Layer{});
    for (int i = 0; i < trunk_layers; i++)
    {
        const int cols = i == 0 ? in : (is_skip_layer(i) ? width + in : width);
        trunk[std::size_t(i)].resize(width, cols);
    }
    head_center.resize(2, width);
    head_response.resize(2, width);
    head_atten.resize(1, width);

    // Fan-in-scaled uniform init for the trunk, row-major draw order; heads
    // stay all-zero so the fresh net is the identity deformation.  The bound
    // must keep trunk activations small: Adam's first steps on the zero
    // heads are +/-lr per weight, so the initial residual magnitude is
    // ~lr * sum|h|, and a gain that preserves activation scale through all
    // eight layers makes that first step large enough to throw every
    // primitive off the grid (an unrecoverable state, since off-grid
    // primitives receive no gradients).
    for (auto &layer : trunk)
    {
        const double bound = 1.0 / std::sqrt(double(layer.cols));
        for (auto &v : layer.w)
            v = T(rng.uniform(-bound, bound));
    }
}

template <class T>
std::size_t DeformNetT<T>::parameter_count() const
{
    std::size_t total = 0;
    auto add = [&](const Layer &l) { total += l.w.size() + l.b.size(); };
    for (const auto &l : trunk)
        add(l);
    add(head_center);
    add(head_response);
    add(head_atten);
    return total;
}

namespace
{
    template <class T>
    void check_net(const DeformNetT<T> &net)
    {
        if (int(net.trunk.size()) != trunk_layers)
            throw std::invalid_argument("deform net is not initialized");
    }

    // y = x * W^T + b for one layer
    template <class T>
    void linear_forward(const typename DeformNetT<T>::Layer &layer, const T *in, int n,
                        T *out)
    {
        CMapMat<T> x(in, n, layer.cols);
        MapMat<T> y(out, n, layer.rows);
        CMapMat<T> w(layer.w.data(), layer.rows, layer.cols);
        CMapVec<T> b(layer.b.data(), layer.rows);
        y.noalias() = x * w.transpose();
        y.rowwise() += b.transpose();
    }
} // namespace

template <class T>
void predict_residuals(const DeformNetT<T> &net, const splat::GaussianSetT<T> &set,
                       const std::array<T, 3> &position, DeformWorkspaceT<T> &ws,
                       splat::ResidualsT<T> &out)
{
    check_net(net);
    const int n = set.n;
    if (n < 1)
        throw std::invalid_argument("empty gaussian set");
    const int in_dim = net.enc.input_dim();
    const int cd = net.enc.center_dim(), pd = net.enc.position_dim();
    const int width = net.width;

    ws.n = n;
    ws.input.resize(std::size_t(n) * in_dim);
    ws.h.resize(trunk_layers);
    ws.zcat.resize(trunk_layers);

    // One encoded row per primitive: [encode(center), encode(position)].
    // The position block is identical across rows, so encode it once.
    std::vector<T> pos_enc(static_cast<std::size_t>(pd), T(0));
    encode(position.data(), 3, net.enc.bands_position, pos_enc.data());
#pragma omp parallel for schedule(static)
    for (int p = 0; p < n; p++)
    {
        T *row = ws.input.data() + std::size_t(p) * in_dim;
        const auto c = splat::materialize_center(set.center_raw[2 * std::size_t(p)],
                                                 set.center_raw[2 * std::size_t(p) + 1]);
        const T center[2] = {c.elevation, c.azimuth};
        encode(center, 2, net.enc.bands_center, row);
        std::copy(pos_enc.begin(), pos_enc.end(), row + cd);
    }

    const T *layer_in = ws.input.data();
    for (int i = 0; i < trunk_layers; i++)
    {
        const auto &layer = net.trunk[std::size_t(i)];
        if (is_skip_layer(i))
        {
            auto &cat = ws.zcat[std::size_t(i)];
            cat.resize(std::size_t(n) * (width + in_dim));
#pragma omp parallel for schedule(static)
            for (int p = 0; p < n; p++)
            {
                T *row = cat.data() + std::size_t(p) * (width + in_dim);
                std::copy(layer_in + std::size_t(p) * width,
                          layer_in + std::size_t(p) * width + width, row);
                std::copy(ws.input.begin() + std::ptrdiff_t(p) * in_dim,
                          ws.input.begin() + std::ptrdiff_t(p) * in_dim + in_dim, row + width);
            }
            ws.h[std::size_t(i)].resize(std::size_t(n) * width);
            linear_forward(layer, cat.data(), n, ws.h[std::size_t(i)].data());
        }
        else
        {
            ws.h[std::size_t(i)].resize(std::size_t(n) * width);
            linear_forward(layer, layer_in, n, ws.h[std::size_t(i)].data());
        }
        for (T &v : ws.h[std::size_t(i)])
            v = v > T(0) ? v : T(0); // ReLU
        layer_in = ws.h[std::size_t(i)].data();
    }

    out.resize(n);
    linear_forward(net.head_center, layer_in, n, out.d_center.data());
    linear_forward(net.head_response, layer_in, n, out.d_response.data());
    linear_forward(net.head_atten, layer_in, n, out.d_atten.data());
}

template <class T>
void DeformGradsT<T>::resize_like(const DeformNetT<T> &net)
{
    trunk.assign(net.trunk.size(), typename DeformNetT<T>::Layer{});
    for (std::size_t i = 0; i < net.trunk.size(); i++)
        trunk[i].resize(net.trunk[i].rows, net.trunk[i].cols);
    head_center.resize(net.head_center.rows, net.head_center.cols);
    head_response.resize(net.head_response.rows, net.head_response.cols);
    head_atten.resize(net.head_atten.rows, net.head_atten.cols);
}

template <class T>
void DeformGradsT<T>::zero()
{
    auto z = [](typename DeformNetT<T>::Layer &l) {
        std::fill(l.w.begin(), l.w.end(), T(0));
        std::fill(l.b.begin(), l.b.end(), T(0));
    };
    for (auto &l : trunk)
        z(l);
    z(head_center);
    z(head_response);
    z(head_atten);
}

namespace
{
    // dW = dz^T * in, db = column sums of dz, din = dz * W
    template <class T>
    void linear_backward(const typename DeformNetT<T>::Layer &layer, const T *in, const T *dz,
                         int n, typename DeformNetT<T>::Layer &grad, T *din)
    {
        CMapMat<T> x(in, n, layer.cols);
        CMapMat<T> dy(dz, n, layer.rows);
        CMapMat<T> w(layer.w.data(), layer.rows, layer.cols);
        MapMat<T> dw(grad.w.data(), layer.rows, layer.cols);
        dw.noalias() = dy.transpose() * x;
        // Column sums in fixed row order. Eigen's partial redux groups lanes
        // by the buffer's alignment, so its rounding would depend on where the
        // heap placed dz; that breaks bitwise reproducibility across runs.
        std::fill(grad.b.begin(), grad.b.end(), T(0));
        for (int i = 0; i < n; i++)
        {
            const T *row = dz + std::size_t(i) * layer.rows;
            for (int j = 0; j < layer.rows; j++)
                grad.b[j] += row[j];
        }
        if (din)
        {
            MapMat<T> dx(din, n, layer.cols);
            dx.noalias() = dy * w;
        }
    }
} // namespace

template <class T>
void deform_backward(const DeformNetT<T> &net, DeformWorkspaceT<T> &ws,
                     const splat::ResidualsT<T> &upstream, DeformGradsT<T> &grads)
{
    check_net(net);
    const int n = ws.n;
    if (n < 1 || upstream.n != n)
        throw std::invalid_argument("workspace/upstream batch mismatch");
    const int width = net.width;
    const int in_dim = net.enc.input_dim();
    if (int(grads.trunk.size()) != trunk_layers)
        grads.resize_like(net);

    auto &dh = ws.dh;
    auto &dcat = ws.dcat;
    dh.resize(std::size_t(n) * width);
    dcat.resize(std::size_t(n) * (width + in_dim));

    // Heads: accumulate dh8 from the three output branches
    {
        const T *h8 = ws.h[trunk_layers - 1].data();
        MapMat<T> dx(dh.data(), n, width);
        linear_backward(net.head_center, h8, upstream.d_center.data(), n, grads.head_center,
                        dcat.data());
        dx = MapMat<T>(dcat.data(), n, width);
        linear_backward(net.head_response, h8, upstream.d_response.data(), n,
                        grads.head_response, dcat.data());
        dx += MapMat<T>(dcat.data(), n, width);
        linear_backward(net.head_atten, h8, upstream.d_atten.data(), n, grads.head_atten,
                        dcat.data());
        dx += MapMat<T>(dcat.data(), n, width);
    }

    // Trunk, last layer to first; gradients w.r.t. the encoded input rows are
    // computed as a byproduct and dropped (the centers receive no gradient
    // through the encoding, only through the rasterizer's direct path)
    for (int i = trunk_layers - 1; i >= 0; i--)
    {
        const auto &layer = net.trunk[std::size_t(i)];
        const T *h = ws.h[std::size_t(i)].data();
        for (std::size_t k = 0; k < std::size_t(n) * width; k++)
            dh[k] = h[k] > T(0) ? dh[k] : T(0); // through the ReLU

        const T *in = nullptr;
        if (i == 0)
            in = ws.input.data();
        else if (is_skip_layer(i))
            in = ws.zcat[std::size_t(i)].data();
        else
            in = ws.h[std::size_t(i) - 1].data();

        const bool need_din = i > 0;
        linear_backward(layer, in, dh.data(), n, grads.trunk[std::size_t(i)],
                        need_din ? dcat.data() : nullptr);
        if (need_din)
        {
            // For a skip layer only the hidden block propagates further back
            MapMat<T> dprev(dh.data(), n, width);
            CMapMat<T> din(dcat.data(), n, layer.cols);
            dprev = din.leftCols(width);
        }
    }
}

void write_deform_section(std::ostream &os, const DeformNet &net)
{
    io::put_magic(os, "WRFD");
    io::put_u32(os, 1);
    std::vector<const DeformNet::Layer *> layers;
    for (const auto &l : net.trunk)
        layers.push_back(&l);
    layers.push_back(&net.head_center);
    layers.push_back(&net.head_response);
    layers.push_back(&net.head_atten);
    io::put_u32(os, std::uint32_t(layers.size()));
    io::put_u32(os, std::uint32_t(net.width));
    io::put_u32(os, std::uint32_t(net.enc.bands_center));
    io::put_u32(os, std::uint32_t(net.enc.bands_position));
    for (const auto *l : layers)
    {
        io::put_u32(os, std::uint32_t(l->rows));
        io::put_u32(os, std::uint32_t(l->cols));
    }
    for (const auto *l : layers)
    {
        io::put_f32_array(os, l->w.data(), l->w.size());
        io::put_f32_array(os, l->b.data(), l->b.size());
    }
}

void read_deform_section(std::istream &is, DeformNet &net)
{
    io::expect_magic(is, "WRFD", "deform section");
    if (io::get_u32(is) != 1)
        throw std::runtime_error("unsupported deform section version");
    const std::uint32_t count = io::get_u32(is);
    if (count != trunk_layers + 3)
        throw std::runtime_error("unexpected deform layer count");
    net.width = int(io::get_u32(is));
    net.enc.bands_center = int(io::get_u32(is));
    net.enc.bands_position = int(io::get_u32(is));

    std::vector<DeformNet::Layer *> layers;
    net.trunk.assign(trunk_layers, DeformNet::Layer{});
    for (auto &l : net.trunk)
        layers.push_back(&l);
    layers.push_back(&net.head_center);
    layers.push_back(&net.head_response);
    layers.push_back(&net.head_atten);
    for (auto *l : layers)
    {
        const int rows = int(io::get_u32(is));
        const int cols = int(io::get_u32(is));
        l->resize(rows, cols);
    }
    for (auto *l : layers)
    {
        io::get_f32_array(is, l->w.data(), l->w.size());
        io::get_f32_array(is, l->b.data(), l->b.size());
    }
}

// Explicit instantiations (float runtime, double gradient oracles)
template struct DeformNetT<float>;
template struct DeformNetT<double>;
template struct DeformGradsT<float>;
template struct DeformGradsT<double>;
template void encode<float>(const float *, int, int, float *);
template void encode<double>(const double *, int, int, double *);
template void predict_residuals<float>(const DeformNetT<float> &, const splat::GaussianSetT<float> &,
                                       const std::array<float, 3> &, DeformWorkspaceT<float> &,
                                       splat::ResidualsT<float> &);
template void predict_residuals<double>(const DeformNetT<double> &,
                                        const splat::GaussianSetT<double> &,
                                        const std::array<double, 3> &, DeformWorkspaceT<double> &,
                                        splat::ResidualsT<double> &);
template void deform_backward<float>(const DeformNetT<float> &, DeformWorkspaceT<float> &,
                                     const splat::ResidualsT<float> &, DeformGradsT<float> &);
template void deform_backward<double>(const DeformNetT<double> &, DeformWorkspaceT<double> &,
                                      const splat::ResidualsT<double> &, DeformGradsT<double> &);

} // namespace wrfsplat::deform
