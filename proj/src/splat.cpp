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

#include "wrfsplat/splat.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace wrfsplat::splat
{

template <class T>
void GaussianSetT<T>::resize(int count)
{
    n = count;
    center_raw.assign(std::size_t(count) * 2, T(0));
    cholesky.assign(std::size_t(count) * 3, T(0));
    atten_logit.assign(std::size_t(count), T(0));
    response.assign(std::size_t(count) * 2, T(0));
}

template <class T>
void ResidualsT<T>::resize(int count)
{
    n = count;
    d_center.assign(std::size_t(count) * 2, T(0));
    d_response.assign(std::size_t(count) * 2, T(0));
    d_atten.assign(std::size_t(count), T(0));
}

template <class T>
void RenderGradsT<T>::resize(int count)
{
    n = count;
    center_raw.assign(std::size_t(count) * 2, T(0));
    cholesky.assign(std::size_t(count) * 3, T(0));
    atten_logit.assign(std::size_t(count), T(0));
    response.assign(std::size_t(count) * 2, T(0));
    d_center.assign(std::size_t(count) * 2, T(0));
    d_response.assign(std::size_t(count) * 2, T(0));
    d_atten.assign(std::size_t(count), T(0));
}

template <class T>
CenterT<T> materialize_center(T raw_elevation, T raw_azimuth)
{
    return {T(pi / 4) * (std::tanh(raw_elevation) + T(1)),
            T(pi) * (std::tanh(raw_azimuth) + T(1))};
}

namespace
{
    // Azimuth displacement wrapped into [-pi, pi). Inputs here are bounded
    // (grid centers minus materialized azimuths plus a residual), so one or
    // two subtractions suffice; fmod only backstops runaway residuals.
    template <class T>
    T wrap_pm_pi(T x)
    {
        if (x < T(-8 * pi) || x > T(8 * pi))
            x = std::fmod(x, T(2 * pi));
        while (x >= T(pi))
            x -= T(2 * pi);
        while (x < T(-pi))
            x += T(2 * pi);
        return x;
    }

    // Deformed, clamp-applied parameters of one primitive
    template <class T>
    struct Prim
    {
        T el, az;       // deformed center angles
        T l1, l2, l3;   // Cholesky entries, diagonal clamped to chol_floor
        T delta;        // deformed attenuation in [0, 1]
        T re, im;       // deformed complex response
    };

    template <class T>
    Prim<T> deform_prim(const GaussianSetT<T> &set, const ResidualsT<T> *res, int p)
    {
        Prim<T> out;
        const auto c = materialize_center(set.center_raw[2 * std::size_t(p)],
                                          set.center_raw[2 * std::size_t(p) + 1]);
        out.el = c.elevation;
        out.az = c.azimuth;
        out.l1 = std::max(set.cholesky[3 * std::size_t(p)], T(chol_floor));
        out.l2 = set.cholesky[3 * std::size_t(p) + 1];
        out.l3 = std::max(set.cholesky[3 * std::size_t(p) + 2], T(chol_floor));
        const T logit = set.atten_logit[std::size_t(p)];
        out.delta = T(1) / (T(1) + std::exp(-logit));
        out.re = set.response[2 * std::size_t(p)];
        out.im = set.response[2 * std::size_t(p) + 1];
        if (res)
        {
            out.el += res->d_center[2 * std::size_t(p)];
            out.az += res->d_center[2 * std::size_t(p) + 1];
            out.re += res->d_response[2 * std::size_t(p)];
            out.im += res->d_response[2 * std::size_t(p) + 1];
            out.delta = std::min(std::max(out.delta + res->d_atten[std::size_t(p)], T(0)), T(1));
        }
        return out;
    }

    template <class T>
    void check_sizes(const GaussianSetT<T> &set, const ResidualsT<T> *res)
    {
        if (set.grid.n_elevation < 1 || set.grid.n_azimuth < 1)
            throw std::invalid_argument("gaussian set has an empty grid");
        if (int(set.center_raw.size()) != 2 * set.n || int(set.cholesky.size()) != 3 * set.n ||
            int(set.atten_logit.size()) != set.n || int(set.response.size()) != 2 * set.n)
            throw std::invalid_argument("gaussian set arrays do not match the primitive count");
        if (res && res->n != set.n)
            throw std::invalid_argument("residual count does not match the primitive count");
    }

    // Packed per-primitive render state, built once per rasterization
    enum StateField
    {
        S_EL = 0,   // deformed elevation
        S_AZ,       // deformed azimuth
        S_I00,      // Sigma^-1 entries
        S_I01,
        S_I11,
        S_DELTA,    // deformed attenuation
        S_RE,       // deformed response
        S_IM,
        S_INVL1,    // 1 / l1
        S_INVL3,    // 1 / l3
        S_L2,
        S_STRIDE
    };

    template <class T>
    struct TileLayout
    {
        int tile = 16;
        int th = 0, tw = 0; // tile grid dimensions
        int tiles() const { return th * tw; }
    };

    // Populate ws.state / ws.row_range and the CSR tile bins. Primitives with
    // zero attenuation or an off-grid elevation range are binned nowhere.
    template <class T>
    TileLayout<T> prepare(const GaussianSetT<T> &set, const ResidualsT<T> *res,
                          const RasterParamsT<T> &params, RasterWorkspaceT<T> &ws)
    {
        check_sizes(set, res);
        const AngularGrid &g = set.grid;
        TileLayout<T> lay;
        lay.tile = params.tile < 1 ? 16 : params.tile;
        lay.th = (g.n_elevation + lay.tile - 1) / lay.tile;
        lay.tw = (g.n_azimuth + lay.tile - 1) / lay.tile;

        const bool cut = params.cutoff_radius > T(0);
        const T radius = cut ? params.cutoff_radius : T(0);
        const double cell_el = g.elevation_cell(), cell_az = g.azimuth_cell();

        ws.state.assign(std::size_t(set.n) * S_STRIDE, T(0));
        ws.row_range.assign(std::size_t(set.n) * 2, 0);
        // Wrapped azimuth column interval per primitive: [j0, j0 + len - 1] mod W
        ws.col_range.assign(std::size_t(set.n) * 2, 0);
        int *col_range = ws.col_range.data();

        ws.el_center.resize(std::size_t(g.n_elevation));
        for (int r = 0; r < g.n_elevation; r++)
            ws.el_center[std::size_t(r)] = T(g.elevation_center(r));
        ws.az_center.resize(std::size_t(g.n_azimuth));
        for (int j = 0; j < g.n_azimuth; j++)
            ws.az_center[std::size_t(j)] = T(g.azimuth_center(j));

#pragma omp parallel for schedule(static)
        for (int p = 0; p < set.n; p++)
        {
            const Prim<T> pr = deform_prim(set, res, p);
            T *st = ws.state.data() + std::size_t(p) * S_STRIDE;
            int *rows = ws.row_range.data() + std::size_t(p) * 2;
            int *cols = col_range + std::size_t(p) * 2;
            rows[0] = 0;
            rows[1] = -1; // empty by default

            if (pr.delta <= T(0))
                continue;

            const T det = pr.l1 * pr.l1 * pr.l3 * pr.l3;
            st[S_EL] = pr.el;
            st[S_AZ] = pr.az;
            st[S_I00] = (pr.l2 * pr.l2 + pr.l3 * pr.l3) / det;
            st[S_I01] = -pr.l2 / (pr.l1 * pr.l3 * pr.l3);
            st[S_I11] = T(1) / (pr.l3 * pr.l3);
            st[S_DELTA] = pr.delta;
            st[S_RE] = pr.re;
            st[S_IM] = pr.im;
            st[S_INVL1] = T(1) / pr.l1;
            st[S_INVL3] = T(1) / pr.l3;
            st[S_L2] = pr.l2;

            if (!cut)
            {
                rows[0] = 0;
                rows[1] = g.n_elevation - 1;
                cols[0] = 0;
                cols[1] = g.n_azimuth; // length W: full circle
                continue;
            }

            // Axis-aligned 3-sigma-style box: half-widths radius * sqrt(diag(Sigma))
            const double h_el = double(radius) * double(pr.l1);
            const double h_az =
                double(radius) * std::sqrt(double(pr.l2) * pr.l2 + double(pr.l3) * pr.l3);
            int r0 = int(std::floor((double(pr.el) - h_el) / cell_el - 0.5));
            int r1 = int(std::ceil((double(pr.el) + h_el) / cell_el - 0.5));
            r0 = std::max(r0, 0);
            r1 = std::min(r1, g.n_elevation - 1);
            if (r0 > r1)
                continue; // entirely off the elevation range
            rows[0] = r0;
            rows[1] = r1;

            if (2.0 * h_az >= double(g.n_azimuth) * cell_az)
            {
                cols[0] = 0;
                cols[1] = g.n_azimuth;
            }
            else
            {
                int j0 = int(std::floor((double(pr.az) - h_az) / cell_az - 0.5));
                int j1 = int(std::ceil((double(pr.az) + h_az) / cell_az - 0.5));
                int len = std::min(j1 - j0 + 1, g.n_azimuth);
                j0 = ((j0 % g.n_azimuth) + g.n_azimuth) % g.n_azimuth;
                cols[0] = j0;
                cols[1] = len;
            }
        }

        // CSR bins: count, prefix, fill (primitive order inside each tile)
        ws.tile_count.assign(std::size_t(lay.tiles()), 0);
        ws.tile_offset.assign(std::size_t(lay.tiles()) + 1, 0);

        auto visit_tiles = [&](int p, auto &&fn) {
            const int *rows = ws.row_range.data() + std::size_t(p) * 2;
            if (rows[1] < rows[0])
                return;
            const int *cols = col_range + std::size_t(p) * 2;
            const int tr0 = rows[0] / lay.tile, tr1 = rows[1] / lay.tile;
            const int j0 = cols[0], len = cols[1];
            auto per_col = [&](int tc) {
                for (int tr = tr0; tr <= tr1; tr++)
                    fn(tr * lay.tw + tc);
            };
            if (len >= g.n_azimuth)
            {
                for (int tc = 0; tc < lay.tw; tc++)
                    per_col(tc);
                return;
            }
            // The wrapped interval [j0, j0+len-1] mod W splits into at most
            // two linear column spans; the second span's tiles are deduped
            // against the first's.
            const int jend = j0 + len - 1;
            for (int tc = j0 / lay.tile; tc <= std::min(jend, g.n_azimuth - 1) / lay.tile; tc++)
                per_col(tc);
            if (jend >= g.n_azimuth)
                for (int tc = 0; tc <= std::min((jend - g.n_azimuth) / lay.tile,
                                                j0 / lay.tile - 1); tc++)
                    per_col(tc);
        };

        for (int p = 0; p < set.n; p++)
            visit_tiles(p, [&](int t) { ws.tile_count[std::size_t(t)]++; });
        for (int t = 0; t < lay.tiles(); t++)
            ws.tile_offset[std::size_t(t) + 1] = ws.tile_offset[std::size_t(t)] +
                                                 ws.tile_count[std::size_t(t)];
        ws.tile_prims.assign(std::size_t(ws.tile_offset[std::size_t(lay.tiles())]), 0);
        std::vector<int> cursor(ws.tile_offset.begin(), ws.tile_offset.end() - 1);
        for (int p = 0; p < set.n; p++)
            visit_tiles(p, [&](int t) { ws.tile_prims[std::size_t(cursor[std::size_t(t)]++)] = p; });
        return lay;
    }
} // namespace

template <class T>
T kernel_weight(const GaussianSetT<T> &set, int idx, T azimuth, T elevation,
                const ResidualsT<T> *residuals)
{
    check_sizes(set, residuals);
    if (idx < 0 || idx >= set.n)
        throw std::out_of_range("primitive index out of range");
    const Prim<T> pr = deform_prim(set, residuals, idx);
    const T d0 = elevation - pr.el;
    const T d1 = wrap_pm_pi(azimuth - pr.az);
    const T u0 = d0 / pr.l1;
    const T u1 = (d1 - pr.l2 * u0) / pr.l3;
    return pr.delta * std::exp(T(-0.5) * (u0 * u0 + u1 * u1));
}

template <class T>
void rasterize(const GaussianSetT<T> &set, const ResidualsT<T> *residuals,
               const RasterParamsT<T> &params, SpectrumT<T> &out, RasterWorkspaceT<T> &ws)
{
    const TileLayout<T> lay = prepare(set, residuals, params, ws);
    const AngularGrid &g = set.grid;
    out.grid = g;
    out.data.resize(std::size_t(2) * g.cells());

    // Accumulation runs on de-interleaved re/im planes (unit-stride stores
    // vectorize); the interleaved output is assembled afterwards.
    const std::size_t cells = std::size_t(g.cells());
    ws.plane.assign(2 * cells, T(0));
    T *const plane_re = ws.plane.data();
    T *const plane_im = ws.plane.data() + cells;

    const bool cut = params.cutoff_radius > T(0);
    const T cut2 = cut ? params.cutoff_radius * params.cutoff_radius
                       : std::numeric_limits<T>::infinity();

#pragma omp parallel
    {
        // Per-column scratch, reused across the (tile, primitive) pairs of
        // this thread: the column-only terms of
        //   Q = i00*d_el^2 + d_el*(2*i01*d_az) + i11*d_az^2
        //     = q_c(row)   + d_el*w2(col)      + w1(col)
        // plus running exponential factors (see below).
        std::vector<T> w1(std::size_t(lay.tile)), w2(std::size_t(lay.tile)),
            ax(std::size_t(lay.tile)), mx(std::size_t(lay.tile));

#pragma omp for schedule(static)
        for (int t = 0; t < lay.tiles(); t++)
        {
            const int tr = t / lay.tw, tc = t % lay.tw;
            const int r0 = tr * lay.tile, r1 = std::min(r0 + lay.tile, g.n_elevation) - 1;
            const int c0 = tc * lay.tile, c1 = std::min(c0 + lay.tile, g.n_azimuth) - 1;

            for (int s = ws.tile_offset[std::size_t(t)]; s < ws.tile_offset[std::size_t(t) + 1];
                 s++)
            {
                const int p = ws.tile_prims[std::size_t(s)];
                const T *st = ws.state.data() + std::size_t(p) * S_STRIDE;
                const int pr0 = std::max(r0, ws.row_range[std::size_t(p) * 2]);
                const int pr1 = std::min(r1, ws.row_range[std::size_t(p) * 2 + 1]);
                if (pr1 < pr0)
                    continue;
                const T i00 = st[S_I00], i01 = st[S_I01], i11 = st[S_I11];
                const T k_re = st[S_RE] * st[S_DELTA], k_im = st[S_IM] * st[S_DELTA];
                const T inv_l1 = st[S_INVL1];

                const T d_el0 = ws.el_center[std::size_t(pr0)] - st[S_EL];
                const T d_el1 = ws.el_center[std::size_t(pr1)] - st[S_EL];
                const T m_el = std::max(std::abs(d_el0), std::abs(d_el1));
                const T cell_el = T(g.elevation_cell());

                // One pass over the column span [a, b] of this tile (clipped
                // to the primitive's wrapped column interval below).
                auto span = [&](int a, int b) {
                    const int n_col = b - a + 1;
                    T worst = i00 * m_el * m_el;
                    for (int j = 0; j < n_col; j++)
                    {
                        const T d_az = wrap_pm_pi(ws.az_center[std::size_t(a + j)] - st[S_AZ]);
                        w1[std::size_t(j)] = i11 * d_az * d_az;
                        w2[std::size_t(j)] = T(2) * i01 * d_az;
                        const T aw2 = std::abs(w2[std::size_t(j)]);
                        worst = std::max(worst, w1[std::size_t(j)] + m_el * aw2);
                        worst = std::max(worst, cell_el * aw2);
                    }

                    if (worst < T(160))
                    {
                        // Factored exponentials: exp(-Q/2) splits into a
                        // per-row scalar exp(-q_c/2) times a per-column factor
                        // exp(-(w1 + d_el*w2)/2). Since d_el steps by one cell
                        // per row, the column factor advances by a constant
                        // multiplier mx = exp(-cell_el*w2/2), cutting exp
                        // calls from rows*cols to ~3*cols + rows. The `worst`
                        // gate keeps every factor inside float range
                        // (|arg/2| < 80); degenerate anisotropic primitives
                        // take the exact path below.
                        for (int j = 0; j < n_col; j++)
                        {
                            ax[std::size_t(j)] = std::exp(
                                T(-0.5) * (w1[std::size_t(j)] + d_el0 * w2[std::size_t(j)]));
                            mx[std::size_t(j)] = std::exp(T(-0.5) * cell_el * w2[std::size_t(j)]);
                        }
                        for (int r = pr0; r <= pr1; r++)
                        {
                            const T d_el = ws.el_center[std::size_t(r)] - st[S_EL];
                            const T u0 = d_el * inv_l1;
                            if (u0 * u0 > cut2) // marginal bound: Q >= (d_el/l1)^2
                            {
                                for (int j = 0; j < n_col; j++)
                                    ax[std::size_t(j)] *= mx[std::size_t(j)];
                                continue;
                            }
                            const T q_c = i00 * d_el * d_el;
                            const T er_re = k_re * std::exp(T(-0.5) * q_c);
                            const T er_im = k_im * std::exp(T(-0.5) * q_c);
                            T *row_re = plane_re + std::size_t(r) * g.n_azimuth + a;
                            T *row_im = plane_im + std::size_t(r) * g.n_azimuth + a;
                            // Branchless cutoff mask keeps this loop
                            // vectorizable (no libm call in it).
                            for (int j = 0; j < n_col; j++)
                            {
                                const T q =
                                    q_c + d_el * w2[std::size_t(j)] + w1[std::size_t(j)];
                                const T e = q <= cut2 ? ax[std::size_t(j)] : T(0);
                                row_re[j] += er_re * e;
                                row_im[j] += er_im * e;
                                ax[std::size_t(j)] *= mx[std::size_t(j)];
                            }
                        }
                        return;
                    }

                    for (int r = pr0; r <= pr1; r++)
                    {
                        const T d_el = ws.el_center[std::size_t(r)] - st[S_EL];
                        const T u0 = d_el * inv_l1;
                        if (u0 * u0 > cut2)
                            continue;
                        const T q_c = i00 * d_el * d_el;
                        T *row_re = plane_re + std::size_t(r) * g.n_azimuth + a;
                        T *row_im = plane_im + std::size_t(r) * g.n_azimuth + a;
                        for (int j = 0; j < n_col; j++)
                        {
                            const T q = q_c + d_el * w2[std::size_t(j)] + w1[std::size_t(j)];
                            if (q > cut2)
                                continue;
                            const T e = std::exp(T(-0.5) * q);
                            row_re[j] += k_re * e;
                            row_im[j] += k_im * e;
                        }
                    }
                };

                // Clip the wrapped column interval [j0, j0+len-1] mod W to
                // this tile's columns; it meets [c0, c1] in at most two
                // linear segments.
                const int j0 = ws.col_range[std::size_t(p) * 2];
                const int len = ws.col_range[std::size_t(p) * 2 + 1];
                if (len >= g.n_azimuth)
                    span(c0, c1);
                else
                {
                    const int jend = j0 + len - 1;
                    const int a0 = std::max(c0, j0);
                    const int b0 = std::min(c1, std::min(jend, g.n_azimuth - 1));
                    if (a0 <= b0)
                        span(a0, b0);
                    if (jend >= g.n_azimuth)
                    {
                        const int b1 = std::min(c1, jend - g.n_azimuth);
                        if (c0 <= b1)
                            span(c0, b1);
                    }
                }
            }
        }
    }

    T *const dst = out.data.data();
#pragma omp parallel for schedule(static)
    for (int c = 0; c < g.cells(); c++)
    {
        dst[2 * std::size_t(c)] = plane_re[std::size_t(c)];
        dst[2 * std::size_t(c) + 1] = plane_im[std::size_t(c)];
    }
}

template <class T>
SpectrumT<T> rasterize(const GaussianSetT<T> &set, const ResidualsT<T> *residuals,
                       const RasterParamsT<T> &params)
{
    SpectrumT<T> out;
    RasterWorkspaceT<T> ws;
    rasterize(set, residuals, params, out, ws);
    return out;
}

template <class T>
void rasterize_backward(const GaussianSetT<T> &set, const ResidualsT<T> *residuals,
                        const RasterParamsT<T> &params, const SpectrumT<T> &upstream,
                        RenderGradsT<T> &grads, RasterWorkspaceT<T> &ws)
{
    const TileLayout<T> lay = prepare(set, residuals, params, ws);
    const AngularGrid &g = set.grid;
    if (!(upstream.grid == g))
        throw std::invalid_argument("upstream gradient grid does not match the set");
    grads.resize(set.n);

    const bool cut = params.cutoff_radius > T(0);
    const T cut2 = cut ? params.cutoff_radius * params.cutoff_radius
                       : std::numeric_limits<T>::infinity();

    // Per (tile, primitive) partials in CSR slot order:
    // (d_el, d_az, dl1, dl2, dl3, ddelta, dre, dim)
    constexpr int slot = 8;
    ws.grad_slots.assign(std::size_t(ws.tile_prims.size()) * slot, T(0));

#pragma omp parallel
    {
        std::vector<T> daz(std::size_t(lay.tile)), w1(std::size_t(lay.tile)),
            w2(std::size_t(lay.tile));

#pragma omp for schedule(static)
        for (int t = 0; t < lay.tiles(); t++)
        {
            const int tr = t / lay.tw, tc = t % lay.tw;
            const int r0 = tr * lay.tile, r1 = std::min(r0 + lay.tile, g.n_elevation) - 1;
            const int c0 = tc * lay.tile, c1 = std::min(c0 + lay.tile, g.n_azimuth) - 1;

            for (int s = ws.tile_offset[std::size_t(t)]; s < ws.tile_offset[std::size_t(t) + 1];
                 s++)
            {
                const int p = ws.tile_prims[std::size_t(s)];
                const T *st = ws.state.data() + std::size_t(p) * S_STRIDE;
                const int pr0 = std::max(r0, ws.row_range[std::size_t(p) * 2]);
                const int pr1 = std::min(r1, ws.row_range[std::size_t(p) * 2 + 1]);
                const T i00 = st[S_I00], i01 = st[S_I01], i11 = st[S_I11];
                const T delta = st[S_DELTA], re = st[S_RE], im = st[S_IM];
                const T inv_l1 = st[S_INVL1], inv_l3 = st[S_INVL3], l2 = st[S_L2];

                T a_el = 0, a_az = 0, a_l1 = 0, a_l2 = 0, a_l3 = 0, a_delta = 0, a_re = 0,
                  a_im = 0;

                auto span = [&](int a, int b) {
                    const int n_col = b - a + 1;
                    for (int j = 0; j < n_col; j++)
                    {
                        const T d_az = wrap_pm_pi(ws.az_center[std::size_t(a + j)] - st[S_AZ]);
                        daz[std::size_t(j)] = d_az;
                        w1[std::size_t(j)] = i11 * d_az * d_az;
                        w2[std::size_t(j)] = T(2) * i01 * d_az;
                    }

                    for (int r = pr0; r <= pr1; r++)
                    {
                        const T d_el = ws.el_center[std::size_t(r)] - st[S_EL];
                        const T u0 = d_el * inv_l1;
                        if (u0 * u0 > cut2) // marginal bound: Q >= (d_el/l1)^2
                            continue;
                        const T q_c = i00 * d_el * d_el;
                        const T *row =
                            upstream.data.data() + 2 * (std::size_t(r) * g.n_azimuth + a);
                        for (int j = 0; j < n_col; j++)
                        {
                            const T d_az = daz[std::size_t(j)];
                            const T q = q_c + d_el * w2[std::size_t(j)] + w1[std::size_t(j)];
                            if (q > cut2)
                                continue;
                            const T e = std::exp(T(-0.5) * q);
                            const T k = delta * e;
                            const T g_re = row[2 * j], g_im = row[2 * j + 1];
                            const T gdot = g_re * re + g_im * im;

                            a_re += g_re * k;
                            a_im += g_im * k;
                            a_delta += gdot * e;

                            const T tq = T(-0.5) * gdot * k; // dL/dQ
                            const T u1 = (d_az - l2 * u0) * inv_l3;
                            a_l1 += tq * T(2) * u0 * inv_l1 * (-u0 + u1 * l2 * inv_l3);
                            a_l2 += tq * T(-2) * u1 * u0 * inv_l3;
                            a_l3 += tq * T(-2) * u1 * u1 * inv_l3;
                            const T s0 = i00 * d_el + i01 * d_az;
                            const T s1 = i01 * d_el + i11 * d_az;
                            a_el += tq * T(-2) * s0;
                            a_az += tq * T(-2) * s1;
                        }
                    }
                };

                const int j0 = ws.col_range[std::size_t(p) * 2];
                const int len = ws.col_range[std::size_t(p) * 2 + 1];
                if (pr1 >= pr0)
                {
                    if (len >= g.n_azimuth)
                        span(c0, c1);
                    else
                    {
                        const int jend = j0 + len - 1;
                        const int a0 = std::max(c0, j0);
                        const int b0 = std::min(c1, std::min(jend, g.n_azimuth - 1));
                        if (a0 <= b0)
                            span(a0, b0);
                        if (jend >= g.n_azimuth)
                        {
                            const int b1 = std::min(c1, jend - g.n_azimuth);
                            if (c0 <= b1)
                                span(c0, b1);
                        }
                    }
                }

                T *out_slot = ws.grad_slots.data() + std::size_t(s) * slot;
                out_slot[0] = a_el;
                out_slot[1] = a_az;
                out_slot[2] = a_l1;
                out_slot[3] = a_l2;
                out_slot[4] = a_l3;
                out_slot[5] = a_delta;
                out_slot[6] = a_re;
                out_slot[7] = a_im;
            }
        }
    }

    // Merge tile partials in fixed tile order (bit-deterministic for any
    // thread count), accumulating per-primitive deformed-parameter gradients
    std::vector<T> acc(std::size_t(set.n) * slot, T(0));
    for (std::size_t s = 0; s < ws.tile_prims.size(); s++)
    {
        T *dst = acc.data() + std::size_t(ws.tile_prims[s]) * slot;
        const T *src = ws.grad_slots.data() + s * slot;
        for (int k = 0; k < slot; k++)
            dst[k] += src[k];
    }

    // Chain deformed-parameter gradients back onto the raw fields
#pragma omp parallel for schedule(static)
    for (int p = 0; p < set.n; p++)
    {
        const T *a = acc.data() + std::size_t(p) * slot;
        const T raw_el = set.center_raw[2 * std::size_t(p)];
        const T raw_az = set.center_raw[2 * std::size_t(p) + 1];
        const T th_el = std::tanh(raw_el), th_az = std::tanh(raw_az);

        grads.d_center[2 * std::size_t(p)] = a[0];
        grads.d_center[2 * std::size_t(p) + 1] = a[1];
        grads.center_raw[2 * std::size_t(p)] = a[0] * T(pi / 4) * (T(1) - th_el * th_el);
        grads.center_raw[2 * std::size_t(p) + 1] = a[1] * T(pi) * (T(1) - th_az * th_az);

        const T l1v = set.cholesky[3 * std::size_t(p)];
        const T l3v = set.cholesky[3 * std::size_t(p) + 2];
        grads.cholesky[3 * std::size_t(p)] = l1v >= T(chol_floor) ? a[2] : T(0);
        grads.cholesky[3 * std::size_t(p) + 1] = a[3];
        grads.cholesky[3 * std::size_t(p) + 2] = l3v >= T(chol_floor) ? a[4] : T(0);

        grads.response[2 * std::size_t(p)] = a[6];
        grads.response[2 * std::size_t(p) + 1] = a[7];
        grads.d_response[2 * std::size_t(p)] = a[6];
        grads.d_response[2 * std::size_t(p) + 1] = a[7];

        const T logit = set.atten_logit[std::size_t(p)];
        const T delta0 = T(1) / (T(1) + std::exp(-logit));
        T mask = T(1);
        if (residuals)
        {
            const T pre = delta0 + residuals->d_atten[std::size_t(p)];
            mask = (pre > T(0) && pre < T(1)) ? T(1) : T(0);
        }
        grads.d_atten[std::size_t(p)] = a[5] * mask;
        grads.atten_logit[std::size_t(p)] = a[5] * mask * delta0 * (T(1) - delta0);
    }
}

template <class T>
RenderGradsT<T> rasterize_backward(const GaussianSetT<T> &set, const ResidualsT<T> *residuals,
                                   const RasterParamsT<T> &params, const SpectrumT<T> &upstream)
{
    RenderGradsT<T> grads;
    RasterWorkspaceT<T> ws;
    rasterize_backward(set, residuals, params, upstream, grads, ws);
    return grads;
}

GaussianSet init_random(const AngularGrid &grid, int count, Rng &rng)
{
    if (count < 1)
        throw std::invalid_argument("primitive count must be >= 1");
    if (grid.n_elevation < 1 || grid.n_azimuth < 1)
        throw std::invalid_argument("empty angular grid");
    GaussianSet set;
    set.grid = grid;
    set.resize(count);
    for (int p = 0; p < count; p++)
    {
        set.center_raw[2 * std::size_t(p)] = float(rng.uniform(-2.0, 2.0));
        set.center_raw[2 * std::size_t(p) + 1] = float(rng.uniform(-2.0, 2.0));
    }
    for (int p = 0; p < count; p++)
    {
        set.response[2 * std::size_t(p)] = float(rng.normal(0.0, 0.01));
        set.response[2 * std::size_t(p) + 1] = float(rng.normal(0.0, 0.01));
    }
    const float sd_el = float(2.0 * grid.elevation_cell());
    const float sd_az = float(2.0 * grid.azimuth_cell());
    for (int p = 0; p < count; p++)
    {
        set.cholesky[3 * std::size_t(p)] = sd_el;
        set.cholesky[3 * std::size_t(p) + 1] = 0.0f;
        set.cholesky[3 * std::size_t(p) + 2] = sd_az;
    }
    return set;
}

void write_gaussian_section(std::ostream &os, const GaussianSet &set)
{
    io::put_magic(os, "WRF2");
    io::put_u32(os, 1);
    io::put_u32(os, std::uint32_t(set.n));
    io::put_u32(os, 0);
    io::put_f32_array(os, set.center_raw.data(), set.center_raw.size());
    io::put_f32_array(os, set.cholesky.data(), set.cholesky.size());
    io::put_f32_array(os, set.atten_logit.data(), set.atten_logit.size());
    io::put_f32_array(os, set.response.data(), set.response.size());
}

void read_gaussian_section(std::istream &is, GaussianSet &set)
{
    io::expect_magic(is, "WRF2", "gaussian section");
    const std::uint32_t version = io::get_u32(is);
    if (version != 1)
        throw std::runtime_error("unsupported gaussian section version");
    const std::uint32_t n = io::get_u32(is);
    io::get_u32(is); // reserved
    set.resize(int(n));
    io::get_f32_array(is, set.center_raw.data(), set.center_raw.size());
    io::get_f32_array(is, set.cholesky.data(), set.cholesky.size());
    io::get_f32_array(is, set.atten_logit.data(), set.atten_logit.size());
    io::get_f32_array(is, set.response.data(), set.response.size());
}

// Explicit instantiations: float for the runtime, double for gradient oracles
template struct GaussianSetT<float>;
template struct GaussianSetT<double>;
template struct ResidualsT<float>;
template struct ResidualsT<double>;
template struct RenderGradsT<float>;
template struct RenderGradsT<double>;
template CenterT<float> materialize_center<float>(float, float);
template CenterT<double> materialize_center<double>(double, double);
template float kernel_weight<float>(const GaussianSetT<float> &, int, float, float,
                                    const ResidualsT<float> *);
template double kernel_weight<double>(const GaussianSetT<double> &, int, double, double,
                                      const ResidualsT<double> *);
template SpectrumT<float> rasterize<float>(const GaussianSetT<float> &, const ResidualsT<float> *,
                                           const RasterParamsT<float> &);
template SpectrumT<double> rasterize<double>(const GaussianSetT<double> &,
                                             const ResidualsT<double> *,
                                             const RasterParamsT<double> &);
template void rasterize<float>(const GaussianSetT<float> &, const ResidualsT<float> *,
                               const RasterParamsT<float> &, SpectrumT<float> &,
                               RasterWorkspaceT<float> &);
template void rasterize<double>(const GaussianSetT<double> &, const ResidualsT<double> *,
                                const RasterParamsT<double> &, SpectrumT<double> &,
                                RasterWorkspaceT<double> &);
template RenderGradsT<float> rasterize_backward<float>(const GaussianSetT<float> &,
                                                       const ResidualsT<float> *,
                                                       const RasterParamsT<float> &,
                                                       const SpectrumT<float> &);
template RenderGradsT<double> rasterize_backward<double>(const GaussianSetT<double> &,
                                                         const ResidualsT<double> *,
                                                         const RasterParamsT<double> &,
                                                         const SpectrumT<double> &);
template void rasterize_backward<float>(const GaussianSetT<float> &, const ResidualsT<float> *,
                                        const RasterParamsT<float> &, const SpectrumT<float> &,
                                        RenderGradsT<float> &, RasterWorkspaceT<float> &);
template void rasterize_backward<double>(const GaussianSetT<double> &, const ResidualsT<double> *,
                                         const RasterParamsT<double> &, const SpectrumT<double> &,
                                         RenderGradsT<double> &, RasterWorkspaceT<double> &);

} // namespace wrfsplat::splat
