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
//
// Acceptance gate. Each criterion runs in its own process invocation
// (--criterion N), prints exactly one PASS/FAIL line with its measured
// numbers, and returns a nonzero exit code on failure. Every tolerance and
// budget is pinned here as a named constant.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wrfsplat/tasks.hpp"

using namespace wrfsplat;

namespace
{

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0)
{
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

// ------------------------------------------------------------ shared oracles

// Scalar kernel oracle: explicit covariance inverse, independent of the
// library's triangular-solve path.
template <class T>
double kernel_oracle(const splat::GaussianSetT<T> &set, int p, double az, double el,
                     const splat::ResidualsT<T> *res)
{
    double c_el = pi / 4 * (std::tanh(double(set.center_raw[2 * std::size_t(p)])) + 1.0);
    double c_az = pi * (std::tanh(double(set.center_raw[2 * std::size_t(p) + 1])) + 1.0);
    const double l1 = std::max(double(set.cholesky[3 * std::size_t(p)]), double(splat::chol_floor));
    const double l2 = set.cholesky[3 * std::size_t(p) + 1];
    const double l3 =
        std::max(double(set.cholesky[3 * std::size_t(p) + 2]), double(splat::chol_floor));
    double delta = 1.0 / (1.0 + std::exp(-double(set.atten_logit[std::size_t(p)])));
    if (res)
    {
        c_el += res->d_center[2 * std::size_t(p)];
        c_az += res->d_center[2 * std::size_t(p) + 1];
        delta = std::min(std::max(delta + double(res->d_atten[std::size_t(p)]), 0.0), 1.0);
    }
    const double d0 = el - c_el;
    double d1 = az - c_az;
    while (d1 >= pi)
        d1 -= 2.0 * pi;
    while (d1 < -pi)
        d1 += 2.0 * pi;
    const double s00 = l1 * l1, s01 = l1 * l2, s11 = l2 * l2 + l3 * l3;
    const double det = s00 * s11 - s01 * s01;
    const double q = (s11 * d0 * d0 - 2.0 * s01 * d0 * d1 + s00 * d1 * d1) / det;
    return delta * std::exp(-0.5 * q);
}

// Dense O(N * cells) render oracle in double (no cutoff)
template <class T>
std::vector<double> dense_oracle(const splat::GaussianSetT<T> &set,
                                 const splat::ResidualsT<T> *res)
{
    const AngularGrid &g = set.grid;
    std::vector<double> out(std::size_t(2) * g.cells(), 0.0);
    for (int i = 0; i < g.n_elevation; i++)
        for (int j = 0; j < g.n_azimuth; j++)
        {
            const std::size_t c = std::size_t(i) * g.n_azimuth + j;
            for (int p = 0; p < set.n; p++)
            {
                const double k =
                    kernel_oracle(set, p, g.azimuth_center(j), g.elevation_center(i), res);
                double re = set.response[2 * std::size_t(p)];
                double im = set.response[2 * std::size_t(p) + 1];
                if (res)
                {
                    re += res->d_response[2 * std::size_t(p)];
                    im += res->d_response[2 * std::size_t(p) + 1];
                }
                out[2 * c] += re * k;
                out[2 * c + 1] += im * k;
            }
        }
    return out;
}

// Element phase for the physics oracles: -2*pi*r*cos(az-beta)*cos(el)/lambda
// wrapped into [0, 2*pi)
double phase_oracle(double r, double beta, double az, double el, double lambda)
{
    const double raw = -2.0 * pi * r * std::cos(az - beta) * std::cos(el) / lambda;
    double w = std::fmod(raw, 2.0 * pi);
    if (w < 0.0)
        w += 2.0 * pi;
    return w;
}

// Relative-error gate with an absolute floor for near-zero gradients
bool grad_close(double an, double fd, double tol_rel, double floor_abs, double &worst)
{
    const double err = std::abs(an - fd) / std::max(std::abs(fd), floor_abs);
    worst = std::max(worst, err);
    return err <= tol_rel;
}

splat::GaussianSetT<float> random_float_set(const AngularGrid &g, int n, Rng &rng)
{
    splat::GaussianSetT<float> set;
    set.grid = g;
    set.resize(n);
    for (int p = 0; p < n; p++)
    {
        set.center_raw[2 * std::size_t(p)] = float(rng.uniform(-1.5, 1.5));
        set.center_raw[2 * std::size_t(p) + 1] = float(rng.uniform(-1.5, 1.5));
        set.cholesky[3 * std::size_t(p)] = float(rng.uniform(0.05, 0.4));
        set.cholesky[3 * std::size_t(p) + 1] = float(rng.uniform(-0.2, 0.2));
        set.cholesky[3 * std::size_t(p) + 2] = float(rng.uniform(0.05, 0.4));
        set.atten_logit[std::size_t(p)] = float(rng.uniform(-1.0, 1.0));
        set.response[2 * std::size_t(p)] = float(rng.uniform(-0.5, 0.5));
        set.response[2 * std::size_t(p) + 1] = float(rng.uniform(-0.5, 0.5));
    }
    return set;
}

std::string slurp(const std::string &path)
{
    std::ifstream is(path, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// --------------------------------------------------------------- criterion 1

bool criterion_1()
{
    constexpr double tol_max_abs = 1e-5;
    constexpr double budget_s = 10.0;
    constexpr int instances = 50;

    const auto t0 = clock_type::now();
    Rng rng(20250814);
    double worst = 0.0;
    for (int inst = 0; inst < instances; inst++)
    {
        const AngularGrid g{4 + int(rng.index(13)), 8 + int(rng.index(25))}; // <= 16 x 32
        const int n = 1 + int(rng.index(64));
        auto set = random_float_set(g, n, rng);

        splat::ResidualsT<float> res;
        const bool with_res = (inst % 2) == 1;
        if (with_res)
        {
            res.resize(n);
            for (auto *vec : {&res.d_center, &res.d_response})
                for (auto &v : *vec)
                    v = float(rng.uniform(-0.05, 0.05));
            for (auto &v : res.d_atten)
                v = float(rng.uniform(-0.05, 0.05));
        }

        splat::RasterParams pr;
        pr.cutoff_radius = 0.0f; // disabled per the criterion
        const auto out = splat::rasterize<float>(set, with_res ? &res : nullptr, pr);
        const auto want = dense_oracle(set, with_res ? &res : nullptr);
        for (std::size_t k = 0; k < want.size(); k++)
            worst = std::max(worst, std::abs(double(out.data[k]) - want[k]));
    }
    const double el = seconds_since(t0);
    const bool ok = worst <= tol_max_abs && el < budget_s;
    std::printf("criterion 1: %s — tiled forward vs dense oracle, max |diff| %.3g "
                "(tol %.0e) over %d instances, %.1f s (budget %.0f s)\n",
                ok ? "PASS" : "FAIL", worst, tol_max_abs, instances, el, budget_s);
    return ok;
}

// --------------------------------------------------------------- criterion 2

bool criterion_2()
{
    constexpr double tol_rel = 1e-3;
    constexpr double floor_abs = 1e-3; // FD noise floor for near-zero gradients
    constexpr double fd_h = 1e-6;
    constexpr double budget_s = 60.0;

    const auto t0 = clock_type::now();
    Rng rng(77001);
    bool ok = true;
    double worst_raster = 0.0, worst_mlp = 0.0, worst_loss = 0.0;

    // (a) rasterizer gradients w.r.t. every primitive and residual parameter
    {
        splat::GaussianSetT<double> set;
        set.grid = {12, 16};
        set.resize(6);
        for (int p = 0; p < set.n; p++)
        {
            set.center_raw[2 * std::size_t(p)] = rng.uniform(-1.5, 1.5);
            set.center_raw[2 * std::size_t(p) + 1] = rng.uniform(-1.5, 1.5);
            set.cholesky[3 * std::size_t(p)] = rng.uniform(0.05, 0.4);
            set.cholesky[3 * std::size_t(p) + 1] = rng.uniform(-0.2, 0.2);
            set.cholesky[3 * std::size_t(p) + 2] = rng.uniform(0.05, 0.4);
            set.atten_logit[std::size_t(p)] = rng.uniform(-1.0, 1.0);
            set.response[2 * std::size_t(p)] = rng.uniform(-0.5, 0.5);
            set.response[2 * std::size_t(p) + 1] = rng.uniform(-0.5, 0.5);
        }
        splat::ResidualsT<double> res;
        res.resize(set.n);
        for (auto *vec : {&res.d_center, &res.d_response})
            for (auto &v : *vec)
                v = rng.uniform(-0.02, 0.02);
        for (auto &v : res.d_atten)
            v = rng.uniform(-0.02, 0.02);

        splat::RasterParamsT<double> pr;
        pr.cutoff_radius = 0.0;
        SpectrumT<double> up(set.grid);
        for (auto &v : up.data)
            v = rng.uniform(-1.0, 1.0);

        const auto loss = [&] {
            const auto out = splat::rasterize<double>(set, &res, pr);
            double acc = 0.0;
            for (std::size_t k = 0; k < out.data.size(); k++)
                acc += up.data[k] * out.data[k];
            return acc;
        };
        const auto grads = splat::rasterize_backward<double>(set, &res, pr, up);
        const auto fd_check = [&](double *slot, double an) {
            const double keep = *slot;
            *slot = keep + fd_h;
            const double hi = loss();
            *slot = keep - fd_h;
            const double lo = loss();
            *slot = keep;
            ok = grad_close(an, (hi - lo) / (2.0 * fd_h), tol_rel, floor_abs, worst_raster) && ok;
        };
        for (std::size_t k = 0; k < set.center_raw.size(); k++)
            fd_check(&set.center_raw[k], grads.center_raw[k]);
        for (std::size_t k = 0; k < set.cholesky.size(); k++)
            fd_check(&set.cholesky[k], grads.cholesky[k]);
        for (std::size_t k = 0; k < set.atten_logit.size(); k++)
            fd_check(&set.atten_logit[k], grads.atten_logit[k]);
        for (std::size_t k = 0; k < set.response.size(); k++)
            fd_check(&set.response[k], grads.response[k]);
        for (std::size_t k = 0; k < res.d_center.size(); k++)
            fd_check(&res.d_center[k], grads.d_center[k]);
        for (std::size_t k = 0; k < res.d_response.size(); k++)
            fd_check(&res.d_response[k], grads.d_response[k]);
        for (std::size_t k = 0; k < res.d_atten.size(); k++)
            fd_check(&res.d_atten[k], grads.d_atten[k]);
    }

    // (b) deformation network weight gradients
    {
        deform::DeformNetT<double> net;
        net.enc.bands_center = 1;
        net.enc.bands_position = 1;
        net.width = 6;
        net.init(rng);
        for (auto *h : {&net.head_center, &net.head_response, &net.head_atten})
        {
            for (auto &v : h->w)
                v = rng.uniform(-0.3, 0.3);
            for (auto &v : h->b)
                v = rng.uniform(-0.1, 0.1);
        }
        splat::GaussianSetT<double> set;
        set.grid = {12, 16};
        set.resize(3);
        for (std::size_t k = 0; k < set.center_raw.size(); k++)
            set.center_raw[k] = rng.uniform(-1.0, 1.0);
        for (int p = 0; p < set.n; p++)
        {
            set.cholesky[3 * std::size_t(p)] = 0.2;
            set.cholesky[3 * std::size_t(p) + 2] = 0.2;
        }
        const std::array<double, 3> pos{0.3, 0.6, 0.9};

        splat::ResidualsT<double> up;
        up.resize(set.n);
        for (auto *vec : {&up.d_center, &up.d_response})
            for (auto &v : *vec)
                v = rng.uniform(-1.0, 1.0);
        for (auto &v : up.d_atten)
            v = rng.uniform(-1.0, 1.0);

        deform::DeformWorkspaceT<double> ws;
        splat::ResidualsT<double> out;
        const auto loss = [&] {
            deform::predict_residuals(net, set, pos, ws, out);
            double acc = 0.0;
            for (std::size_t k = 0; k < out.d_center.size(); k++)
                acc += up.d_center[k] * out.d_center[k];
            for (std::size_t k = 0; k < out.d_response.size(); k++)
                acc += up.d_response[k] * out.d_response[k];
            for (std::size_t k = 0; k < out.d_atten.size(); k++)
                acc += up.d_atten[k] * out.d_atten[k];
            return acc;
        };
        loss();
        deform::DeformGradsT<double> grads;
        grads.resize_like(net);
        deform::deform_backward(net, ws, up, grads);

        const auto fd_check = [&](double *slot, double an) {
            const double keep = *slot;
            *slot = keep + fd_h;
            const double hi = loss();
            *slot = keep - fd_h;
            const double lo = loss();
            *slot = keep;
            ok = grad_close(an, (hi - lo) / (2.0 * fd_h), tol_rel, floor_abs, worst_mlp) && ok;
        };
        for (std::size_t l = 0; l < 8; l++)
        {
            for (std::size_t k = 0; k < net.trunk[l].w.size(); k += 5)
                fd_check(&net.trunk[l].w[k], grads.trunk[l].w[k]);
            for (std::size_t k = 0; k < net.trunk[l].b.size(); k++)
                fd_check(&net.trunk[l].b[k], grads.trunk[l].b[k]);
        }
        auto heads = {std::pair{&net.head_center, &grads.head_center},
                      std::pair{&net.head_response, &grads.head_response},
                      std::pair{&net.head_atten, &grads.head_atten}};
        for (auto [lay, gl] : heads)
        {
            for (std::size_t k = 0; k < lay->w.size(); k++)
                fd_check(&lay->w[k], gl->w[k]);
            for (std::size_t k = 0; k < lay->b.size(); k++)
                fd_check(&lay->b[k], gl->b[k]);
        }
    }

    // (c) hybrid loss gradient w.r.t. the prediction
    {
        const AngularGrid g{12, 16};
        SpectrumT<double> predspec(g), target(g);
        for (auto &v : predspec.data)
            v = rng.uniform(-1.0, 1.0);
        for (auto &v : target.data)
            v = rng.uniform(-1.0, 1.0);
        SpectrumT<double> grad;
        train::hybrid_loss(predspec, target, 0.7, &grad);
        for (std::size_t k = 0; k < predspec.data.size(); k += 7)
        {
            const double keep = predspec.data[k];
            predspec.data[k] = keep + fd_h;
            const double hi =
                train::hybrid_loss(predspec, target, 0.7, (SpectrumT<double> *)nullptr).loss;
            predspec.data[k] = keep - fd_h;
            const double lo =
                train::hybrid_loss(predspec, target, 0.7, (SpectrumT<double> *)nullptr).loss;
            predspec.data[k] = keep;
            ok = grad_close(grad.data[k], (hi - lo) / (2.0 * fd_h), tol_rel, floor_abs,
                            worst_loss) &&
                 ok;
        }
    }

    const double el = seconds_since(t0);
    const bool pass = ok && el < budget_s;
    std::printf("criterion 2: %s — FD agreement (tol %.0e rel): rasterizer %.3g, "
                "deform net %.3g, loss %.3g, %.1f s (budget %.0f s)\n",
                pass ? "PASS" : "FAIL", tol_rel, worst_raster, worst_mlp, worst_loss, el,
                budget_s);
    return pass;
}

// --------------------------------------------------------------- criterion 3

bool criterion_3()
{
    constexpr double tol_peak = 1e-9;
    constexpr double tol_oracle = 1e-10;
    constexpr double budget_s = 10.0;

    const auto t0 = clock_type::now();
    Rng rng(330077);
    const sim::ArrayConfig arr; // 16 elements, lambda/2 spacing
    const auto layout = sim::element_layout(arr);
    bool ok = true;
    double worst_peak = 0.0, worst_ch = 0.0, worst_bs = 0.0;

    // Single on-grid arrivals: unit response at the true cell, global argmax
    const AngularGrid g{24, 48};
    const auto table = sim::build_steering_table(arr, g);
    for (int trial = 0; trial < 20; trial++)
    {
        const int row = int(rng.index(std::size_t(g.n_elevation)));
        const int col = int(rng.index(std::size_t(g.n_azimuth)));
        sim::PropagationPath p;
        p.gain = std::polar(rng.uniform(0.2, 2.0), rng.uniform(0.0, 2.0 * pi));
        p.azimuth = g.azimuth_center(col);
        p.elevation = g.elevation_center(row);
        p.path_length = 3.0;

        const auto h = sim::channel_response({p}, arr);
        const auto spec = sim::beam_scan(h, table);
        const auto mag = magnitude(spec);
        const std::size_t cell = std::size_t(row) * g.n_azimuth + col;
        worst_peak = std::max(worst_peak, std::abs(mag[cell] - 1.0));
        const auto arg = std::max_element(mag.begin(), mag.end()) - mag.begin();
        if (std::size_t(arg) != cell)
            ok = false;
    }
    ok = ok && worst_peak <= tol_peak;

    // Random multi-path instances vs scalar double-loop oracles
    for (int trial = 0; trial < 10; trial++)
    {
        std::vector<sim::PropagationPath> paths(3 + rng.index(6));
        for (auto &p : paths)
        {
            p.gain = std::polar(rng.uniform(0.01, 1.0), rng.uniform(0.0, 2.0 * pi));
            p.azimuth = rng.uniform(0.0, 2.0 * pi);
            p.elevation = rng.uniform(0.0, pi / 2);
        }
        const auto h = sim::channel_response(paths, arr);
        for (std::size_t k = 0; k < layout.size(); k++)
        {
            std::complex<double> want(0.0, 0.0);
            for (const auto &p : paths)
            {
                const double ph = phase_oracle(layout[k].r, layout[k].beta, p.azimuth,
                                               p.elevation, arr.wavelength);
                want += p.gain * std::complex<double>(std::cos(ph), std::sin(ph));
            }
            worst_ch = std::max(worst_ch, std::abs(h[k] - want));
        }

        const AngularGrid sg{10, 20};
        const auto spec = sim::beam_scan(h, arr, sg);
        const auto spec2 = sim::beam_scan(h, sim::build_steering_table(arr, sg));
        if (std::memcmp(spec.data.data(), spec2.data.data(),
                        spec.data.size() * sizeof(double)) != 0)
            ok = false; // the two overloads must agree bit-exactly
        for (int i = 0; i < sg.n_elevation; i++)
            for (int j = 0; j < sg.n_azimuth; j++)
            {
                std::complex<double> acc(0.0, 0.0);
                for (std::size_t k = 0; k < layout.size(); k++)
                {
                    const double ph =
                        phase_oracle(layout[k].r, layout[k].beta, sg.azimuth_center(j),
                                     sg.elevation_center(i), arr.wavelength);
                    const std::complex<double> w(std::cos(ph), -std::sin(ph));
                    const double hm = std::abs(h[k]);
                    const std::complex<double> u = hm > 0.0 ? h[k] / hm
                                                            : std::complex<double>(1.0, 0.0);
                    acc += w * u;
                }
                acc /= double(layout.size());
                worst_bs = std::max(worst_bs,
                                    std::max(std::abs(spec.re(i, j) - acc.real()),
                                             std::abs(spec.im(i, j) - acc.imag())));
            }
    }
    ok = ok && worst_ch <= tol_oracle && worst_bs <= tol_oracle;

    const double el = seconds_since(t0);
    const bool pass = ok && el < budget_s;
    std::printf("criterion 3: %s — on-grid peak |1-|A|| %.3g (tol %.0e), channel vs oracle "
                "%.3g, beam scan vs oracle %.3g (tol %.0e), %.1f s (budget %.0f s)\n",
                pass ? "PASS" : "FAIL", worst_peak, tol_peak, worst_ch, worst_bs, tol_oracle,
                el, budget_s);
    return pass;
}

// --------------------------------------------------------------- criterion 4

bool criterion_4()
{
    constexpr double psnr_floor_db = 40.0;
    constexpr std::int64_t max_iters = 2000;
    constexpr double budget_s = 120.0;

    const auto t0 = clock_type::now();
    sim::Scene scene;
    scene.max_bounces = 0; // a single line-of-sight beam pattern
    scene.fixed_node = {2.0, 1.5, 1.0};
    // Two positions: original index 0 is held out by the split rule, leaving
    // exactly one training spectrum to overfit
    const auto ds = sim::generate_dataset(scene, AngularGrid{90, 360},
                                          {{1.3, 1.0, 1.6}, {2.7, 2.2, 1.7}}, 0);

    train::TrainConfig cfg;
    cfg.primitives = 64;
    cfg.coarse_iters = max_iters;
    cfg.fine_iters = 0;
    cfg.seed = 4;
    // The default 3-sigma cutoff truncates kernel tails at ~1% relative, which
    // floors the reconstruction error right at the 40 dB target; 5 sigma makes
    // the truncation negligible (< -80 dB) at ~2x the render cost.
    cfg.raster.cutoff_radius = 5.0f;

    const auto ck = train::train(ds, cfg);
    const auto pred = splat::rasterize<float>(ck.set, nullptr, cfg.raster);
    const double value = psnr(pred, ds.samples[std::size_t(ds.train_indices[0])].spectrum);

    const double el = seconds_since(t0);
    const bool pass = value >= psnr_floor_db && el < budget_s;
    std::printf("criterion 4: %s — single-spectrum overfit PSNR %.2f dB "
                "(floor %.0f dB, %lld iters), %.1f s (budget %.0f s)\n",
                pass ? "PASS" : "FAIL", value, psnr_floor_db,
                (long long)max_iters, el, budget_s);
    return pass;
}

// --------------------------------------------------------------- criterion 5

bool criterion_5()
{
    constexpr double psnr_floor_db = 22.0;
    constexpr double ssim_floor = 0.80;
    constexpr double budget_s = 1800.0;

    const auto t0 = clock_type::now();
    sim::Scene scene; // 4 x 3 x 2.5 m shoebox, TX moving
    scene.max_bounces = 2;
    Rng pos_rng(5001);
    const auto positions = sim::sample_positions(scene, 300, 0.3, pos_rng);
    const auto ds = sim::generate_dataset(scene, AngularGrid{90, 360}, positions, 5001);

    train::TrainConfig cfg;
    cfg.primitives = 1000;
    cfg.coarse_iters = 10000;
    cfg.fine_iters = 30000;
    cfg.seed = 5;

    const auto ck = train::train(ds, cfg);
    const auto rows = train::evaluate(ck, ds, train::Split::test);

    std::vector<double> psnrs, ssims;
    for (const auto &r : rows)
    {
        psnrs.push_back(r.psnr_db);
        ssims.push_back(r.ssim);
    }
    const double med_psnr = median(psnrs);
    const double med_ssim = median(ssims);

    const double el = seconds_since(t0);
    const bool pass = med_psnr >= psnr_floor_db && med_ssim >= ssim_floor && el < budget_s;
    std::printf("criterion 5: %s — held-out median PSNR %.2f dB (floor %.0f), median SSIM "
                "%.3f (floor %.2f) over %zu test samples, %.0f s (budget %.0f s)\n",
                pass ? "PASS" : "FAIL", med_psnr, psnr_floor_db, med_ssim, ssim_floor,
                rows.size(), el, budget_s);
    return pass;
}

// --------------------------------------------------------------- criterion 6

bool criterion_6()
{
    const auto t0 = clock_type::now();
    sim::Scene scene;
    scene.max_bounces = 1;
    Rng pos_rng(6001);
    const auto positions = sim::sample_positions(scene, 100, 0.3, pos_rng);
    const auto ds = sim::generate_dataset(scene, AngularGrid{32, 64}, positions, 6001);

    train::TrainConfig cfg;
    cfg.primitives = 200;
    cfg.coarse_iters = 1500;
    cfg.fine_iters = 4000;
    cfg.anneal_scale = 1.0;
    cfg.anneal_threshold = 2000;
    cfg.seed = 6;

    // (a) disabling anneal smoothing must not improve held-out L1
    const auto ck_on = train::train(ds, cfg);
    auto cfg_off = cfg;
    cfg_off.anneal_scale = 0.0;
    const auto ck_off = train::train(ds, cfg_off);

    const auto score = [&](const train::Checkpoint &ck) {
        std::vector<double> l1s;
        for (const auto &r : train::evaluate(ck, ds, train::Split::test))
            l1s.push_back(r.l1);
        return mean(l1s);
    };
    const double l1_on = score(ck_on);
    const double l1_off = score(ck_off);
    const bool anneal_ok = l1_off >= l1_on;

    // (b) at the fine-stage start the deform heads are zero, so rendering
    // with residuals must reproduce the coarse solution bit-exactly
    auto cfg_coarse = cfg;
    cfg_coarse.fine_iters = 0;
    const auto ck_coarse = train::train(ds, cfg_coarse);
    const auto direct = splat::rasterize<float>(ck_coarse.set, nullptr, cfg.raster);
    const auto deformed = train::render_at(ck_coarse, ds.samples[0].position);
    const bool bitexact_ok =
        direct.data.size() == deformed.data.size() &&
        std::memcmp(direct.data.data(), deformed.data.data(),
                    direct.data.size() * sizeof(float)) == 0;

    // (c) the fine stage must leave center_raw bit-identical (frozen centers,
    // stop-gradient through the encoding)
    const bool centers_ok = ck_on.set.center_raw == ck_coarse.set.center_raw;

    const double el = seconds_since(t0);
    const bool pass = anneal_ok && bitexact_ok && centers_ok;
    std::printf("criterion 6: %s — anneal-off held-out L1 %.5f vs on %.5f (must not improve: "
                "%s), zero-residual render bit-exact: %s, centers frozen through fine: %s, "
                "%.0f s\n",
                pass ? "PASS" : "FAIL", l1_off, l1_on, anneal_ok ? "yes" : "no",
                bitexact_ok ? "yes" : "no", centers_ok ? "yes" : "no", el);
    return pass;
}

// --------------------------------------------------------------- criterion 7

bool criterion_7()
{
    constexpr double err_ceiling_db = 3.0;
    constexpr double budget_s = 600.0;

    const auto t0 = clock_type::now();
    sim::Scene scene;
    scene.max_bounces = 2;
    Rng pos_rng(7001);
    // Devices at least 0.6 m from every wall: the pooled-magnitude-to-dBm
    // calibration is affine, so a moderate received-power dynamic range keeps
    // the linear-vs-log model mismatch well under the 3 dB ceiling.
    const auto positions = sim::sample_positions(scene, 200, 0.6, pos_rng);
    const auto ds = sim::generate_dataset(scene, AngularGrid{16, 16}, positions, 7001);

    train::TrainConfig cfg;
    cfg.primitives = 50;
    cfg.coarse_iters = 3000;
    cfg.fine_iters = 8000;
    cfg.anneal_threshold = 3000;
    cfg.seed = 7;

    const auto model = tasks::train_rssi(ds, cfg);
    const auto rows = tasks::eval_rssi(model, ds, train::Split::test);
    std::vector<double> errs;
    for (const auto &r : rows)
        errs.push_back(r.abs_err_db);
    const double med = median(errs);

    const double el = seconds_since(t0);
    const bool pass = med <= err_ceiling_db && el < budget_s;
    std::printf("criterion 7: %s — held-out RSSI median |err| %.2f dB (ceiling %.0f dB) over "
                "%zu samples, %.0f s (budget %.0f s)\n",
                pass ? "PASS" : "FAIL", med, err_ceiling_db, errs.size(), el, budget_s);
    return pass;
}

// --------------------------------------------------------------- criterion 8

bool criterion_8()
{
    const auto t0 = clock_type::now();
    namespace fs = std::filesystem;
    const std::string base = "acceptance_c8";
    fs::remove_all(base);
    fs::create_directories(base);

    sim::Scene scene;
    scene.max_bounces = 1;

    const auto make_dataset = [&] {
        Rng rng(8001);
        const auto positions = sim::sample_positions(scene, 20, 0.3, rng);
        return sim::generate_dataset(scene, AngularGrid{24, 48}, positions, 8001);
    };
    const auto ds_a = make_dataset();
    const auto ds_b = make_dataset();
    sim::save_dataset(ds_a, base + "/ds_a");
    sim::save_dataset(ds_b, base + "/ds_b");
    const bool ds_ok =
        slurp(base + "/ds_a/manifest.json") == slurp(base + "/ds_b/manifest.json") &&
        slurp(base + "/ds_a/spectra.bin") == slurp(base + "/ds_b/spectra.bin") &&
        !slurp(base + "/ds_a/manifest.json").empty();

    // Round trip: loading and re-saving reproduces both files exactly
    const auto ds_back = sim::load_dataset(base + "/ds_a");
    sim::save_dataset(ds_back, base + "/ds_rt");
    const bool ds_rt_ok =
        slurp(base + "/ds_rt/manifest.json") == slurp(base + "/ds_a/manifest.json") &&
        slurp(base + "/ds_rt/spectra.bin") == slurp(base + "/ds_a/spectra.bin");

    train::TrainConfig cfg;
    cfg.primitives = 20;
    cfg.coarse_iters = 30;
    cfg.fine_iters = 20;
    cfg.anneal_threshold = 10;
    cfg.seed = 8;

    const auto ck_a = train::train(ds_a, cfg);
    const auto ck_b = train::train(ds_b, cfg);
    train::save_checkpoint(base + "/ck_a.wrfc", ck_a);
    train::save_checkpoint(base + "/ck_b.wrfc", ck_b);
    const bool ck_ok = slurp(base + "/ck_a.wrfc") == slurp(base + "/ck_b.wrfc") &&
                       !slurp(base + "/ck_a.wrfc").empty();

    const auto ck_back = train::load_checkpoint(base + "/ck_a.wrfc");
    train::save_checkpoint(base + "/ck_rt.wrfc", ck_back);
    const bool ck_rt_ok = slurp(base + "/ck_rt.wrfc") == slurp(base + "/ck_a.wrfc");

    write_metrics_csv(base + "/m_a.csv", train::evaluate(ck_a, ds_a, train::Split::test));
    write_metrics_csv(base + "/m_b.csv", train::evaluate(ck_b, ds_b, train::Split::test));
    const bool csv_ok =
        slurp(base + "/m_a.csv") == slurp(base + "/m_b.csv") && !slurp(base + "/m_a.csv").empty();

    fs::remove_all(base);
    const double el = seconds_since(t0);
    const bool pass = ds_ok && ds_rt_ok && ck_ok && ck_rt_ok && csv_ok;
    std::printf("criterion 8: %s — byte-identical across runs: dataset %s, checkpoint %s, "
                "metrics CSV %s; round-trips: dataset %s, checkpoint %s, %.0f s\n",
                pass ? "PASS" : "FAIL", ds_ok ? "yes" : "no", ck_ok ? "yes" : "no",
                csv_ok ? "yes" : "no", ds_rt_ok ? "yes" : "no", ck_rt_ok ? "yes" : "no", el);
    return pass;
}

// --------------------------------------------------------------- criterion 9

bool criterion_9()
{
    constexpr double floor_renders_per_s = 1000.0;
    constexpr int warmup = 100;
    constexpr int iters = 2500;

    Rng rng(1234);
    auto set = splat::init_random(AngularGrid{90, 360}, 1000, rng);
    const splat::RasterParams pr;
    splat::RasterWorkspace ws;
    Spectrum out;

    for (int k = 0; k < warmup; k++)
        splat::rasterize<float>(set, nullptr, pr, out, ws);

    const auto t0 = clock_type::now();
    for (int k = 0; k < iters; k++)
        splat::rasterize<float>(set, nullptr, pr, out, ws);
    const double el = seconds_since(t0);
    const double rate = double(iters) / el;

    // Keep the measurement honest: the renders must have produced output
    double checksum = 0.0;
    for (float v : out.data)
        checksum += v;

    const bool pass = rate >= floor_renders_per_s && std::isfinite(checksum);
    std::printf("criterion 9: %s — %.0f renders/s at 90x360 with 1000 primitives "
                "(floor %.0f), %d timed iterations, %.1f s\n",
                pass ? "PASS" : "FAIL", rate, floor_renders_per_s, iters, el);
    return pass;
}

} // namespace

int main(int argc, char **argv)
{
    int which = 0; // 0 = all
    for (int a = 1; a < argc; a++)
    {
        if (std::strcmp(argv[a], "--criterion") == 0 && a + 1 < argc)
            which = std::atoi(argv[++a]);
        else
        {
            std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
            return 2;
        }
    }
    if (which < 0 || which > 9)
    {
        std::fprintf(stderr, "criterion must be 1..9\n");
        return 2;
    }

    bool (*const table[10])() = {nullptr,     criterion_1, criterion_2, criterion_3,
                                 criterion_4, criterion_5, criterion_6, criterion_7,
                                 criterion_8, criterion_9};
    bool ok = true;
    if (which == 0)
    {
        for (int c = 1; c <= 9; c++)
            ok = table[c]() && ok;
    }
    else
        ok = table[which]();
    return ok ? 0 : 1;
}
