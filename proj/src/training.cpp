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

#include "wrfsplat/training.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace wrfsplat::train
{

// ------------------------------------------------------------------- optimizer

template <class T>
void AdamStateT<T>::reset(std::size_t n)
{
    m.assign(n, T(0));
    v.assign(n, T(0));
    t = 0;
}

template <class T>
void AdamStateT<T>::step(T *params, const T *grads, std::size_t n, const AdamParams &hp)
{
    if (m.size() != n)
        reset(n);
    t++;
    const double bc1 = 1.0 - std::pow(hp.beta1, double(t));
    const double bc2 = 1.0 - std::pow(hp.beta2, double(t));
    const T b1 = T(hp.beta1), b2 = T(hp.beta2);
    for (std::size_t i = 0; i < n; i++)
    {
        const T g = grads[i];
        m[i] = b1 * m[i] + (T(1) - b1) * g;
        v[i] = b2 * v[i] + (T(1) - b2) * g * g;
        const double mhat = double(m[i]) / bc1;
        const double vhat = double(v[i]) / bc2;
        params[i] -= T(hp.lr * mhat / (std::sqrt(vhat) + hp.eps));
    }
}

template struct AdamStateT<float>;
template struct AdamStateT<double>;

// ------------------------------------------------------------------------ loss

template <class T>
LossTerms hybrid_loss(const SpectrumT<T> &prediction, const SpectrumT<T> &target,
                      double lambda1, SpectrumT<T> *grad)
{
    const double l1_value = l1(prediction, target); // also validates shapes/finiteness

    std::vector<T> g0, g1;
    T *g0p = nullptr, *g1p = nullptr;
    if (grad)
    {
        g0.resize(std::size_t(prediction.grid.cells()));
        g1.resize(std::size_t(prediction.grid.cells()));
        g0p = g0.data();
        g1p = g1.data();
    }
    const double s0 = detail::ssim_channel(prediction, target, 0, 1.0, g0p);
    const double s1 = detail::ssim_channel(prediction, target, 1, 1.0, g1p);
    const double ssim_value = 0.5 * (s0 + s1);

    LossTerms terms;
    terms.l1_term = lambda1 * l1_value;
    terms.ssim_term = (1.0 - lambda1) * (1.0 - ssim_value);
    terms.loss = terms.l1_term + terms.ssim_term;
    if (!std::isfinite(terms.loss))
        throw std::runtime_error("hybrid loss is not finite");

    if (grad)
    {
        grad->grid = prediction.grid;
        grad->data.assign(prediction.data.size(), T(0));
        const double inv = lambda1 / double(prediction.data.size());
        const double sw = 0.5 * (1.0 - lambda1); // d/dx of -(1-lambda1)*mean(ssim)
        for (std::size_t k = 0; k < std::size_t(prediction.grid.cells()); k++)
        {
            const T dre = prediction.data[2 * k] - target.data[2 * k];
            const T dim = prediction.data[2 * k + 1] - target.data[2 * k + 1];
            const double sgn_re = dre > T(0) ? 1.0 : (dre < T(0) ? -1.0 : 0.0);
            const double sgn_im = dim > T(0) ? 1.0 : (dim < T(0) ? -1.0 : 0.0);
            grad->data[2 * k] = T(inv * sgn_re - sw * double(g0[k]));
            grad->data[2 * k + 1] = T(inv * sgn_im - sw * double(g1[k]));
        }
    }
    return terms;
}

template LossTerms hybrid_loss<float>(const SpectrumT<float> &, const SpectrumT<float> &,
                                      double, SpectrumT<float> *);
template LossTerms hybrid_loss<double>(const SpectrumT<double> &, const SpectrumT<double> &,
                                       double, SpectrumT<double> *);

// ------------------------------------------------------------------- schedule

std::array<float, 3> smoothed_position(const std::array<float, 3> &normalized,
                                       std::int64_t iteration, const NoiseSchedule &sched,
                                       Rng &rng)
{
    if (sched.scale == 0.0 || iteration >= sched.threshold)
        return normalized; // no draws at all once the schedule has decayed
    const double amp = sched.scale * (2.0 / std::cbrt(double(std::max(sched.train_count, 1)))) *
                       (1.0 - double(iteration) / double(sched.threshold));
    std::array<float, 3> out;
    for (int a = 0; a < 3; a++)
        out[a] = normalized[a] + float(rng.normal() * amp);
    return out;
}

// --------------------------------------------------------------------- split

Split split_from_string(const std::string &s)
{
    if (s == "train")
        return Split::train;
    if (s == "test")
        return Split::test;
    if (s == "all")
        return Split::all;
    throw std::invalid_argument("unknown split: " + s);
}

namespace
{
    std::vector<int> split_indices(const sim::Dataset &ds, Split split)
    {
        switch (split)
        {
        case Split::train:
            return ds.train_indices;
        case Split::test:
            return ds.test_indices;
        default:
        {
            std::vector<int> all(ds.samples.size());
            std::iota(all.begin(), all.end(), 0);
            return all;
        }
        }
    }

    // Pointers to every layer of a net (or grads), in the canonical order
    template <class Net>
    auto layer_list(Net &net)
    {
        std::vector<decltype(&net.head_center)> out;
        for (auto &l : net.trunk)
            out.push_back(&l);
        out.push_back(&net.head_center);
        out.push_back(&net.head_response);
        out.push_back(&net.head_atten);
        return out;
    }
} // namespace

// ----------------------------------------------------------------- rendering

std::array<float, 3> normalize_position(const Checkpoint &ck, const std::array<float, 3> &pos)
{
    std::array<float, 3> out;
    for (int a = 0; a < 3; a++)
    {
        const double range = ck.bbox_max[a] - ck.bbox_min[a];
        out[a] = range > 0.0 ? float((double(pos[a]) - ck.bbox_min[a]) / range) : 0.5f;
    }
    return out;
}

Spectrum render_at(const Checkpoint &ck, const std::array<float, 3> &position)
{
    deform::DeformWorkspace dws;
    splat::Residuals res;
    deform::predict_residuals(ck.net, ck.set, normalize_position(ck, position), dws, res);
    return splat::rasterize(ck.set, &res, ck.config.raster);
}

// ------------------------------------------------------------------- training

Checkpoint train(const sim::Dataset &ds, const TrainConfig &cfg, const std::string &log_path,
                 const Checkpoint *resume)
{
    if (ds.samples.empty())
        throw std::invalid_argument("dataset has no samples");
    if (ds.train_indices.empty())
        throw std::invalid_argument("dataset has no training split");
    if (cfg.coarse_iters < 0 || cfg.fine_iters < 0)
        throw std::invalid_argument("iteration counts must be >= 0");
    if (!(cfg.lambda1 >= 0.0 && cfg.lambda1 <= 1.0))
        throw std::invalid_argument("lambda1 must lie in [0, 1]");

    Rng rng(cfg.seed);

    Checkpoint ck;
    if (resume)
    {
        if (!(resume->config == cfg))
            throw std::invalid_argument("resume checkpoint was trained with a different config");
        if (resume->manifest_hash != ds.manifest_hash)
            throw hash_mismatch("resume checkpoint was trained on a different dataset");
        ck = *resume;
    }
    else
    {
        // Draw order: Gaussian init first, then the deform-net init
        ck.set = splat::init_random(ds.grid, cfg.primitives, rng);
        ck.net.enc = cfg.enc;
        ck.net.width = cfg.width;
        ck.net.init(rng);
        ck.config = cfg;
        ck.iteration = 0;
        ck.manifest_hash = ds.manifest_hash;
        ck.bbox_min = ds.bbox_min;
        ck.bbox_max = ds.bbox_max;
    }

    const std::int64_t total = cfg.coarse_iters + cfg.fine_iters;
    if (ck.iteration >= total)
        return ck;

    std::ofstream log;
    if (!log_path.empty())
    {
        log.open(log_path, std::ios::binary);
        if (!log)
            throw std::runtime_error("cannot open " + log_path + " for writing");
        log << "iteration,stage,loss,l1_term,ssim_term,wall_ms\n";
    }

    NoiseSchedule sched;
    sched.scale = cfg.anneal_scale;
    sched.threshold = cfg.anneal_threshold;
    sched.train_count = int(ds.train_indices.size());

    // Optimizer state (not persisted in checkpoints; stage entry resets it)
    AdamState opt_center, opt_chol, opt_atten, opt_resp;
    std::vector<AdamState> opt_w(11), opt_b(11);
    auto reset_opt = [&] {
        opt_center.reset(ck.set.center_raw.size());
        opt_chol.reset(ck.set.cholesky.size());
        opt_atten.reset(ck.set.atten_logit.size());
        opt_resp.reset(ck.set.response.size());
        auto layers = layer_list(ck.net);
        for (std::size_t i = 0; i < layers.size(); i++)
        {
            opt_w[i].reset(layers[i]->w.size());
            opt_b[i].reset(layers[i]->b.size());
        }
    };

    const AdamParams hp_gauss = {cfg.lr_gaussian, 0.9, 0.999, 1e-8};
    const AdamParams hp_mlp = {cfg.lr_mlp, 0.9, 0.999, 1e-8};

    // Below a fraction of the cell pitch a kernel underflows to zero at
    // every cell centre, so the primitive stops receiving gradients and can
    // never grow back.  Projecting the Cholesky diagonals after each step
    // parks shrinking primitives at the smallest useful footprint instead,
    // where they remain trainable and can be recycled.
    const float el_width_floor = float(pi / 2.0 / ds.grid.n_elevation / 3.0);
    const float az_width_floor = float(2.0 * pi / ds.grid.n_azimuth / 3.0);
    auto project_widths = [&] {
        for (int p = 0; p < ck.set.n; p++)
        {
            float &l1 = ck.set.cholesky[3 * std::size_t(p)];
            float &l3 = ck.set.cholesky[3 * std::size_t(p) + 2];
            l1 = std::max(l1, el_width_floor);
            l3 = std::max(l3, az_width_floor);
        }
    };

    Spectrum pred, lgrad;
    splat::RasterWorkspace rws;
    splat::RenderGrads grads;
    splat::Residuals res, res_grad;
    deform::DeformWorkspace dws;
    deform::DeformGrads dgrads;
    dgrads.resize_like(ck.net);

    bool in_fine = ck.iteration >= cfg.coarse_iters;
    reset_opt();

    for (std::int64_t it = ck.iteration; it < total; it++)
    {
        const auto t0 = std::chrono::steady_clock::now();
        const bool coarse = it < cfg.coarse_iters;
        if (!coarse && !in_fine)
        {
            // Stage boundary: the fine stage starts with fresh moments
            reset_opt();
            in_fine = true;
        }

        const int idx = ds.train_indices[rng.index(ds.train_indices.size())];
        const sim::DatasetSample &sample = ds.samples[std::size_t(idx)];

        LossTerms terms;
        if (coarse)
        {
            splat::rasterize<float>(ck.set, nullptr, cfg.raster, pred, rws);
            terms = hybrid_loss(pred, sample.spectrum, cfg.lambda1, &lgrad);
            splat::rasterize_backward<float>(ck.set, nullptr, cfg.raster, lgrad, grads, rws);
            opt_center.step(ck.set.center_raw.data(), grads.center_raw.data(),
                            ck.set.center_raw.size(), hp_gauss);
            opt_chol.step(ck.set.cholesky.data(), grads.cholesky.data(), ck.set.cholesky.size(),
                          hp_gauss);
            project_widths();
            opt_atten.step(ck.set.atten_logit.data(), grads.atten_logit.data(),
                           ck.set.atten_logit.size(), hp_gauss);
            opt_resp.step(ck.set.response.data(), grads.response.data(), ck.set.response.size(),
                          hp_gauss);
        }
        else
        {
            const std::int64_t fine_it = it - cfg.coarse_iters;
            const auto pos = smoothed_position(ds.normalize_position(sample.position), fine_it,
                                               sched, rng);
            deform::predict_residuals(ck.net, ck.set, pos, dws, res);
            splat::rasterize<float>(ck.set, &res, cfg.raster, pred, rws);
            terms = hybrid_loss(pred, sample.spectrum, cfg.lambda1, &lgrad);
            splat::rasterize_backward<float>(ck.set, &res, cfg.raster, lgrad, grads, rws);

            res_grad.resize(ck.set.n);
            res_grad.d_center = grads.d_center;
            res_grad.d_response = grads.d_response;
            res_grad.d_atten = grads.d_atten;
            deform::deform_backward(ck.net, dws, res_grad, dgrads);

            auto layers = layer_list(ck.net);
            auto glayers = layer_list(dgrads);
            for (std::size_t i = 0; i < layers.size(); i++)
            {
                opt_w[i].step(layers[i]->w.data(), glayers[i]->w.data(), layers[i]->w.size(),
                              hp_mlp);
                opt_b[i].step(layers[i]->b.data(), glayers[i]->b.data(), layers[i]->b.size(),
                              hp_mlp);
            }
            // All Gaussian fields except the frozen centers keep training
            opt_chol.step(ck.set.cholesky.data(), grads.cholesky.data(), ck.set.cholesky.size(),
                          hp_gauss);
            project_widths();
            opt_atten.step(ck.set.atten_logit.data(), grads.atten_logit.data(),
                           ck.set.atten_logit.size(), hp_gauss);
            opt_resp.step(ck.set.response.data(), grads.response.data(), ck.set.response.size(),
                          hp_gauss);
        }

        ck.iteration = it + 1;
        if (log.is_open())
        {
            const double ms = std::chrono::duration<double, std::milli>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count();
            log << it + 1 << ',' << (coarse ? "coarse" : "fine") << ',' << fmt_g9(terms.loss)
                << ',' << fmt_g9(terms.l1_term) << ',' << fmt_g9(terms.ssim_term) << ','
                << fmt_g9(ms) << '\n';
        }
    }
    return ck;
}

std::vector<MetricRow> evaluate(const Checkpoint &ck, const sim::Dataset &ds, Split split)
{
    if (ck.manifest_hash != ds.manifest_hash)
        throw hash_mismatch("checkpoint was trained on a different dataset");
    const auto indices = split_indices(ds, split);
    std::vector<MetricRow> rows;
    rows.reserve(indices.size());

    deform::DeformWorkspace dws;
    splat::Residuals res;
    splat::RasterWorkspace rws;
    Spectrum pred;
    for (int idx : indices)
    {
        const auto &sample = ds.samples[std::size_t(idx)];
        deform::predict_residuals(ck.net, ck.set, normalize_position(ck, sample.position), dws,
                                  res);
        splat::rasterize<float>(ck.set, &res, ck.config.raster, pred, rws);
        MetricRow row;
        row.sample_id = idx;
        row.psnr_db = psnr(pred, sample.spectrum);
        row.ssim = ssim(pred, sample.spectrum);
        row.l1 = l1(pred, sample.spectrum);
        rows.push_back(row);
    }
    return rows;
}

} // namespace wrfsplat::train
