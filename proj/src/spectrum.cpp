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

#include "wrfsplat/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "wrfsplat/common.hpp"

namespace wrfsplat
{

double AngularGrid::elevation_cell() const { return (pi / 2.0) / n_elevation; }
double AngularGrid::azimuth_cell() const { return (2.0 * pi) / n_azimuth; }
double AngularGrid::elevation_center(int i) const { return (i + 0.5) * elevation_cell(); }
double AngularGrid::azimuth_center(int j) const { return (j + 0.5) * azimuth_cell(); }

namespace
{
    template <class T>
    void require_same_shape(const SpectrumT<T> &a, const SpectrumT<T> &b)
    {
        if (!(a.grid == b.grid) || a.data.size() != b.data.size())
            throw std::invalid_argument("spectrum shape mismatch");
    }

    template <class T>
    void require_finite(const SpectrumT<T> &s)
    {
        for (T v : s.data)
            if (!std::isfinite(double(v)))
                throw std::domain_error("spectrum contains a non-finite value");
    }

    // 11-tap Gaussian window, sigma 1.5, normalized to unit sum
    constexpr int win = 11;
    constexpr int half = win / 2;

    const double *window_taps()
    {
        static const auto taps = [] {
            std::array<double, win> g{};
            double sum = 0.0;
            for (int i = 0; i < win; i++)
            {
                double d = i - half;
                g[i] = std::exp(-0.5 * d * d / (1.5 * 1.5));
                sum += g[i];
            }
            for (double &v : g)
                v /= sum;
            return g;
        }();
        return taps.data();
    }

    // Valid-region separable correlation: src is H x W, dst is (H-10) x (W-10)
    void conv_valid(const double *src, int h, int w, std::vector<double> &tmp, double *dst)
    {
        const double *g = window_taps();
        const int vw = w - win + 1, vh = h - win + 1;
        tmp.assign(std::size_t(h) * vw, 0.0);
        for (int i = 0; i < h; i++)
        {
            const double *row = src + std::size_t(i) * w;
            double *out = tmp.data() + std::size_t(i) * vw;
            for (int t = 0; t < win; t++)
            {
                const double gt = g[t];
                for (int j = 0; j < vw; j++)
                    out[j] += gt * row[j + t];
            }
        }
        for (int i = 0; i < vh; i++)
        {
            double *out = dst + std::size_t(i) * vw;
            std::fill(out, out + vw, 0.0);
            for (int t = 0; t < win; t++)
            {
                const double gt = g[t];
                const double *row = tmp.data() + std::size_t(i + t) * vw;
                for (int j = 0; j < vw; j++)
                    out[j] += gt * row[j];
            }
        }
    }

    // Adjoint of conv_valid: spread a (H-10) x (W-10) map back onto H x W
    void scatter_valid(const double *src, int h, int w, std::vector<double> &tmp, double *dst)
    {
        const double *g = window_taps();
        const int vw = w - win + 1, vh = h - win + 1;
        tmp.assign(std::size_t(vh) * w, 0.0);
        for (int i = 0; i < vh; i++)
        {
            const double *row = src + std::size_t(i) * vw;
            double *out = tmp.data() + std::size_t(i) * w;
            for (int t = 0; t < win; t++)
            {
                const double gt = g[t];
                for (int j = 0; j < vw; j++)
                    out[j + t] += gt * row[j];
            }
        }
        std::fill(dst, dst + std::size_t(h) * w, 0.0);
        for (int i = 0; i < vh; i++)
        {
            const double *row = tmp.data() + std::size_t(i) * w;
            for (int t = 0; t < win; t++)
            {
                const double gt = g[t];
                double *out = dst + std::size_t(i + t) * w;
                for (int j = 0; j < w; j++)
                    out[j] += gt * row[j];
            }
        }
    }
} // namespace

template <class T>
std::vector<T> magnitude(const SpectrumT<T> &s)
{
    std::vector<T> out(s.grid.cells());
    for (std::size_t k = 0; k < out.size(); k++)
        out[k] = T(std::hypot(double(s.data[2 * k]), double(s.data[2 * k + 1])));
    return out;
}

template <class T>
double psnr(const SpectrumT<T> &a, const SpectrumT<T> &b, double peak)
{
    require_same_shape(a, b);
    require_finite(a);
    require_finite(b);
    double mse = 0.0;
    for (std::size_t k = 0; k < a.data.size(); k++)
    {
        double d = double(a.data[k]) - double(b.data[k]);
        mse += d * d;
    }
    mse /= double(a.data.size());
    if (mse <= 0.0)
        return 100.0;
    return std::min(100.0, 10.0 * std::log10(peak * peak / mse));
}

template <class T>
double l1(const SpectrumT<T> &a, const SpectrumT<T> &b)
{
    require_same_shape(a, b);
    require_finite(a);
    require_finite(b);
    double sum = 0.0;
    for (std::size_t k = 0; k < a.data.size(); k++)
        sum += std::abs(double(a.data[k]) - double(b.data[k]));
    return sum / double(a.data.size());
}

namespace detail
{
    // All statistics run in double regardless of T: the float-path loss then
    // inherits double-precision gradients, and float/double instantiations
    // agree to roundoff, which the test oracles rely on.
    template <class T>
    double ssim_channel(const SpectrumT<T> &x, const SpectrumT<T> &y, int c,
                        double peak, T *grad)
    {
        const int h = x.grid.n_elevation, w = x.grid.n_azimuth;
        if (h < win || w < win)
            throw std::invalid_argument("grid too small for the 11x11 SSIM window");
        const int vh = h - win + 1, vw = w - win + 1;
        const std::size_t cells = std::size_t(h) * w, wins = std::size_t(vh) * vw;
        const double c1 = (0.01 * peak) * (0.01 * peak);
        const double c2 = (0.03 * peak) * (0.03 * peak);

        std::vector<double> xs(cells), ys(cells), prod(cells);
        for (std::size_t k = 0; k < cells; k++)
        {
            xs[k] = double(x.data[2 * k + c]);
            ys[k] = double(y.data[2 * k + c]);
        }

        std::vector<double> tmp, mx(wins), my(wins), sxx(wins), syy(wins), sxy(wins);
        conv_valid(xs.data(), h, w, tmp, mx.data());
        conv_valid(ys.data(), h, w, tmp, my.data());
        for (std::size_t k = 0; k < cells; k++)
            prod[k] = xs[k] * xs[k];
        conv_valid(prod.data(), h, w, tmp, sxx.data());
        for (std::size_t k = 0; k < cells; k++)
            prod[k] = ys[k] * ys[k];
        conv_valid(prod.data(), h, w, tmp, syy.data());
        for (std::size_t k = 0; k < cells; k++)
            prod[k] = xs[k] * ys[k];
        conv_valid(prod.data(), h, w, tmp, sxy.data());

        // Per-window SSIM; f1/f2/f3 are the pieces of dS/dx_k grouped as
        // constant, y_k-proportional and x_k-proportional (see scatter below)
        std::vector<double> f1, f2, f3;
        if (grad)
        {
            f1.resize(wins);
            f2.resize(wins);
            f3.resize(wins);
        }
        double total = 0.0;
        for (std::size_t k = 0; k < wins; k++)
        {
            const double ux = mx[k], uy = my[k];
            const double vx = sxx[k] - ux * ux;
            const double vy = syy[k] - uy * uy;
            const double vxy = sxy[k] - ux * uy;
            const double a1 = 2.0 * ux * uy + c1, a2 = 2.0 * vxy + c2;
            const double b1 = ux * ux + uy * uy + c1, b2 = vx + vy + c2;
            const double s = (a1 * a2) / (b1 * b2);
            total += s;
            if (grad)
            {
                f1[k] = 2.0 * uy * (a2 - a1) / (b1 * b2) - 2.0 * s * ux / b1 + 2.0 * s * ux / b2;
                f2[k] = 2.0 * a1 / (b1 * b2);
                f3[k] = -2.0 * s / b2;
            }
        }
        const double value = total / double(wins);

        if (grad)
        {
            std::vector<double> g1(cells), g2(cells), g3(cells);
            scatter_valid(f1.data(), h, w, tmp, g1.data());
            scatter_valid(f2.data(), h, w, tmp, g2.data());
            scatter_valid(f3.data(), h, w, tmp, g3.data());
            const double inv = 1.0 / double(wins);
            for (std::size_t k = 0; k < cells; k++)
                grad[k] = T((g1[k] + g2[k] * ys[k] + g3[k] * xs[k]) * inv);
        }
        return value;
    }

    template double ssim_channel<float>(const SpectrumT<float> &, const SpectrumT<float> &,
                                        int, double, float *);
    template double ssim_channel<double>(const SpectrumT<double> &, const SpectrumT<double> &,
                                         int, double, double *);
} // namespace detail

template <class T>
double ssim(const SpectrumT<T> &a, const SpectrumT<T> &b, double peak)
{
    require_same_shape(a, b);
    require_finite(a);
    require_finite(b);
    double s0 = detail::ssim_channel(a, b, 0, peak, static_cast<T *>(nullptr));
    double s1 = detail::ssim_channel(a, b, 1, peak, static_cast<T *>(nullptr));
    return 0.5 * (s0 + s1);
}

void write_metrics_csv(const std::string &path, const std::vector<MetricRow> &rows)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot open " + path + " for writing");
    os << "sample_id,psnr_db,ssim,l1\n";
    for (const auto &r : rows)
        os << r.sample_id << ',' << fmt_g9(r.psnr_db) << ',' << fmt_g9(r.ssim) << ','
           << fmt_g9(r.l1) << '\n';
    if (!os)
        throw std::runtime_error("write failed: " + path);
}

double median(std::vector<double> values)
{
    if (values.empty())
        throw std::invalid_argument("median of an empty set");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1)
        return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double mean(const std::vector<double> &values)
{
    if (values.empty())
        throw std::invalid_argument("mean of an empty set");
    double sum = 0.0;
    for (double v : values)
        sum += v;
    return sum / double(values.size());
}

template std::vector<float> magnitude<float>(const SpectrumT<float> &);
template std::vector<double> magnitude<double>(const SpectrumT<double> &);
template double psnr<float>(const SpectrumT<float> &, const SpectrumT<float> &, double);
template double psnr<double>(const SpectrumT<double> &, const SpectrumT<double> &, double);
template double l1<float>(const SpectrumT<float> &, const SpectrumT<float> &);
template double l1<double>(const SpectrumT<double> &, const SpectrumT<double> &);
template double ssim<float>(const SpectrumT<float> &, const SpectrumT<float> &, double);
template double ssim<double>(const SpectrumT<double> &, const SpectrumT<double> &, double);

} // namespace wrfsplat
