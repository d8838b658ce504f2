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

#ifndef WRFSPLAT_SPECTRUM_HPP
#define WRFSPLAT_SPECTRUM_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace wrfsplat
{

// Discretization of the upper hemisphere. Cell (i, j) covers
// elevations [i, i+1) * (pi/2)/n_elevation and azimuths [j, j+1) * 2pi/n_azimuth;
// rendering and physics always evaluate at the cell center.
struct AngularGrid
{
    int n_elevation = 0; // rows, elevation in [0, pi/2)
    int n_azimuth = 0;   // columns, azimuth in [0, 2pi)

    int cells() const { return n_elevation * n_azimuth; }
    double elevation_cell() const;        // cell height in radians
    double azimuth_cell() const;          // cell width in radians
    double elevation_center(int i) const; // center elevation of row i
    double azimuth_center(int j) const;   // center azimuth of column j

    bool operator==(const AngularGrid &) const = default;
};

// A complex-valued angular spectrum stored as two interleaved real channels
// (re, im) per cell, row-major with elevation as the slow axis. float is the
// runtime scalar; double instantiations exist for numerical test oracles.
template <class T>
struct SpectrumT
{
    AngularGrid grid;
    std::vector<T> data; // size 2 * grid.cells(), layout [re, im] per cell

    SpectrumT() = default;
    explicit SpectrumT(AngularGrid g) : grid(g), data(std::size_t(2) * g.cells(), T(0)) {}

    T &re(int i, int j) { return data[2 * (std::size_t(i) * grid.n_azimuth + j)]; }
    T &im(int i, int j) { return data[2 * (std::size_t(i) * grid.n_azimuth + j) + 1]; }
    const T &re(int i, int j) const { return data[2 * (std::size_t(i) * grid.n_azimuth + j)]; }
    const T &im(int i, int j) const { return data[2 * (std::size_t(i) * grid.n_azimuth + j) + 1]; }
};

using Spectrum = SpectrumT<float>;

// Per-cell complex magnitude, row-major, same grid shape as the input
template <class T>
std::vector<T> magnitude(const SpectrumT<T> &s);

// Peak signal-to-noise ratio in dB over both channels jointly, peak = 1.0
// (spectra are normalized to unit maximum magnitude at dataset generation).
// The value is clamped to a 100 dB ceiling so identical inputs compare equal.
// Throws std::invalid_argument on shape mismatch, std::domain_error on NaN/Inf.
template <class T>
double psnr(const SpectrumT<T> &a, const SpectrumT<T> &b, double peak = 1.0);

// Mean structural similarity with an 11x11 Gaussian window (sigma 1.5),
// stabilizers C1 = (0.01*peak)^2 and C2 = (0.03*peak)^2, computed per channel
// over valid (fully interior) windows and averaged across the two channels.
// Requires both grid dimensions >= 11.
template <class T>
double ssim(const SpectrumT<T> &a, const SpectrumT<T> &b, double peak = 1.0);

// Mean absolute difference over all 2*H*W real values
template <class T>
double l1(const SpectrumT<T> &a, const SpectrumT<T> &b);

namespace detail
{
    // SSIM of one channel plus (optionally) the gradient of its mean w.r.t.
    // the first argument's channel values. Channel c is 0 (re) or 1 (im);
    // grad, when non-null, must hold grid.cells() entries and is overwritten.
    // Shared by the metric above and the training loss.
    template <class T>
    double ssim_channel(const SpectrumT<T> &x, const SpectrumT<T> &y, int c,
                        double peak, T *grad);
} // namespace detail

// One row of a metrics report (cmd_eval output)
struct MetricRow
{
    std::int64_t sample_id = 0; // dataset sample index
    double psnr_db = 0.0;
    double ssim = 0.0;
    double l1 = 0.0;
};

// Write rows as CSV with header "sample_id,psnr_db,ssim,l1". Deterministic
// formatting (fmt_g9), so fixed seeds give byte-identical files.
void write_metrics_csv(const std::string &path, const std::vector<MetricRow> &rows);

// Aggregates quoted in reports: median PSNR / median SSIM / mean L1.
// Median of an even-length set is the mean of the two middle order statistics.
double median(std::vector<double> values);
double mean(const std::vector<double> &values);

} // namespace wrfsplat

#endif // WRFSPLAT_SPECTRUM_HPP
