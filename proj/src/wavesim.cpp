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

#include "wrfsplat/wavesim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace wrfsplat::sim
{

int ArrayConfig::side() const
{
    if (k_elements < 1)
        throw std::invalid_argument("k_elements must be >= 1");
    int m = int(std::lround(std::sqrt(double(k_elements))));
    if (m * m != k_elements)
        throw std::invalid_argument("k_elements must be a perfect square");
    return m;
}

std::vector<ElementCoord> element_layout(const ArrayConfig &array)
{
    const int m_side = array.side();
    std::vector<ElementCoord> out;
    out.reserve(std::size_t(array.k_elements));
    for (int m = 1; m <= m_side; m++)
        for (int n = 1; n <= m_side; n++)
        {
            ElementCoord e;
            e.r = array.spacing * std::sqrt(double((m - 1) * (m - 1) + (n - 1) * (n - 1)));
            e.beta = std::atan2(double(m - 1), double(n - 1));
            out.push_back(e);
        }
    return out;
}

double phase_shift(const ElementCoord &e, double azimuth, double elevation, double wavelength)
{
    double raw = -2.0 * pi * e.r * std::cos(azimuth - e.beta) * std::cos(elevation) / wavelength;
    double w = std::fmod(raw, 2.0 * pi);
    if (w < 0.0)
        w += 2.0 * pi;
    return w;
}

std::string to_string(MobilityMode m)
{
    return m == MobilityMode::tx_moving ? "tx_moving" : "rx_moving";
}

MobilityMode mobility_from_string(const std::string &s)
{
    if (s == "tx_moving")
        return MobilityMode::tx_moving;
    if (s == "rx_moving")
        return MobilityMode::rx_moving;
    throw std::invalid_argument("unknown mobility mode: " + s);
}

namespace
{
    struct AxisImage
    {
        double coord;
        int bounces;
    };

    // Mirror images of coordinate s across the pair of walls at 0 and L:
    // 2qL + s reaches s after |2q| reflections, 2qL - s after |2q - 1|.
    std::vector<AxisImage> axis_images(double s, double room_len, int max_bounces)
    {
        std::vector<AxisImage> out;
        const int qmax = max_bounces / 2 + 1;
        for (int q = -qmax; q <= qmax; q++)
        {
            int even = std::abs(2 * q);
            if (even <= max_bounces)
                out.push_back({2.0 * q * room_len + s, even});
            int odd = q >= 1 ? 2 * q - 1 : 1 - 2 * q;
            if (odd <= max_bounces)
                out.push_back({2.0 * q * room_len - s, odd});
        }
        return out;
    }

    void require_inside(const std::array<double, 3> &p, const std::array<double, 3> &room,
                        const char *what)
    {
        for (int a = 0; a < 3; a++)
            if (!(p[a] >= 0.0 && p[a] <= room[a]))
                throw std::invalid_argument(std::string(what) + " lies outside the room");
    }
} // namespace

std::vector<PropagationPath> trace_paths(const Scene &scene, const std::array<double, 3> &moving)
{
    require_inside(moving, scene.room, "moving endpoint");
    require_inside(scene.fixed_node, scene.room, "fixed node");
    if (scene.max_bounces < 0)
        throw std::invalid_argument("max_bounces must be >= 0");
    if (!(scene.reflectivity >= 0.0 && scene.reflectivity <= 1.0))
        throw std::invalid_argument("reflectivity must lie in [0, 1]");

    const bool tx_moves = scene.mode == MobilityMode::tx_moving;
    const std::array<double, 3> &src = tx_moves ? moving : scene.fixed_node;
    const std::array<double, 3> &rcv = tx_moves ? scene.fixed_node : moving;
    const double lambda = scene.array.wavelength;

    const auto xs = axis_images(src[0], scene.room[0], scene.max_bounces);
    const auto ys = axis_images(src[1], scene.room[1], scene.max_bounces);
    const auto zs = axis_images(src[2], scene.room[2], scene.max_bounces);

    std::vector<PropagationPath> paths;
    for (const auto &ix : xs)
        for (const auto &iy : ys)
        {
            if (ix.bounces + iy.bounces > scene.max_bounces)
                continue;
            for (const auto &iz : zs)
            {
                const int bounces = ix.bounces + iy.bounces + iz.bounces;
                if (bounces > scene.max_bounces)
                    continue;
                const double dx = ix.coord - rcv[0];
                const double dy = iy.coord - rcv[1];
                const double dz = iz.coord - rcv[2];
                const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
                if (d < 1e-9)
                    continue; // endpoints coincide, no geometric path
                const double elevation = std::atan2(dz, std::hypot(dx, dy));
                if (elevation < 0.0)
                    continue; // receiving array only sees the upper hemisphere
                double azimuth = std::atan2(dy, dx);
                if (azimuth < 0.0)
                    azimuth += 2.0 * pi;

                PropagationPath p;
                p.path_length = d;
                p.azimuth = azimuth;
                p.elevation = elevation;
                p.bounces = bounces;
                const double amp = lambda / (4.0 * pi * d) * std::pow(scene.reflectivity, bounces);
                p.gain = std::polar(amp, -2.0 * pi * d / lambda);
                paths.push_back(p);
            }
        }

    std::sort(paths.begin(), paths.end(), [](const PropagationPath &a, const PropagationPath &b) {
        return std::tie(a.bounces, a.path_length, a.azimuth, a.elevation) <
               std::tie(b.bounces, b.path_length, b.azimuth, b.elevation);
    });
    return paths;
}

std::vector<std::complex<double>> channel_response(const std::vector<PropagationPath> &paths,
                                                   const ArrayConfig &array)
{
    const auto elems = element_layout(array);
    std::vector<std::complex<double>> h(elems.size(), {0.0, 0.0});
    for (std::size_t k = 0; k < elems.size(); k++)
        for (const auto &p : paths)
            h[k] += p.gain * std::polar(1.0, phase_shift(elems[k], p.azimuth, p.elevation,
                                                         array.wavelength));
    return h;
}

SteeringTable build_steering_table(const ArrayConfig &array, const AngularGrid &grid)
{
    if (grid.cells() <= 0)
        throw std::invalid_argument("empty angular grid");
    const auto elems = element_layout(array);
    SteeringTable t;
    t.grid = grid;
    t.k_elements = array.k_elements;
    t.wr.resize(std::size_t(grid.cells()) * elems.size());
    t.wi.resize(t.wr.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < grid.n_elevation; i++)
    {
        const double el = grid.elevation_center(i);
        for (int j = 0; j < grid.n_azimuth; j++)
        {
            const double az = grid.azimuth_center(j);
            const std::size_t base = (std::size_t(i) * grid.n_azimuth + j) * elems.size();
            for (std::size_t k = 0; k < elems.size(); k++)
            {
                const double a = phase_shift(elems[k], az, el, array.wavelength);
                t.wr[base + k] = std::cos(a);
                t.wi[base + k] = -std::sin(a); // w = e^{-j a}
            }
        }
    }
    return t;
}

SpectrumT<double> beam_scan(const std::vector<std::complex<double>> &channel,
                            const SteeringTable &table)
{
    const std::size_t k = channel.size();
    if (int(k) != table.k_elements)
        throw std::invalid_argument("channel length does not match the steering table");

    // Phase-only channel entries: u = h / |h|, with u = 1 for a zero entry
    std::vector<double> ur(k), ui(k);
    for (std::size_t e = 0; e < k; e++)
    {
        const double mag = std::abs(channel[e]);
        if (mag == 0.0)
        {
            ur[e] = 1.0;
            ui[e] = 0.0;
        }
        else
        {
            ur[e] = channel[e].real() / mag;
            ui[e] = channel[e].imag() / mag;
        }
    }

    SpectrumT<double> out(table.grid);
    const double inv_k = 1.0 / double(k);
#pragma omp parallel for schedule(static)
    for (int cell = 0; cell < table.grid.cells(); cell++)
    {
        const double *wr = table.wr.data() + std::size_t(cell) * k;
        const double *wi = table.wi.data() + std::size_t(cell) * k;
        double ar = 0.0, ai = 0.0;
        for (std::size_t e = 0; e < k; e++)
        {
            ar += wr[e] * ur[e] - wi[e] * ui[e];
            ai += wr[e] * ui[e] + wi[e] * ur[e];
        }
        out.data[2 * std::size_t(cell)] = ar * inv_k;
        out.data[2 * std::size_t(cell) + 1] = ai * inv_k;
    }
    return out;
}

SpectrumT<double> beam_scan(const std::vector<std::complex<double>> &channel,
                            const ArrayConfig &array, const AngularGrid &grid)
{
    return beam_scan(channel, build_steering_table(array, grid));
}

} // namespace wrfsplat::sim
