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

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "wrfsplat/common.hpp"
#include "wrfsplat/spectrum.hpp"

using namespace wrfsplat;

namespace
{

SpectrumT<double> random_spectrum(const AngularGrid &g, Rng &rng)
{
    SpectrumT<double> s(g);
    for (auto &v : s.data)
        v = rng.uniform();
    return s;
}

// Independent SSIM oracle: explicit 11x11 Gaussian-weighted window statistics
// per valid position, no separable convolution.
double ssim_oracle_channel(const SpectrumT<double> &x, const SpectrumT<double> &y, int c)
{
    const int win = 11, half = 5;
    double w2d[11][11];
    double wsum = 0.0;
    for (int i = 0; i < win; i++)
        for (int j = 0; j < win; j++)
        {
            const double di = i - half, dj = j - half;
            w2d[i][j] = std::exp(-0.5 * (di * di + dj * dj) / (1.5 * 1.5));
            wsum += w2d[i][j];
        }
    for (int i = 0; i < win; i++)
        for (int j = 0; j < win; j++)
            w2d[i][j] /= wsum;

    const int h = x.grid.n_elevation, w = x.grid.n_azimuth;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0.0;
    int wins = 0;
    for (int r = 0; r + win <= h; r++)
        for (int q = 0; q + win <= w; q++)
        {
            double ux = 0, uy = 0, xx = 0, yy = 0, xy = 0;
            for (int i = 0; i < win; i++)
                for (int j = 0; j < win; j++)
                {
                    const std::size_t k = std::size_t(r + i) * w + (q + j);
                    const double a = x.data[2 * k + c], b = y.data[2 * k + c];
                    ux += w2d[i][j] * a;
                    uy += w2d[i][j] * b;
                    xx += w2d[i][j] * a * a;
                    yy += w2d[i][j] * b * b;
                    xy += w2d[i][j] * a * b;
                }
            const double vx = xx - ux * ux, vy = yy - uy * uy, vxy = xy - ux * uy;
            total += (2 * ux * uy + c1) * (2 * vxy + c2) /
                     ((ux * ux + uy * uy + c1) * (vx + vy + c2));
            wins++;
        }
    return total / wins;
}

} // namespace

TEST_SUITE("spectrum")
{
    TEST_CASE("angular grid geometry")
    {
        const AngularGrid g{90, 360};
        CHECK(g.cells() == 90 * 360);
        CHECK(g.elevation_cell() == doctest::Approx((pi / 2) / 90).epsilon(1e-15));
        CHECK(g.azimuth_cell() == doctest::Approx((2 * pi) / 360).epsilon(1e-15));
        CHECK(g.elevation_center(0) == doctest::Approx(0.5 * (pi / 2) / 90).epsilon(1e-15));
        CHECK(g.azimuth_center(359) == doctest::Approx(359.5 * (2 * pi) / 360).epsilon(1e-15));
        CHECK(g == AngularGrid{90, 360});
        CHECK_FALSE(g == AngularGrid{45, 360});
    }

    TEST_CASE("magnitude is the complex modulus per cell")
    {
        SpectrumT<double> s(AngularGrid{1, 2});
        s.data = {3.0, -4.0, 0.0, 0.0};
        const auto m = magnitude(s);
        REQUIRE(m.size() == 2);
        CHECK(m[0] == doctest::Approx(5.0).epsilon(1e-15)); // |3 - 4i| = 5
        CHECK(m[1] == 0.0);
    }

    TEST_CASE("psnr matches a hand-computed case")
    {
        SpectrumT<double> a(AngularGrid{1, 2}), b(AngularGrid{1, 2});
        a.data = {1.0, 0.0, 0.0, 0.0};
        b.data = {0.5, 0.0, 0.0, 0.0};
        // mse = 0.25 / 4 = 0.0625 -> 10*log10(1/0.0625) = 10*log10(16)
        CHECK(psnr(a, b) == doctest::Approx(12.041199826559248).epsilon(1e-12));
        CHECK(psnr(a, b) == psnr(b, a));
    }

    TEST_CASE("psnr caps at 100 dB for identical inputs")
    {
        Rng rng(7);
        const auto a = random_spectrum({12, 16}, rng);
        CHECK(psnr(a, a) == 100.0);
    }

    TEST_CASE("psnr rejects shape mismatches and non-finite input")
    {
        SpectrumT<double> a(AngularGrid{2, 2}), b(AngularGrid{2, 4});
        CHECK_THROWS_AS(psnr(a, b), std::invalid_argument);
        SpectrumT<double> c(AngularGrid{2, 2}), d(AngularGrid{2, 2});
        c.data[3] = std::nan("");
        CHECK_THROWS_AS(psnr(c, d), std::domain_error);
        CHECK_THROWS_AS(l1(c, d), std::domain_error);
    }

    TEST_CASE("l1 matches a hand-computed case")
    {
        SpectrumT<double> a(AngularGrid{1, 1}), b(AngularGrid{1, 1});
        a.data = {0.25, -0.5};
        b.data = {0.0, 0.0};
        CHECK(l1(a, b) == doctest::Approx(0.375).epsilon(1e-15)); // (0.25 + 0.5) / 2
        CHECK(l1(a, a) == 0.0);
    }

    TEST_CASE("ssim of identical inputs is 1")
    {
        Rng rng(11);
        const auto a = random_spectrum({16, 20}, rng);
        CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    }

    TEST_CASE("ssim agrees with the direct window-statistics oracle")
    {
        Rng rng(13);
        const auto a = random_spectrum({16, 24}, rng);
        const auto b = random_spectrum({16, 24}, rng);
        const double expected =
            0.5 * (ssim_oracle_channel(a, b, 0) + ssim_oracle_channel(a, b, 1));
        CHECK(ssim(a, b) == doctest::Approx(expected).epsilon(1e-9));

        // The float instantiation shares the double statistics path
        SpectrumT<float> af(a.grid), bf(b.grid);
        for (std::size_t k = 0; k < a.data.size(); k++)
        {
            af.data[k] = float(a.data[k]);
            bf.data[k] = float(b.data[k]);
        }
        CHECK(ssim(af, bf) == doctest::Approx(expected).epsilon(1e-5));
    }

    TEST_CASE("ssim channel gradient matches central finite differences")
    {
        Rng rng(17);
        auto x = random_spectrum({12, 14}, rng);
        const auto y = random_spectrum({12, 14}, rng);
        std::vector<double> grad(std::size_t(x.grid.cells()));
        detail::ssim_channel(x, y, 0, 1.0, grad.data());

        const double h = 1e-6;
        for (std::size_t k = 0; k < grad.size(); k += 17) // sampled cells
        {
            const double keep = x.data[2 * k];
            x.data[2 * k] = keep + h;
            const double up = detail::ssim_channel(x, y, 0, 1.0, static_cast<double *>(nullptr));
            x.data[2 * k] = keep - h;
            const double dn = detail::ssim_channel(x, y, 0, 1.0, static_cast<double *>(nullptr));
            x.data[2 * k] = keep;
            const double fd = (up - dn) / (2 * h);
            CHECK(grad[k] == doctest::Approx(fd).epsilon(1e-5));
        }
    }

    TEST_CASE("ssim rejects grids smaller than the window")
    {
        SpectrumT<double> a(AngularGrid{8, 8}), b(AngularGrid{8, 8});
        CHECK_THROWS_AS(ssim(a, b), std::invalid_argument);
    }

    TEST_CASE("metrics csv is byte-stable")
    {
        const std::string path = "test_metrics_tmp.csv";
        write_metrics_csv(path, {{7, 20.0, 0.5, 0.125}, {12, 12.25, 0.875, 0.0625}});
        std::ifstream is(path, std::ios::binary);
        std::stringstream ss;
        ss << is.rdbuf();
        CHECK(ss.str() == "sample_id,psnr_db,ssim,l1\n"
                          "7,20,0.5,0.125\n"
                          "12,12.25,0.875,0.0625\n");
        std::remove(path.c_str());
    }

    TEST_CASE("median and mean conventions")
    {
        CHECK(median({3.0, 1.0, 2.0}) == 2.0);
        CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5); // even count: mean of the middle pair
        CHECK(mean({1.0, 2.0, 4.0}) == doctest::Approx(7.0 / 3.0).epsilon(1e-15));
        CHECK_THROWS_AS(median({}), std::invalid_argument);
        CHECK_THROWS_AS(mean({}), std::invalid_argument);
    }
}
