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

#ifndef WRFSPLAT_WAVESIM_HPP
#define WRFSPLAT_WAVESIM_HPP

#include <array>
#include <complex>
#include <string>
#include <vector>

#include "wrfsplat/common.hpp"
#include "wrfsplat/spectrum.hpp"

namespace wrfsplat::sim
{

// Square uniform planar antenna array, K = M*M elements on a D-spaced grid
struct ArrayConfig
{
    int k_elements = 16;       // element count, must be a perfect square
    double spacing = 0.0625;   // inter-element distance D in meters (default lambda/2)
    double wavelength = 0.125; // carrier wavelength in meters

    int side() const; // M = sqrt(k_elements), throws if not a perfect square
};

// Polar position of one array element relative to element (1,1)
struct ElementCoord
{
    double r = 0.0;    // radial distance D * sqrt((m-1)^2 + (n-1)^2)
    double beta = 0.0; // in-plane angle atan2(m-1, n-1)
};

// Elements in row-major (m, n) order, index = (m-1)*M + (n-1)
std::vector<ElementCoord> element_layout(const ArrayConfig &array);

// Phase delta seen by one element for a plane wave from (azimuth, elevation):
//   -2*pi * r * cos(azimuth - beta) * cos(elevation) / lambda, wrapped to [0, 2pi)
double phase_shift(const ElementCoord &e, double azimuth, double elevation, double wavelength);

// One specular propagation path arriving at the receiving array
struct PropagationPath
{
    std::complex<double> gain; // rho: free-space loss * reflectivity^bounces * e^{-j 2 pi d / lambda}
    double path_length = 0.0;  // meters
    double azimuth = 0.0;      // arrival azimuth at the receiver, [0, 2pi)
    double elevation = 0.0;    // arrival elevation at the receiver, [0, pi/2]
    int bounces = 0;           // wall reflections along the path
};

// Which link endpoint moves across dataset samples (single-sided mobility)
enum class MobilityMode
{
    tx_moving, // transmitter moves, spectrum observed at the fixed receiver
    rx_moving  // receiver moves, spectrum observed at the moving receiver
};
std::string to_string(MobilityMode m);
MobilityMode mobility_from_string(const std::string &s);

// Axis-aligned shoebox room with mirror-image multipath, corner at the origin
struct Scene
{
    std::array<double, 3> room = {4.0, 3.0, 2.5};       // interior dimensions, meters
    double reflectivity = 0.7;                          // reflection coefficient magnitude per bounce
    int max_bounces = 2;                                // specular reflection order cap
    std::array<double, 3> fixed_node = {2.0, 1.5, 1.0}; // static endpoint position
    MobilityMode mode = MobilityMode::tx_moving;
    ArrayConfig array;
};

// Enumerate specular paths between the moving endpoint at `moving` and the
// fixed node via the mirror-image construction, keep arrivals in the upper
// hemisphere (elevation in [0, pi/2]) of the receiving node, and return them
// sorted by (bounces, path_length, azimuth, elevation). A degenerate
// zero-length path (endpoints coincide) is dropped. Throws if either endpoint
// lies outside the room.
std::vector<PropagationPath> trace_paths(const Scene &scene, const std::array<double, 3> &moving);

// Per-element complex channel: h[k] = sum_l gain_l * e^{j phase_shift_k(l)}
std::vector<std::complex<double>> channel_response(const std::vector<PropagationPath> &paths,
                                                   const ArrayConfig &array);

// Precomputed steering weights w = e^{-j phase_shift} for every (cell, element)
// pair of a grid; depends only on grid/array geometry, so dataset generation
// builds it once and reuses it for every sample.
struct SteeringTable
{
    AngularGrid grid;
    int k_elements = 0;
    std::vector<double> wr, wi; // cells x elements, row-major per cell
};
SteeringTable build_steering_table(const ArrayConfig &array, const AngularGrid &grid);

// Beam scan: A(cell) = (1/K) * sum_k w_k(cell) * e^{j arg(h[k])}. Only the
// phase of each channel entry enters; the complex value (before any modulus)
// is stored in the spectrum's two channels. A zero channel entry contributes
// phase 0. Both overloads share one accumulation routine and agree bit-exactly.
SpectrumT<double> beam_scan(const std::vector<std::complex<double>> &channel,
                            const SteeringTable &table);
SpectrumT<double> beam_scan(const std::vector<std::complex<double>> &channel,
                            const ArrayConfig &array, const AngularGrid &grid);

// ------------------------------------------------------------------ dataset

struct DatasetSample
{
    std::array<float, 3> position{}; // moving-endpoint position, meters
    Spectrum spectrum;               // normalized complex spectrum, float32
};

struct Dataset
{
    Scene scene;
    AngularGrid grid;
    double normalization = 1.0;      // global max |A| divided out of every sample
    std::uint64_t seed = 0;          // seed used for position sampling (0 if explicit)
    std::vector<int> train_indices;  // sample indices (post-exclusion)
    std::vector<int> test_indices;   // sample indices (post-exclusion)
    std::vector<int> excluded_indices; // original position indices with no valid path
    std::array<double, 3> bbox_min{};  // over included positions, used to normalize
    std::array<double, 3> bbox_max{};  //   positions into [0,1]^3 for the deform net
    std::vector<double> rssi_dbm;      // synthetic received-power label per sample
    std::vector<DatasetSample> samples;

    std::uint64_t manifest_hash = 0; // FNV-1a of manifest.json bytes, set on save/load

    // Map a position into the unit cube via the dataset bbox (degenerate axes map to 0.5)
    std::array<float, 3> normalize_position(const std::array<float, 3> &p) const;
};

// Uniform positions inside the room, `margin` meters away from every wall.
// Draw order: x, y, z per position, consuming 3 uniforms each.
std::vector<std::array<double, 3>> sample_positions(const Scene &scene, int count,
                                                    double margin, Rng &rng);

// Trace + beam-scan every position, drop positions with zero valid paths
// (recorded in excluded_indices by original index), normalize all spectra by
// the global maximum magnitude, assign the deterministic split (original
// position index % 10 == 0 -> test), and attach synthetic RSSI labels
// 10*log10(sum_l |gain_l|^2) + 20 dBm.
Dataset generate_dataset(const Scene &scene, const AngularGrid &grid,
                         const std::vector<std::array<double, 3>> &positions,
                         std::uint64_t seed);

// Directory layout: <dir>/manifest.json + <dir>/spectra.bin. The binary file
// holds one record per sample in manifest order: position as 3 float32, then
// row-major cells as interleaved (re, im) float32. Little-endian throughout.
void save_dataset(const Dataset &ds, const std::string &dir);
Dataset load_dataset(const std::string &dir);

} // namespace wrfsplat::sim

#endif // WRFSPLAT_WAVESIM_HPP
