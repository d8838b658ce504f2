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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "wrfsplat/wavesim.hpp"

namespace wrfsplat::sim
{

using nlohmann::json;

std::string manifest_json(const Dataset &ds);

std::array<float, 3> Dataset::normalize_position(const std::array<float, 3> &p) const
{
    std::array<float, 3> out;
    for (int a = 0; a < 3; a++)
    {
        const double range = bbox_max[a] - bbox_min[a];
        out[a] = range > 0.0 ? float((double(p[a]) - bbox_min[a]) / range) : 0.5f;
    }
    return out;
}

std::vector<std::array<double, 3>> sample_positions(const Scene &scene, int count,
                                                    double margin, Rng &rng)
{
    if (count < 1)
        throw std::invalid_argument("position count must be >= 1");
    for (int a = 0; a < 3; a++)
        if (2.0 * margin >= scene.room[a])
            throw std::invalid_argument("margin leaves no room for positions");
    auto out = std::vector<std::array<double, 3>>(std::size_t(count));
    for (auto &p : out)
        for (int a = 0; a < 3; a++)
            p[a] = rng.uniform(margin, scene.room[a] - margin);
    return out;
}

Dataset generate_dataset(const Scene &scene, const AngularGrid &grid,
                         const std::vector<std::array<double, 3>> &positions,
                         std::uint64_t seed)
{
    if (positions.empty())
        throw std::invalid_argument("no positions to simulate");
    if (grid.n_elevation < 1 || grid.n_azimuth < 1)
        throw std::invalid_argument("empty angular grid");

    const SteeringTable table = build_steering_table(scene.array, grid);
    const int total = int(positions.size());

    auto raw = std::vector<SpectrumT<double>>(std::size_t(total));
    std::vector<double> power(std::size_t(total), 0.0);
    std::vector<char> valid(std::size_t(total), 0);

#pragma omp parallel for schedule(static)
    for (int i = 0; i < total; i++)
    {
        const auto paths = trace_paths(scene, positions[std::size_t(i)]);
        if (paths.empty())
            continue;
        valid[std::size_t(i)] = 1;
        raw[std::size_t(i)] = beam_scan(channel_response(paths, scene.array), table);
        for (const auto &p : paths)
            power[std::size_t(i)] += std::norm(p.gain);
    }

    Dataset ds;
    ds.scene = scene;
    ds.grid = grid;
    ds.seed = seed;

    double max_mag = 0.0;
    for (int i = 0; i < total; i++)
    {
        if (!valid[std::size_t(i)])
            continue;
        const auto &s = raw[std::size_t(i)];
        for (int c = 0; c < grid.cells(); c++)
            max_mag = std::max(max_mag, std::hypot(s.data[2 * std::size_t(c)],
                                                   s.data[2 * std::size_t(c) + 1]));
    }
    ds.normalization = max_mag > 0.0 ? max_mag : 1.0;

    bool first = true;
    for (int i = 0; i < total; i++)
    {
        if (!valid[std::size_t(i)])
        {
            ds.excluded_indices.push_back(i);
            continue;
        }
        const auto &pos = positions[std::size_t(i)];
        DatasetSample sample;
        sample.position = {float(pos[0]), float(pos[1]), float(pos[2])};
        sample.spectrum = Spectrum(grid);
        const auto &s = raw[std::size_t(i)];
        // Targets store the beam-scan magnitude (imaginary channel zero).
        // The spectrum is a power map; the pre-modulus phase spins with
        // position at 2*pi/lambda per metre, so it carries no structure a
        // model conditioned on position could interpolate.
        for (int c = 0; c < grid.cells(); c++)
        {
            const double mag = std::hypot(s.data[2 * std::size_t(c)],
                                          s.data[2 * std::size_t(c) + 1]);
            sample.spectrum.data[2 * std::size_t(c)] = float(mag / ds.normalization);
            sample.spectrum.data[2 * std::size_t(c) + 1] = 0.0f;
        }

        const int sample_idx = int(ds.samples.size());
        // Deterministic split keyed to the original position index
        if (i % 10 == 0)
            ds.test_indices.push_back(sample_idx);
        else
            ds.train_indices.push_back(sample_idx);
        ds.rssi_dbm.push_back(10.0 * std::log10(power[std::size_t(i)]) + 20.0);
        ds.samples.push_back(std::move(sample));

        for (int a = 0; a < 3; a++)
        {
            if (first || pos[a] < ds.bbox_min[a])
                ds.bbox_min[a] = pos[a];
            if (first || pos[a] > ds.bbox_max[a])
                ds.bbox_max[a] = pos[a];
        }
        first = false;
    }
    if (ds.samples.empty())
        throw std::runtime_error("every position was excluded (no valid paths)");

    // Hash the manifest as it will appear on disk, so in-memory training and
    // training after a save/load round trip agree on the fingerprint
    const std::string manifest = manifest_json(ds);
    ds.manifest_hash = fnv1a64(manifest.data(), manifest.size());
    return ds;
}

std::string manifest_json(const Dataset &ds)
{
    json j;
    j["format"] = "wrfsplat-dataset";
    j["version"] = 1;
    j["mode"] = to_string(ds.scene.mode);
    j["grid"] = {{"n_elevation", ds.grid.n_elevation}, {"n_azimuth", ds.grid.n_azimuth}};
    j["array"] = {{"k_elements", ds.scene.array.k_elements},
                  {"spacing", ds.scene.array.spacing},
                  {"wavelength", ds.scene.array.wavelength}};
    j["scene"] = {{"room", ds.scene.room},
                  {"reflectivity", ds.scene.reflectivity},
                  {"max_bounces", ds.scene.max_bounces},
                  {"fixed_node", ds.scene.fixed_node}};
    j["normalization"] = ds.normalization;
    j["seed"] = ds.seed;
    j["sample_count"] = int(ds.samples.size());
    j["train_indices"] = ds.train_indices;
    j["test_indices"] = ds.test_indices;
    j["excluded_indices"] = ds.excluded_indices;
    j["bbox_min"] = ds.bbox_min;
    j["bbox_max"] = ds.bbox_max;
    j["rssi_dbm"] = ds.rssi_dbm;
    return j.dump(2) + "\n";
}

void save_dataset(const Dataset &ds, const std::string &dir)
{
    std::filesystem::create_directories(dir);
    const std::string manifest = manifest_json(ds);
    {
        std::ofstream os(dir + "/manifest.json", std::ios::binary);
        if (!os)
            throw std::runtime_error("cannot write " + dir + "/manifest.json");
        os << manifest;
    }
    {
        std::ofstream os(dir + "/spectra.bin", std::ios::binary);
        if (!os)
            throw std::runtime_error("cannot write " + dir + "/spectra.bin");
        for (const auto &s : ds.samples)
        {
            io::put_f32_array(os, s.position.data(), 3);
            io::put_f32_array(os, s.spectrum.data.data(), s.spectrum.data.size());
        }
    }
}

Dataset load_dataset(const std::string &dir)
{
    std::ifstream mf(dir + "/manifest.json", std::ios::binary);
    if (!mf)
        throw std::runtime_error("cannot open " + dir + "/manifest.json");
    std::stringstream buf;
    buf << mf.rdbuf();
    const std::string manifest = buf.str();

    json j = json::parse(manifest);
    if (j.value("format", "") != "wrfsplat-dataset" || j.value("version", 0) != 1)
        throw std::runtime_error(dir + "/manifest.json is not a version-1 dataset manifest");

    Dataset ds;
    ds.scene.mode = mobility_from_string(j.at("mode").get<std::string>());
    ds.grid.n_elevation = j.at("grid").at("n_elevation").get<int>();
    ds.grid.n_azimuth = j.at("grid").at("n_azimuth").get<int>();
    ds.scene.array.k_elements = j.at("array").at("k_elements").get<int>();
    ds.scene.array.spacing = j.at("array").at("spacing").get<double>();
    ds.scene.array.wavelength = j.at("array").at("wavelength").get<double>();
    ds.scene.room = j.at("scene").at("room").get<std::array<double, 3>>();
    ds.scene.reflectivity = j.at("scene").at("reflectivity").get<double>();
    ds.scene.max_bounces = j.at("scene").at("max_bounces").get<int>();
    ds.scene.fixed_node = j.at("scene").at("fixed_node").get<std::array<double, 3>>();
    ds.normalization = j.at("normalization").get<double>();
    ds.seed = j.at("seed").get<std::uint64_t>();
    ds.train_indices = j.at("train_indices").get<std::vector<int>>();
    ds.test_indices = j.at("test_indices").get<std::vector<int>>();
    ds.excluded_indices = j.at("excluded_indices").get<std::vector<int>>();
    ds.bbox_min = j.at("bbox_min").get<std::array<double, 3>>();
    ds.bbox_max = j.at("bbox_max").get<std::array<double, 3>>();
    ds.rssi_dbm = j.at("rssi_dbm").get<std::vector<double>>();
    const int count = j.at("sample_count").get<int>();

    ds.manifest_hash = fnv1a64(manifest.data(), manifest.size());

    std::ifstream is(dir + "/spectra.bin", std::ios::binary);
    if (!is)
        throw std::runtime_error("cannot open " + dir + "/spectra.bin");
    ds.samples.resize(std::size_t(count));
    for (auto &s : ds.samples)
    {
        io::get_f32_array(is, s.position.data(), 3);
        s.spectrum = Spectrum(ds.grid);
        io::get_f32_array(is, s.spectrum.data.data(), s.spectrum.data.size());
    }
    // The file must end exactly where the last record does
    char extra;
    if (is.read(&extra, 1).gcount() != 0)
        throw std::runtime_error(dir + "/spectra.bin has trailing bytes");
    return ds;
}

} // namespace wrfsplat::sim
