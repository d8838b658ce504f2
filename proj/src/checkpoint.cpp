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

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "wrfsplat/config.hpp"
#include "wrfsplat/training.hpp"

namespace wrfsplat::train
{

using nlohmann::json;

namespace
{
    constexpr int n_sections = 3; // gaussian, deform, trailer

    std::string make_trailer(const Checkpoint &ck, const json &extra)
    {
        json j;
        j["config"] = json::parse(train_config_to_json(ck.config));
        j["iteration"] = ck.iteration;
        j["manifest_hash"] = to_hex(ck.manifest_hash);
        j["grid"] = {{"n_elevation", ck.set.grid.n_elevation},
                     {"n_azimuth", ck.set.grid.n_azimuth}};
        j["bbox_min"] = ck.bbox_min;
        j["bbox_max"] = ck.bbox_max;
        for (auto it = extra.begin(); it != extra.end(); ++it)
            j[it.key()] = it.value();
        return j.dump();
    }
} // namespace

void save_checkpoint_with_extra(const std::string &path, const Checkpoint &ck,
                                const std::string &extra_json)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot open " + path + " for writing");

    io::put_magic(os, "WRFC");
    io::put_u32(os, 1);
    io::put_u32(os, n_sections);
    io::put_u32(os, 0);
    const std::streampos table_pos = os.tellp();
    for (int i = 0; i < n_sections; i++)
    {
        io::put_u64(os, 0); // offset, patched below
        io::put_u64(os, 0); // size
    }

    std::uint64_t offsets[n_sections], sizes[n_sections];
    auto begin_section = [&](int i) { offsets[i] = std::uint64_t(os.tellp()); };
    auto end_section = [&](int i) { sizes[i] = std::uint64_t(os.tellp()) - offsets[i]; };

    begin_section(0);
    splat::write_gaussian_section(os, ck.set);
    end_section(0);
    begin_section(1);
    deform::write_deform_section(os, ck.net);
    end_section(1);
    begin_section(2);
    const std::string trailer =
        make_trailer(ck, extra_json.empty() ? json::object() : json::parse(extra_json));
    io::put_bytes(os, trailer.data(), trailer.size());
    end_section(2);

    os.seekp(table_pos);
    for (int i = 0; i < n_sections; i++)
    {
        io::put_u64(os, offsets[i]);
        io::put_u64(os, sizes[i]);
    }
    if (!os)
        throw std::runtime_error("write failed: " + path);
}

void save_checkpoint(const std::string &path, const Checkpoint &ck)
{
    save_checkpoint_with_extra(path, ck, "");
}

Checkpoint load_checkpoint_with_extra(const std::string &path, std::string *extra_json)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw std::runtime_error("cannot open " + path);

    io::expect_magic(is, "WRFC", "checkpoint");
    if (io::get_u32(is) != 1)
        throw std::runtime_error("unsupported checkpoint version");
    if (io::get_u32(is) != n_sections)
        throw std::runtime_error("unexpected checkpoint section count");
    io::get_u32(is); // reserved

    std::uint64_t offsets[n_sections], sizes[n_sections];
    for (int i = 0; i < n_sections; i++)
    {
        offsets[i] = io::get_u64(is);
        sizes[i] = io::get_u64(is);
    }

    Checkpoint ck;
    is.seekg(std::streamoff(offsets[0]));
    splat::read_gaussian_section(is, ck.set);
    is.seekg(std::streamoff(offsets[1]));
    deform::read_deform_section(is, ck.net);

    is.seekg(std::streamoff(offsets[2]));
    std::string trailer(sizes[2], '\0');
    io::get_bytes(is, trailer.data(), trailer.size());
    json j = json::parse(trailer);

    ck.config = train_config_from_json(j.at("config").dump());
    ck.iteration = j.at("iteration").get<std::int64_t>();
    ck.manifest_hash = std::stoull(j.at("manifest_hash").get<std::string>(), nullptr, 16);
    ck.set.grid.n_elevation = j.at("grid").at("n_elevation").get<int>();
    ck.set.grid.n_azimuth = j.at("grid").at("n_azimuth").get<int>();
    ck.bbox_min = j.at("bbox_min").get<std::array<double, 3>>();
    ck.bbox_max = j.at("bbox_max").get<std::array<double, 3>>();
    if (extra_json)
        *extra_json = trailer;
    return ck;
}

Checkpoint load_checkpoint(const std::string &path)
{
    return load_checkpoint_with_extra(path, nullptr);
}

} // namespace wrfsplat::train
