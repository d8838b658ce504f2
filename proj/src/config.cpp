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

#include "wrfsplat/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace wrfsplat
{

using nlohmann::json;

namespace
{
    void reject_unknown(const json &j, const std::set<std::string> &allowed, const char *where)
    {
        if (!j.is_object())
            throw std::runtime_error(std::string("config section '") + where +
                                     "' must be a JSON object");
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!allowed.count(it.key()))
                throw std::runtime_error(std::string("unknown config key '") + where + "." +
                                         it.key() + "'");
    }

    template <class T>
    void fetch(const json &j, const char *key, T &out)
    {
        if (j.contains(key))
            out = j.at(key).get<T>();
    }

    // Set j[path...] = value for a dotted path like "train.fine_iters"
    void apply_override(json &j, const std::string &entry)
    {
        const auto eq = entry.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("override '" + entry + "' is not of the form key=value");
        const std::string path = entry.substr(0, eq);
        const std::string text = entry.substr(eq + 1);

        json value;
        try
        {
            value = json::parse(text);
        }
        catch (const json::parse_error &)
        {
            value = text; // bare words become strings
        }

        json *node = &j;
        std::stringstream parts(path);
        std::string key, next;
        if (!std::getline(parts, key, '.'))
            throw std::runtime_error("override '" + entry + "' has an empty key");
        while (std::getline(parts, next, '.'))
        {
            node = &(*node)[key];
            key = next;
        }
        (*node)[key] = value;
    }
} // namespace

std::string train_config_to_json(const train::TrainConfig &cfg)
{
    json j;
    j["primitives"] = cfg.primitives;
    j["bands_center"] = cfg.enc.bands_center;
    j["bands_position"] = cfg.enc.bands_position;
    j["width"] = cfg.width;
    j["cutoff_radius"] = cfg.raster.cutoff_radius;
    j["tile"] = cfg.raster.tile;
    j["lr_gaussian"] = cfg.lr_gaussian;
    j["lr_mlp"] = cfg.lr_mlp;
    j["lambda1"] = cfg.lambda1;
    j["coarse_iters"] = cfg.coarse_iters;
    j["fine_iters"] = cfg.fine_iters;
    j["anneal_scale"] = cfg.anneal_scale;
    j["anneal_threshold"] = cfg.anneal_threshold;
    j["seed"] = cfg.seed;
    return j.dump();
}

train::TrainConfig train_config_from_json(const std::string &json_text)
{
    const json j = json::parse(json_text);
    reject_unknown(j, {"primitives", "bands_center", "bands_position", "width", "cutoff_radius",
                       "tile", "lr_gaussian", "lr_mlp", "lambda1", "coarse_iters", "fine_iters",
                       "anneal_scale", "anneal_threshold", "seed"},
                   "config");
    train::TrainConfig cfg;
    fetch(j, "primitives", cfg.primitives);
    fetch(j, "bands_center", cfg.enc.bands_center);
    fetch(j, "bands_position", cfg.enc.bands_position);
    fetch(j, "width", cfg.width);
    fetch(j, "cutoff_radius", cfg.raster.cutoff_radius);
    fetch(j, "tile", cfg.raster.tile);
    fetch(j, "lr_gaussian", cfg.lr_gaussian);
    fetch(j, "lr_mlp", cfg.lr_mlp);
    fetch(j, "lambda1", cfg.lambda1);
    fetch(j, "coarse_iters", cfg.coarse_iters);
    fetch(j, "fine_iters", cfg.fine_iters);
    fetch(j, "anneal_scale", cfg.anneal_scale);
    fetch(j, "anneal_threshold", cfg.anneal_threshold);
    fetch(j, "seed", cfg.seed);
    return cfg;
}

RunConfig load_run_config(const std::string &path, const std::vector<std::string> &overrides)
{
    json j = json::object();
    if (!path.empty())
    {
        std::ifstream is(path, std::ios::binary);
        if (!is)
            throw std::runtime_error("cannot open config file " + path);
        try
        {
            j = json::parse(is);
        }
        catch (const json::parse_error &e)
        {
            throw std::runtime_error("config parse error in " + path + ": " + e.what());
        }
    }
    for (const auto &entry : overrides)
        apply_override(j, entry);

    reject_unknown(j, {"seed", "scene", "grid", "positions", "model", "train"}, "<root>");

    RunConfig cfg;
    fetch(j, "seed", cfg.seed);

    if (j.contains("scene"))
    {
        const json &s = j.at("scene");
        reject_unknown(s, {"room", "reflectivity", "max_bounces", "fixed_node", "mode", "array"},
                       "scene");
        fetch(s, "room", cfg.scene.room);
        fetch(s, "reflectivity", cfg.scene.reflectivity);
        fetch(s, "max_bounces", cfg.scene.max_bounces);
        fetch(s, "fixed_node", cfg.scene.fixed_node);
        if (s.contains("mode"))
            cfg.scene.mode = sim::mobility_from_string(s.at("mode").get<std::string>());
        if (s.contains("array"))
        {
            const json &a = s.at("array");
            reject_unknown(a, {"k_elements", "spacing", "wavelength"}, "scene.array");
            fetch(a, "k_elements", cfg.scene.array.k_elements);
            fetch(a, "spacing", cfg.scene.array.spacing);
            fetch(a, "wavelength", cfg.scene.array.wavelength);
        }
    }

    if (j.contains("grid"))
    {
        const json &g = j.at("grid");
        reject_unknown(g, {"n_elevation", "n_azimuth"}, "grid");
        fetch(g, "n_elevation", cfg.grid.n_elevation);
        fetch(g, "n_azimuth", cfg.grid.n_azimuth);
    }

    if (j.contains("positions"))
    {
        const json &p = j.at("positions");
        if (p.is_array())
            cfg.positions = p.get<std::vector<std::array<double, 3>>>();
        else
        {
            reject_unknown(p, {"count", "margin"}, "positions");
            fetch(p, "count", cfg.position_count);
            fetch(p, "margin", cfg.position_margin);
        }
    }

    // model + train sections both land in the TrainConfig
    json flat = json::object();
    if (j.contains("model"))
    {
        const json &m = j.at("model");
        reject_unknown(m, {"primitives", "bands_center", "bands_position", "width",
                           "cutoff_radius", "tile"},
                       "model");
        for (auto it = m.begin(); it != m.end(); ++it)
            flat[it.key()] = it.value();
    }
    if (j.contains("train"))
    {
        const json &t = j.at("train");
        reject_unknown(t, {"lr_gaussian", "lr_mlp", "lambda1", "coarse_iters", "fine_iters",
                           "anneal_scale", "anneal_threshold"},
                       "train");
        for (auto it = t.begin(); it != t.end(); ++it)
            flat[it.key()] = it.value();
    }
    cfg.train = train_config_from_json(flat.dump());
    cfg.train.seed = cfg.seed;
    return cfg;
}

} // namespace wrfsplat
