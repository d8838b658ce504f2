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

#ifndef WRFSPLAT_CONFIG_HPP
#define WRFSPLAT_CONFIG_HPP

#include <array>
#include <string>
#include <vector>

#include "wrfsplat/training.hpp"
#include "wrfsplat/wavesim.hpp"

namespace wrfsplat
{

// One JSON config drives both dataset generation and training. Every key is
// optional (defaults below); unknown keys are rejected so typos cannot pass
// silently. See README for the schema.
struct RunConfig
{
    std::uint64_t seed = 1234;
    sim::Scene scene;
    AngularGrid grid = {90, 360};
    int position_count = 300;      // sampled moving-endpoint positions ...
    double position_margin = 0.3;  // ... kept this far from every wall
    std::vector<std::array<double, 3>> positions; // explicit list, overrides sampling
    train::TrainConfig train;
};

// Parse the file (path may be empty for all-defaults), then apply `--set
// dotted.path=value` overrides in order. Values parse as JSON scalars/arrays,
// falling back to a string. Throws std::runtime_error with a message naming
// the offending key on unknown keys or type mismatches.
RunConfig load_run_config(const std::string &path, const std::vector<std::string> &overrides);

// Serialization helpers shared with the checkpoint trailer
std::string train_config_to_json(const train::TrainConfig &cfg);
train::TrainConfig train_config_from_json(const std::string &json_text);

} // namespace wrfsplat

#endif // WRFSPLAT_CONFIG_HPP
