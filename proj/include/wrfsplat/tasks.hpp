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

#ifndef WRFSPLAT_TASKS_HPP
#define WRFSPLAT_TASKS_HPP

#include <string>
#include <vector>

#include "wrfsplat/training.hpp"

namespace wrfsplat::tasks
{

// ----------------------------------------------------------------------- RSSI

// Received-power regressor: the standard reconstruction pipeline on a small
// grid plus an affine calibration from the pooled predicted magnitude
// spectrum to dBm, fitted on the train split by least squares.
struct RssiModel
{
    train::Checkpoint ck;
    double slope = 1.0;
    double intercept = 0.0;
};

// Mean |A| over the rendered spectrum (the pooled feature)
double pooled_magnitude(const Spectrum &s);

// Train the reconstruction model on the dataset (expected to carry rssi_dbm
// labels), then fit the calibration on the train split.
RssiModel train_rssi(const sim::Dataset &ds, const train::TrainConfig &cfg,
                     const std::string &log_path = {});

struct RssiRow
{
    double x = 0, y = 0, z = 0; // device position, meters
    double pred_dbm = 0;
    double gt_dbm = 0;
    double abs_err_db = 0;
};

// Predict RSSI for every sample of the split; row order follows the split
std::vector<RssiRow> eval_rssi(const RssiModel &model, const sim::Dataset &ds,
                               train::Split split);

// CSV with header "x,y,z,pred_dbm,gt_dbm,abs_err_db"
void write_rssi_csv(const std::string &path, const std::vector<RssiRow> &rows);

// Model file: a regular checkpoint whose JSON trailer also carries the
// calibration (keys rssi_slope / rssi_intercept).
void save_rssi_model(const std::string &path, const RssiModel &model);
RssiModel load_rssi_model(const std::string &path);

// ------------------------------------------------------------------------ AoA

// Dominant angle-of-arrival estimate: the cell-center direction of the
// maximum-magnitude cell (ties break toward the lower row, then column).
struct AoAEstimate
{
    int row = 0, col = 0;     // argmax cell
    double azimuth = 0.0;     // radians, cell center
    double elevation = 0.0;   // radians, cell center
};

AoAEstimate aoa_extract(const Spectrum &s);

struct AoARow
{
    std::int64_t sample_id = 0;
    double pred_az = 0, pred_el = 0; // radians
    double gt_az = 0, gt_el = 0;     // strongest simulated path
    double err_cells = 0;            // Euclidean cell distance, azimuth wraps
};

// Render each split sample, extract the dominant arrival, and compare with
// the strongest-path direction from the simulator (re-traced from the scene)
std::vector<AoARow> eval_aoa(const train::Checkpoint &ck, const sim::Dataset &ds,
                             train::Split split);

// CSV with header "sample_id,pred_az,pred_el,gt_az,gt_el,err_cells"
void write_aoa_csv(const std::string &path, const std::vector<AoARow> &rows);

} // namespace wrfsplat::tasks

#endif // WRFSPLAT_TASKS_HPP
