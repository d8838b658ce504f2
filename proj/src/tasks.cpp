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

#include "wrfsplat/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace wrfsplat::tasks
{

using nlohmann::json;

double pooled_magnitude(const Spectrum &s)
{
    const auto mag = magnitude(s);
    double sum = 0.0;
    for (float v : mag)
        sum += v;
    return sum / double(mag.size());
}

namespace
{
    std::vector<int> indices_for(const sim::Dataset &ds, train::Split split)
    {
        if (split == train::Split::train)
            return ds.train_indices;
        if (split == train::Split::test)
            return ds.test_indices;
        std::vector<int> all(ds.samples.size());
        std::iota(all.begin(), all.end(), 0);
        return all;
    }

    double predict_pooled(const train::Checkpoint &ck, const sim::Dataset &ds, int idx)
    {
        return pooled_magnitude(train::render_at(ck, ds.samples[std::size_t(idx)].position));
    }
} // namespace

RssiModel train_rssi(const sim::Dataset &ds, const train::TrainConfig &cfg,
                     const std::string &log_path)
{
    if (ds.rssi_dbm.size() != ds.samples.size())
        throw std::invalid_argument("dataset carries no RSSI labels");

    RssiModel model;
    model.ck = train::train(ds, cfg, log_path);

    // Least-squares affine fit pooled-magnitude -> dBm on the train split
    double sp = 0, sy = 0, spp = 0, spy = 0;
    const auto &idxs = ds.train_indices;
    for (int idx : idxs)
    {
        const double p = predict_pooled(model.ck, ds, idx);
        const double y = ds.rssi_dbm[std::size_t(idx)];
        sp += p;
        sy += y;
        spp += p * p;
        spy += p * y;
    }
    const double n = double(idxs.size());
    const double var = spp - sp * sp / n;
    if (var > 1e-12)
    {
        model.slope = (spy - sp * sy / n) / var;
        model.intercept = (sy - model.slope * sp) / n;
    }
    else
    {
        model.slope = 0.0;
        model.intercept = sy / n;
    }
    return model;
}

std::vector<RssiRow> eval_rssi(const RssiModel &model, const sim::Dataset &ds,
                               train::Split split)
{
    if (model.ck.manifest_hash != ds.manifest_hash)
        throw train::hash_mismatch("RSSI model was trained on a different dataset");
    std::vector<RssiRow> rows;
    for (int idx : indices_for(ds, split))
    {
        const auto &sample = ds.samples[std::size_t(idx)];
        RssiRow r;
        r.x = sample.position[0];
        r.y = sample.position[1];
        r.z = sample.position[2];
        r.pred_dbm = model.slope * predict_pooled(model.ck, ds, idx) + model.intercept;
        r.gt_dbm = ds.rssi_dbm[std::size_t(idx)];
        r.abs_err_db = std::abs(r.pred_dbm - r.gt_dbm);
        rows.push_back(r);
    }
    return rows;
}

void write_rssi_csv(const std::string &path, const std::vector<RssiRow> &rows)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot open " + path + " for writing");
    os << "x,y,z,pred_dbm,gt_dbm,abs_err_db\n";
    for (const auto &r : rows)
        os << fmt_g9(r.x) << ',' << fmt_g9(r.y) << ',' << fmt_g9(r.z) << ','
           << fmt_g9(r.pred_dbm) << ',' << fmt_g9(r.gt_dbm) << ',' << fmt_g9(r.abs_err_db)
           << '\n';
    if (!os)
        throw std::runtime_error("write failed: " + path);
}

void save_rssi_model(const std::string &path, const RssiModel &model)
{
    json extra;
    extra["rssi_slope"] = model.slope;
    extra["rssi_intercept"] = model.intercept;
    train::save_checkpoint_with_extra(path, model.ck, extra.dump());
}

RssiModel load_rssi_model(const std::string &path)
{
    RssiModel model;
    std::string trailer;
    model.ck = train::load_checkpoint_with_extra(path, &trailer);
    const json j = json::parse(trailer);
    if (!j.contains("rssi_slope") || !j.contains("rssi_intercept"))
        throw std::runtime_error(path + " is not an RSSI model (no calibration in trailer)");
    model.slope = j.at("rssi_slope").get<double>();
    model.intercept = j.at("rssi_intercept").get<double>();
    return model;
}

// ------------------------------------------------------------------------ AoA

AoAEstimate aoa_extract(const Spectrum &s)
{
    if (s.grid.cells() < 1)
        throw std::invalid_argument("empty spectrum");
    const auto mag = magnitude(s);
    int best = 0;
    for (int k = 1; k < int(mag.size()); k++)
        if (mag[std::size_t(k)] > mag[std::size_t(best)])
            best = k; // strict > keeps the first (lowest row, then column) on ties
    AoAEstimate e;
    e.row = best / s.grid.n_azimuth;
    e.col = best % s.grid.n_azimuth;
    e.elevation = s.grid.elevation_center(e.row);
    e.azimuth = s.grid.azimuth_center(e.col);
    return e;
}

std::vector<AoARow> eval_aoa(const train::Checkpoint &ck, const sim::Dataset &ds,
                             train::Split split)
{
    if (ck.manifest_hash != ds.manifest_hash)
        throw train::hash_mismatch("checkpoint was trained on a different dataset");
    std::vector<AoARow> rows;
    for (int idx : indices_for(ds, split))
    {
        const auto &sample = ds.samples[std::size_t(idx)];
        const auto est = aoa_extract(train::render_at(ck, sample.position));

        const std::array<double, 3> pos = {double(sample.position[0]),
                                           double(sample.position[1]),
                                           double(sample.position[2])};
        const auto paths = sim::trace_paths(ds.scene, pos);
        if (paths.empty())
            throw std::runtime_error("sample position has no paths (corrupt dataset?)");
        const auto strongest = std::max_element(
            paths.begin(), paths.end(), [](const auto &a, const auto &b) {
                return std::abs(a.gain) < std::abs(b.gain);
            });

        AoARow r;
        r.sample_id = idx;
        r.pred_az = est.azimuth;
        r.pred_el = est.elevation;
        r.gt_az = strongest->azimuth;
        r.gt_el = strongest->elevation;
        // Cell-unit error with azimuth wraparound
        double daz = std::fmod(r.pred_az - r.gt_az + 3.0 * pi, 2.0 * pi) - pi;
        const double del = r.pred_el - r.gt_el;
        r.err_cells = std::hypot(daz / ds.grid.azimuth_cell(), del / ds.grid.elevation_cell());
        rows.push_back(r);
    }
    return rows;
}

void write_aoa_csv(const std::string &path, const std::vector<AoARow> &rows)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot open " + path + " for writing");
    os << "sample_id,pred_az,pred_el,gt_az,gt_el,err_cells\n";
    for (const auto &r : rows)
        os << r.sample_id << ',' << fmt_g9(r.pred_az) << ',' << fmt_g9(r.pred_el) << ','
           << fmt_g9(r.gt_az) << ',' << fmt_g9(r.gt_el) << ',' << fmt_g9(r.err_cells) << '\n';
    if (!os)
        throw std::runtime_error("write failed: " + path);
}

} // namespace wrfsplat::tasks
