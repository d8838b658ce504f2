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
//
// Command-line front end:
//   wrfsplat gen     --config c.json --out DIR [--force]
//   wrfsplat train   --config c.json --dataset DIR --out ck.wrf [--log csv] [--resume ck]
//   wrfsplat render  --checkpoint ck.wrf --position x,y,z --out spec.bin [--pgm img.pgm]
//   wrfsplat eval    --checkpoint ck.wrf --dataset DIR --split test --out metrics.csv
//   wrfsplat bench   [--checkpoint ck.wrf] [--iters N]
//   wrfsplat rssi train / rssi eval, aoa eval
//
// Exit codes: 0 success, 2 bad input (config/arguments), 3 refusing to
// overwrite without --force, 4 checkpoint/dataset fingerprint mismatch.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "wrfsplat/config.hpp"
#include "wrfsplat/tasks.hpp"
#include "wrfsplat/training.hpp"

namespace
{

using namespace wrfsplat;

constexpr int exit_ok = 0;
constexpr int exit_bad_input = 2;
constexpr int exit_would_overwrite = 3;
constexpr int exit_hash_mismatch = 4;

struct CommonOpts
{
    std::string config_path;
    std::vector<std::string> overrides;
    int threads = 0;
};

void add_config_opts(CLI::App *cmd, CommonOpts &opts)
{
    cmd->add_option("--config", opts.config_path, "JSON config file");
    cmd->add_option("--set", opts.overrides, "dotted-path config override, e.g. train.fine_iters=500");
}

void add_thread_opt(CLI::App *cmd, CommonOpts &opts)
{
    cmd->add_option("--threads", opts.threads, "worker threads (default: WRF_THREADS or all cores)");
}

void apply_threads(const CommonOpts &opts)
{
    if (opts.threads > 0)
        set_thread_count(opts.threads);
    else
        thread_count(); // resolves WRF_THREADS once
}

std::array<float, 3> parse_position(const std::string &text)
{
    std::array<float, 3> p{};
    if (std::sscanf(text.c_str(), "%f,%f,%f", &p[0], &p[1], &p[2]) != 3)
        throw CLI::ValidationError("--position", "expected x,y,z");
    return p;
}

void write_spectrum_record(const std::string &path, const std::array<float, 3> &pos,
                           const Spectrum &s)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot open " + path + " for writing");
    io::put_f32_array(os, pos.data(), 3);
    io::put_f32_array(os, s.data.data(), s.data.size());
    if (!os)
        throw std::runtime_error("write failed: " + path);
}

void write_pgm(const std::string &path, const Spectrum &s)
{
    const auto mag = magnitude(s);
    float peak = 0.0f;
    for (float v : mag)
        peak = std::max(peak, v);
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot open " + path + " for writing");
    os << "P5\n" << s.grid.n_azimuth << " " << s.grid.n_elevation << "\n255\n";
    for (float v : mag)
        os.put(char(peak > 0 ? int(std::lround(255.0 * v / peak)) : 0));
}

int cmd_gen(const CommonOpts &opts, const std::string &out_dir, bool force)
{
    const RunConfig cfg = load_run_config(opts.config_path, opts.overrides);
    if (!force && std::filesystem::exists(out_dir + "/manifest.json"))
    {
        std::cerr << "error: " << out_dir << " already holds a dataset (use --force)\n";
        return exit_would_overwrite;
    }
    auto positions = cfg.positions;
    if (positions.empty())
    {
        Rng rng(cfg.seed);
        positions = sim::sample_positions(cfg.scene, cfg.position_count, cfg.position_margin, rng);
    }
    const sim::Dataset ds = sim::generate_dataset(cfg.scene, cfg.grid, positions, cfg.seed);
    sim::save_dataset(ds, out_dir);
    std::cout << "dataset: " << ds.samples.size() << " samples (" << ds.train_indices.size()
              << " train / " << ds.test_indices.size() << " test, "
              << ds.excluded_indices.size() << " excluded), grid " << ds.grid.n_elevation << "x"
              << ds.grid.n_azimuth << ", manifest " << to_hex(ds.manifest_hash) << "\n";
    return exit_ok;
}

int cmd_train(const CommonOpts &opts, const std::string &dataset_dir, const std::string &out_path,
              const std::string &log_path, const std::string &resume_path, bool force, bool rssi)
{
    const RunConfig cfg = load_run_config(opts.config_path, opts.overrides);
    if (!force && std::filesystem::exists(out_path))
    {
        std::cerr << "error: " << out_path << " exists (use --force)\n";
        return exit_would_overwrite;
    }
    const sim::Dataset ds = sim::load_dataset(dataset_dir);

    train::Checkpoint resume;
    const train::Checkpoint *resume_ptr = nullptr;
    if (!resume_path.empty())
    {
        resume = train::load_checkpoint(resume_path);
        resume_ptr = &resume;
    }

    if (rssi)
    {
        const tasks::RssiModel model = tasks::train_rssi(ds, cfg.train, log_path);
        tasks::save_rssi_model(out_path, model);
        std::cout << "rssi model: " << model.ck.iteration << " iterations, calibration slope "
                  << fmt_g9(model.slope) << " intercept " << fmt_g9(model.intercept) << " -> "
                  << out_path << "\n";
    }
    else
    {
        const train::Checkpoint ck = train::train(ds, cfg.train, log_path, resume_ptr);
        train::save_checkpoint(out_path, ck);
        std::cout << "checkpoint: " << ck.iteration << " iterations, " << ck.set.n
                  << " primitives -> " << out_path << "\n";
    }
    return exit_ok;
}

int cmd_render(const std::string &ck_path, const std::string &position_text,
               const std::string &out_path, const std::string &pgm_path)
{
    const train::Checkpoint ck = train::load_checkpoint(ck_path);
    const auto pos = parse_position(position_text);
    const Spectrum s = train::render_at(ck, pos);
    if (!out_path.empty())
        write_spectrum_record(out_path, pos, s);
    if (!pgm_path.empty())
        write_pgm(pgm_path, s);
    std::cout << "rendered " << s.grid.n_elevation << "x" << s.grid.n_azimuth << " at "
              << fmt_g9(pos[0]) << "," << fmt_g9(pos[1]) << "," << fmt_g9(pos[2]) << "\n";
    return exit_ok;
}

int cmd_eval(const std::string &ck_path, const std::string &dataset_dir,
             const std::string &split_text, const std::string &out_path)
{
    const train::Checkpoint ck = train::load_checkpoint(ck_path);
    const sim::Dataset ds = sim::load_dataset(dataset_dir);
    const auto split = train::split_from_string(split_text);
    const auto rows = train::evaluate(ck, ds, split);
    if (!out_path.empty())
        write_metrics_csv(out_path, rows);

    std::vector<double> psnrs, ssims, l1s;
    for (const auto &r : rows)
    {
        psnrs.push_back(r.psnr_db);
        ssims.push_back(r.ssim);
        l1s.push_back(r.l1);
    }
    std::cout << "eval[" << split_text << "]: " << rows.size() << " samples, median psnr "
              << fmt_g9(median(psnrs)) << " dB, median ssim " << fmt_g9(median(ssims))
              << ", mean l1 " << fmt_g9(mean(l1s)) << "\n";
    return exit_ok;
}

int cmd_bench(const std::string &ck_path, int iters)
{
    // Rasterization throughput of the canonical (zero-residual) render; a
    // second line reports the full deform+rasterize path for reference.
    train::Checkpoint ck;
    if (!ck_path.empty())
        ck = train::load_checkpoint(ck_path);
    else
    {
        Rng rng(1234);
        ck.set = splat::init_random({90, 360}, 1000, rng);
        ck.net.init(rng);
        ck.config = train::TrainConfig{};
        ck.bbox_min = {0, 0, 0};
        ck.bbox_max = {1, 1, 1};
    }

    Spectrum out;
    splat::RasterWorkspace ws;
    splat::rasterize<float>(ck.set, nullptr, ck.config.raster, out, ws); // warm up

    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < iters; i++)
        splat::rasterize<float>(ck.set, nullptr, ck.config.raster, out, ws);
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "rasterize: " << iters << " renders in " << fmt_g9(sec) << " s = "
              << fmt_g9(double(iters) / sec) << " renders/s (" << thread_count()
              << " threads, grid " << ck.set.grid.n_elevation << "x" << ck.set.grid.n_azimuth
              << ", " << ck.set.n << " primitives)\n";

    deform::DeformWorkspace dws;
    splat::Residuals res;
    const std::array<float, 3> pos = {0.5f, 0.5f, 0.5f};
    const int deform_iters = std::max(1, iters / 10);
    const auto t1 = std::chrono::steady_clock::now();
    for (int i = 0; i < deform_iters; i++)
    {
        deform::predict_residuals(ck.net, ck.set, pos, dws, res);
        splat::rasterize<float>(ck.set, &res, ck.config.raster, out, ws);
    }
    const double sec2 =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
    std::cout << "deform+rasterize: " << deform_iters << " renders in " << fmt_g9(sec2)
              << " s = " << fmt_g9(double(deform_iters) / sec2) << " renders/s\n";
    return exit_ok;
}

int cmd_rssi_eval(const std::string &model_path, const std::string &dataset_dir,
                  const std::string &split_text, const std::string &out_path)
{
    const tasks::RssiModel model = tasks::load_rssi_model(model_path);
    const sim::Dataset ds = sim::load_dataset(dataset_dir);
    const auto rows = tasks::eval_rssi(model, ds, train::split_from_string(split_text));
    if (!out_path.empty())
        tasks::write_rssi_csv(out_path, rows);
    std::vector<double> errs;
    for (const auto &r : rows)
        errs.push_back(r.abs_err_db);
    std::cout << "rssi[" << split_text << "]: " << rows.size() << " samples, median abs err "
              << fmt_g9(median(errs)) << " dB\n";
    return exit_ok;
}

int cmd_aoa_eval(const std::string &ck_path, const std::string &dataset_dir,
                 const std::string &split_text, const std::string &out_path)
{
    const train::Checkpoint ck = train::load_checkpoint(ck_path);
    const sim::Dataset ds = sim::load_dataset(dataset_dir);
    const auto rows = tasks::eval_aoa(ck, ds, train::split_from_string(split_text));
    if (!out_path.empty())
        tasks::write_aoa_csv(out_path, rows);
    std::vector<double> errs;
    for (const auto &r : rows)
        errs.push_back(r.err_cells);
    std::cout << "aoa[" << split_text << "]: " << rows.size() << " samples, median error "
              << fmt_g9(median(errs)) << " cells\n";
    return exit_ok;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"wireless radiance field reconstruction via deformable 2D Gaussian splatting"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string out_path, dataset_dir, ck_path, log_path, resume_path, position_text, pgm_path;
    std::string split_text = "test";
    bool force = false;
    int iters = 1000;

    auto *gen = app.add_subcommand("gen", "simulate a dataset");
    add_config_opts(gen, opts);
    add_thread_opt(gen, opts);
    gen->add_option("--out", out_path, "output dataset directory")->required();
    gen->add_flag("--force", force, "overwrite an existing dataset");

    auto *tr = app.add_subcommand("train", "optimize a model against a dataset");
    add_config_opts(tr, opts);
    add_thread_opt(tr, opts);
    tr->add_option("--dataset", dataset_dir, "dataset directory")->required();
    tr->add_option("--out", out_path, "output checkpoint path")->required();
    tr->add_option("--log", log_path, "per-iteration training log CSV");
    tr->add_option("--resume", resume_path, "checkpoint to continue from");
    tr->add_flag("--force", force, "overwrite an existing checkpoint");

    auto *rn = app.add_subcommand("render", "render the spectrum at a position");
    rn->add_option("--checkpoint", ck_path, "checkpoint path")->required();
    rn->add_option("--position", position_text, "device position x,y,z in meters")->required();
    rn->add_option("--out", out_path, "binary output (position + complex cells, float32)");
    rn->add_option("--pgm", pgm_path, "8-bit magnitude image (debug aid)");

    auto *ev = app.add_subcommand("eval", "score a checkpoint against a dataset split");
    ev->add_option("--checkpoint", ck_path, "checkpoint path")->required();
    ev->add_option("--dataset", dataset_dir, "dataset directory")->required();
    ev->add_option("--split", split_text, "train | test | all");
    ev->add_option("--out", out_path, "metrics CSV path");

    auto *be = app.add_subcommand("bench", "rendering throughput");
    add_thread_opt(be, opts);
    be->add_option("--checkpoint", ck_path, "checkpoint (default: fresh 1k-primitive set)");
    be->add_option("--iters", iters, "renders to time");

    auto *rssi = app.add_subcommand("rssi", "received-power regression");
    rssi->require_subcommand(1);
    auto *rt = rssi->add_subcommand("train", "train an RSSI model");
    add_config_opts(rt, opts);
    add_thread_opt(rt, opts);
    rt->add_option("--dataset", dataset_dir, "dataset directory")->required();
    rt->add_option("--out", out_path, "output model path")->required();
    rt->add_option("--log", log_path, "per-iteration training log CSV");
    rt->add_flag("--force", force, "overwrite an existing model");
    auto *re = rssi->add_subcommand("eval", "evaluate an RSSI model");
    re->add_option("--model", ck_path, "model path")->required();
    re->add_option("--dataset", dataset_dir, "dataset directory")->required();
    re->add_option("--split", split_text, "train | test | all");
    re->add_option("--out", out_path, "predictions CSV path");

    auto *aoa = app.add_subcommand("aoa", "angle-of-arrival readout");
    aoa->require_subcommand(1);
    auto *ae = aoa->add_subcommand("eval", "dominant-arrival accuracy on a split");
    ae->add_option("--checkpoint", ck_path, "checkpoint path")->required();
    ae->add_option("--dataset", dataset_dir, "dataset directory")->required();
    ae->add_option("--split", split_text, "train | test | all");
    ae->add_option("--out", out_path, "per-sample CSV path");

    CLI11_PARSE(app, argc, argv);

    try
    {
        apply_threads(opts);
        if (gen->parsed())
            return cmd_gen(opts, out_path, force);
        if (tr->parsed())
            return cmd_train(opts, dataset_dir, out_path, log_path, resume_path, force, false);
        if (rn->parsed())
            return cmd_render(ck_path, position_text, out_path, pgm_path);
        if (ev->parsed())
            return cmd_eval(ck_path, dataset_dir, split_text, out_path);
        if (be->parsed())
            return cmd_bench(ck_path, iters);
        if (rssi->parsed() && rt->parsed())
            return cmd_train(opts, dataset_dir, out_path, log_path, "", force, true);
        if (rssi->parsed() && re->parsed())
            return cmd_rssi_eval(ck_path, dataset_dir, split_text, out_path);
        if (aoa->parsed() && ae->parsed())
            return cmd_aoa_eval(ck_path, dataset_dir, split_text, out_path);
        std::cerr << "error: no subcommand\n";
        return exit_bad_input;
    }
    catch (const wrfsplat::train::hash_mismatch &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return exit_hash_mismatch;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return exit_bad_input;
    }
}
