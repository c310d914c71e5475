#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "janus/analytics.hpp"
#include "janus/checkpoint.hpp"
#include "janus/config_json.hpp"
#include "janus/data.hpp"
#include "janus/gradcheck.hpp"
#include "janus/inversion.hpp"
#include "janus/losses.hpp"
#include "janus/model.hpp"
#include "janus/trainer.hpp"

namespace {

using nlohmann::json;

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream f(path);
    if (!f) throw janus::ConfigError("config file not found: " + path);
    try {
        json j = json::parse(f);
        for (const auto& [key, _] : j.items())
            if (key != "model" && key != "train" && key != "inversion" && key != "microgen")
                throw janus::ParseError(path + ": unknown section \"" + key + "\"");
        return j;
    } catch (const json::parse_error& e) {
        throw janus::ParseError(path + ": " + e.what());
    }
}

janus::Dataset load_any_dataset(const std::string& data, const std::string& images,
                                const std::string& labels) {
    if (!data.empty()) return janus::load_dataset(data);
    if (!images.empty() && !labels.empty()) return janus::load_idx(images, labels);
    throw janus::ConfigError("provide --data FILE or --images/--labels IDX paths");
}

void require_readable(const std::string& path, const std::string& what) {
    if (!std::filesystem::exists(path))
        throw janus::ConfigError(what + " not found: " + path);
}

struct CommonData {
    std::string data, images, labels;
    void add_flags(CLI::App* cmd, bool required) {
        auto* d = cmd->add_option("--data", data, "Dataset container file");
        auto* i = cmd->add_option("--images", images, "IDX image file");
        auto* l = cmd->add_option("--labels", labels, "IDX label file");
        i->needs(l);
        l->needs(i);
        d->excludes(i);
        if (required) {
            // validated at load time so the error lands on exit code 1
        }
    }
};

void print_metrics(const janus::JanusModel& m, const janus::MetricsRecord& r) {
    if (m.cfg.task == janus::TaskKind::Classification)
        std::printf("epoch %d  accuracy %.4f  recon %.4f  cycle %.4f  deep %.4f\n", r.epoch,
                    r.task_metric, r.recon_mae, r.cycle_mae, r.deep_mae);
    else
        std::printf("epoch %d  mae %.4g  rel_mae %.3f%%  r2 %.4f  recon %.4f  cycle %.4f  deep %.4f\n",
                    r.epoch, r.task_metric, 100.0 * r.rel_mae, r.r2, r.recon_mae, r.cycle_mae,
                    r.deep_mae);
}

void write_candidate_images(const std::string& dir, const std::vector<janus::Candidate>& cands) {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < cands.size(); ++i)
        janus::write_pgm(dir + "/candidate_" + std::to_string(i) + ".pgm", cands[i].image);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Jointly trained autoencoder + spline surrogate head with latent-space "
                 "generative inversion"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (sections: model, train, inversion, microgen)");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a labeled two-phase microstructure dataset");
    int gen_n = 200, gen_size = 64;
    std::uint64_t gen_seed = 0;
    std::string gen_out = "micro.jnsd";
    gen->add_option("--n", gen_n, "Number of samples")->capture_default_str();
    gen->add_option("--size", gen_size, "Grid size")->capture_default_str();
    gen->add_option("--seed", gen_seed, "RNG seed")->capture_default_str();
    gen->add_option("--out", gen_out, "Output dataset path")->capture_default_str();
    gen->callback([&] {
        const json cfg_file = load_config_file(config_path);
        janus::MicroGenParams p;
        if (cfg_file.contains("microgen"))
            p = janus::microgen_params_from_json(cfg_file.at("microgen"), p);
        if (gen->count("--size")) p.grid = gen_size;
        const janus::Dataset ds = janus::build_micro_dataset(gen_n, p, gen_seed);
        janus::save_dataset(gen_out, ds);
        double mn = ds.labels[0], mx = ds.labels[0], mean = 0;
        for (double l : ds.labels) mn = std::min(mn, l), mx = std::max(mx, l), mean += l;
        mean /= double(ds.labels.size());
        std::printf("wrote %d samples (%dx%d) to %s\n", ds.size(), p.grid, p.grid, gen_out.c_str());
        std::printf("labels: min %.4g  max %.4g  mean %.4g\n", mn, mx, mean);
    });

    // train
    auto* tr = app.add_subcommand("train", "Train encoder, decoder and head jointly");
    std::string tr_task;
    CommonData tr_data;
    std::string tr_out = "model.jnsc", tr_metrics = "metrics.csv";
    std::optional<int> tr_epochs, tr_batch;
    std::optional<double> tr_lr, tr_scale, tr_valfrac;
    std::optional<std::uint64_t> tr_seed;
    tr->add_option("--task", tr_task, "Task preset: mnist or micro")->required();
    tr_data.add_flags(tr, true);
    tr->add_option("--out", tr_out, "Checkpoint output path")->capture_default_str();
    tr->add_option("--metrics", tr_metrics, "Metrics CSV output path")->capture_default_str();
    tr->add_option("--epochs", tr_epochs, "Training epochs (default 50 mnist / 100 micro)");
    tr->add_option("--batch-size", tr_batch, "Mini-batch size (default 64)");
    tr->add_option("--lr", tr_lr, "Learning rate (default 0.001)");
    tr->add_option("--seed", tr_seed, "RNG seed (default 0)");
    tr->add_option("--target-scale", tr_scale,
                   "Regression target multiplier (default: dataset metadata)");
    tr->add_option("--val-fraction", tr_valfrac, "Held-out fraction (default 0.1)");
    tr->callback([&] {
        if (tr_task != "mnist" && tr_task != "micro")
            throw janus::ConfigError("--task must be mnist or micro, got \"" + tr_task + "\"");
        const json cfg_file = load_config_file(config_path);
        janus::JanusConfig mc = tr_task == "mnist" ? janus::JanusConfig::mnist_default()
                                                   : janus::JanusConfig::micro_default();
        if (cfg_file.contains("model")) mc = janus::janus_config_from_json(cfg_file.at("model"), mc);

        janus::TrainConfig tc;
        tc.epochs = tr_task == "mnist" ? 50 : 100;
        bool scale_set = false;
        if (cfg_file.contains("train")) {
            scale_set = cfg_file.at("train").contains("target_scale");
            tc = janus::train_config_from_json(cfg_file.at("train"), tc);
        }
        if (tr_epochs) tc.epochs = *tr_epochs;
        if (tr_batch) tc.batch_size = *tr_batch;
        if (tr_lr) tc.learning_rate = *tr_lr;
        if (tr_seed) tc.seed = *tr_seed;
        if (tr_valfrac) tc.val_fraction = *tr_valfrac;
        if (tr_scale) {
            tc.target_scale = *tr_scale;
            scale_set = true;
        }

        const janus::Dataset ds = load_any_dataset(tr_data.data, tr_data.images, tr_data.labels);
        if (!scale_set) tc.target_scale = ds.target_scale;

        janus::JanusModel m = janus::build_janus(mc, tc.seed);
        std::vector<janus::MetricsRecord> history;
        try {
            history = janus::train(m, ds, tc);
        } catch (const janus::DivergenceError&) {
            janus::save_checkpoint(tr_out, m);  // last good state
            throw;
        }
        janus::save_checkpoint(tr_out, m);
        janus::write_metrics_csv(tr_metrics, history);
        for (const auto& r : history) print_metrics(m, r);
        std::printf("checkpoint: %s\nmetrics: %s\n", tr_out.c_str(), tr_metrics.c_str());
    });

    // invert
    auto* inv = app.add_subcommand("invert", "Recover designs for a target property or class");
    std::string inv_ckpt = "model.jnsc", inv_task, inv_outdir = "inversion";
    CommonData inv_data;
    double inv_target = 0.0;
    std::optional<int> inv_swarm, inv_steps, inv_prior;
    std::optional<double> inv_lr, inv_k1, inv_k2;
    std::optional<std::uint64_t> inv_seed;
    bool inv_no_oracle = false;
    inv->add_option("--checkpoint", inv_ckpt, "Trained model")->capture_default_str();
    inv->add_option("--target", inv_target, "Target property value or class index")->required();
    inv->add_option("--task", inv_task, "Expected task of the checkpoint (mnist or micro)");
    inv->add_option("--swarm", inv_swarm, "Swarm size (default 10)");
    inv->add_option("--steps", inv_steps, "Adam steps (default 1000 classification / 2000 regression)");
    inv->add_option("--lr", inv_lr, "Inversion learning rate (default 0.01)");
    inv->add_option("--seed", inv_seed, "RNG seed (default 0)");
    inv->add_option("--conditional-prior", inv_prior,
                    "Class index whose latent stats seed the swarm (needs --data)");
    inv->add_option("--out-dir", inv_outdir, "Output directory")->capture_default_str();
    inv->add_option("--k1", inv_k1, "Oracle phase-1 conductivity (default 1)");
    inv->add_option("--k2", inv_k2, "Oracle phase-2 conductivity (default 50)");
    inv->add_flag("--no-revalidate", inv_no_oracle, "Skip the transport-oracle check");
    inv_data.add_flags(inv, false);
    inv->callback([&] {
        require_readable(inv_ckpt, "checkpoint");
        const janus::JanusModel m = janus::load_checkpoint(inv_ckpt);
        if (!inv_task.empty()) {
            const bool want_cls = inv_task == "mnist";
            if (inv_task != "mnist" && inv_task != "micro")
                throw janus::ConfigError("--task must be mnist or micro");
            if (want_cls != (m.cfg.task == janus::TaskKind::Classification))
                throw janus::ConfigError("checkpoint task does not match --task " + inv_task);
        }
        const json cfg_file = load_config_file(config_path);
        janus::InversionConfig ic;
        ic.steps = m.cfg.task == janus::TaskKind::Classification ? 1000 : 2000;
        if (cfg_file.contains("inversion"))
            ic = janus::inversion_config_from_json(cfg_file.at("inversion"), ic);
        ic.target = inv_target;
        if (inv_swarm) ic.swarm_size = *inv_swarm;
        if (inv_steps) ic.steps = *inv_steps;
        if (inv_lr) ic.learning_rate = *inv_lr;
        if (inv_seed) ic.seed = *inv_seed;
        if (inv_prior) ic.conditional_prior = *inv_prior;

        std::optional<janus::Dataset> ref;
        if (!inv_data.data.empty() || !inv_data.images.empty())
            ref = load_any_dataset(inv_data.data, inv_data.images, inv_data.labels);

        std::vector<janus::Candidate> cands =
            janus::invert(m, ic, ref ? &*ref : nullptr);
        if (m.cfg.task == janus::TaskKind::Regression && !inv_no_oracle) {
            janus::MicroGenParams mp;
            if (cfg_file.contains("microgen"))
                mp = janus::microgen_params_from_json(cfg_file.at("microgen"), mp);
            if (inv_k1) mp.k1 = *inv_k1;
            if (inv_k2) mp.k2 = *inv_k2;
            for (auto& c : cands) c = janus::revalidate(std::move(c), mp.k1, mp.k2, mp.cg_tol);
        }
        write_candidate_images(inv_outdir, cands);
        janus::write_candidates_csv(inv_outdir + "/candidates.csv", cands, ic.target);
        for (std::size_t i = 0; i < cands.size(); ++i) {
            const auto& c = cands[i];
            if (m.cfg.task == janus::TaskKind::Classification)
                std::printf("candidate %zu (member %d): class %d  confidence %.4f  J %.4g\n", i,
                            c.member, int(c.predicted), c.confidence, c.final_objective);
            else if (c.has_oracle)
                std::printf("candidate %zu (member %d): predicted %.4g  oracle %.4g  J %.4g\n", i,
                            c.member, c.predicted, c.oracle_property, c.final_objective);
            else
                std::printf("candidate %zu (member %d): predicted %.4g  J %.4g%s\n", i, c.member,
                            c.predicted, c.final_objective,
                            c.oracle_failed ? "  (oracle failed)" : "");
        }
        std::printf("outputs in %s\n", inv_outdir.c_str());
    });

    // sweep
    auto* sw = app.add_subcommand("sweep", "Best inversion candidate per target");
    std::string sw_ckpt = "model.jnsc", sw_outdir = "sweep";
    std::vector<double> sw_targets;
    std::optional<int> sw_swarm, sw_steps;
    std::optional<double> sw_lr, sw_k1, sw_k2;
    std::optional<std::uint64_t> sw_seed;
    bool sw_no_oracle = false;
    sw->add_option("--checkpoint", sw_ckpt, "Trained model")->capture_default_str();
    sw->add_option("--targets", sw_targets, "Comma-separated target list")
        ->required()
        ->delimiter(',');
    sw->add_option("--swarm", sw_swarm, "Swarm size (default 10)");
    sw->add_option("--steps", sw_steps, "Adam steps per member (default 2000)");
    sw->add_option("--lr", sw_lr, "Inversion learning rate (default 0.01)");
    sw->add_option("--seed", sw_seed, "RNG seed shared across targets (default 0)");
    sw->add_option("--out-dir", sw_outdir, "Output directory")->capture_default_str();
    sw->add_option("--k1", sw_k1, "Oracle phase-1 conductivity (default 1)");
    sw->add_option("--k2", sw_k2, "Oracle phase-2 conductivity (default 50)");
    sw->add_flag("--no-revalidate", sw_no_oracle, "Skip the transport-oracle check");
    sw->callback([&] {
        require_readable(sw_ckpt, "checkpoint");
        const janus::JanusModel m = janus::load_checkpoint(sw_ckpt);
        const json cfg_file = load_config_file(config_path);
        janus::InversionConfig ic;
        if (cfg_file.contains("inversion"))
            ic = janus::inversion_config_from_json(cfg_file.at("inversion"), ic);
        if (sw_swarm) ic.swarm_size = *sw_swarm;
        if (sw_steps) ic.steps = *sw_steps;
        if (sw_lr) ic.learning_rate = *sw_lr;
        if (sw_seed) ic.seed = *sw_seed;
        std::vector<janus::Candidate> best = janus::property_sweep(sw_targets, m, ic);
        if (m.cfg.task == janus::TaskKind::Regression && !sw_no_oracle) {
            janus::MicroGenParams mp;
            if (cfg_file.contains("microgen"))
                mp = janus::microgen_params_from_json(cfg_file.at("microgen"), mp);
            if (sw_k1) mp.k1 = *sw_k1;
            if (sw_k2) mp.k2 = *sw_k2;
            for (auto& c : best) c = janus::revalidate(std::move(c), mp.k1, mp.k2, mp.cg_tol);
        }
        std::filesystem::create_directories(sw_outdir);
        std::ofstream csv(sw_outdir + "/sweep.csv");
        csv << "member,target,predicted,oracle,rel_err,final_objective\n";
        for (std::size_t i = 0; i < best.size(); ++i) {
            const auto& c = best[i];
            const double t = sw_targets[i];
            const double denom = std::abs(t) > 0 ? std::abs(t) : 1.0;
            char line[512];
            std::snprintf(line, sizeof line, "%d,%.6g,%.6g,%.6g,%.6g,%.6g\n", c.member, t,
                          c.predicted, c.has_oracle ? c.oracle_property : std::nan(""),
                          std::abs(c.predicted - t) / denom, c.final_objective);
            csv << line;
            janus::write_pgm(sw_outdir + "/target_" + std::to_string(i) + ".pgm", c.image);
            std::printf("target %.4g: predicted %.4g (rel err %.3f%%)%s\n", t, c.predicted,
                        100.0 * std::abs(c.predicted - t) / denom,
                        c.has_oracle ? (" oracle " + std::to_string(c.oracle_property)).c_str()
                                     : "");
        }
        std::printf("outputs in %s\n", sw_outdir.c_str());
    });

    // traverse
    auto* tv = app.add_subcommand("traverse", "Decode samples along the first latent principal axis");
    std::string tv_ckpt = "model.jnsc", tv_outdir = "traversal";
    CommonData tv_data;
    int tv_points = 9;
    tv->add_option("--checkpoint", tv_ckpt, "Trained model")->capture_default_str();
    tv_data.add_flags(tv, true);
    tv->add_option("--points", tv_points, "Probe count along PC1")->capture_default_str();
    tv->add_option("--out-dir", tv_outdir, "Output directory")->capture_default_str();
    tv->callback([&] {
        require_readable(tv_ckpt, "checkpoint");
        const janus::JanusModel m = janus::load_checkpoint(tv_ckpt);
        const janus::Dataset ds = load_any_dataset(tv_data.data, tv_data.images, tv_data.labels);
        const janus::TraversalReport rep = janus::latent_traversal(m, ds, tv_points);
        std::filesystem::create_directories(tv_outdir);
        janus::write_traversal_csv(tv_outdir + "/traversal.csv", rep);
        janus::write_scatter_csv(tv_outdir + "/scatter.csv", m, ds);
        const std::size_t elems = ds.images.numel() / std::size_t(ds.size());
        for (std::size_t i = 0; i < rep.points.size(); ++i) {
            const auto& pt = rep.points[i];
            janus::Tensor data_img({ds.images.shape[2], ds.images.shape[3]});
            std::copy_n(ds.images.data.begin() + std::ptrdiff_t(pt.index) * elems, elems,
                        data_img.data.begin());
            janus::write_pgm(tv_outdir + "/data_" + std::to_string(i) + ".pgm", data_img);
            janus::write_pgm(tv_outdir + "/recon_" + std::to_string(i) + ".pgm", pt.image);
        }
        std::printf("spearman(PC1, prediction) = %.4f over %d samples\n", rep.spearman, ds.size());
        std::printf("outputs in %s\n", tv_outdir.c_str());
    });

    // eval
    auto* ev = app.add_subcommand("eval", "Metrics of a checkpoint on a dataset");
    std::string ev_ckpt = "model.jnsc";
    CommonData ev_data;
    ev->add_option("--checkpoint", ev_ckpt, "Trained model")->capture_default_str();
    ev_data.add_flags(ev, true);
    ev->callback([&] {
        require_readable(ev_ckpt, "checkpoint");
        const janus::JanusModel m = janus::load_checkpoint(ev_ckpt);
        const janus::Dataset ds = load_any_dataset(ev_data.data, ev_data.images, ev_data.labels);
        print_metrics(m, janus::evaluate(m, ds, m.trained_epochs));
    });

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Analytic gradients vs central finite differences");
    std::uint64_t gc_seed = 42;
    gc->add_option("--seed", gc_seed, "RNG seed")->capture_default_str();
    gc->callback([&] {
        bool all_pass = true;
        for (const auto& r : janus::gradcheck_all(gc_seed)) {
            std::printf("%-32s %s  max rel err %.3g", r.name.c_str(),
                        r.pass ? "PASS" : "FAIL", r.max_rel_err);
            if (r.skipped > 0)
                std::printf("  (%d/%d probes straddled kinks)", r.skipped, r.probes);
            std::printf("\n");
            all_pass = all_pass && r.pass;
        }
        if (!all_pass) throw janus::ConfigError("gradient check failed");
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const janus::DivergenceError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const janus::InversionError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const janus::SolverError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
