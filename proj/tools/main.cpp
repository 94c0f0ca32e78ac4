#include <CLI11.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "superflow/eval.hpp"
#include "superflow/gradcheck.hpp"
#include "superflow/io.hpp"
#include "superflow/rng.hpp"
#include "superflow/trainer.hpp"

namespace {

using namespace superflow;

std::string fmt(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

struct SplitClouds {
    std::vector<PointCloud> train;
    std::vector<PointCloud> eval_clouds;
};

// Even-index scenes train the probe, odd-index scenes score it.
SplitClouds split_even_odd(const Dataset& ds) {
    if (ds.scenes.size() < 2)
        throw std::runtime_error("need at least two scenes for a train/eval split");
    SplitClouds split;
    for (std::size_t i = 0; i < ds.scenes.size(); ++i) {
        std::vector<PointCloud> clouds = load_scene_clouds(ds, i);
        auto& dst = (i % 2 == 0) ? split.train : split.eval_clouds;
        for (PointCloud& cloud : clouds) dst.push_back(std::move(cloud));
    }
    return split;
}

void write_probe_report(const std::filesystem::path& path, const std::vector<std::string>& names,
                        const IouSummary& scores) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing", path);
    out << "class_id,class_name,iou\n";
    for (std::size_t c = 0; c < scores.iou.size(); ++c) {
        const std::string name =
            c < names.size() ? names[c] : "class_" + std::to_string(c);
        out << c << ',' << name << ',';
        if (scores.defined[c]) out << fmt(scores.iou[c]);
        out << '\n';
    }
    out << "miou,," << fmt(scores.miou) << '\n';
    if (!out) throw IoError("write failed", path);
}

int run_synth(const SynthOptions& options, const std::string& out_dir) {
    const Dataset ds = write_dataset(out_dir, options);
    std::cout << "wrote " << ds.scenes.size() << " scenes to " << out_dir << "\n";
    return 0;
}

int run_pretrain(const TrainConfig& config, const std::string& data, const std::string& out) {
    const Dataset ds = load_dataset(data);
    const PretrainData pd = pretrain_data_from(ds);
    const Checkpoint ckpt = run_pretraining(config, pd);
    write_checkpoint(out, ckpt);
    write_metrics_csv(out + ".metrics.csv", ckpt.history);
    const double final_total = ckpt.history.empty() ? 0.0 : ckpt.history.back().total;
    std::cout << "steps " << ckpt.step << " final_total " << fmt(final_total) << "\n";
    return 0;
}

int run_probe(const std::string& ckpt_path, bool use_random, std::uint64_t seed,
              const std::string& data, const std::string& out) {
    const Dataset ds = load_dataset(data);
    PointEncoderParams encoder;
    if (use_random) {
        TrainConfig config;
        config.seed = seed;
        encoder = init_trainer(config, ds.options.classes, 1).model.encoder;
    } else {
        encoder = read_checkpoint(ckpt_path).model.encoder;
    }
    const SplitClouds split = split_even_odd(ds);
    const ProbeResult result =
        linear_probe(encoder, split.train, split.eval_clouds, ds.options.classes);
    write_probe_report(out, ds.class_names, result.scores);
    std::cout << "miou " << fmt(result.scores.miou) << "\n";
    return 0;
}

int run_gradcheck_cmd(std::uint64_t seed) {
    const std::vector<GradCheckReport> reports = run_gradcheck(seed);
    bool all_pass = true;
    for (const GradCheckReport& r : reports) {
        std::cout << r.name << " instances=" << r.instances
                  << " max_rel_err=" << fmt(r.max_rel_err) << (r.pass ? " PASS" : " FAIL")
                  << "\n";
        all_pass = all_pass && r.pass;
    }
    return all_pass ? 0 : 1;
}

int run_eval_robust(const std::string& ckpt_path, const std::string& data) {
    const Dataset ds = load_dataset(data);
    const Checkpoint ckpt = read_checkpoint(ckpt_path);
    const int feat_channels = static_cast<int>(ckpt.model.encoder.w1.cols()) - 3;
    const int table_classes = static_cast<int>(ckpt.model.image_table.rows());
    const TrainerModel baseline = init_trainer(ckpt.config, table_classes, feat_channels).model;

    const int k = ds.options.classes;
    const SplitClouds split = split_even_odd(ds);
    const ProbeModel probe_model = fit_probe(ckpt.model.encoder, split.train, k);
    const ProbeModel probe_base = fit_probe(baseline.encoder, split.train, k);
    const double clean_model =
        evaluate_probe(ckpt.model.encoder, probe_model, split.eval_clouds, k).miou;
    const double clean_base =
        evaluate_probe(baseline.encoder, probe_base, split.eval_clouds, k).miou;

    const LidarSpec lidar = lidar_from(ds.options);
    std::array<double, 3> model_scores{};
    std::array<double, 3> base_scores{};
    std::cout << "metric,value\n";
    std::cout << "miou_clean," << fmt(clean_model) << "\n";
    std::cout << "miou_clean_baseline," << fmt(clean_base) << "\n";
    for (std::size_t i = 0; i < kBeamDropSeverities.size(); ++i) {
        std::vector<PointCloud> corrupted;
        corrupted.reserve(split.eval_clouds.size());
        for (std::size_t j = 0; j < split.eval_clouds.size(); ++j)
            corrupted.push_back(corrupt_beam_missing(
                split.eval_clouds[j], kBeamDropSeverities[i], lidar,
                mix_seed(ds.options.seed, 0xc0de + i * 4096 + j)));
        model_scores[i] = evaluate_probe(ckpt.model.encoder, probe_model, corrupted, k).miou;
        base_scores[i] = evaluate_probe(baseline.encoder, probe_base, corrupted, k).miou;
        const int pct = static_cast<int>(kBeamDropSeverities[i] * 100.0 + 0.5);
        std::cout << "miou_beam_missing_" << pct << "," << fmt(model_scores[i]) << "\n";
    }
    const CeRr r = ce_rr(model_scores, base_scores, clean_model);
    std::cout << "CE," << (r.ce_defined ? fmt(r.ce) : "nan") << "\n";
    std::cout << "RR," << (r.rr_defined ? fmt(r.rr) : "nan") << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic lidar-camera contrastive pretraining pipeline"};
    app.require_subcommand(1);

    SynthOptions synth_opts;
    std::string synth_out;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--seed", synth_opts.seed, "rng seed")->required();
    synth->add_option("--scenes", synth_opts.scenes, "number of scenes")
        ->required()
        ->check(CLI::Range(1, 1000000));
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--classes", synth_opts.classes, "semantic classes")
        ->check(CLI::Range(2, 65535));
    synth->add_option("--cameras", synth_opts.cameras, "cameras in the rig")
        ->check(CLI::Range(1, 64));
    synth->add_option("--beams", synth_opts.beams, "lidar beams")->check(CLI::Range(1, 4096));
    synth->add_option("--hz", synth_opts.hz, "sweep rate")->check(CLI::PositiveNumber);

    TrainConfig config;
    std::string pre_data;
    std::string pre_out;
    bool no_vc = false;
    bool no_d2s = false;
    bool no_fcl = false;
    CLI::App* pretrain = app.add_subcommand("pretrain", "run contrastive pretraining");
    pretrain->add_option("--data", pre_data, "dataset directory")->required();
    pretrain->add_option("--out", pre_out, "checkpoint path")->required();
    pretrain->add_option("--steps", config.steps, "optimization steps")->required();
    pretrain->add_option("--dt", config.dt, "temporal offset, seconds")
        ->check(CLI::PositiveNumber);
    pretrain->add_option("--sweeps", config.num_sweeps, "sweeps per keyframe")
        ->check(CLI::Range(0, 64));
    pretrain->add_option("--tau", config.tau, "softmax temperature")->check(CLI::PositiveNumber);
    pretrain->add_flag("--no-vc", no_vc, "per-view superpixels instead of view-consistent");
    pretrain->add_flag("--no-d2s", no_d2s, "disable the dense-to-sparse term");
    pretrain->add_flag("--no-fcl", no_fcl, "disable the temporal term");
    pretrain->add_option("--seed", config.seed, "rng seed");

    std::string probe_ckpt;
    std::string probe_data;
    std::string probe_out;
    bool probe_random = false;
    std::uint64_t probe_seed = 0;
    CLI::App* probe = app.add_subcommand("probe", "linear-probe a frozen encoder");
    CLI::Option_group* model_group = probe->add_option_group("model", "encoder source");
    model_group->add_option("--ckpt", probe_ckpt, "checkpoint path");
    model_group->add_flag("--random", probe_random, "random-init encoder");
    model_group->require_option(1);
    probe->add_option("--data", probe_data, "dataset directory")->required();
    probe->add_option("--out", probe_out, "report path")->required();
    probe->add_option("--seed", probe_seed, "seed for --random");

    std::uint64_t gc_seed = 0;
    CLI::App* gradcheck_cmd =
        app.add_subcommand("gradcheck", "finite-difference gradient checks");
    gradcheck_cmd->add_option("--seed", gc_seed, "rng seed");

    std::string er_ckpt;
    std::string er_data;
    CLI::App* evalr = app.add_subcommand("eval-robust", "corruption robustness metrics");
    evalr->add_option("--ckpt", er_ckpt, "checkpoint path")->required();
    evalr->add_option("--data", er_data, "dataset directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) return run_synth(synth_opts, synth_out);
        if (pretrain->parsed()) {
            config.enable_vc = !no_vc;
            config.enable_d2s = !no_d2s;
            config.enable_fcl = !no_fcl;
            return run_pretrain(config, pre_data, pre_out);
        }
        if (probe->parsed())
            return run_probe(probe_ckpt, probe_random, probe_seed, probe_data, probe_out);
        if (gradcheck_cmd->parsed()) return run_gradcheck_cmd(gc_seed);
        if (evalr->parsed()) return run_eval_robust(er_ckpt, er_data);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
