// Command-line entry point: dataset synthesis, training, evaluation,
// gradient checks, and fusion-variant ablations.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "seds/eval.hpp"
#include "seds/gradcheck.hpp"
#include "seds/synth.hpp"
#include "seds/trainer.hpp"

namespace {

using nlohmann::json;

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
    seds::SyntheticSpec spec;
    std::ifstream is(spec_path);
    if (!is) {
        std::cerr << "error: cannot open spec: " << spec_path << "\n";
        return 1;
    }
    json j;
    is >> j;
    spec = j.get<seds::SyntheticSpec>();
    seds::synth_dataset(spec, out_dir);
    std::cout << "wrote dataset to " << out_dir << "\n";
    return 0;
}

template <typename T>
int run_train(const seds::TrainConfig& cfg, const std::string& data_dir,
              const std::string& out_dir) {
    seds::Dataset ds = seds::load_manifest(data_dir);
    seds::TrainResult res = seds::train_model<T>(ds, cfg, out_dir);
    std::cout << "trained " << res.steps << " steps, final loss " << res.final_loss
              << ", best val R@1 " << res.best_val_r1 << "\n";
    std::cout << "best checkpoint: " << res.best_checkpoint << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir) {
    seds::TrainConfig cfg;
    std::ifstream is(config_path);
    if (!is) {
        std::cerr << "error: cannot open config: " << config_path << "\n";
        return 1;
    }
    json j;
    is >> j;
    cfg = j.get<seds::TrainConfig>();
    if (cfg.precision == "f32") return run_train<float>(cfg, data_dir, out_dir);
    if (cfg.precision == "f64") return run_train<double>(cfg, data_dir, out_dir);
    std::cerr << "error: unknown precision '" << cfg.precision << "'\n";
    return 1;
}

void print_report(const seds::RetrievalReport& r) {
    std::printf("%s  R@1 %.2f  R@5 %.2f  R@10 %.2f  MedR %.1f\n", r.direction.c_str(), r.r1,
                r.r5, r.r10, r.medr);
}

int cmd_eval(const std::string& ckpt, const std::string& data_dir, const std::string& split,
             const std::string& modality, const std::vector<std::string>& export_ids,
             const std::string& out_dir) {
    auto lc = seds::load_checkpoint<double>(ckpt);
    seds::Dataset ds = seds::load_manifest(data_dir);
    seds::EvalResult res = seds::evaluate(lc, ds, split, modality);
    print_report(res.t2v);
    print_report(res.v2t);
    json out{{"t2v", res.t2v}, {"v2t", res.v2t}};
    std::ofstream os(out_dir + "/eval_" + split + "_" + modality + ".json");
    os << out.dump(2) << "\n";
    if (!export_ids.empty()) seds::export_similarities(lc, ds, split, export_ids, out_dir);
    return 0;
}

int cmd_gradcheck(const std::string& module, std::uint64_t seeds) {
    bool ok = true;
    for (std::uint64_t s = 1; s <= seeds; ++s) {
        for (const auto& r : seds::run_gradchecks(module, s)) {
            std::printf("seed %llu  %-30s max_rel_err %.3e (tol %.0e)  %s\n",
                        static_cast<unsigned long long>(s), r.name.c_str(), r.max_rel_err,
                        r.tolerance, r.pass() ? "ok" : "FAIL");
            ok = ok && r.pass();
        }
    }
    return ok ? 0 : 1;
}

int cmd_ablate(const std::string& grid_path, const std::string& data_dir,
               const std::string& out_dir) {
    std::ifstream is(grid_path);
    if (!is) {
        std::cerr << "error: cannot open grid: " << grid_path << "\n";
        return 1;
    }
    json grid;
    is >> grid;
    seds::TrainConfig base;
    if (grid.contains("base")) base = grid["base"].get<seds::TrainConfig>();
    seds::Dataset ds = seds::load_manifest(data_dir);
    std::filesystem::create_directories(out_dir);

    json table = json::array();
    std::ofstream csv(out_dir + "/ablation.csv");
    csv << "name,fusion,beta,seed,t2v_r1,t2v_r5,t2v_medr,v2t_r1,v2t_r5,v2t_medr\n";
    for (const auto& run : grid.at("runs")) {
        seds::TrainConfig cfg = base;
        json merged = json(base);
        merged.merge_patch(run.value("config", json::object()));
        cfg = merged.get<seds::TrainConfig>();
        std::string name = run.at("name").get<std::string>();
        std::string run_dir = out_dir + "/" + name;
        seds::TrainResult tr = seds::train_model<double>(ds, cfg, run_dir);
        auto lc = seds::load_checkpoint<double>(tr.best_checkpoint);
        seds::EvalResult res =
            seds::evaluate(lc, ds, run.value("split", std::string("test")), "fused");
        std::printf("%-24s t2v R@1 %.2f MedR %.1f | v2t R@1 %.2f MedR %.1f\n", name.c_str(),
                    res.t2v.r1, res.t2v.medr, res.v2t.r1, res.v2t.medr);
        table.push_back({{"name", name},
                         {"fusion", seds::to_string(cfg.model.fusion.variant)},
                         {"beta", cfg.beta},
                         {"seed", cfg.seed},
                         {"t2v", res.t2v},
                         {"v2t", res.v2t}});
        csv << name << "," << seds::to_string(cfg.model.fusion.variant) << "," << cfg.beta
            << "," << cfg.seed << "," << res.t2v.r1 << "," << res.t2v.r5 << ","
            << res.t2v.medr << "," << res.v2t.r1 << "," << res.v2t.r5 << "," << res.v2t.medr
            << "\n";
    }
    std::ofstream js(out_dir + "/ablation.json");
    js << table.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dual-stream sign-language retrieval toolkit"};
    app.require_subcommand(1);

    std::string spec_path, out_dir = ".", config_path, data_dir, ckpt, split = "test";
    std::string modality = "fused", module = "all", grid_path;
    std::vector<std::string> export_ids;
    std::uint64_t seeds = 10;

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--spec", spec_path, "generator spec JSON")->required();
    synth->add_option("--out", out_dir, "output directory")->required();

    auto* train = app.add_subcommand("train", "train a model");
    train->add_option("--config", config_path, "training config JSON")->required();
    train->add_option("--data", data_dir, "dataset directory")->required();
    train->add_option("--out", out_dir, "run output directory")->required();

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--ckpt", ckpt, "checkpoint file")->required();
    eval->add_option("--data", data_dir, "dataset directory")->required();
    eval->add_option("--split", split, "dataset split");
    eval->add_option("--modality", modality, "fused|pose|rgb");
    eval->add_option("--export-sim", export_ids, "sample ids whose similarity matrices to dump");
    eval->add_option("--out", out_dir, "output directory for reports");

    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient checks");
    gc->add_option("--module", module, "all|tensor|encoders|fusion|objectives");
    gc->add_option("--seeds", seeds, "number of seeds");

    auto* ablate = app.add_subcommand("ablate", "train/eval a grid of configurations");
    ablate->add_option("--grid", grid_path, "grid JSON")->required();
    ablate->add_option("--data", data_dir, "dataset directory")->required();
    ablate->add_option("--out", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(spec_path, out_dir);
        if (train->parsed()) return cmd_train(config_path, data_dir, out_dir);
        if (eval->parsed())
            return cmd_eval(ckpt, data_dir, split, modality, export_ids, out_dir);
        if (gc->parsed()) return cmd_gradcheck(module, seeds);
        if (ablate->parsed()) return cmd_ablate(grid_path, data_dir, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
