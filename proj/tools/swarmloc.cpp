#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <string>

#include "swarm/eval/runner.hpp"

namespace fs = std::filesystem;
using namespace swarm;
using namespace swarm::eval;

namespace {

struct CommonArgs {
    std::string config;
    std::string out_dir;
    uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
    cmd->add_option("--config", args->config, "scenario config (JSON)")->required();
    cmd->add_option("--out-dir", args->out_dir, "output directory")->required();
    cmd->add_option("--seed", args->seed, "override the scenario seed")
        ->each([args](const std::string&) { args->seed_set = true; });
}

RunOptions base_options(const CommonArgs& args) {
    RunOptions opt;
    opt.out_dir = args.out_dir;
    if (args.seed_set) opt.seed = args.seed;
    return opt;
}

void print_metric_summary(const nlohmann::ordered_json& rep) {
    auto val = [](const nlohmann::ordered_json& j) {
        return j.is_null() ? std::string("n/a") : j.dump();
    };
    std::printf("metrics (observer %s):\n", rep["observer"].dump().c_str());
    if (rep.contains("re")) {
        for (const auto& [k, v] : rep["re"].items()) {
            std::printf("  RE 0->%s  pos %s m  yaw %s rad\n", k.c_str(),
                        val(v["pos_rmse_norm"]).c_str(), val(v["yaw_rmse"]).c_str());
        }
    }
    if (rep.contains("ate")) {
        for (const auto& [k, v] : rep["ate"].items()) {
            std::printf("  ATE %s    pos %s m  yaw %s rad\n", k.c_str(),
                        val(v["pos_rmse"]).c_str(), val(v["yaw_rmse"]).c_str());
        }
    }
    if (rep.contains("drift")) {
        for (const auto& [k, v] : rep["drift"].items()) {
            std::printf("  drift %s  %s\n", k.c_str(), val(v).c_str());
        }
    }
}

int run_estimate(const CommonArgs& common, const RunOptions& opt) {
    auto cfg = load_run_config(common.config);
    apply_overrides(&cfg, opt);
    auto res = estimate_from_dir(cfg, opt.out_dir, opt);
    std::printf("estimate: %d instances, initialized=%s, solve failures=%lld\n",
                cfg.scenario.n_drones(), res.all_initialized() ? "yes" : "partial",
                static_cast<long long>(res.solve_failures()));
    return res.solve_failures() > 0 ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"decentralized swarm state-estimation workbench"};
    app.require_subcommand(1);

    CommonArgs sim_args, est_args, eval_args, abl_args, prune_args;
    RunOptions est_opt;
    std::string ablate_mode, pruning_mode;
    double loss_uwb = -1, loss_vio = -1, prop_hz = 0;
    int64_t m_max = -1;
    bool packet_log = false;

    auto* sim = app.add_subcommand("simulate", "generate ground truth and measurement logs");
    add_common(sim, &sim_args);

    auto* est = app.add_subcommand("estimate", "replay a measurement log through the estimators");
    add_common(est, &est_args);
    est->add_option("--loss-uwb", loss_uwb, "drop probability for UWB broadcasts");
    est->add_option("--loss-vio", loss_vio, "drop probability for VIO broadcasts");
    est->add_option("--ablate", ablate_mode, "no-uwb | no-detection | no-map");
    est->add_option("--m-max", m_max, "graph frame bound");
    est->add_option("--pruning", pruning_mode, "random | fifo");
    est->add_option("--prop-hz", prop_hz, "estimate output rate (default: VIO rate)");
    est->add_flag("--packet-log", packet_log, "write packets.log");

    auto* ev = app.add_subcommand("evaluate", "compute metrics from logs");
    add_common(ev, &eval_args);

    auto* abl = app.add_subcommand("ablate", "run the edge-type ablation table");
    add_common(abl, &abl_args);

    auto* cmp = app.add_subcommand("compare-pruning", "random vs fifo deletion at a small m_max");
    add_common(cmp, &prune_args);
    int64_t cmp_m_max = 30;
    cmp->add_option("--m-max", cmp_m_max, "graph frame bound for the comparison");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            auto cfg = load_run_config(sim_args.config);
            auto opt = base_options(sim_args);
            apply_overrides(&cfg, opt);
            simulate_to_dir(cfg, sim_args.out_dir);
            std::printf("wrote %s/measurements.log\n", sim_args.out_dir.c_str());
            return 0;
        }
        if (est->parsed()) {
            est_opt = base_options(est_args);
            if (loss_uwb >= 0) est_opt.loss_uwb = loss_uwb;
            if (loss_vio >= 0) est_opt.loss_vio = loss_vio;
            if (!ablate_mode.empty()) est_opt.ablate = ablate_mode;
            if (m_max >= 0) est_opt.m_max = static_cast<size_t>(m_max);
            if (!pruning_mode.empty()) est_opt.pruning = pruning_mode;
            est_opt.prop_hz = prop_hz;
            est_opt.packet_log = packet_log;
            return run_estimate(est_args, est_opt);
        }
        if (ev->parsed()) {
            auto cfg = load_run_config(eval_args.config);
            auto opt = base_options(eval_args);
            apply_overrides(&cfg, opt);
            auto rep = evaluate_dir(cfg, eval_args.out_dir);
            print_metric_summary(rep);
            return 0;
        }
        if (abl->parsed()) {
            nlohmann::ordered_json table;
            int rc = 0;
            for (const std::string mode : {"full", "no-uwb", "no-detection", "no-map"}) {
                auto cfg = load_run_config(abl_args.config);
                auto opt = base_options(abl_args);
                opt.out_dir = (fs::path(abl_args.out_dir) / mode).string();
                opt.ablate = mode == "full" ? "" : mode;
                auto art = run_scenario(cfg, opt);
                table[mode] = art.report;
                if (art.estimate.solve_failures() > 0) rc = 2;
                std::printf("== %s ==\n", mode.c_str());
                print_metric_summary(art.report);
            }
            std::ofstream out(fs::path(abl_args.out_dir) / "ablation.json");
            out << table.dump(2) << '\n';
            return rc;
        }
        if (cmp->parsed()) {
            nlohmann::ordered_json table;
            for (const std::string mode : {"random", "fifo"}) {
                auto cfg = load_run_config(prune_args.config);
                auto opt = base_options(prune_args);
                opt.out_dir = (fs::path(prune_args.out_dir) / mode).string();
                opt.m_max = static_cast<size_t>(cmp_m_max);
                opt.pruning = mode;
                auto art = run_scenario(cfg, opt);
                table[mode]["ate"] = art.report["ate"];
                table[mode]["re"] = art.report["re"];
                std::printf("== pruning=%s ==\n", mode.c_str());
                print_metric_summary(art.report);
            }
            std::ofstream out(fs::path(prune_args.out_dir) / "pruning.json");
            out << table.dump(2) << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
