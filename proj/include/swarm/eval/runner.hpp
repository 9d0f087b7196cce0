#pragma once

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "swarm/est/estimator.hpp"
#include "swarm/eval/metrics.hpp"
#include "swarm/io/records.hpp"
#include "swarm/netsim.hpp"
#include "swarm/sim/world.hpp"

namespace swarm::eval {

/// One config file carries the scenario plus network and estimator
/// sections.
struct RunConfig {
    sim::Scenario scenario;
    net::ChannelConfig network;
    est::EstimatorConfig estimator;
};

RunConfig config_from_json_text(const std::string& text);
RunConfig load_run_config(const std::string& path);

struct RunOptions {
    std::string out_dir;
    std::optional<uint64_t> seed;
    std::string ablate;  // "", "no-uwb", "no-detection", "no-map"
    std::optional<double> loss_uwb;
    std::optional<double> loss_vio;
    std::optional<size_t> m_max;
    std::optional<std::string> pruning;  // "random" | "fifo"
    double prop_hz = 0.0;                // 0: master rate
    bool packet_log = false;
};

void apply_overrides(RunConfig* cfg, const RunOptions& opt);

/// Writes measurements.log, injections, ground-truth trajectories.
void simulate_to_dir(const RunConfig& cfg, const std::string& dir);

/// Everything the estimate phase leaves alive, usable for direct queries.
struct EstimateResult {
    std::unique_ptr<sim::SimStreams> streams;
    std::unique_ptr<sim::SimFrontEnd> frontend;
    std::vector<std::unique_ptr<est::SwarmEstimator>> estimators;
    std::vector<sim::UwbInjection> uwb_injections;
    std::vector<sim::LoopInjection> loop_injections;

    bool all_initialized() const;
    int64_t solve_failures() const;
};

/// Replays the measurement log through the broadcast fabric into one
/// estimator instance per drone; writes estimate logs, trajectories,
/// rejection logs and a run summary.
EstimateResult estimate_from_dir(const RunConfig& cfg, const std::string& dir,
                                 const RunOptions& opt);

/// Metrics report (fused plus aligned-VIO baseline) from the logs in dir;
/// writes metrics.json and returns it.
nlohmann::ordered_json evaluate_dir(const RunConfig& cfg, const std::string& dir);

struct RunArtifacts {
    RunConfig config;
    EstimateResult estimate;
    nlohmann::ordered_json report;
    std::string out_dir;
};

/// simulate + estimate + evaluate.
RunArtifacts run_scenario(RunConfig cfg, const RunOptions& opt);

}  // namespace swarm::eval
