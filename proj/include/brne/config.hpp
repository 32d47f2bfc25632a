#pragma once

// Run configuration: one human-editable key=value document with [sections],
// combining scenario, planner, kernel, risk, solver, and pedestrian-model
// parameters. Every field has a default; file values override defaults and
// command-line flags override the file.

#include <cstdint>
#include <fstream>
#include <map>
#include <string>

#include "brne/planner.hpp"
#include "brne/sim.hpp"
#include "brne/solver.hpp"

namespace brne {

struct RunConfig {
    ScenarioConfig scenario;
    PlannerConfig planner;
    KernelSpec kernel;
    RiskParams risk;
    SolveConfig solver;
    PedestrianModelParams ped_model;

    std::string out_dir = "out";
    int trials = 100;
    std::uint64_t base_seed = 1;
    int threads = 0;               // 0 = hardware concurrency
    int agents_min = 4;            // multiagent sweep range
    int agents_max = 8;
    bool write_traces = false;
};

namespace detail {

struct IniDocument {
    // section -> key -> (value, consumed)
    std::map<std::string, std::map<std::string, std::pair<std::string, bool>>> sections;
};

inline IniDocument parse_ini(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw ConfigError("config: cannot open '" + path + "'");
    IniDocument doc;
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(file, line)) {
        ++line_no;
        std::string trimmed = strip(line);
        const size_t comment = trimmed.find('#');
        if (comment != std::string::npos) trimmed = strip(trimmed.substr(0, comment));
        if (trimmed.empty()) continue;
        if (trimmed.front() == '[') {
            if (trimmed.back() != ']')
                throw ConfigError("config: line " + std::to_string(line_no) +
                                  ": malformed section header");
            section = strip(trimmed.substr(1, trimmed.size() - 2));
            continue;
        }
        const size_t eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = strip(trimmed.substr(0, eq));
        const std::string value = strip(trimmed.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config: line " + std::to_string(line_no) + ": empty key");
        doc.sections[section][key] = {value, false};
    }
    return doc;
}

class IniReader {
public:
    explicit IniReader(IniDocument& doc) : doc_(doc) {}

    bool lookup(const std::string& section, const std::string& key, std::string& out) {
        auto sec = doc_.sections.find(section);
        if (sec == doc_.sections.end()) return false;
        auto entry = sec->second.find(key);
        if (entry == sec->second.end()) return false;
        entry->second.second = true;
        out = entry->second.first;
        return true;
    }

    void get(const std::string& section, const std::string& key, double& value) {
        std::string raw;
        if (!lookup(section, key, raw)) return;
        try {
            size_t used = 0;
            value = std::stod(raw, &used);
            if (used != raw.size()) throw std::invalid_argument(raw);
        } catch (const std::exception&) {
            throw ConfigError("config: [" + section + "] " + key + ": bad number '" + raw + "'");
        }
    }

    void get(const std::string& section, const std::string& key, int& value) {
        std::string raw;
        if (!lookup(section, key, raw)) return;
        try {
            size_t used = 0;
            value = std::stoi(raw, &used);
            if (used != raw.size()) throw std::invalid_argument(raw);
        } catch (const std::exception&) {
            throw ConfigError("config: [" + section + "] " + key + ": bad integer '" + raw + "'");
        }
    }

    void get(const std::string& section, const std::string& key, std::uint64_t& value) {
        std::string raw;
        if (!lookup(section, key, raw)) return;
        try {
            size_t used = 0;
            value = std::stoull(raw, &used);
            if (used != raw.size()) throw std::invalid_argument(raw);
        } catch (const std::exception&) {
            throw ConfigError("config: [" + section + "] " + key + ": bad integer '" + raw + "'");
        }
    }

    void get(const std::string& section, const std::string& key, bool& value) {
        std::string raw;
        if (!lookup(section, key, raw)) return;
        if (raw == "true" || raw == "1")
            value = true;
        else if (raw == "false" || raw == "0")
            value = false;
        else
            throw ConfigError("config: [" + section + "] " + key + ": bad boolean '" + raw + "'");
    }

    void get(const std::string& section, const std::string& key, std::string& value) {
        std::string raw;
        if (lookup(section, key, raw)) value = raw;
    }

    void finish() const {
        for (const auto& [section, entries] : doc_.sections)
            for (const auto& [key, entry] : entries)
                if (!entry.second)
                    throw ConfigError("config: unknown key [" + section + "] " + key);
    }

private:
    IniDocument& doc_;
};

}  // namespace detail

inline RunConfig load_config(const std::string& path, RunConfig config = {}) {
    detail::IniDocument doc = detail::parse_ini(path);
    detail::IniReader reader(doc);

    std::string kind;
    reader.get("scenario", "kind", kind);
    if (!kind.empty()) {
        if (kind == "circle-crossing")
            config.scenario.kind = ScenarioKind::kCircleCrossing;
        else if (kind == "hallway")
            config.scenario.kind = ScenarioKind::kHallway;
        else if (kind == "dataset-playback")
            config.scenario.kind = ScenarioKind::kDatasetPlayback;
        else
            throw ConfigError("config: [scenario] kind: unknown '" + kind + "'");
    }
    reader.get("scenario", "n_agents", config.scenario.n_agents);
    reader.get("scenario", "circle_radius", config.scenario.circle_radius);
    reader.get("scenario", "min_spawn_separation", config.scenario.min_spawn_separation);
    reader.get("scenario", "desired_speed", config.scenario.desired_speed);
    reader.get("scenario", "body_radius", config.scenario.body_radius);
    reader.get("scenario", "episode_timeout", config.scenario.episode_timeout);
    reader.get("scenario", "control_dt", config.scenario.control_dt);
    reader.get("scenario", "robot_start_x", config.scenario.robot_start.x);
    reader.get("scenario", "robot_start_y", config.scenario.robot_start.y);
    reader.get("scenario", "robot_goal_x", config.scenario.robot_goal.x);
    reader.get("scenario", "robot_goal_y", config.scenario.robot_goal.y);
    reader.get("scenario", "playback_file", config.scenario.playback_path);

    reader.get("planner", "horizon_steps", config.planner.horizon_steps);
    reader.get("planner", "dt", config.planner.dt);
    reader.get("planner", "samples_per_agent", config.planner.samples_per_agent);
    reader.get("planner", "replan_period", config.planner.replan_period);
    reader.get("planner", "max_tracked_agents", config.planner.max_tracked_agents);
    reader.get("planner", "nominal_speed", config.planner.nominal_speed);
    reader.get("planner", "robot_start_std", config.planner.robot_start_std);
    reader.get("planner", "robot_end_std", config.planner.robot_end_std);
    reader.get("planner", "ped_start_std", config.planner.ped_start_std);
    reader.get("planner", "lookahead", config.planner.lookahead);
    reader.get("planner", "heading_gain", config.planner.heading_gain);
    reader.get("planner", "linear_gain", config.planner.linear_gain);
    reader.get("planner", "max_linear_speed", config.planner.max_linear_speed);
    reader.get("planner", "max_angular_speed", config.planner.max_angular_speed);
    reader.get("planner", "goal_tolerance", config.planner.goal_tolerance);

    reader.get("kernel", "variance", config.kernel.variance);
    reader.get("kernel", "lengthscale", config.kernel.lengthscale);

    reader.get("risk", "scale", config.risk.scale);
    reader.get("risk", "steepness", config.risk.steepness);
    reader.get("risk", "comfort_distance", config.risk.comfort_distance);
    std::string aggregation;
    reader.get("risk", "aggregation", aggregation);
    if (!aggregation.empty()) {
        if (aggregation == "sum-over-time")
            config.risk.aggregation = RiskAggregation::kSumOverTime;
        else if (aggregation == "max-over-time")
            config.risk.aggregation = RiskAggregation::kMaxOverTime;
        else
            throw ConfigError("config: [risk] aggregation: unknown '" + aggregation + "'");
    }

    reader.get("solver", "max_iterations", config.solver.max_iterations);
    reader.get("solver", "tolerance", config.solver.tolerance);
    reader.get("solver", "rejection_gamma", config.solver.rejection_gamma);
    std::string mode;
    reader.get("solver", "mode", mode);
    if (!mode.empty()) {
        if (mode == "importance-sampling" || mode == "is")
            config.solver.mode = SolveMode::kImportanceSampling;
        else if (mode == "rejection-sampling" || mode == "rs")
            config.solver.mode = SolveMode::kRejectionSampling;
        else
            throw ConfigError("config: [solver] mode: unknown '" + mode + "'");
    }

    std::string ped_kind;
    reader.get("pedestrians", "model", ped_kind);
    if (!ped_kind.empty()) {
        if (ped_kind == "scripted-constant-velocity")
            config.ped_model.kind = PedestrianModelKind::kScriptedConstantVelocity;
        else if (ped_kind == "reactive-social-force")
            config.ped_model.kind = PedestrianModelKind::kReactiveSocialForce;
        else if (ped_kind == "playback")
            config.ped_model.kind = PedestrianModelKind::kPlayback;
        else
            throw ConfigError("config: [pedestrians] model: unknown '" + ped_kind + "'");
    }
    reader.get("pedestrians", "goal_gain", config.ped_model.goal_gain);
    reader.get("pedestrians", "repulsion_strength", config.ped_model.repulsion_strength);
    reader.get("pedestrians", "repulsion_range", config.ped_model.repulsion_range);
    reader.get("pedestrians", "accel_cap", config.ped_model.accel_cap);
    reader.get("pedestrians", "goal_tolerance", config.ped_model.goal_tolerance);

    reader.get("run", "out_dir", config.out_dir);
    reader.get("run", "trials", config.trials);
    reader.get("run", "base_seed", config.base_seed);
    reader.get("run", "threads", config.threads);
    reader.get("run", "agents_min", config.agents_min);
    reader.get("run", "agents_max", config.agents_max);
    reader.get("run", "write_traces", config.write_traces);

    reader.finish();
    return config;
}

}  // namespace brne
