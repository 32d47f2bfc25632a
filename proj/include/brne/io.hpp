#pragma once

// Trace and metrics serialization. Every output file carries a schema version
// string in its header. Doubles are printed with a fixed %.12g format so
// reruns with identical config and seed produce byte-identical files.

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "brne/sim.hpp"

namespace brne {

inline constexpr const char* kSchemaPrefix = "brne";
inline constexpr int kSchemaVersion = 1;

inline std::string schema_tag(const std::string& name) {
    return std::string(kSchemaPrefix) + "." + name + ".v" + std::to_string(kSchemaVersion);
}

inline std::string format_double(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.12g", value);
    return buffer;
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& schema_name,
              const std::string& header) {
        file_.open(path);
        if (!file_) throw Error("cannot open '" + path + "' for writing");
        file_ << "# schema=" << schema_tag(schema_name) << "\n" << header << "\n";
    }

    void field(const std::string& value) {
        if (!first_) file_ << ",";
        file_ << value;
        first_ = false;
    }
    void field(double value) { field(format_double(value)); }
    void field(int value) { field(std::to_string(value)); }
    void field(std::uint64_t value) { field(std::to_string(value)); }
    void field(bool value) { field(std::string(value ? "1" : "0")); }
    void end_row() {
        file_ << "\n";
        first_ = true;
    }

private:
    std::ofstream file_;
    bool first_ = true;
};

inline nlohmann::json vec2_json(const Vec2& v) {
    return nlohmann::json{{"x", v.x}, {"y", v.y}};
}

inline nlohmann::json trajectory_json(const Trajectory& trajectory) {
    nlohmann::json points = nlohmann::json::array();
    for (const Vec2& p : trajectory.points) points.push_back({p.x, p.y});
    return points;
}

inline nlohmann::json metrics_json(const Metrics& metrics) {
    return nlohmann::json{{"safety_distance_m", metrics.safety_distance},
                          {"collided", metrics.collided},
                          {"path_lengths_m", metrics.path_lengths},
                          {"times_to_goal_s", metrics.times_to_goal},
                          {"max_path_length_m", metrics.max_path_length},
                          {"robot_time_to_goal_s", metrics.robot_time_to_goal},
                          {"froze", metrics.froze}};
}

inline nlohmann::json trace_json(const EpisodeTrace& trace) {
    nlohmann::json steps = nlohmann::json::array();
    for (const StepRecord& s : trace.steps) {
        nlohmann::json ped_positions = nlohmann::json::array();
        nlohmann::json ped_velocities = nlohmann::json::array();
        for (size_t p = 0; p < s.ped_positions.size(); ++p) {
            ped_positions.push_back({s.ped_positions[p].x, s.ped_positions[p].y});
            ped_velocities.push_back({s.ped_velocities[p].x, s.ped_velocities[p].y});
        }
        steps.push_back({{"t", s.time},
                         {"robot", {{"x", s.robot_position.x},
                                    {"y", s.robot_position.y},
                                    {"heading", s.robot_heading},
                                    {"vx", s.robot_velocity.x},
                                    {"vy", s.robot_velocity.y}}},
                         {"command", {{"linear", s.command.linear}, {"angular", s.command.angular}}},
                         {"ped_positions", ped_positions},
                         {"ped_velocities", ped_velocities},
                         {"ped_active", s.ped_active},
                         {"plan_index", s.plan_index}});
    }
    nlohmann::json plans = nlohmann::json::array();
    for (const PlanRecord& p : trace.plans) {
        plans.push_back({{"t", p.time},
                         {"plan", trajectory_json(p.plan)},
                         {"free_energy_trace", p.free_energy_trace},
                         {"iterations_used", p.iterations_used},
                         {"converged", p.converged},
                         {"fallback", p.fallback},
                         {"solved", p.solved},
                         {"tracked_agents", p.tracked_agents},
                         {"solve_wall_ms", p.solve_wall_ms}});
    }
    return nlohmann::json{{"schema", schema_tag("episode_trace")},
                          {"control_dt", trace.control_dt},
                          {"steps", steps},
                          {"plans", plans},
                          {"metrics", metrics_json(trace.metrics)}};
}

inline void write_trace_json(const std::string& path, const EpisodeTrace& trace) {
    std::ofstream file(path);
    if (!file) throw Error("cannot open '" + path + "' for writing");
    file << trace_json(trace).dump(1) << "\n";
}

/// Flat per-step CSV: one row per (step, agent); agent_id 0 is the robot.
inline void write_steps_csv(const std::string& path, const EpisodeTrace& trace) {
    CsvWriter csv(path, "episode_steps", "step,t_s,agent_id,active,x_m,y_m,vx_mps,vy_mps");
    for (size_t step = 0; step < trace.steps.size(); ++step) {
        const StepRecord& s = trace.steps[step];
        csv.field(static_cast<int>(step));
        csv.field(s.time);
        csv.field(0);
        csv.field(true);
        csv.field(s.robot_position.x);
        csv.field(s.robot_position.y);
        csv.field(s.robot_velocity.x);
        csv.field(s.robot_velocity.y);
        csv.end_row();
        for (size_t p = 0; p < s.ped_positions.size(); ++p) {
            csv.field(static_cast<int>(step));
            csv.field(s.time);
            csv.field(static_cast<int>(p) + 1);
            csv.field(s.ped_active[p] != 0);
            csv.field(s.ped_positions[p].x);
            csv.field(s.ped_positions[p].y);
            csv.field(s.ped_velocities[p].x);
            csv.field(s.ped_velocities[p].y);
            csv.end_row();
        }
    }
}

inline void ensure_directory(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw Error("cannot create output directory '" + path + "'");
}

}  // namespace brne
