#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "isnmf/errors.hpp"
#include "isnmf/model.hpp"

namespace isnmf {

struct TracePoint {
    std::uint64_t samples = 0;  // samples seen (online) or epoch count (batch)
    double seconds = 0.0;       // accumulated training wall-clock
    double train_obj = 0.0;
    std::optional<double> heldout;
};

/// Time-stamped record of one training run, exportable as a gnuplot-friendly
/// CSV with `#`-prefixed metadata lines.
struct TrainReport {
    std::string stage;  // "batch" or "online"
    SolverConfig config;
    std::uint64_t seed = 0;
    std::string final_w_path;
    double final_train_obj = 0.0;
    std::vector<TracePoint> points;
};

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

inline nlohmann::ordered_json config_to_json(const SolverConfig& c) {
    nlohmann::ordered_json j;
    j["k"] = c.k;
    j["epsilon"] = c.epsilon;
    j["eta"] = c.eta;
    j["beta"] = c.beta;
    j["r"] = c.r;
    j["inner_iters"] = c.inner_iters;
    j["restart"] = to_string(c.restart);
    j["seed"] = c.seed;
    j["n_seeds"] = c.n_seeds;
    j["max_epochs_or_samples"] = c.max_epochs_or_samples;
    j["init_stats_weight"] = c.init_stats_weight;
    return j;
}

inline SolverConfig config_from_json(const nlohmann::ordered_json& j) {
    SolverConfig c;
    c.k = j.at("k").get<int>();
    c.epsilon = j.at("epsilon").get<double>();
    c.eta = j.at("eta").get<double>();
    c.beta = j.at("beta").get<int>();
    c.r = j.at("r").get<double>();
    c.inner_iters = j.at("inner_iters").get<int>();
    c.restart = restart_mode_from_string(j.at("restart").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.n_seeds = j.at("n_seeds").get<int>();
    c.max_epochs_or_samples = j.at("max_epochs_or_samples").get<std::uint64_t>();
    c.init_stats_weight = j.at("init_stats_weight").get<double>();
    return c;
}

inline void write_report_csv(std::ostream& out, const TrainReport& rep) {
    out << "# config " << config_to_json(rep.config).dump() << "\n";
    out << "# seed " << rep.seed << "\n";
    out << "# final_w " << rep.final_w_path << "\n";
    out << "# final_train_obj " << detail::fmt_double(rep.final_train_obj) << "\n";
    out << "stage,samples,seconds,train_obj,heldout_obj\n";
    for (const auto& p : rep.points) {
        out << rep.stage << ',' << p.samples << ',' << detail::fmt_double(p.seconds) << ','
            << detail::fmt_double(p.train_obj) << ',';
        if (p.heldout) out << detail::fmt_double(*p.heldout);
        out << "\n";
    }
    if (!out) throw IoError("report write failed");
}

inline void write_report_csv(const std::string& path, const TrainReport& rep) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    write_report_csv(out, rep);
}

inline std::string report_to_string(const TrainReport& rep) {
    std::ostringstream oss;
    write_report_csv(oss, rep);
    return oss.str();
}

inline TrainReport read_report_csv(std::istream& in) {
    TrainReport rep;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string key;
            ls >> key;
            std::string rest;
            std::getline(ls, rest);
            if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
            if (key == "config")
                rep.config = config_from_json(nlohmann::ordered_json::parse(rest));
            else if (key == "seed")
                rep.seed = std::stoull(rest);
            else if (key == "final_w")
                rep.final_w_path = rest;
            else if (key == "final_train_obj")
                rep.final_train_obj = std::strtod(rest.c_str(), nullptr);
            continue;
        }
        if (!have_header) {
            if (line != "stage,samples,seconds,train_obj,heldout_obj")
                throw UnsupportedFormat("unexpected trace header: " + line);
            have_header = true;
            continue;
        }
        std::istringstream ls(line);
        std::string stage, samples, seconds, train, heldout;
        std::getline(ls, stage, ',');
        std::getline(ls, samples, ',');
        std::getline(ls, seconds, ',');
        std::getline(ls, train, ',');
        std::getline(ls, heldout);
        if (rep.stage.empty()) rep.stage = stage;
        TracePoint p;
        p.samples = std::stoull(samples);
        p.seconds = std::strtod(seconds.c_str(), nullptr);
        p.train_obj = std::strtod(train.c_str(), nullptr);
        if (!heldout.empty()) p.heldout = std::strtod(heldout.c_str(), nullptr);
        rep.points.push_back(p);
    }
    if (!have_header) throw UnsupportedFormat("not a trace CSV (missing header)");
    return rep;
}

inline TrainReport read_report_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    return read_report_csv(in);
}

} // namespace isnmf
