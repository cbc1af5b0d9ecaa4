#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sim/learner.hpp"
#include "sim/synth.hpp"
#include "sim/types.hpp"

namespace sim {

/// Shortest text that round-trips the double (up to 17 significant digits).
std::string format_double(double v);

// Dataset CSV: header x1,...,xd,y, one row per sample.
void write_dataset_csv(const Dataset& data, std::ostream& os);
void save_dataset_csv(const Dataset& data, const std::string& path);
Dataset read_dataset_csv(std::istream& is);
Dataset load_dataset_csv(const std::string& path);

// Hypothesis JSON: {"w": [...], "knots": [...], "values": [...], "a": , "b": }.
std::string hypothesis_to_json(const Hypothesis& hyp);
Hypothesis hypothesis_from_json(const std::string& text);
void save_hypothesis_json(const Hypothesis& hyp, const std::string& path);
Hypothesis load_hypothesis_json(const std::string& path);

struct SharpnessSpec {
    std::vector<double> angles_deg{15.0, 30.0, 60.0, 90.0};
    std::size_t m = 4096;
    std::size_t trials = 100;
    bool fit_activation = true;  // false: probe the fixed-activation failure mode
    double fixed_slope = 0.0;    // activation u(z) = fixed_slope * z when not fitting
};

struct MisalignmentSpec {
    std::vector<std::string> f_family{"zero", "half_linear", "relu", "clipped_ramp"};
    std::vector<double> angles_deg{5.0, 15.0, 30.0, 60.0, 90.0, 120.0, 150.0, 175.0};
    std::size_t n_mc = 10000;
};

struct ContractionSpec {
    std::size_t seeds = 20;
    std::size_t opt_mc = 20000;  // Monte-Carlo size of the OPT proxy threshold
};

struct ProbeSpec {
    std::string kind;  // "sharpness" | "misalignment" | "contraction"
    SharpnessSpec sharpness;
    MisalignmentSpec misalignment;
    ContractionSpec contraction;
};

struct ExperimentConfig {
    ScenarioSpec scenario;
    LearnerConfig learner;
    std::vector<ProbeSpec> probes;
    bool run_learn = true;
    std::size_t eval_m = 100000;  // fresh-sample evaluation of the selected hypothesis
    std::size_t opt_mc = 100000;  // Monte-Carlo size of the OPT proxy
    std::string out_dir = ".";
    std::size_t workers = 1;
};

/// Strict parser for the config file: sections scenario/learner/probes,
/// unknown keys anywhere are errors (config_error).
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

PiecewiseLinearActivation activation_from_name(const std::string& name);

}  // namespace sim
