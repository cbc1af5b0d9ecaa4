#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sim/learner.hpp"
#include "sim/serial.hpp"
#include "sim/synth.hpp"

namespace sim {

/// Numeric table plus scalar summaries. Degenerate rows carry a flag column
/// instead of NaN entries, so every cell is finite.
struct ProbeResult {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::map<std::string, double> summary;
    std::vector<std::string> labels;  // e.g. activation names indexed by f_index
    std::uint64_t seed = 0;
    std::size_t m = 0;
    std::string timestamp;  // informational; never written into CSV bodies
};

/// Per (angle, trial): pick w at the given angle from wstar with
/// ||w|| = ||wstar||, fit the best activation on a fresh batch (or use the
/// fixed linear one when spec.fit_activation is false) and record the
/// misalignment norm and the gradient correlation g.(w - wstar).
ProbeResult probe_sharpness(const ScenarioSpec& scenario, const SharpnessSpec& spec,
                            const LearnerConfig& config, std::size_t workers = 1);

/// Monte-Carlo sweep of E[(f(w.x) - ustar(wstar.x))^2] against the squared
/// misalignment for fixed activations f and angles; reports the infimum of
/// the ratio over non-degenerate rows.
ProbeResult probe_misalignment(const ScenarioSpec& scenario,
                               const MisalignmentSpec& spec,
                               std::size_t workers = 1);

/// Runs the inner loop at beta = ||wstar|| across seeds and measures the
/// per-step misalignment ratio on steps above the noise floor
/// (96/mu) * sqrt(opt + eps).
ProbeResult probe_contraction(const ScenarioSpec& scenario,
                              const LearnerConfig& config,
                              const ContractionSpec& spec, std::size_t workers = 1);

void write_probe_csv(const ProbeResult& probe, std::ostream& os);

/// Fixed-activation gradient correlation study: d = 4 Gaussian, realizable
/// identity target, u pinned to the steepest admissible line (slope 4) and
/// w = wstar / 2. The population value of grad . (w - wstar) is
/// -0.5 ||wstar||^2, negative although w is only half way out.
struct ReproExample {
    double estimate = 0.0;
    double std_error = 0.0;
    double target = -0.5;
    std::size_t m = 0;
};
ReproExample run_repro_example(std::size_t m, std::uint64_t seed);

/// Runs learn and/or the configured probes, writes CSV tables plus
/// summary.json under out_dir, and returns the emitted paths. Output bytes
/// depend only on the config (timestamps are never emitted).
std::vector<std::string> run_experiment(const ExperimentConfig& config);

}  // namespace sim
