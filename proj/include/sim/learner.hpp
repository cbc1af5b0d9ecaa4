#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sim/synth.hpp"
#include "sim/types.hpp"

namespace sim {

/// Provider of fresh i.i.d. batches. Draws are pure functions of
/// (seed, stream_id), so replay and parallel schedules coincide.
class SampleSource {
  public:
    virtual ~SampleSource() = default;
    virtual std::size_t dim() const = 0;
    virtual Dataset draw(std::size_t m, std::uint64_t stream_id) const = 0;
    /// Buffer-reusing variant; the inner loop draws thousands of batches.
    virtual void draw_into(std::size_t m, std::uint64_t stream_id,
                           Dataset& out) const {
        out = draw(m, stream_id);
    }
    /// Planted scenario when one exists (enables misalignment traces).
    virtual const ScenarioSpec* scenario() const { return nullptr; }
};

class ScenarioSource final : public SampleSource {
  public:
    explicit ScenarioSource(ScenarioSpec spec) : spec_(std::move(spec)) {
        validate_scenario(spec_);
    }
    std::size_t dim() const override { return spec_.marginal.d; }
    Dataset draw(std::size_t m, std::uint64_t stream_id) const override {
        return sample_batch(spec_, m, stream_id);
    }
    void draw_into(std::size_t m, std::uint64_t stream_id,
                   Dataset& out) const override {
        sample_batch_into(spec_, m, stream_id, out);
    }
    const ScenarioSpec* scenario() const override { return &spec_; }

  private:
    ScenarioSpec spec_;
};

/// Fixed-dataset mode: batches are bootstrap resamples with replacement.
class BootstrapSource final : public SampleSource {
  public:
    BootstrapSource(Dataset base, std::uint64_t seed)
        : base_(std::move(base)), seed_(seed) {}
    std::size_t dim() const override { return base_.dim(); }
    Dataset draw(std::size_t m, std::uint64_t stream_id) const override;
    void draw_into(std::size_t m, std::uint64_t stream_id,
                   Dataset& out) const override;

  private:
    Dataset base_;
    std::uint64_t seed_;
};

/// Applies sign-preserving label truncation at M to every drawn batch.
class TruncatingSource final : public SampleSource {
  public:
    TruncatingSource(const SampleSource& inner, double M) : inner_(inner), M_(M) {}
    std::size_t dim() const override { return inner_.dim(); }
    Dataset draw(std::size_t m, std::uint64_t stream_id) const override;
    void draw_into(std::size_t m, std::uint64_t stream_id,
                   Dataset& out) const override;
    const ScenarioSpec* scenario() const override { return inner_.scenario(); }

  private:
    const SampleSource& inner_;
    double M_;
};

struct TraceRecord {
    std::size_t restart_k = 0;
    std::size_t grid_j = 0;
    double beta = 0.0;
    std::size_t t = 0;
    double wbar_norm = 0.0;
    double misalign = std::numeric_limits<double>::quiet_NaN();  // NaN: w* unknown
    double emp_loss = 0.0;
    double grad_norm = 0.0;
    std::string event;
};

struct Candidate {
    Hypothesis hyp;
    std::size_t restart_k = 0;
    std::size_t grid_j = 0;  // 0 is reserved for the zero hypothesis
    double beta = 0.0;
};

struct CandidateSet {
    std::vector<Candidate> items;  // items[0] is always the zero hypothesis
};

struct Schedule {
    std::size_t t0 = 0;
    std::size_t T = 0;
    std::size_t J = 1;
    bool grid_capped = false;
    std::vector<double> betas;  // betas[j-1] for j = 1..J
};

/// Iteration counts and the beta grid implied by a finalized config.
Schedule derive_schedule(const LearnerConfig& config);

double truncate_label(double y, double M);

/// Label-truncation level (bW/L) * ln(16 b^4 W^4 / eps^2), floored so the
/// logarithm never goes below 1.
double truncation_level(const LearnerConfig& config);

/// Truncated-loss radius of the selection rule, same guard.
double testing_radius(const LearnerConfig& config);

/// Plain surrogate-gradient descent from w = 0; returns all t0 + 1 iterates.
std::vector<std::vector<double>> initialize(const LearnerConfig& config,
                                            const SampleSource& source);

/// Projected (sphere of radius beta) surrogate-gradient loop of length T;
/// appends one TraceRecord per step. restart_k/grid_j only tag streams and
/// trace rows.
Hypothesis run_inner_loop(std::span<const double> w_init, double beta,
                          const LearnerConfig& config, const SampleSource& source,
                          std::vector<TraceRecord>& trace, std::size_t restart_k = 0,
                          std::size_t grid_j = 1);

struct OptimizeResult {
    CandidateSet candidates;
    std::vector<TraceRecord> trace;
    std::vector<std::string> warnings;
};

OptimizeResult optimize(const LearnerConfig& config, const SampleSource& source,
                        std::size_t workers = 1);

struct SelectionResult {
    std::size_t index = 0;
    std::vector<double> truncated_losses;
};

SelectionResult select_hypothesis_detailed(const CandidateSet& candidates,
                                           const LearnerConfig& config,
                                           const SampleSource& source);

Hypothesis select_hypothesis(const CandidateSet& candidates,
                             const LearnerConfig& config,
                             const SampleSource& source);

struct LearnOutput {
    Hypothesis selected;
    std::size_t selected_index = 0;
    CandidateSet candidates;
    std::vector<TraceRecord> trace;
    std::vector<std::string> warnings;
    std::vector<double> truncated_losses;
    double truncation_M = 0.0;
};

LearnOutput learn(const LearnerConfig& config, const SampleSource& source,
                  std::size_t workers = 1);

}  // namespace sim
