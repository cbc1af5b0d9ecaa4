#include "sim/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sim/monotone_fit.hpp"
#include "sim/rng.hpp"
#include "sim/surrogate.hpp"

namespace sim {
namespace {

constexpr double kFitTol = 1e-9;
constexpr std::uint64_t kTagInit = 0xA110;
constexpr std::uint64_t kTagInner = 0xB220;
constexpr std::uint64_t kTagReinit = 0xC330;
constexpr std::uint64_t kTagTest = 0xD440;
constexpr std::uint64_t kTagBootstrap = 0xB007;

std::vector<double> random_unit(std::size_t d, Rng rng) {
    std::vector<double> v(d);
    double n = 0.0;
    do {
        for (auto& x : v) x = rng.normal();
        n = norm2(v);
    } while (n == 0.0);
    scale(v, 1.0 / n);
    return v;
}

LearnerConfig finalized(const LearnerConfig& config) {
    LearnerConfig c = config;
    c.finalize();
    return c;
}

struct FitAtW {
    PiecewiseLinearActivation activation;
    GradientReport report;
};

// One alternation step at fixed w: fit the best activation on the batch, then
// evaluate the surrogate gradient on the same batch (the fitted values are
// the activation's evaluations at the batch projections).
FitAtW fit_and_gradient(std::span<const double> w, const Dataset& batch,
                        const LearnerConfig& cfg) {
    const std::size_t m = batch.size();
    thread_local std::vector<double> zs, activated;
    zs.resize(m);
    activated.resize(m);
    for (std::size_t i = 0; i < m; ++i) zs[i] = dot(w, batch.x(i));
    PiecewiseLinearActivation u =
        fit_activation(zs, batch.labels(), cfg.a, cfg.b, kFitTol, activated);
    GradientReport rep = surrogate_gradient_from_values(activated, batch);
    return {std::move(u), std::move(rep)};
}

}  // namespace

Dataset BootstrapSource::draw(std::size_t m, std::uint64_t stream_id) const {
    Dataset out;
    draw_into(m, stream_id, out);
    return out;
}

void BootstrapSource::draw_into(std::size_t m, std::uint64_t stream_id,
                                Dataset& out) const {
    Rng rng = Rng::stream(seed_, kTagBootstrap, stream_id, 0, 0);
    const std::size_t d = base_.dim();
    out.resize(d, m);
    double* xs = out.mutable_features().data();
    double* ys = out.mutable_labels().data();
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t idx = rng.next_u64() % base_.size();
        const auto row = base_.x(idx);
        std::copy(row.begin(), row.end(), xs + i * d);
        ys[i] = base_.y(idx);
    }
}

Dataset TruncatingSource::draw(std::size_t m, std::uint64_t stream_id) const {
    Dataset out;
    draw_into(m, stream_id, out);
    return out;
}

void TruncatingSource::draw_into(std::size_t m, std::uint64_t stream_id,
                                 Dataset& out) const {
    inner_.draw_into(m, stream_id, out);
    for (auto& y : out.mutable_labels()) y = truncate_label(y, M_);
}

double truncate_label(double y, double M) {
    if (!(M > 0.0)) throw std::invalid_argument("truncate_label: M must be positive");
    return std::copysign(std::min(std::abs(y), M), y);
}

double truncation_level(const LearnerConfig& c) {
    const double arg = 16.0 * std::pow(c.b * c.W, 4) / (c.eps * c.eps);
    return (c.b * c.W / c.L) * std::log(std::max(arg, std::exp(1.0)));
}

double testing_radius(const LearnerConfig& c) {
    const double lt = std::log(std::max(c.b * c.W / c.eps, std::exp(1.0)));
    const double arg =
        std::pow(c.b * c.W, 4) / (std::pow(c.L, 6) * c.eps * c.eps) * lt * lt;
    return std::log(std::max(arg, std::exp(1.0))) / c.L;
}

Schedule derive_schedule(const LearnerConfig& config) {
    const LearnerConfig c = finalized(config);
    Schedule s;
    const double bm = c.b / c.mu;
    const double t0f = std::ceil(std::pow(bm, 6.0) * std::log(4.0 * c.b / c.mu));
    s.t0 = t0f < static_cast<double>(c.t0_cap) ? static_cast<std::size_t>(t0f)
                                               : c.t0_cap;
    const double Tf = std::ceil(bm * bm * std::log(1.0 / c.eps));
    s.T = Tf < static_cast<double>(c.T_cap) ? static_cast<std::size_t>(Tf) : c.T_cap;
    const double denom = c.eta_opt * std::sqrt(c.eps);
    const double Jf = denom > 0.0 ? std::ceil(c.W / denom)
                                  : std::numeric_limits<double>::infinity();
    if (Jf > static_cast<double>(c.J_cap)) {
        s.J = c.J_cap;
        s.grid_capped = true;
        for (std::size_t j = 1; j <= s.J; ++j)
            s.betas.push_back(static_cast<double>(j) * c.W /
                              static_cast<double>(s.J));
    } else {
        s.J = static_cast<std::size_t>(Jf);
        for (std::size_t j = 1; j <= s.J; ++j)
            s.betas.push_back(std::min(static_cast<double>(j) * denom, c.W));
    }
    return s;
}

std::vector<std::vector<double>> initialize(const LearnerConfig& config,
                                            const SampleSource& source) {
    const LearnerConfig cfg = finalized(config);
    const Schedule sch = derive_schedule(cfg);
    const std::size_t d = source.dim();
    std::vector<std::vector<double>> iterates;
    iterates.reserve(sch.t0 + 1);
    std::vector<double> w(d, 0.0);
    iterates.push_back(w);
    thread_local Dataset batch;
    for (std::size_t t = 0; t < sch.t0; ++t) {
        source.draw_into(cfg.m_init, fold_stream(cfg.seed, kTagInit, 0, 0, t), batch);
        const FitAtW fg = fit_and_gradient(w, batch, cfg);
        axpy(-cfg.eta_init, fg.report.gradient, w);
        iterates.push_back(w);
    }
    return iterates;
}

Hypothesis run_inner_loop(std::span<const double> w_init, double beta,
                          const LearnerConfig& config, const SampleSource& source,
                          std::vector<TraceRecord>& trace, std::size_t restart_k,
                          std::size_t grid_j) {
    const LearnerConfig cfg = finalized(config);
    if (!(beta > 0.0) || beta > cfg.W * (1.0 + 1e-9))
        throw std::invalid_argument("run_inner_loop: beta outside (0, W]");
    if (w_init.size() != source.dim())
        throw std::invalid_argument("run_inner_loop: dimension mismatch");
    const Schedule sch = derive_schedule(cfg);
    const ScenarioSpec* scn = source.scenario();
    const std::vector<double>* wstar = scn ? &scn->target.wstar : nullptr;

    std::vector<double> dir(w_init.begin(), w_init.end());
    double wbar_norm = norm2(dir);
    std::string pending_event;
    if (wbar_norm == 0.0) {
        dir = random_unit(dir.size(),
                          Rng::stream(cfg.seed, kTagReinit, restart_k, grid_j, 0));
        wbar_norm = 1.0;
        pending_event = "reinit_random_unit";
    } else {
        scale(dir, 1.0 / wbar_norm);
    }

    std::vector<double> w_hat(dir.size());
    thread_local Dataset batch;
    for (std::size_t t = 0;; ++t) {
        for (std::size_t i = 0; i < dir.size(); ++i) w_hat[i] = beta * dir[i];
        source.draw_into(cfg.m_batch,
                         fold_stream(cfg.seed, kTagInner, restart_k, grid_j, t), batch);
        FitAtW fg = fit_and_gradient(w_hat, batch, cfg);

        TraceRecord row;
        row.restart_k = restart_k;
        row.grid_j = grid_j;
        row.beta = beta;
        row.t = t;
        row.wbar_norm = wbar_norm;
        if (wstar) row.misalign = misalignment(*wstar, w_hat);
        row.emp_loss = fg.report.loss;
        row.grad_norm = std::sqrt(fg.report.norm_sq);
        row.event = std::move(pending_event);
        pending_event.clear();
        trace.push_back(std::move(row));

        if (t == sch.T) return {std::move(w_hat), std::move(fg.activation)};

        bool moved = false;
        std::vector<double> wbar = w_hat;
        for (std::size_t i = 0; i < wbar.size(); ++i) {
            const double step = cfg.eta_opt * fg.report.gradient[i];
            if (step != 0.0) moved = true;
            wbar[i] -= step;
        }
        if (moved) {
            wbar_norm = norm2(wbar);
            if (wbar_norm == 0.0) {
                dir = random_unit(dir.size(), Rng::stream(cfg.seed, kTagReinit,
                                                          restart_k, grid_j, t + 1));
                wbar_norm = 1.0;
                pending_event = "reinit_random_unit";
            } else {
                if (wstar) {
                    // The orthogonal component never exceeds the distance.
                    double dsq = 0.0;
                    for (std::size_t i = 0; i < wbar.size(); ++i) {
                        const double r = wbar[i] - (*wstar)[i];
                        dsq += r * r;
                    }
                    const double mis = misalignment(*wstar, wbar);
                    if (mis > std::sqrt(dsq) * (1.0 + 1e-9) + 1e-12)
                        pending_event = "misalign_bound_violated";
                }
                dir = wbar;
                scale(dir, 1.0 / wbar_norm);
            }
        }
        // A zero step keeps the previous direction bitwise, so a zero step
        // size yields exactly constant iterates.
    }
}

OptimizeResult optimize(const LearnerConfig& config, const SampleSource& source,
                        std::size_t workers) {
    const LearnerConfig cfg = finalized(config);
    const Schedule sch = derive_schedule(cfg);
    const auto iterates = initialize(cfg, source);

    OptimizeResult out;
    if (sch.grid_capped) {
        out.warnings.push_back(
            "beta grid capped at J=" + std::to_string(sch.J) +
            "; scale resolution weakened to W/J=" +
            std::to_string(cfg.W / static_cast<double>(sch.J)));
    }

    const std::size_t tasks = iterates.size() * sch.J;
    std::vector<Candidate> cands(tasks);
    std::vector<std::vector<TraceRecord>> traces(tasks);
    auto run_task = [&](std::size_t idx) {
        const std::size_t k = idx / sch.J;
        const std::size_t j = idx % sch.J + 1;
        const double beta = sch.betas[j - 1];
        Hypothesis hyp =
            run_inner_loop(iterates[k], beta, cfg, source, traces[idx], k, j);
        cands[idx] = {std::move(hyp), k, j, beta};
    };

    parallel_for(tasks, workers, run_task);

    out.candidates.items.reserve(tasks + 1);
    out.candidates.items.push_back(
        {{std::vector<double>(source.dim(), 0.0), make_zero_activation()}, 0, 0, 0.0});
    for (auto& c : cands) out.candidates.items.push_back(std::move(c));
    for (auto& tr : traces)
        out.trace.insert(out.trace.end(), std::make_move_iterator(tr.begin()),
                         std::make_move_iterator(tr.end()));
    return out;
}

SelectionResult select_hypothesis_detailed(const CandidateSet& candidates,
                                           const LearnerConfig& config,
                                           const SampleSource& source) {
    if (candidates.items.empty())
        throw std::invalid_argument("select_hypothesis: empty candidate set");
    const LearnerConfig cfg = finalized(config);
    const Dataset test =
        source.draw(cfg.m_test, fold_stream(cfg.seed, kTagTest, 0, 0, 0));
    const double thresh = cfg.W * testing_radius(cfg);

    SelectionResult sel;
    sel.truncated_losses.reserve(candidates.items.size());
    for (const auto& cand : candidates.items) {
        std::vector<double> sq(test.size(), 0.0);
        for (std::size_t i = 0; i < test.size(); ++i) {
            const double z = dot(cand.hyp.w, test.x(i));
            if (std::abs(z) > thresh) continue;
            const double r = cand.hyp.activation(z) - test.y(i);
            sq[i] = r * r;
        }
        sel.truncated_losses.push_back(pairwise_sum(sq) /
                                       static_cast<double>(test.size()));
    }
    sel.index = 0;
    for (std::size_t i = 1; i < sel.truncated_losses.size(); ++i)
        if (sel.truncated_losses[i] < sel.truncated_losses[sel.index]) sel.index = i;
    return sel;
}

Hypothesis select_hypothesis(const CandidateSet& candidates,
                             const LearnerConfig& config,
                             const SampleSource& source) {
    return candidates.items[select_hypothesis_detailed(candidates, config, source).index]
        .hyp;
}

LearnOutput learn(const LearnerConfig& config, const SampleSource& source,
                  std::size_t workers) {
    const LearnerConfig cfg = finalized(config);
    const double M = truncation_level(cfg);
    const TruncatingSource tsrc(source, M);
    OptimizeResult opt = optimize(cfg, tsrc, workers);
    SelectionResult sel = select_hypothesis_detailed(opt.candidates, cfg, tsrc);
    LearnOutput out{opt.candidates.items[sel.index].hyp,
                    sel.index,
                    std::move(opt.candidates),
                    std::move(opt.trace),
                    std::move(opt.warnings),
                    std::move(sel.truncated_losses),
                    M};
    return out;
}

}  // namespace sim
