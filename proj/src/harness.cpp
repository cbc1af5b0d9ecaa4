#include "sim/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "sim/monotone_fit.hpp"
#include "sim/rng.hpp"
#include "sim/surrogate.hpp"

namespace sim {
namespace {

using nlohmann::json;

constexpr double kDegenerateVsq = 1e-12;
constexpr std::uint64_t kTagSharpDir = 0x0817;
constexpr std::uint64_t kTagSharpBatch = 0x5AA0;
constexpr std::uint64_t kTagMisBatch = 0x317A;
constexpr std::uint64_t kTagEval = 0xE7A1;
constexpr std::uint64_t kTagRepro = 0x1212;

std::string now_iso8601() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

void check_angles(const std::vector<double>& angles_deg, bool inclusive) {
    if (angles_deg.empty()) throw config_error("probe: empty angle list");
    for (double deg : angles_deg) {
        if (inclusive) {
            // Endpoint angles give a parallel w; those rows come back flagged
            // degenerate instead of being rejected.
            if (!(deg >= 0.0) || !(deg <= 180.0))
                throw config_error("probe: angles must lie in [0, 180] deg");
        } else if (!(deg > 0.0) || !(deg < 180.0)) {
            throw config_error("probe: angles must lie strictly inside (0, 180) deg");
        }
    }
}

// Unit vector orthogonal to wstar from Gaussian draws.
std::vector<double> random_orthogonal(std::span<const double> wstar, Rng& rng) {
    const double wn_sq = norm_sq(wstar);
    std::vector<double> o(wstar.size());
    for (;;) {
        for (auto& v : o) v = rng.normal();
        const double c = dot(o, wstar) / wn_sq;
        axpy(-c, wstar, o);
        const double n = norm2(o);
        if (n > 1e-8) {
            scale(o, 1.0 / n);
            return o;
        }
    }
}

// Deterministic unit vector orthogonal to wstar: Gram-Schmidt applied to the
// basis vector least aligned with it.
std::vector<double> least_aligned_orthogonal(std::span<const double> wstar) {
    std::size_t i0 = 0;
    for (std::size_t i = 1; i < wstar.size(); ++i)
        if (std::abs(wstar[i]) < std::abs(wstar[i0])) i0 = i;
    std::vector<double> o(wstar.size(), 0.0);
    o[i0] = 1.0;
    const double c = wstar[i0] / norm_sq(wstar);
    axpy(-c, wstar, o);
    scale(o, 1.0 / norm2(o));
    return o;
}

std::vector<double> rotate_from(std::span<const double> wstar,
                                std::span<const double> unit_orth, double rad) {
    const double wn = norm2(wstar);
    std::vector<double> w(wstar.begin(), wstar.end());
    scale(w, std::cos(rad));
    axpy(std::sin(rad) * wn, unit_orth, w);
    return w;
}

void require_probe_target(const ScenarioSpec& scenario) {
    if (norm2(scenario.target.wstar) == 0.0)
        throw config_error("probe: scenario target w* must be nonzero");
    if (scenario.marginal.d < 2)
        throw config_error("probe: angle sweeps need dimension >= 2");
}

void write_emitted(const std::string& path, const std::string& body) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open '" + path + "' for writing");
    os << body;
    if (!os) throw io_error("write to '" + path + "' failed");
}

}  // namespace

ProbeResult probe_sharpness(const ScenarioSpec& scenario, const SharpnessSpec& spec,
                            const LearnerConfig& config, std::size_t workers) {
    require_probe_target(scenario);
    check_angles(spec.angles_deg, false);
    if (spec.m < 256) throw config_error("probe_sharpness: m must be >= 256");
    if (spec.trials < 1) throw config_error("probe_sharpness: trials must be >= 1");
    LearnerConfig cfg = config;
    cfg.finalize();

    ProbeResult out;
    out.name = "sharpness";
    out.columns = {"theta_deg", "trial", "v_sq", "g_dot_wdiff", "degenerate"};
    out.seed = scenario.seed;
    out.m = spec.m;
    out.timestamp = now_iso8601();

    const auto& wstar = scenario.target.wstar;
    const std::size_t na = spec.angles_deg.size();
    out.rows.resize(na * spec.trials);
    parallel_for(na * spec.trials, workers, [&](std::size_t idx) {
        const std::size_t ai = idx / spec.trials;
        const std::size_t r = idx % spec.trials;
        Rng dir_rng = Rng::stream(scenario.seed, kTagSharpDir, ai, r, 0);
        const auto orth = random_orthogonal(wstar, dir_rng);
        const auto w = rotate_from(wstar, orth, deg_to_rad(spec.angles_deg[ai]));
        const Dataset batch =
            sample_batch(scenario, spec.m, fold_stream(0, kTagSharpBatch, ai, r, 0));

        std::vector<double> zs(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) zs[i] = dot(w, batch.x(i));
        GradientReport rep;
        if (spec.fit_activation) {
            const PiecewiseLinearActivation u =
                fit_activation(zs, batch.labels(), cfg.a, cfg.b, 1e-9);
            std::vector<double> vals(batch.size());
            for (std::size_t i = 0; i < batch.size(); ++i) vals[i] = u(zs[i]);
            rep = surrogate_gradient_from_values(vals, batch);
        } else {
            const PiecewiseLinearActivation u =
                make_linear_activation(spec.fixed_slope);
            rep = surrogate_gradient(w, u, batch);
        }

        std::vector<double> diff(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) diff[i] = w[i] - wstar[i];
        const double mis = misalignment(wstar, w);
        const double v_sq = mis * mis;
        out.rows[idx] = {spec.angles_deg[ai], static_cast<double>(r), v_sq,
                         dot(rep.gradient, diff),
                         v_sq < kDegenerateVsq ? 1.0 : 0.0};
    });

    double min_frac = 1.0;
    std::size_t pos_all = 0, n_all = 0;
    for (std::size_t ai = 0; ai < na; ++ai) {
        std::size_t pos = 0, n = 0;
        for (std::size_t r = 0; r < spec.trials; ++r) {
            const auto& row = out.rows[ai * spec.trials + r];
            if (row[4] != 0.0) continue;
            ++n;
            if (row[3] > 0.0) ++pos;
        }
        const double frac =
            n == 0 ? 0.0 : static_cast<double>(pos) / static_cast<double>(n);
        out.summary["positive_fraction@" + format_double(spec.angles_deg[ai])] = frac;
        min_frac = std::min(min_frac, frac);
        pos_all += pos;
        n_all += n;
    }
    out.summary["positive_fraction"] =
        n_all == 0 ? 0.0 : static_cast<double>(pos_all) / static_cast<double>(n_all);
    out.summary["min_angle_positive_fraction"] = min_frac;
    return out;
}

ProbeResult probe_misalignment(const ScenarioSpec& scenario,
                               const MisalignmentSpec& spec, std::size_t workers) {
    require_probe_target(scenario);
    check_angles(spec.angles_deg, true);
    if (spec.n_mc < 10000) throw config_error("probe_misalignment: n_mc must be >= 10000");
    if (spec.f_family.empty()) throw config_error("probe_misalignment: empty f family");

    ProbeResult out;
    out.name = "misalignment";
    out.columns = {"f_index", "theta_deg", "v_sq",      "error",
                   "error_se", "ratio",    "degenerate"};
    out.seed = scenario.seed;
    out.m = spec.n_mc;
    out.timestamp = now_iso8601();
    out.labels = spec.f_family;

    std::vector<PiecewiseLinearActivation> fs;
    fs.reserve(spec.f_family.size());
    for (const auto& name : spec.f_family) fs.push_back(activation_from_name(name));

    const auto& wstar = scenario.target.wstar;
    const auto orth = least_aligned_orthogonal(wstar);
    const std::size_t na = spec.angles_deg.size();
    out.rows.resize(fs.size() * na);
    parallel_for(fs.size() * na, workers, [&](std::size_t idx) {
        const std::size_t fi = idx / na;
        const std::size_t ai = idx % na;
        const auto w = rotate_from(wstar, orth, deg_to_rad(spec.angles_deg[ai]));
        const Dataset batch = sample_batch(scenario, spec.n_mc,
                                           fold_stream(0, kTagMisBatch, fi, ai, 0));
        std::vector<double> sq(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const double r =
                fs[fi](dot(w, batch.x(i))) - scenario.target.ustar(dot(wstar, batch.x(i)));
            sq[i] = r * r;
        }
        const double n = static_cast<double>(batch.size());
        const double mean = pairwise_sum(sq) / n;
        std::vector<double> dev(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const double d = sq[i] - mean;
            dev[i] = d * d;
        }
        const double se = std::sqrt(pairwise_sum(dev) / (n * (n - 1.0)));
        const double mis = misalignment(wstar, w);
        const double v_sq = mis * mis;
        const bool degenerate = v_sq < kDegenerateVsq;
        out.rows[idx] = {static_cast<double>(fi), spec.angles_deg[ai], v_sq, mean,
                         se, degenerate ? 0.0 : mean / v_sq, degenerate ? 1.0 : 0.0};
    });

    double inf_all = std::numeric_limits<double>::infinity();
    double inf_5deg = std::numeric_limits<double>::infinity();
    for (const auto& row : out.rows) {
        if (row[6] != 0.0) continue;
        inf_all = std::min(inf_all, row[5]);
        if (row[1] >= 5.0) inf_5deg = std::min(inf_5deg, row[5]);
    }
    out.summary["ratio_inf"] = std::isfinite(inf_all) ? inf_all : 0.0;
    out.summary["ratio_inf_theta_ge_5deg"] = std::isfinite(inf_5deg) ? inf_5deg : 0.0;
    return out;
}

ProbeResult probe_contraction(const ScenarioSpec& scenario,
                              const LearnerConfig& config,
                              const ContractionSpec& spec, std::size_t workers) {
    if (norm2(scenario.target.wstar) == 0.0)
        throw config_error("probe_contraction: scenario target w* must be nonzero");
    if (spec.seeds < 1) throw config_error("probe_contraction: seeds must be >= 1");
    LearnerConfig cfg = config;
    cfg.finalize();
    const double beta = norm2(scenario.target.wstar);
    if (beta > cfg.W)
        throw config_error("probe_contraction: ||w*|| exceeds the search radius W");

    const OptEstimate opt = estimate_opt(scenario, spec.opt_mc);
    const double threshold = (96.0 / cfg.mu) * std::sqrt(opt.value + cfg.eps);

    ProbeResult out;
    out.name = "contraction";
    out.columns = {"seed", "t", "v_t", "v_next", "ratio", "counted", "contracted"};
    out.seed = scenario.seed;
    out.m = cfg.m_batch;
    out.timestamp = now_iso8601();

    const Schedule sch = derive_schedule(cfg);
    std::vector<std::vector<std::vector<double>>> per_seed(spec.seeds);
    parallel_for(spec.seeds, workers, [&](std::size_t s) {
        ScenarioSpec scn = scenario;
        scn.seed = scenario.seed + 1 + s;
        LearnerConfig c = cfg;
        c.seed = cfg.seed + 1 + s;
        const ScenarioSource source(scn);
        std::vector<TraceRecord> trace;
        const std::vector<double> w0(scn.marginal.d, 0.0);
        run_inner_loop(w0, beta, c, source, trace, s, 1);
        auto& rows = per_seed[s];
        rows.reserve(sch.T);
        for (std::size_t t = 0; t + 1 < trace.size(); ++t) {
            const double v_t = trace[t].misalign;
            const double v_next = trace[t + 1].misalign;
            const double ratio = v_t > 0.0 ? v_next / v_t : 0.0;
            const bool counted = v_t > threshold;
            rows.push_back({static_cast<double>(s), static_cast<double>(t), v_t,
                            v_next, ratio, counted ? 1.0 : 0.0,
                            counted && ratio < 1.0 ? 1.0 : 0.0});
        }
    });

    std::size_t counted = 0, contracted = 0;
    for (auto& rows : per_seed)
        for (auto& row : rows) {
            counted += row[5] != 0.0;
            contracted += row[6] != 0.0;
            out.rows.push_back(std::move(row));
        }
    out.summary["contracting_fraction"] =
        counted == 0 ? 0.0
                     : static_cast<double>(contracted) / static_cast<double>(counted);
    out.summary["steps_counted"] = static_cast<double>(counted);
    out.summary["opt_proxy"] = opt.value;
    out.summary["opt_proxy_se"] = opt.std_error;
    out.summary["threshold"] = threshold;
    out.summary["beta"] = beta;
    return out;
}

void write_probe_csv(const ProbeResult& probe, std::ostream& os) {
    for (std::size_t c = 0; c < probe.columns.size(); ++c) {
        if (c) os << ',';
        os << probe.columns[c];
    }
    os << '\n';
    for (const auto& row : probe.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) os << ',';
            os << format_double(row[c]);
        }
        os << '\n';
    }
}

ReproExample run_repro_example(std::size_t m, std::uint64_t seed) {
    if (m < 2) throw config_error("repro example: m must be >= 2");
    ScenarioSpec scenario;
    scenario.marginal = {MarginalKind::gaussian_isotropic, 4};
    scenario.target.wstar = {1.0, 0.0, 0.0, 0.0};
    scenario.target.ustar = make_linear_activation(1.0);
    scenario.seed = seed;

    const PiecewiseLinearActivation u = make_linear_activation(4.0);
    std::vector<double> w = scenario.target.wstar;
    scale(w, 0.5);
    std::vector<double> diff(w.size());
    for (std::size_t i = 0; i < w.size(); ++i)
        diff[i] = w[i] - scenario.target.wstar[i];

    const Dataset batch = sample_batch(scenario, m, kTagRepro);
    std::vector<double> vals(m);
    for (std::size_t i = 0; i < m; ++i)
        vals[i] = (u(dot(w, batch.x(i))) - batch.y(i)) * dot(diff, batch.x(i));
    const double n = static_cast<double>(m);
    ReproExample out;
    out.m = m;
    out.estimate = pairwise_sum(vals) / n;
    for (auto& v : vals) {
        const double d = v - out.estimate;
        v = d * d;
    }
    out.std_error = std::sqrt(pairwise_sum(vals) / (n * (n - 1.0)));
    out.target = -0.5 * norm_sq(scenario.target.wstar);
    return out;
}

std::vector<std::string> run_experiment(const ExperimentConfig& config) {
    LearnerConfig learner = config.learner;
    learner.finalize();
    validate_scenario(config.scenario);
    if (config.eval_m < 2 || config.opt_mc < 2)
        throw config_error("run_experiment: eval_m and opt_mc must be >= 2");

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    if (ec) throw io_error("cannot create output directory '" + config.out_dir + "'");
    const auto path_in = [&](const std::string& name) {
        return (fs::path(config.out_dir) / name).string();
    };

    std::vector<std::string> emitted;
    json summary;
    summary["eps"] = learner.eps;
    summary["eval_m"] = config.eval_m;
    summary["opt_mc"] = config.opt_mc;
    summary["final_loss"] = nullptr;
    summary["selected_index"] = nullptr;
    summary["c_emp"] = nullptr;
    summary["truncation_M"] = nullptr;
    summary["n_candidates"] = 0;
    summary["warnings"] = json::array();
    summary["probes"] = json::object();

    const OptEstimate opt = estimate_opt(config.scenario, config.opt_mc);
    summary["opt_proxy"] = opt.value;
    summary["opt_proxy_se"] = opt.std_error;

    if (config.run_learn) {
        const ScenarioSource source(config.scenario);
        const LearnOutput res = learn(learner, source, config.workers);

        const std::string hyp_path = path_in("hypothesis.json");
        save_hypothesis_json(res.selected, hyp_path);
        emitted.push_back(hyp_path);

        std::ostringstream trace;
        trace << "restart_k,grid_j,beta,t,wbar_norm,misalign,emp_loss,grad_norm,event\n";
        for (const auto& row : res.trace)
            trace << row.restart_k << ',' << row.grid_j << ','
                  << format_double(row.beta) << ',' << row.t << ','
                  << format_double(row.wbar_norm) << ','
                  << format_double(row.misalign) << ','
                  << format_double(row.emp_loss) << ','
                  << format_double(row.grad_norm) << ',' << row.event << '\n';
        write_emitted(path_in("trace.csv"), trace.str());
        emitted.push_back(path_in("trace.csv"));

        std::ostringstream cands;
        cands << "index,restart_k,grid_j,beta,w_norm,knots,truncated_loss,selected\n";
        for (std::size_t i = 0; i < res.candidates.items.size(); ++i) {
            const auto& c = res.candidates.items[i];
            cands << i << ',' << c.restart_k << ',' << c.grid_j << ','
                  << format_double(c.beta) << ',' << format_double(norm2(c.hyp.w))
                  << ',' << c.hyp.activation.knots().size() << ','
                  << format_double(res.truncated_losses[i]) << ','
                  << (i == res.selected_index ? 1 : 0) << '\n';
        }
        write_emitted(path_in("candidates.csv"), cands.str());
        emitted.push_back(path_in("candidates.csv"));

        const Dataset eval =
            sample_batch(config.scenario, config.eval_m, kTagEval);
        const double final_loss = l2_loss(res.selected, eval);
        summary["final_loss"] = final_loss;
        summary["selected_index"] = res.selected_index;
        summary["truncation_M"] = res.truncation_M;
        summary["n_candidates"] = res.candidates.items.size();
        for (const auto& w : res.warnings) summary["warnings"].push_back(w);
        if (opt.value > 0.0)
            summary["c_emp"] = (final_loss - learner.eps) / opt.value;
    }

    for (std::size_t i = 0; i < config.probes.size(); ++i) {
        const ProbeSpec& spec = config.probes[i];
        ProbeResult probe;
        if (spec.kind == "sharpness")
            probe = probe_sharpness(config.scenario, spec.sharpness, learner,
                                    config.workers);
        else if (spec.kind == "misalignment")
            probe = probe_misalignment(config.scenario, spec.misalignment,
                                       config.workers);
        else if (spec.kind == "contraction")
            probe = probe_contraction(config.scenario, learner, spec.contraction,
                                      config.workers);
        else
            throw config_error("unknown probe kind '" + spec.kind + "'");

        const std::string stem = "probe_" + std::to_string(i) + "_" + probe.name;
        std::ostringstream body;
        write_probe_csv(probe, body);
        write_emitted(path_in(stem + ".csv"), body.str());
        emitted.push_back(path_in(stem + ".csv"));

        json meta;
        meta["seed"] = probe.seed;
        meta["m"] = probe.m;
        meta["rows"] = probe.rows.size();
        if (!probe.labels.empty()) meta["labels"] = probe.labels;
        for (const auto& [k, v] : probe.summary) meta[k] = v;
        summary["probes"][stem] = meta;
    }

    write_emitted(path_in("summary.json"), summary.dump(2) + "\n");
    emitted.push_back(path_in("summary.json"));
    return emitted;
}

}  // namespace sim
