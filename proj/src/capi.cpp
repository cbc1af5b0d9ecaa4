#include "sim_capi.h"

#include <cstring>
#include <new>
#include <stdexcept>
#include <string>

#include "sim/harness.hpp"
#include "sim/monotone_fit.hpp"
#include "sim/serial.hpp"
#include "sim/synth.hpp"
#include "sim/types.hpp"

struct sim_dataset {
    sim::Dataset data;
};

struct sim_hypothesis {
    sim::Hypothesis hyp;
};

namespace {

thread_local std::string g_last_error;

sim_status fail(sim_status code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

template <typename Fn>
sim_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return SIM_OK;
    } catch (const sim::config_error& e) {
        return fail(SIM_ERR_CONFIG, e.what());
    } catch (const sim::io_error& e) {
        return fail(SIM_ERR_IO, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(SIM_ERR_INVALID, e.what());
    } catch (const std::exception& e) {
        return fail(SIM_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(SIM_ERR_INTERNAL, "unknown error");
    }
}

sim_status require(bool ok, const char* what) {
    return ok ? SIM_OK : fail(SIM_ERR_INVALID, what);
}

}  // namespace

extern "C" {

const char* sim_last_error(void) { return g_last_error.c_str(); }

sim_status sim_dataset_load_csv(const char* path, sim_dataset** out) {
    if (require(path && out, "sim_dataset_load_csv: null argument")) return SIM_ERR_INVALID;
    return guarded([&] { *out = new sim_dataset{sim::load_dataset_csv(path)}; });
}

sim_status sim_dataset_save_csv(const sim_dataset* data, const char* path) {
    if (require(data && path, "sim_dataset_save_csv: null argument")) return SIM_ERR_INVALID;
    return guarded([&] { sim::save_dataset_csv(data->data, path); });
}

sim_status sim_generate(const char* config_json, size_t m, uint64_t stream_id,
                        int has_seed, uint64_t seed, sim_dataset** out) {
    if (require(config_json && out, "sim_generate: null argument")) return SIM_ERR_INVALID;
    return guarded([&] {
        sim::ExperimentConfig cfg = sim::parse_experiment_config(config_json);
        if (has_seed) cfg.scenario.seed = seed;
        *out = new sim_dataset{sim::sample_batch(cfg.scenario, m, stream_id)};
    });
}

size_t sim_dataset_size(const sim_dataset* data) { return data ? data->data.size() : 0; }

size_t sim_dataset_dim(const sim_dataset* data) { return data ? data->data.dim() : 0; }

void sim_dataset_free(sim_dataset* data) { delete data; }

sim_status sim_hypothesis_load_json(const char* path, sim_hypothesis** out) {
    if (require(path && out, "sim_hypothesis_load_json: null argument"))
        return SIM_ERR_INVALID;
    return guarded([&] { *out = new sim_hypothesis{sim::load_hypothesis_json(path)}; });
}

sim_status sim_hypothesis_save_json(const sim_hypothesis* hyp, const char* path) {
    if (require(hyp && path, "sim_hypothesis_save_json: null argument"))
        return SIM_ERR_INVALID;
    return guarded([&] { sim::save_hypothesis_json(hyp->hyp, path); });
}

sim_status sim_hypothesis_to_json(const sim_hypothesis* hyp, char** out_text) {
    if (require(hyp && out_text, "sim_hypothesis_to_json: null argument"))
        return SIM_ERR_INVALID;
    return guarded([&] {
        const std::string text = sim::hypothesis_to_json(hyp->hyp);
        char* buf = new char[text.size() + 1];
        std::memcpy(buf, text.c_str(), text.size() + 1);
        *out_text = buf;
    });
}

sim_status sim_hypothesis_predict(const sim_hypothesis* hyp, const double* x,
                                  size_t d, double* out) {
    if (require(hyp && x && out, "sim_hypothesis_predict: null argument"))
        return SIM_ERR_INVALID;
    if (require(d == hyp->hyp.w.size(), "sim_hypothesis_predict: dimension mismatch"))
        return SIM_ERR_INVALID;
    return guarded([&] { *out = hyp->hyp.predict({x, d}); });
}

sim_status sim_hypothesis_loss(const sim_hypothesis* hyp, const sim_dataset* data,
                               double* out) {
    if (require(hyp && data && out, "sim_hypothesis_loss: null argument"))
        return SIM_ERR_INVALID;
    return guarded([&] { *out = sim::l2_loss(hyp->hyp, data->data); });
}

void sim_hypothesis_free(sim_hypothesis* hyp) { delete hyp; }

void sim_string_free(char* text) { delete[] text; }

sim_status sim_fit_activation(const double* w, size_t d, const sim_dataset* data,
                              double a, double b, sim_hypothesis** out) {
    if (require(w && data && out, "sim_fit_activation: null argument"))
        return SIM_ERR_INVALID;
    if (require(d == data->data.dim(), "sim_fit_activation: dimension mismatch"))
        return SIM_ERR_INVALID;
    return guarded([&] {
        const std::size_t m = data->data.size();
        std::vector<double> zs(m);
        for (std::size_t i = 0; i < m; ++i)
            zs[i] = sim::dot({w, d}, data->data.x(i));
        sim::PiecewiseLinearActivation u =
            sim::fit_activation(zs, data->data.labels(), a, b, 1e-9);
        *out = new sim_hypothesis{
            sim::Hypothesis{std::vector<double>(w, w + d), std::move(u)}};
    });
}

sim_status sim_config_learner_ab(const char* config_json, double* a, double* b) {
    if (require(config_json && a && b, "sim_config_learner_ab: null argument"))
        return SIM_ERR_INVALID;
    return guarded([&] {
        const sim::ExperimentConfig cfg = sim::parse_experiment_config(config_json);
        *a = cfg.learner.a;
        *b = cfg.learner.b;
    });
}

sim_status sim_run_experiment(const char* config_json,
                              const sim_run_options* options) {
    if (require(config_json && options && options->out_dir,
                "sim_run_experiment: null argument"))
        return SIM_ERR_INVALID;
    return guarded([&] {
        sim::ExperimentConfig cfg = sim::parse_experiment_config(config_json);
        cfg.out_dir = options->out_dir;
        cfg.workers = options->workers ? options->workers : 1;
        if (options->has_seed) {
            cfg.scenario.seed = options->seed;
            cfg.learner.seed = options->seed;
        }
        const std::string mode = options->mode ? options->mode : "all";
        if (mode == "all") {
            // as configured
        } else if (mode == "learn") {
            cfg.run_learn = true;
            cfg.probes.clear();
        } else if (mode == "probes") {
            cfg.run_learn = false;
        } else if (mode == "sharpness" || mode == "misalignment" ||
                   mode == "contraction") {
            cfg.run_learn = false;
            std::vector<sim::ProbeSpec> kept;
            for (auto& p : cfg.probes)
                if (p.kind == mode) kept.push_back(std::move(p));
            if (kept.empty()) {
                sim::ProbeSpec p;
                p.kind = mode;
                kept.push_back(std::move(p));
            }
            cfg.probes = std::move(kept);
        } else {
            throw sim::config_error("unknown run mode '" + mode + "'");
        }
        sim::run_experiment(cfg);
    });
}

sim_status sim_repro_example(size_t m, uint64_t seed, double* estimate,
                             double* std_error, double* target) {
    if (require(estimate && std_error && target, "sim_repro_example: null argument"))
        return SIM_ERR_INVALID;
    return guarded([&] {
        const sim::ReproExample r = sim::run_repro_example(m, seed);
        *estimate = r.estimate;
        *std_error = r.std_error;
        *target = r.target;
    });
}

}  // extern "C"
