// Command-line driver. Talks to the library exclusively through the C API.
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sim_capi.h"

namespace {

int fail_with(sim_status status) {
    std::fprintf(stderr, "error: %s\n", sim_last_error());
    return static_cast<int>(status);
}

bool read_file(const std::string& path, std::string& out) {
    std::ifstream is(path);
    if (!is) return false;
    std::stringstream ss;
    ss << is.rdbuf();
    out = ss.str();
    return true;
}

std::vector<double> parse_vector(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        size_t pos = 0;
        out.push_back(std::stod(cell, &pos));
        if (pos != cell.size()) throw std::invalid_argument("bad vector entry: " + cell);
    }
    if (out.empty()) throw std::invalid_argument("empty vector");
    return out;
}

std::string join_path(const std::string& dir, const std::string& name) {
    if (dir.empty() || dir == ".") return name;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    return dir.back() == '/' ? dir + name : dir + "/" + name;
}

struct CommonOpts {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool has_seed = false;
    std::size_t workers = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required) {
    auto* c = cmd->add_option("--config", opts.config_path, "config file (JSON)");
    if (config_required) c->required();
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "override scenario and learner seeds")
        ->each([&](const std::string&) { opts.has_seed = true; });
    cmd->add_option("--workers", opts.workers, "worker threads");
}

int run_mode(const CommonOpts& opts, const char* mode) {
    std::string config;
    if (!read_file(opts.config_path, config)) {
        std::fprintf(stderr, "error: cannot read config '%s'\n",
                     opts.config_path.c_str());
        return SIM_ERR_IO;
    }
    sim_run_options ro{};
    ro.out_dir = opts.out_dir.c_str();
    ro.mode = mode;
    ro.has_seed = opts.has_seed ? 1 : 0;
    ro.seed = opts.seed;
    ro.workers = opts.workers;
    const sim_status st = sim_run_experiment(config.c_str(), &ro);
    if (st != SIM_OK) return fail_with(st);
    std::printf("wrote results under %s\n", opts.out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"single-index model learner"};
    app.require_subcommand(1);

    CommonOpts gen_opts;
    std::size_t gen_m = 1000;
    std::uint64_t gen_stream = 0;
    auto* gen = app.add_subcommand("gen", "sample a dataset CSV from the scenario");
    add_common(gen, gen_opts, true);
    gen->add_option("--m", gen_m, "number of samples");
    gen->add_option("--stream", gen_stream, "stream id (fresh data per id)");

    CommonOpts fit_opts;
    std::string fit_data, fit_w;
    double fit_a = 0.5, fit_b = 1.0;
    bool fit_a_set = false, fit_b_set = false;
    auto* fit = app.add_subcommand("fit", "fit the best activation for a fixed w");
    add_common(fit, fit_opts, false);
    fit->add_option("--data", fit_data, "dataset CSV")->required();
    fit->add_option("--w", fit_w, "direction, comma separated")->required();
    fit->add_option("--a", fit_a, "lower slope on z >= 0")
        ->each([&](const std::string&) { fit_a_set = true; });
    fit->add_option("--b", fit_b, "Lipschitz bound")
        ->each([&](const std::string&) { fit_b_set = true; });

    CommonOpts train_opts;
    auto* train = app.add_subcommand("train", "run the full learner");
    add_common(train, train_opts, true);

    CommonOpts probe_opts;
    std::string probe_kind;
    auto* probe = app.add_subcommand("probe", "run a structural probe");
    probe->add_option("kind", probe_kind, "sharpness | misalignment | contraction")
        ->required()
        ->check(CLI::IsMember({"sharpness", "misalignment", "contraction"}));
    add_common(probe, probe_opts, true);

    std::string eval_hyp, eval_data;
    auto* eval = app.add_subcommand("eval", "loss of a stored hypothesis on a CSV");
    eval->add_option("--hypothesis", eval_hyp, "hypothesis JSON")->required();
    eval->add_option("--data", eval_data, "dataset CSV")->required();

    std::size_t repro_m = 1000000;
    std::uint64_t repro_seed = 1;
    auto* repro = app.add_subcommand(
        "repro-example", "fixed-activation negative-correlation estimate");
    repro->add_option("--m", repro_m, "Monte-Carlo sample count");
    repro->add_option("--seed", repro_seed, "sampling seed");

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        std::string config;
        if (!read_file(gen_opts.config_path, config)) {
            std::fprintf(stderr, "error: cannot read config '%s'\n",
                         gen_opts.config_path.c_str());
            return SIM_ERR_IO;
        }
        sim_dataset* data = nullptr;
        sim_status st = sim_generate(config.c_str(), gen_m, gen_stream,
                                     gen_opts.has_seed ? 1 : 0, gen_opts.seed, &data);
        if (st != SIM_OK) return fail_with(st);
        const std::string path = join_path(gen_opts.out_dir, "data.csv");
        st = sim_dataset_save_csv(data, path.c_str());
        sim_dataset_free(data);
        if (st != SIM_OK) return fail_with(st);
        std::printf("wrote %s\n", path.c_str());
        return 0;
    }

    if (fit->parsed()) {
        double a = fit_a, b = fit_b;
        if (!fit_opts.config_path.empty()) {
            std::string config;
            if (!read_file(fit_opts.config_path, config)) {
                std::fprintf(stderr, "error: cannot read config '%s'\n",
                             fit_opts.config_path.c_str());
                return SIM_ERR_IO;
            }
            double ca = 0.0, cb = 0.0;
            const sim_status st = sim_config_learner_ab(config.c_str(), &ca, &cb);
            if (st != SIM_OK) return fail_with(st);
            if (!fit_a_set) a = ca;
            if (!fit_b_set) b = cb;
        }
        std::vector<double> w;
        try {
            w = parse_vector(fit_w);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "error: --w: %s\n", e.what());
            return SIM_ERR_CONFIG;
        }
        sim_dataset* data = nullptr;
        sim_status st = sim_dataset_load_csv(fit_data.c_str(), &data);
        if (st != SIM_OK) return fail_with(st);
        sim_hypothesis* hyp = nullptr;
        st = sim_fit_activation(w.data(), w.size(), data, a, b, &hyp);
        sim_dataset_free(data);
        if (st != SIM_OK) return fail_with(st);
        const std::string path = join_path(fit_opts.out_dir, "hypothesis.json");
        st = sim_hypothesis_save_json(hyp, path.c_str());
        sim_hypothesis_free(hyp);
        if (st != SIM_OK) return fail_with(st);
        std::printf("wrote %s\n", path.c_str());
        return 0;
    }

    if (train->parsed()) return run_mode(train_opts, "learn");
    if (probe->parsed()) return run_mode(probe_opts, probe_kind.c_str());

    if (eval->parsed()) {
        sim_hypothesis* hyp = nullptr;
        sim_status st = sim_hypothesis_load_json(eval_hyp.c_str(), &hyp);
        if (st != SIM_OK) return fail_with(st);
        sim_dataset* data = nullptr;
        st = sim_dataset_load_csv(eval_data.c_str(), &data);
        if (st != SIM_OK) {
            sim_hypothesis_free(hyp);
            return fail_with(st);
        }
        double loss = 0.0;
        st = sim_hypothesis_loss(hyp, data, &loss);
        const size_t m = sim_dataset_size(data);
        const size_t d = sim_dataset_dim(data);
        sim_hypothesis_free(hyp);
        sim_dataset_free(data);
        if (st != SIM_OK) return fail_with(st);
        std::printf("{\"loss\": %.17g, \"m\": %zu, \"d\": %zu}\n", loss, m, d);
        return 0;
    }

    if (repro->parsed()) {
        double est = 0.0, se = 0.0, target = 0.0;
        const sim_status st = sim_repro_example(repro_m, repro_seed, &est, &se, &target);
        if (st != SIM_OK) return fail_with(st);
        std::printf(
            "{\"estimate\": %.17g, \"std_error\": %.17g, \"target\": %.17g, "
            "\"m\": %zu, \"z\": %.6g}\n",
            est, se, target, repro_m, se > 0.0 ? (est - target) / se : 0.0);
        return 0;
    }

    return 0;
}
