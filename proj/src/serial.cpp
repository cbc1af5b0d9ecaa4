#include "sim/serial.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace sim {
namespace {

using nlohmann::json;

void expect_keys(const json& j, const std::set<std::string>& allowed,
                 const std::string& where) {
    if (!j.is_object()) throw config_error(where + ": expected an object");
    for (const auto& item : j.items())
        if (!allowed.count(item.key()))
            throw config_error(where + ": unknown key '" + item.key() + "'");
}

double get_num(const json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw config_error("key '" + key + "' must be a number");
    return j.at(key).get<double>();
}

std::size_t get_count(const json& j, const std::string& key, std::size_t fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number_unsigned())
        throw config_error("key '" + key + "' must be a nonnegative integer");
    return v.get<std::size_t>();
}

std::vector<double> get_vec(const json& j, const std::string& key) {
    const auto& v = j.at(key);
    if (!v.is_array()) throw config_error("key '" + key + "' must be an array");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& e : v) {
        if (!e.is_number()) throw config_error("key '" + key + "' has a non-number entry");
        out.push_back(e.get<double>());
    }
    return out;
}

PiecewiseLinearActivation parse_activation(const json& j) {
    expect_keys(j,
                {"kind", "c", "alpha", "slope_low", "slope_high", "z0", "knots",
                 "values", "a", "b"},
                "activation");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "linear") return make_linear_activation(get_num(j, "c", 1.0));
    if (kind == "relu") return make_relu_activation();
    if (kind == "leaky_relu")
        return make_leaky_relu_activation(get_num(j, "alpha", 0.5));
    if (kind == "saturating_ramp")
        return make_saturating_ramp_activation(get_num(j, "slope_low", 0.25),
                                               get_num(j, "slope_high", 1.0),
                                               get_num(j, "z0", 1.0));
    if (kind == "zero") return make_zero_activation();
    if (kind == "clipped_ramp")
        return make_clipped_ramp_activation(get_num(j, "c", 1.0));
    if (kind == "explicit")
        return PiecewiseLinearActivation(get_vec(j, "knots"), get_vec(j, "values"),
                                         get_num(j, "a", 0.0), get_num(j, "b", 1.0));
    throw config_error("unknown activation kind '" + kind + "'");
}

MarginalKind parse_marginal_kind(const std::string& s) {
    if (s == "gaussian") return MarginalKind::gaussian_isotropic;
    if (s == "laplace") return MarginalKind::laplace_product;
    if (s == "logistic") return MarginalKind::logistic_product;
    if (s == "ball") return MarginalKind::uniform_ball;
    throw config_error("unknown marginal '" + s + "'");
}

NoiseKind parse_noise_kind(const std::string& s) {
    if (s == "none") return NoiseKind::none;
    if (s == "sign_flip") return NoiseKind::sign_flip;
    if (s == "zero_out") return NoiseKind::zero_out;
    if (s == "additive_outlier") return NoiseKind::additive_outlier;
    if (s == "label_shift") return NoiseKind::label_shift;
    throw config_error("unknown noise kind '" + s + "'");
}

ScenarioSpec parse_scenario(const json& j) {
    expect_keys(j, {"marginal", "d", "target", "noise", "seed"}, "scenario");
    ScenarioSpec s;
    if (j.contains("marginal"))
        s.marginal.kind = parse_marginal_kind(j.at("marginal").get<std::string>());
    s.marginal.d = get_count(j, "d", 1);
    if (j.contains("target")) {
        const auto& t = j.at("target");
        expect_keys(t, {"w", "activation"}, "scenario.target");
        if (t.contains("w")) s.target.wstar = get_vec(t, "w");
        if (t.contains("activation"))
            s.target.ustar = parse_activation(t.at("activation"));
    }
    if (s.target.wstar.empty()) {
        s.target.wstar.assign(s.marginal.d, 0.0);
        s.target.wstar[0] = 1.0;
    }
    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        expect_keys(n, {"kind", "p", "magnitude", "delta"}, "scenario.noise");
        s.noise.kind = parse_noise_kind(n.at("kind").get<std::string>());
        s.noise.p = get_num(n, "p", 0.0);
        s.noise.magnitude = get_num(n, "magnitude", 0.0);
        s.noise.delta = get_num(n, "delta", 0.0);
    }
    s.seed = get_count(j, "seed", 1);
    return s;
}

LearnerConfig parse_learner(const json& j) {
    expect_keys(j,
                {"a", "b", "L", "R", "W", "eps", "delta", "mu", "eta_init",
                 "eta_opt", "t0_cap", "T_cap", "J_cap", "m_batch", "m_test",
                 "m_init", "seed", "kkt_tol", "fd_tol"},
                "learner");
    LearnerConfig c;
    c.a = get_num(j, "a", c.a);
    c.b = get_num(j, "b", c.b);
    c.L = get_num(j, "L", c.L);
    c.R = get_num(j, "R", c.R);
    c.W = get_num(j, "W", c.W);
    c.eps = get_num(j, "eps", c.eps);
    c.delta = get_num(j, "delta", c.delta);
    c.mu = get_num(j, "mu", c.mu);
    c.eta_init = get_num(j, "eta_init", c.eta_init);
    c.eta_opt = get_num(j, "eta_opt", c.eta_opt);
    c.t0_cap = get_count(j, "t0_cap", c.t0_cap);
    c.T_cap = get_count(j, "T_cap", c.T_cap);
    c.J_cap = get_count(j, "J_cap", c.J_cap);
    c.m_batch = get_count(j, "m_batch", c.m_batch);
    c.m_test = get_count(j, "m_test", c.m_test);
    c.m_init = get_count(j, "m_init", c.m_init);
    c.seed = get_count(j, "seed", c.seed);
    c.kkt_tol = get_num(j, "kkt_tol", c.kkt_tol);
    c.fd_tol = get_num(j, "fd_tol", c.fd_tol);
    return c;
}

ProbeSpec parse_probe(const json& j) {
    ProbeSpec p;
    p.kind = j.at("kind").get<std::string>();
    if (p.kind == "sharpness") {
        expect_keys(j, {"kind", "angles_deg", "m", "trials", "fit", "slope"},
                    "probe");
        if (j.contains("angles_deg")) p.sharpness.angles_deg = get_vec(j, "angles_deg");
        p.sharpness.m = get_count(j, "m", p.sharpness.m);
        p.sharpness.trials = get_count(j, "trials", p.sharpness.trials);
        if (j.contains("fit")) p.sharpness.fit_activation = j.at("fit").get<bool>();
        p.sharpness.fixed_slope = get_num(j, "slope", p.sharpness.fixed_slope);
    } else if (p.kind == "misalignment") {
        expect_keys(j, {"kind", "f_family", "angles_deg", "n_mc"}, "probe");
        if (j.contains("f_family")) {
            p.misalignment.f_family.clear();
            for (const auto& e : j.at("f_family"))
                p.misalignment.f_family.push_back(e.get<std::string>());
        }
        if (j.contains("angles_deg"))
            p.misalignment.angles_deg = get_vec(j, "angles_deg");
        p.misalignment.n_mc = get_count(j, "n_mc", p.misalignment.n_mc);
    } else if (p.kind == "contraction") {
        expect_keys(j, {"kind", "seeds", "opt_mc"}, "probe");
        p.contraction.seeds = get_count(j, "seeds", p.contraction.seeds);
        p.contraction.opt_mc = get_count(j, "opt_mc", p.contraction.opt_mc);
    } else {
        throw config_error("unknown probe kind '" + p.kind + "'");
    }
    return p;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    if (v == static_cast<long long>(v) && std::abs(v) < 1e15) {
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
        return buf;
    }
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_dataset_csv(const Dataset& data, std::ostream& os) {
    for (std::size_t c = 0; c < data.dim(); ++c) os << 'x' << (c + 1) << ',';
    os << "y\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto row = data.x(i);
        for (double v : row) os << format_double(v) << ',';
        os << format_double(data.y(i)) << '\n';
    }
    if (!os) throw io_error("dataset CSV write failed");
}

void save_dataset_csv(const Dataset& data, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot open '" + path + "' for writing");
    write_dataset_csv(data, os);
}

Dataset read_dataset_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw io_error("dataset CSV: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    if (header.size() < 2 || header.back() != "y")
        throw io_error("dataset CSV: header must be x1,...,xd,y");
    const std::size_t d = header.size() - 1;
    for (std::size_t c = 0; c < d; ++c)
        if (header[c] != "x" + std::to_string(c + 1))
            throw io_error("dataset CSV: bad header column '" + header[c] + "'");

    std::vector<double> xs, ys;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0')
                throw io_error("dataset CSV: bad number at line " +
                               std::to_string(lineno));
            vals.push_back(v);
        }
        if (vals.size() != d + 1)
            throw io_error("dataset CSV: wrong column count at line " +
                           std::to_string(lineno));
        xs.insert(xs.end(), vals.begin(), vals.end() - 1);
        ys.push_back(vals.back());
    }
    if (ys.empty()) throw io_error("dataset CSV: no data rows");
    return Dataset(d, std::move(xs), std::move(ys));
}

Dataset load_dataset_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open '" + path + "' for reading");
    return read_dataset_csv(is);
}

std::string hypothesis_to_json(const Hypothesis& hyp) {
    json j;
    j["w"] = hyp.w;
    j["knots"] = hyp.activation.knots();
    j["values"] = hyp.activation.values();
    j["a"] = hyp.activation.lower_slope();
    j["b"] = hyp.activation.lipschitz();
    return j.dump(2) + "\n";
}

Hypothesis hypothesis_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw io_error(std::string("hypothesis JSON: ") + e.what());
    }
    expect_keys(j, {"w", "knots", "values", "a", "b"}, "hypothesis");
    try {
        return {get_vec(j, "w"),
                PiecewiseLinearActivation(get_vec(j, "knots"), get_vec(j, "values"),
                                          j.at("a").get<double>(),
                                          j.at("b").get<double>())};
    } catch (const json::exception& e) {
        throw config_error(std::string("hypothesis JSON: ") + e.what());
    }
}

void save_hypothesis_json(const Hypothesis& hyp, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot open '" + path + "' for writing");
    os << hypothesis_to_json(hyp);
    if (!os) throw io_error("hypothesis write failed");
}

Hypothesis load_hypothesis_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open '" + path + "' for reading");
    std::stringstream ss;
    ss << is.rdbuf();
    return hypothesis_from_json(ss.str());
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw config_error(std::string("config: ") + e.what());
    }
    expect_keys(j, {"scenario", "learner", "probes"}, "config");
    ExperimentConfig cfg;
    try {
        if (j.contains("scenario")) cfg.scenario = parse_scenario(j.at("scenario"));
        if (j.contains("learner")) cfg.learner = parse_learner(j.at("learner"));
        if (j.contains("probes")) {
            const auto& ps = j.at("probes");
            if (!ps.is_array()) throw config_error("'probes' must be an array");
            for (const auto& p : ps) cfg.probes.push_back(parse_probe(p));
        }
    } catch (const json::exception& e) {
        throw config_error(std::string("config: ") + e.what());
    }
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open '" + path + "' for reading");
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_experiment_config(ss.str());
}

PiecewiseLinearActivation activation_from_name(const std::string& name) {
    if (name == "zero") return make_zero_activation();
    if (name == "identity") return make_linear_activation(1.0);
    if (name == "half_linear") return make_linear_activation(0.5);
    if (name == "relu") return make_relu_activation();
    if (name == "leaky_relu") return make_leaky_relu_activation(0.5);
    if (name == "clipped_ramp") return make_clipped_ramp_activation(1.0);
    if (name == "saturating_ramp")
        return make_saturating_ramp_activation(0.25, 1.0, 1.0);
    throw config_error("unknown activation name '" + name + "'");
}

}  // namespace sim
