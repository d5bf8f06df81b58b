#include "mixdyn/error.hpp"
#include "mixdyn/gridsim.hpp"
#include "mixdyn/pipeline.hpp"
#include "mixdyn/serialize.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace mixdyn;

namespace {

struct Options {
    std::uint64_t seed = 1;
    std::string config;
    std::string out_dir = ".";

    std::vector<std::string> scenarios{"SG"};
    std::vector<int> buses{2};
    std::string network = std::string(MIXDYN_DATA_DIR) + "/ieee15.csv";
    double duration = 10.0;
    double sample_rate = 20000.0;

    std::string input;
    std::string method = "sindy";
    std::vector<std::string> methods{"sindy", "mixed"};
    int poly_order = 3;
    double lambda = 0.8;
    std::string solver = "stlsq";
    int mixed_poly_order = 1;
    double mixed_lambda = 0.0;
    std::string target = "delay";
    std::string integrator = "leapfrog";
    std::size_t burst = 0;
    std::optional<double> window_start;
    std::optional<double> window_end;
    std::size_t m = 100;
    std::size_t tau = 1;
    std::optional<std::size_t> rank;
    double fundamental = 60.0;

    std::vector<std::string> error_files;
    std::string reference = "SG";
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// Copies values from the JSON run config into options the user did not set on the command line.
// Top-level keys apply everywhere; an object named after the subcommand overrides them.
void apply_config(CLI::App& app, CLI::App* sub, const nlohmann::json& doc) {
    auto apply = [](CLI::App* target, const nlohmann::json& obj) {
        for (const auto& [key, value] : obj.items()) {
            if (value.is_object()) continue;
            CLI::Option* opt = nullptr;
            try {
                opt = target->get_option("--" + key);
            } catch (const CLI::OptionNotFound&) {
                continue;
            }
            if (opt->count() > 0) continue;
            std::vector<std::string> parts;
            auto one = [](const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
            if (value.is_array()) {
                for (const auto& v : value) parts.push_back(one(v));
            } else {
                parts.push_back(one(value));
            }
            opt->clear();
            for (const auto& p : parts) opt->add_result(p);
            opt->run_callback();
        }
    };
    apply(&app, doc);
    if (sub) {
        apply(sub, doc);
        if (doc.contains(sub->get_name()) && doc.at(sub->get_name()).is_object()) apply(sub, doc.at(sub->get_name()));
    }
}

EvalConfig eval_config(const Options& o) {
    EvalConfig cfg;
    cfg.burst_len = o.burst;
    cfg.fundamental_hz = o.fundamental;
    cfg.spec.poly_order = o.poly_order;
    cfg.solver.lambda = o.lambda;
    if (o.solver == "ista") {
        cfg.solver.method = SolverMethod::IstaL1;
        cfg.solver.max_iter = 5000;
    } else if (o.solver != "stlsq") {
        throw InputError("unknown solver '" + o.solver + "' (expected stlsq or ista)");
    }
    cfg.mixed.hankel = {o.m, o.tau};
    cfg.mixed.spec.poly_order = o.mixed_poly_order;
    cfg.mixed.solver.lambda = o.mixed_lambda;
    cfg.mixed.slow_rank_override = o.rank;
    if (o.target == "slow") {
        cfg.mixed.target = MixedTarget::SlowSignal;
    } else if (o.target != "delay") {
        throw InputError("unknown target '" + o.target + "' (expected delay or slow)");
    }
    if (o.integrator == "rk4") {
        cfg.mixed.integrator = Integrator::Rk4;
    } else if (o.integrator != "leapfrog") {
        throw InputError("unknown integrator '" + o.integrator + "' (expected leapfrog or rk4)");
    }
    return cfg;
}

fs::path out_dir(const Options& o) {
    fs::path dir(o.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

Scenario scenario_for(const Options& o, const std::string& name) {
    Scenario sc;
    sc.kind = parse_scenario_kind(name);
    sc.duration = o.duration;
    sc.sample_rate = o.sample_rate;
    sc.seed = o.seed;
    sc.validate();
    return sc;
}

int cmd_simulate(const Options& o) {
    const Network net = load_network(o.network);
    const fs::path dir = out_dir(o);
    for (const auto& name : o.scenarios) {
        const Scenario sc = scenario_for(o, name);
        for (int bus : o.buses) {
            const TimeSeries v = simulate_scenario(net, sc, bus);
            const fs::path path = dir / (to_string(sc.kind) + "_bus" + std::to_string(bus) + ".csv");
            write_csv(path, v);
            std::cout << path.string() << '\n';
        }
    }
    return 0;
}

int cmd_identify(const Options& o) {
    if (o.input.empty()) throw InputError("identify needs --input");
    if (!fs::exists(o.input)) throw InputError("input file " + o.input + " does not exist");
    const TimeSeries x = load_series_csv(o.input);
    const EvalConfig cfg = eval_config(o);
    const Method method = parse_method(o.method);
    const TimeSeries w = window(x, o.window_start.value_or(x.t0), o.window_end.value_or(x.end_time()));
    const auto segs = segments(w, o.burst);

    nlohmann::json doc;
    MethodResult res;
    res.method = method;
    res.actual = segs;
    if (method == Method::Sindy) {
        const auto model = identify_delay_pair(segs, quarter_period_lag(x.dt, cfg.fundamental_hz), cfg.spec, cfg.solver);
        doc = to_json(model);
        doc["method"] = "sindy";
        for (const auto& s : segs) {
            auto p = replay_delay_pair(model, s);
            if (p.truncated) throw NumericError("sindy reconstruction blew up at t = " + fmt(p.series.end_time()));
            res.predicted.push_back(std::move(p.series));
        }
    } else {
        MixedConfig mc = method == Method::Havok ? havok_config(cfg) : cfg.mixed;
        mc.generic_spec = cfg.spec;
        mc.generic_solver = cfg.solver;
        mc.fundamental_hz = cfg.fundamental_hz;
        const auto model = identify_mixed(segs, mc);
        doc = to_json(model);
        doc["method"] = to_string(method);
        for (auto& p : predict_mixed_records(model)) {
            if (p.truncated) {
                throw NumericError(to_string(method) + " reconstruction blew up at t = " + fmt(p.series.end_time()));
            }
            res.predicted.push_back(std::move(p.series));
        }
    }
    const TimeSeries predicted = concatenate(res.predicted);
    const double err = nrmse(predicted, concatenate(res.actual));
    doc["nrmse"] = err;

    const fs::path dir = out_dir(o);
    const std::string stem = fs::path(o.input).stem().string() + "_" + to_string(method);
    write_json(dir / (stem + "_model.json"), doc);
    write_csv(dir / (stem + "_recon.csv"), predicted);
    std::cout << "nrmse " << fmt(err) << '\n';
    return 0;
}

void print_table(const std::vector<ErrorRow>& rows) {
    for (const auto& r : rows) std::cout << r.scenario << '\t' << r.method << '\t' << fmt(r.nrmse) << '\t' << fmt(r.ratio) << '\n';
}

int cmd_evaluate(const Options& o) {
    const Network net = load_network(o.network);
    EvalConfig cfg = eval_config(o);
    cfg.window_start = o.window_start.value_or(cfg.window_start);
    cfg.window_end = o.window_end.value_or(cfg.window_end);
    if (o.burst == 0) cfg.burst_len = 1000;
    std::vector<ErrorRow> rows;
    for (const auto& name : o.scenarios) {
        const Scenario sc = scenario_for(o, name);
        for (int bus : o.buses) {
            const auto segs = evaluation_segments(simulate_scenario(net, sc, bus), cfg);
            const std::string label = o.buses.size() > 1 ? to_string(sc.kind) + "_bus" + std::to_string(bus) : to_string(sc.kind);
            for (const auto& m : o.methods) {
                const auto res = run_method(parse_method(m), segs, cfg);
                rows.push_back({label, to_string(res.method), res.nrmse, 0.0});
            }
        }
    }
    rows = ratio_table(std::move(rows), o.reference);
    write_error_csv(out_dir(o) / "errors.csv", rows);
    print_table(rows);
    return 0;
}

int cmd_report(const Options& o) {
    std::vector<ErrorRow> rows;
    for (const auto& f : o.error_files) {
        auto part = read_error_csv(f);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    rows = ratio_table(std::move(rows), o.reference);
    write_error_csv(out_dir(o) / "ratios.csv", rows);
    std::cout << "reference " << o.reference << '\n';
    print_table(rows);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"Multi-scale dynamics identification: generic SINDy, HAVOK and the mixed algorithm"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--seed", o.seed, "Noise seed");
    app.add_option("--config", o.config, "JSON run config; command-line flags override it");
    app.add_option("--out-dir", o.out_dir, "Directory for output files");

    auto add_scenario_opts = [&](CLI::App* c) {
        c->add_option("--scenario", o.scenarios, "SG, IBR50 or IBR100 (repeatable)");
        c->add_option("--bus", o.buses, "Bus id (repeatable)");
        c->add_option("--network", o.network, "Network fixture CSV");
        c->add_option("--duration", o.duration, "Seconds");
        c->add_option("--sample-rate", o.sample_rate, "Samples per second");
    };
    auto add_model_opts = [&](CLI::App* c) {
        c->add_option("--poly-order", o.poly_order, "Generic SINDy polynomial order");
        c->add_option("--lambda", o.lambda, "Generic SINDy threshold");
        c->add_option("--solver", o.solver, "stlsq or ista");
        c->add_option("--mixed-poly-order", o.mixed_poly_order, "Library order over delay coordinates");
        c->add_option("--mixed-lambda", o.mixed_lambda, "Threshold for the delay-coordinate regression");
        c->add_option("--target", o.target, "Mixed target: delay or slow");
        c->add_option("--integrator", o.integrator, "Mixed replay: leapfrog or rk4");
        c->add_option("--burst", o.burst, "Segment length in samples (0 = whole window)");
        c->add_option("--window-start", o.window_start, "Seconds");
        c->add_option("--window-end", o.window_end, "Seconds");
        c->add_option("--m", o.m, "Embedding dimension");
        c->add_option("--tau", o.tau, "Delay in samples");
        c->add_option("--rank", o.rank, "Override the hard-threshold rank");
        c->add_option("--fundamental", o.fundamental, "Fundamental frequency in Hz");
    };

    auto* simulate = app.add_subcommand("simulate", "Write scenario waveforms as CSV");
    add_scenario_opts(simulate);
    auto* identify = app.add_subcommand("identify", "Identify a model from a waveform CSV");
    identify->add_option("--input", o.input, "Waveform CSV");
    identify->add_option("--method", o.method, "sindy, havok or mixed");
    add_model_opts(identify);
    auto* evaluate = app.add_subcommand("evaluate", "Simulate scenarios and tabulate reconstruction errors");
    add_scenario_opts(evaluate);
    add_model_opts(evaluate);
    evaluate->add_option("--methods", o.methods, "Methods to compare");
    evaluate->add_option("--reference", o.reference, "Scenario whose sindy error is the base");
    o.scenarios = {"SG"};
    auto* report = app.add_subcommand("report", "Ratio table from error CSV files");
    report->add_option("--errors", o.error_files, "Error CSV files")->required();
    report->add_option("--reference", o.reference, "Reference scenario");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        if (!o.config.empty()) {
            apply_config(app, sub, read_json(o.config));
        }
        if (sub == evaluate && evaluate->get_option("--scenario")->count() == 0) {
            o.scenarios = {"SG", "IBR50", "IBR100"};
        }
        if (sub == simulate) return cmd_simulate(o);
        if (sub == identify) return cmd_identify(o);
        if (sub == evaluate) return cmd_evaluate(o);
        return cmd_report(o);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
}
