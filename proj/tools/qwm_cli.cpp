// qwm: quantum wave mixing simulator for a cascaded pair of driven two-level
// emitters behind a unidirectional waveguide. Subcommands cover single-point
// spectra, 2-D drive sweeps, the classical mixing formula, photon-statistics
// curves, spectroscopy and map calibration fits, perturbation-vs-exact
// comparisons, and the quantum-vs-classical signature at one operating point.

#include "qwm/analytic.hpp"
#include "qwm/compare.hpp"
#include "qwm/config.hpp"
#include "qwm/fit.hpp"
#include "qwm/perturbation.hpp"
#include "qwm/sweep.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace qwm;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    int jobs = 0;
    std::string format = "both";
    bool svg = false;
    double floor_dbm_override = std::numeric_limits<double>::quiet_NaN();
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* opt = cmd->add_option("--config", args.config_path, "run configuration JSON");
    if (config_required) opt->required();
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--jobs", args.jobs, "worker cap for sweeps (0 = hardware)");
    cmd->add_option("--format", args.format, "csv|json|both")
        ->check(CLI::IsMember({"csv", "json", "both"}));
    cmd->add_flag("--svg", args.svg, "emit SVG plots");
    cmd->add_option("--floor-dbm", args.floor_dbm_override,
                    "display floor for plots/reports");
}

json load_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw config_error("cannot open config file '" + path + "'");
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw config_error("config parse error: " + std::string(e.what()));
    }
}

void atomic_write(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        os << content;
    }
    fs::rename(tmp, path);
}

struct Outputs {
    fs::path dir;
    bool want_csv = true;
    bool want_json = true;

    explicit Outputs(const CommonArgs& args) : dir(args.out_dir) {
        fs::create_directories(dir);
        want_csv = args.format != "json";
        want_json = args.format != "csv";
    }

    void csv(const std::string& name, const std::string& content) const {
        if (want_csv) atomic_write(dir / name, content);
    }
    void js(const std::string& name, const json& doc) const {
        if (want_json) atomic_write(dir / name, doc.dump(2) + "\n");
    }
    void always(const std::string& name, const std::string& content) const {
        atomic_write(dir / name, content);
    }
};

RunConfig load_run_config(const CommonArgs& args, const Outputs& out) {
    RunConfig cfg = parse_run_config(load_json(args.config_path));
    if (!std::isnan(args.floor_dbm_override)) cfg.floor_dbm = args.floor_dbm_override;
    out.always("resolved_config.json", resolve_run_config(cfg).dump(2) + "\n");
    return cfg;
}

int effective_jobs(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

json spectrum_json(const SidebandSpectrum& spec, double gain_db) {
    json items = json::array();
    for (size_t q = 0; q < spec.orders.size(); ++q) {
        items.push_back({{"order", spec.orders[q]},
                         {"re", spec.amplitudes[q].real()},
                         {"im", spec.amplitudes[q].imag()},
                         {"power", spec.powers[q]},
                         {"power_dB", linear_to_db(std::max(spec.powers[q], 1e-300)) +
                                          gain_db}});
    }
    return items;
}

std::string spectrum_csv(const SidebandSpectrum& spec, double gain_db) {
    std::string out = "order,re,im,power,power_dB\n";
    for (size_t q = 0; q < spec.orders.size(); ++q) {
        out += std::to_string(spec.orders[q]) + ',' +
               format_double(spec.amplitudes[q].real()) + ',' +
               format_double(spec.amplitudes[q].imag()) + ',' +
               format_double(spec.powers[q]) + ',' +
               format_double(linear_to_db(std::max(spec.powers[q], 1e-300)) + gain_db) +
               '\n';
    }
    return out;
}

// Simple stem plot of one spectrum.
std::string spectrum_svg(const SidebandSpectrum& spec, double gain_db, double floor_db) {
    double hi = floor_db;
    for (double p : spec.powers)
        hi = std::max(hi, linear_to_db(std::max(p, 1e-300)) + gain_db);
    const int w = 420, h = 240, m = 40;
    std::string s = "<svg xmlns='http://www.w3.org/2000/svg' width='" +
                    std::to_string(w) + "' height='" + std::to_string(h) + "'>\n";
    const double span = std::max(1.0, hi - floor_db);
    for (size_t q = 0; q < spec.orders.size(); ++q) {
        const double db = std::max(
            floor_db, linear_to_db(std::max(spec.powers[q], 1e-300)) + gain_db);
        const double x =
            m + (w - 2 * m) * (q + 0.5) / static_cast<double>(spec.orders.size());
        const double y0 = h - m;
        const double y1 = y0 - (h - 2 * m) * (db - floor_db) / span;
        s += "<line x1='" + format_double(x) + "' y1='" + format_double(y0) +
             "' x2='" + format_double(x) + "' y2='" + format_double(y1) +
             "' stroke='steelblue' stroke-width='6'/>\n";
        s += "<text x='" + format_double(x - 8) + "' y='" + std::to_string(h - m + 16) +
             "' font-size='11'>" + std::to_string(spec.orders[q]) + "</text>\n";
    }
    s += "<text x='8' y='16' font-size='11'>power (dB), floor " +
         format_double(floor_db) + "</text>\n</svg>\n";
    return s;
}

json params_json(const CascadeParams& p) {
    return {{"gamma_MHz", rad_to_mhz(p.gamma)},
            {"Gamma_MHz", rad_to_mhz(p.Gamma)},
            {"eta_over_gamma", p.eta / p.gamma},
            {"alpha", p.alpha},
            {"delta_omega_MHz", rad_to_mhz(p.delta_omega)},
            {"W_sqrt_flux", p.W},
            {"E_sqrt_flux", p.E},
            {"W_bar", p.W_bar()},
            {"E_bar", p.E_bar()},
            {"nu_plus_over_gamma_dB",
             p.W > 0 ? linear_to_db(p.nu_plus() / p.gamma) : -300.0},
            {"nu_minus_over_Gamma_dB",
             p.E > 0 ? linear_to_db(p.nu_minus() / p.Gamma) : -300.0}};
}

// ---------------------------------------------------------------------------

int cmd_simulate(const CommonArgs& args) {
    const Outputs out(args);
    const RunConfig cfg = load_run_config(args, out);
    const CascadeParams p = cfg.resolved_params();

    SweepSettings s;
    s.n_periods = cfg.n_periods;
    s.samples_per_period = cfg.samples_per_period;
    s.orders = cfg.orders();
    s.mode = cfg.mode;
    s.control = cfg.control;
    const SidebandSpectrum spec = point_spectrum(p, s);

    out.csv("spectrum.csv", spectrum_csv(spec, cfg.gain_db));
    out.js("spectrum.json", json{{"params", params_json(p)},
                                 {"gain_dB", cfg.gain_db},
                                 {"spectrum", spectrum_json(spec, cfg.gain_db)}});
    if (args.svg)
        out.always("spectrum.svg", spectrum_svg(spec, cfg.gain_db, cfg.floor_dbm));
    return 0;
}

int cmd_sweep(const CommonArgs& args) {
    const Outputs out(args);
    const RunConfig cfg = load_run_config(args, out);
    const SweepGrid grid = parse_sweep_grid(cfg.raw);

    SweepSettings s;
    s.n_periods = cfg.n_periods;
    s.samples_per_period = cfg.samples_per_period;
    s.orders = cfg.orders();
    s.mode = cfg.mode;
    s.control = cfg.control;
    s.jobs = effective_jobs(args.jobs);
    s.progress = [](int done, int total) {
        std::cerr << "\rsweep: " << done << "/" << total << std::flush;
        if (done == total) std::cerr << "\n";
    };
    bool cache = true;
    if (cfg.raw.contains("sweep") && cfg.raw.at("sweep").contains("cache"))
        cache = cfg.raw.at("sweep").at("cache").get<bool>();
    if (cache) {
        const fs::path cache_dir = out.dir / "cache";
        fs::create_directories(cache_dir);
        s.cache_dir = cache_dir.string();
        s.cache_tag = std::to_string(
            std::hash<std::string>{}(resolve_run_config(cfg).dump()));
    }

    const MixingMap map = sweep_map(grid, cfg.params, s);
    {
        std::ostringstream os;
        write_mixing_map_csv(map, os);
        out.csv("map.csv", os.str());
    }
    json meta = {{"axis1", axis_name(grid.axis1)},
                 {"axis2", axis_name(grid.axis2)},
                 {"axis1_values_dB", grid.axis1_values},
                 {"axis2_values_dB", grid.axis2_values},
                 {"orders", map.orders},
                 {"params", params_json(cfg.params)},
                 {"gain_dB", cfg.gain_db},
                 {"failures", map.failures}};
    json powers = json::array();
    json mask = json::array();
    for (size_t q = 0; q < map.orders.size(); ++q) powers.push_back(map.power[q]);
    for (const auto& row : map.ok) mask.push_back(row);
    meta["power"] = powers;
    meta["ok"] = mask;
    out.js("map.json", meta);
    if (args.svg) {
        for (int order : map.orders) {
            std::ostringstream os;
            write_heatmap_svg(map, order, os, cfg.floor_dbm, cfg.gain_db);
            out.always("map_order_" + std::to_string(order) + ".svg", os.str());
        }
    }
    if (!map.failures.empty()) {
        std::cerr << "sweep: " << map.failures.size() << " failed grid points\n";
        return 3;
    }
    return 0;
}

int cmd_classical(const CommonArgs& args) {
    const Outputs out(args);
    const RunConfig cfg = load_run_config(args, out);
    detail::KeyChecker c(cfg.raw.contains("classical") ? cfg.raw.at("classical")
                                                       : json::object(),
                         "classical");
    const double from_p = c.get<double>("kappa_plus_from_dB", -20.0);
    const double to_p = c.get<double>("kappa_plus_to_dB", 5.0);
    const int n_p = c.get<int>("kappa_plus_points", 26);
    const double from_m = c.get<double>("kappa_minus_from_dB", -20.0);
    const double to_m = c.get<double>("kappa_minus_to_dB", 5.0);
    const int n_m = c.get<int>("kappa_minus_points", 26);
    const double g2g = c.get<double>("gamma2_over_Gamma", 0.5);
    const int max_order = c.get<int>("max_order", 7);
    c.finish();

    std::string csv = "kappa_plus_dB,kappa_minus_dB,order,amplitude,power_dB\n";
    for (double kp_db : SweepGrid::linspace(from_p, to_p, n_p)) {
        for (double km_db : SweepGrid::linspace(from_m, to_m, n_m)) {
            for (int k = -max_order; k <= max_order; ++k) {
                if (k % 2 == 0) continue;
                ClassicalMixInputs in;
                in.kappa_plus = db_to_linear(kp_db);
                in.kappa_minus = db_to_linear(km_db);
                in.gamma2_over_gamma = g2g;
                in.order = (std::abs(k) - 1) / 2;
                in.branch = k > 0 ? MixBranch::plus : MixBranch::minus;
                const double amp = classical_mixing_amplitude(in);
                csv += format_double(kp_db) + ',' + format_double(km_db) + ',' +
                       std::to_string(k) + ',' + format_double(amp) + ',' +
                       format_double(linear_to_db(std::max(amp * amp, 1e-300))) + '\n';
            }
        }
    }
    out.csv("classical.csv", csv);
    out.js("classical.json", json{{"gamma2_over_Gamma", g2g},
                                  {"note", "amplitudes in sqrt(flux)/sqrt(Gamma) units"}});
    return 0;
}

int cmd_g2(const CommonArgs& args) {
    const Outputs out(args);
    const RunConfig cfg = load_run_config(args, out);
    detail::KeyChecker c(cfg.raw.contains("g2") ? cfg.raw.at("g2") : json::object(),
                         "g2");
    const auto omegas = c.get<std::vector<double>>("Omega_over_gamma", {0.25, 1.0, 5.0});
    const double tau_max = c.get<double>("tau_max_over_gamma", 30.0);
    const int n_tau = c.get<int>("n_tau", 601);
    c.finish();

    std::string csv = "Omega_over_gamma,tau_gamma,g2\n";
    for (double om : omegas) {
        for (int i = 0; i < n_tau; ++i) {
            const double tau = tau_max * i / (n_tau - 1.0);
            csv += format_double(om) + ',' + format_double(tau) + ',' +
                   format_double(g2(tau, {om, 1.0})) + '\n';
        }
    }
    out.csv("g2.csv", csv);
    return 0;
}

int cmd_antibunching(const CommonArgs& args) {
    const Outputs out(args);
    const RunConfig cfg = load_run_config(args, out);
    detail::KeyChecker c(cfg.raw.contains("antibunching") ? cfg.raw.at("antibunching")
                                                          : json::object(),
                         "antibunching");
    const auto omegas = c.get<std::vector<double>>(
        "Omega_over_gamma", {0.25, 0.5, 1.0, 2.0, 5.0, 10.0});
    const double lg_from = c.get<double>("log10_Gamma_over_gamma_from", -2.0);
    const double lg_to = c.get<double>("log10_Gamma_over_gamma_to", 2.0);
    const int n = c.get<int>("points", 81);
    c.finish();

    std::string csv = "Omega_over_gamma,Gamma_over_gamma,A\n";
    for (double om : omegas) {
        for (int i = 0; i < n; ++i) {
            const double gr = std::pow(10.0, lg_from + (lg_to - lg_from) * i / (n - 1.0));
            csv += format_double(om) + ',' + format_double(gr) + ',' +
                   format_double(antibunching_A(gr, {om, 1.0})) + '\n';
        }
    }
    out.csv("antibunching.csv", csv);
    return 0;
}

int cmd_fit_transmission(const CommonArgs& args) {
    const Outputs out(args);
    const RunConfig cfg = load_run_config(args, out);
    if (!cfg.raw.contains("fit_transmission"))
        throw config_error("config: missing 'fit_transmission' section");
    detail::KeyChecker c(cfg.raw.at("fit_transmission"), "fit_transmission");
    const auto trace_paths = c.get<std::vector<std::string>>("traces", {});
    const auto detunings_mhz = c.get<std::vector<double>>("detunings_MHz", {});
    const auto free = c.get<std::vector<std::string>>(
        "free", {"gamma", "gamma_phi", "Gamma", "Gamma_phi", "omega_s", "detunings"});
    TransmissionFitSetup setup;
    {
        detail::KeyChecker ic(c.get<json>("init", json::object()), "fit_transmission.init");
        setup.init.gamma = mhz_to_rad(ic.get<double>("gamma_MHz", 1.7));
        setup.init.gamma_phi = mhz_to_rad(ic.get<double>("gamma_phi_MHz", 0.1));
        setup.init.Gamma = mhz_to_rad(ic.get<double>("Gamma_MHz", 1.7));
        setup.init.Gamma_phi = mhz_to_rad(ic.get<double>("Gamma_phi_MHz", 0.1));
        setup.init.omega_s = mhz_to_rad(ic.get<double>("omega_s_MHz", 5100.0));
        setup.init.cc_over_ce = ic.get<double>("cc_over_ce", 0.1);
        setup.init.prefactor = ic.get<double>("prefactor", 0.13);
        ic.finish();
    }
    setup.probe_enabled = c.get<bool>("probe_enabled", true);
    c.finish();

    if (trace_paths.empty()) throw config_error("fit_transmission: no traces listed");
    if (detunings_mhz.size() != trace_paths.size())
        throw config_error("fit_transmission: detunings_MHz must match traces");

    const auto has = [&](const char* name) {
        return std::find(free.begin(), free.end(), name) != free.end();
    };
    setup.free_gamma = has("gamma");
    setup.free_gamma_phi = has("gamma_phi");
    setup.free_Gamma = has("Gamma");
    setup.free_Gamma_phi = has("Gamma_phi");
    setup.free_prefactor = has("prefactor");
    setup.free_omega_s = has("omega_s");
    setup.free_detunings = has("detunings");

    const fs::path base = fs::path(args.config_path).parent_path();
    std::vector<MeasuredTrace> traces;
    for (const auto& rel : trace_paths) {
        fs::path p = rel;
        if (p.is_relative() && fs::exists(base / p)) p = base / p;
        std::ifstream is(p);
        if (!is) throw config_error("fit_transmission: cannot open trace '" + rel + "'");
        traces.push_back(read_trace_csv(is));
    }
    for (double d : detunings_mhz) setup.detuning_init.push_back(mhz_to_rad(d));

    const NamedFit fit = fit_transmission(traces, setup);
    json values = json::object(), mhz = json::object(), ci = json::object();
    for (const auto& [name, v] : fit.values) {
        values[name] = v;
        ci[name] = fit.confidence.at(name);
        if (name != "prefactor") mhz[name + "_over_2pi_MHz"] = rad_to_mhz(v);
    }
    out.js("fit.json", json{{"values_rad_per_s", values},
                            {"values_MHz", mhz},
                            {"confidence", ci},
                            {"residual_norm", fit.residual_norm},
                            {"diagnostics",
                             {{"iterations", fit.diagnostics.iterations},
                              {"converged", fit.diagnostics.converged},
                              {"method", fit.diagnostics.method},
                              {"final_step_norm", fit.diagnostics.final_step_norm}}}});
    return 0;
}

int cmd_fit_map(const CommonArgs& args) {
    const Outputs out(args);
    const RunConfig cfg = load_run_config(args, out);
    if (!cfg.raw.contains("fit_map"))
        throw config_error("config: missing 'fit_map' section");
    detail::KeyChecker c(cfg.raw.at("fit_map"), "fit_map");
    const std::string measured_path = c.get<std::string>("measured_csv", "");
    const auto free = c.get<std::vector<std::string>>("free", {"alpha"});
    MapFitSetup setup;
    setup.per_order_gain = c.get<bool>("per_order_gain", false);
    setup.power_floor_db = c.get<double>("power_floor_dB", -280.0);
    c.finish();
    if (measured_path.empty()) throw config_error("fit_map: measured_csv required");

    const fs::path base = fs::path(args.config_path).parent_path();
    fs::path mp = measured_path;
    if (mp.is_relative() && fs::exists(base / mp)) mp = base / mp;
    std::ifstream is(mp);
    if (!is) throw config_error("fit_map: cannot open '" + measured_path + "'");
    const MixingMap measured = read_mixing_map_csv(is);

    const SweepGrid grid = parse_sweep_grid(cfg.raw);
    setup.init = cfg.resolved_params();
    setup.sweep.n_periods = cfg.n_periods;
    setup.sweep.samples_per_period = cfg.samples_per_period;
    setup.sweep.orders = measured.orders;
    setup.sweep.control = cfg.control;
    setup.sweep.jobs = effective_jobs(args.jobs);
    const auto has = [&](const char* name) {
        return std::find(free.begin(), free.end(), name) != free.end();
    };
    setup.free_alpha = has("alpha");
    setup.free_Gamma = has("Gamma");
    setup.free_gamma = has("gamma");

    const MapFitResult res = fit_mixing_map(measured, grid, setup);
    json values = json::object(), ci = json::object();
    for (const auto& [name, v] : res.fit.values) {
        values[name] = v;
        ci[name] = res.fit.confidence.at(name);
    }
    out.js("fit.json", json{{"values", values},
                            {"confidence", ci},
                            {"gain_dB", res.gain_db},
                            {"residual_norm", res.fit.residual_norm},
                            {"diagnostics",
                             {{"iterations", res.fit.diagnostics.iterations},
                              {"converged", res.fit.diagnostics.converged},
                              {"method", res.fit.diagnostics.method}}}});
    return 0;
}

int cmd_perturb(const CommonArgs& args) {
    const Outputs out(args);
    const RunConfig cfg = load_run_config(args, out);
    detail::KeyChecker c(cfg.raw.contains("perturb") ? cfg.raw.at("perturb")
                                                     : json::object(),
                         "perturb");
    const auto wbars = c.get<std::vector<double>>("W_bar", {0.05});
    const auto ebars = c.get<std::vector<double>>("E_bar", {0.05});
    const int max_order = c.get<int>("max_order", 2);
    c.finish();

    std::vector<DimensionlessDrives> grid;
    for (double w : wbars)
        for (double e : ebars) grid.push_back({w, e});

    CompareOptions opt;
    opt.n_periods = cfg.n_periods;
    opt.samples_per_period = cfg.samples_per_period;
    opt.control = cfg.control;
    opt.max_order = max_order;
    const auto rows = compare_with_exact(grid, cfg.params, opt);

    std::string csv =
        "W_bar,E_bar,order,harmonic,re_pert,im_pert,re_exact,im_exact,concurrence_max\n";
    for (const auto& r : rows) {
        csv += format_double(r.W_bar) + ',' + format_double(r.E_bar) + ',' +
               std::to_string(r.order) + ',' + std::to_string(r.harmonic) + ',' +
               format_double(r.pert.real()) + ',' + format_double(r.pert.imag()) + ',' +
               format_double(r.exact.real()) + ',' + format_double(r.exact.imag()) +
               ',' + format_double(r.concurrence_max) + '\n';
    }
    out.csv("perturb.csv", csv);

    // Net emission per harmonic, both conventions: coherent sum of orders,
    // and the sum of squared magnitudes.
    json net = json::array();
    for (const auto& d : grid) {
        std::map<int, complexd> coherent;
        std::map<int, double> squares;
        double conc = 0.0;
        std::map<int, complexd> exact;
        for (const auto& r : rows) {
            if (r.W_bar != d.W_bar || r.E_bar != d.E_bar) continue;
            coherent[r.harmonic] += r.pert;
            squares[r.harmonic] += std::norm(r.pert);
            exact[r.harmonic] = r.exact;
            conc = r.concurrence_max;
        }
        json per = json::array();
        for (const auto& [k, amp] : coherent)
            per.push_back({{"harmonic", k},
                           {"net_coherent_re", amp.real()},
                           {"net_coherent_im", amp.imag()},
                           {"net_power_coherent", std::norm(amp)},
                           {"net_power_sum_of_squares", squares[k]},
                           {"exact_re", exact[k].real()},
                           {"exact_im", exact[k].imag()},
                           {"exact_power", std::norm(exact[k])}});
        net.push_back({{"W_bar", d.W_bar},
                       {"E_bar", d.E_bar},
                       {"concurrence_max", conc},
                       {"harmonics", per}});
    }
    out.js("perturb.json", json{{"params", params_json(cfg.params)}, {"net", net}});
    return 0;
}

int cmd_compare(const CommonArgs& args) {
    const Outputs out(args);
    const RunConfig cfg = load_run_config(args, out);
    detail::KeyChecker c(cfg.raw.contains("compare") ? cfg.raw.at("compare")
                                                     : json::object(),
                         "compare");
    CompareOptionsCQ opt;
    opt.n_periods = cfg.n_periods;
    opt.samples_per_period = cfg.samples_per_period;
    opt.control = cfg.control;
    opt.orders = cfg.orders();
    opt.match_tol_db = c.get<double>("match_tol_dB", 1e-3);
    c.finish();

    const CascadeParams p = cfg.resolved_params();
    const auto cmp = compare_classical_quantum(p, opt);

    std::string csv = "order,power_quantum_dB,power_classical_dB,quantum_minus_classical_dB\n";
    json diffs = json::array();
    for (size_t i = 0; i < cmp.sideband_orders.size(); ++i) {
        const int k = cmp.sideband_orders[i];
        csv += std::to_string(k) + ',' +
               format_double(cmp.quantum.power_db(k, cfg.gain_db)) + ',' +
               format_double(cmp.classical.power_db(k, cfg.gain_db)) + ',' +
               format_double(cmp.quantum_minus_classical_db[i]) + '\n';
        diffs.push_back({{"order", k},
                         {"quantum_minus_classical_dB", cmp.quantum_minus_classical_db[i]}});
    }
    out.csv("compare.csv", csv);
    out.js("compare.json",
           json{{"params", params_json(p)},
                {"matched_E_plus", cmp.matched_E_plus},
                {"matched_E_minus", cmp.matched_E_minus},
                {"match_residual_dB", cmp.match_residual_db},
                {"quantum", spectrum_json(cmp.quantum, cfg.gain_db)},
                {"classical", spectrum_json(cmp.classical, cfg.gain_db)},
                {"sidebands", diffs}});
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"quantum wave mixing on a cascaded two-emitter waveguide system"};
    app.require_subcommand(1);

    CommonArgs args;
    struct Cmd {
        const char* name;
        const char* help;
        int (*run)(const CommonArgs&);
    };
    const std::vector<Cmd> cmds = {
        {"simulate", "single-point sideband spectrum", cmd_simulate},
        {"sweep", "2-D drive or coupling-ratio sweep", cmd_sweep},
        {"classical", "classical bichromatic mixing amplitudes", cmd_classical},
        {"g2", "second-order correlation of the source", cmd_g2},
        {"antibunching", "effective antibunching vs coupling ratio", cmd_antibunching},
        {"fit-transmission", "fit the low-power transmission model", cmd_fit_transmission},
        {"fit-map", "fit simulator parameters to a measured mixing map", cmd_fit_map},
        {"perturb", "perturbative orders vs exact numerics", cmd_perturb},
        {"compare-classical-quantum", "matched classical-vs-cascaded spectra", cmd_compare},
    };
    std::map<std::string, int (*)(const CommonArgs&)> dispatch;
    for (const auto& c : cmds) {
        add_common(app.add_subcommand(c.name, c.help), args);
        dispatch[c.name] = c.run;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    const std::string sub = app.get_subcommands().front()->get_name();
    try {
        return dispatch.at(sub)(args);
    } catch (const config_error& e) {
        std::cerr << json{{"error", {{"type", "config"}, {"message", e.what()}}}}.dump()
                  << "\n";
        return 2;
    } catch (const fit_nonconvergence& e) {
        std::cerr << json{{"error", {{"type", "fit"}, {"message", e.what()}}}}.dump()
                  << "\n";
        return 4;
    } catch (const fit_error& e) {
        std::cerr << json{{"error", {{"type", "fit"}, {"message", e.what()}}}}.dump()
                  << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", {{"type", "numerical"}, {"message", e.what()}}}}.dump()
                  << "\n";
        return 3;
    }
}
