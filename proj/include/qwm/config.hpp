#pragma once

// Run configuration: one JSON document covering physical parameters, drive
// specification, cycle/integration settings, spectrum extraction, and the
// per-subcommand sections. Units at this boundary are MHz (as value/2pi) and
// dB; everything converts to rad/s internally. Unknown keys are rejected,
// and every run can emit its fully resolved configuration, which re-ingests
// to an identical run.

#include "qwm/errors.hpp"
#include "qwm/integrator.hpp"
#include "qwm/params.hpp"
#include "qwm/spectrum.hpp"
#include "qwm/sweep.hpp"

#include <json.hpp>

#include <optional>
#include <set>
#include <string>

namespace qwm {

using json = nlohmann::ordered_json;

namespace detail {

// Tracks which keys of an object were consumed; leftovers are config errors.
// Holds its own copy so callers may pass freshly built temporaries. When a
// record object is attached, every value read (given or defaulted) is written
// back to it in the boundary units, which makes the emitted resolved config
// an exact fixed point under re-ingestion.
class KeyChecker {
public:
    KeyChecker(json obj, std::string path, json* record = nullptr)
        : obj_(std::move(obj)), path_(std::move(path)), record_(record) {
        if (!obj_.is_object())
            throw config_error("config: '" + path_ + "' must be an object");
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        seen_.insert(key);
        if (!obj_.contains(key)) {
            if (record_) (*record_)[key] = fallback;
            return fallback;
        }
        try {
            T value = obj_.at(key).get<T>();
            if (record_) (*record_)[key] = value;
            return value;
        } catch (const json::exception&) {
            throw config_error("config: bad value type for '" + path_ + "." + key + "'");
        }
    }

    template <typename T>
    std::optional<T> get_optional(const std::string& key) {
        seen_.insert(key);
        if (!obj_.contains(key)) return std::nullopt;
        try {
            T value = obj_.at(key).get<T>();
            if (record_) (*record_)[key] = value;
            return value;
        } catch (const json::exception&) {
            throw config_error("config: bad value type for '" + path_ + "." + key + "'");
        }
    }

    bool has(const std::string& key) const { return obj_.contains(key); }

    void finish() const {
        for (const auto& [key, value] : obj_.items())
            if (!seen_.count(key))
                throw config_error("config: unknown key '" + path_ + "." + key + "'");
    }

private:
    json obj_;
    std::string path_;
    json* record_ = nullptr;
    std::set<std::string> seen_;
};

} // namespace detail

struct DriveSpec {
    std::optional<double> nu_plus_db;    // source coherent flux, dB re gamma or Gamma
    std::string nu_plus_ref = "gamma";
    bool upper_branch = false;
    std::optional<double> nu_minus_db;   // probe tone flux
    std::string nu_minus_ref = "gamma";
    std::optional<double> w_bar;         // direct dimensionless amplitudes
    std::optional<double> e_bar;

    void apply(CascadeParams& p) const {
        if (w_bar && nu_plus_db)
            throw config_error("drive: give either W_bar or nu_plus_dB, not both");
        if (e_bar && nu_minus_db)
            throw config_error("drive: give either E_bar or nu_minus_dB, not both");
        if (w_bar) p.set_W_bar(*w_bar);
        if (e_bar) p.set_E_bar(*e_bar);
        if (nu_plus_db) {
            const double ref = nu_plus_ref == "Gamma" ? p.Gamma : p.gamma;
            p.W = source_drive_for_flux(db_to_linear(*nu_plus_db) * ref, p, upper_branch);
        }
        if (nu_minus_db) {
            const double ref = nu_minus_ref == "Gamma" ? p.Gamma : p.gamma;
            p.E = probe_drive_for_flux(db_to_linear(*nu_minus_db) * ref);
        }
    }
};

struct RunConfig {
    CascadeParams params{};
    DriveSpec drive{};
    int n_periods = 2;
    int samples_per_period = 256;
    StepControl control{};
    int max_order = 7;
    DetectionMode mode = DetectionMode::full;
    double gain_db = 0.0;
    double floor_dbm = -131.0;
    json raw;       // full document, for subcommand sections
    json resolved;  // defaults materialized, boundary units preserved

    CascadeParams resolved_params() const {
        CascadeParams p = params;
        drive.apply(p);
        return p;
    }

    std::vector<int> orders() const { return odd_orders_up_to(max_order); }
};

inline RunConfig parse_run_config(const json& doc) {
    RunConfig cfg;
    cfg.raw = doc;
    if (!doc.is_object()) throw config_error("config: document must be an object");

    static const std::set<std::string> known_sections = {
        "params", "drive",  "cycle",    "spectrum",        "sweep",
        "g2",     "antibunching", "classical", "perturb",  "fit_transmission",
        "fit_map", "compare"};
    for (const auto& [key, value] : doc.items())
        if (!known_sections.count(key))
            throw config_error("config: unknown section '" + key + "'");

    cfg.resolved = json::object();
    {
        detail::KeyChecker c(doc.contains("params") ? doc.at("params") : json::object(),
                             "params", &cfg.resolved["params"]);
        cfg.params.gamma = mhz_to_rad(c.get<double>("gamma_MHz", 1.7));
        cfg.params.Gamma = mhz_to_rad(c.get<double>("Gamma_MHz", 1.8));
        cfg.params.eta = c.get<double>("eta_over_gamma", 0.01) * cfg.params.gamma;
        cfg.params.alpha = c.get<double>("alpha", 1.0);
        cfg.params.delta_omega = mhz_to_rad(c.get<double>("delta_omega_MHz", 0.01));
        cfg.params.detuning_source = mhz_to_rad(c.get<double>("detuning_source_MHz", 0.0));
        cfg.params.detuning_probe = mhz_to_rad(c.get<double>("detuning_probe_MHz", 0.0));
        cfg.params.gamma_phi = mhz_to_rad(c.get<double>("gamma_phi_MHz", 0.0));
        cfg.params.Gamma_phi = mhz_to_rad(c.get<double>("Gamma_phi_MHz", 0.0));
        cfg.params.source_detuning_sign = c.get<int>("source_detuning_sign", 1);
        cfg.params.source_alpha_exponent = c.get<double>("source_alpha_exponent", 0.5);
        c.finish();
        cfg.params.validate();
    }
    {
        detail::KeyChecker c(doc.contains("drive") ? doc.at("drive") : json::object(),
                             "drive", &cfg.resolved["drive"]);
        cfg.drive.nu_plus_db = c.get_optional<double>("nu_plus_dB");
        cfg.drive.nu_plus_ref = c.get<std::string>("nu_plus_ref", "gamma");
        cfg.drive.upper_branch = c.get<bool>("upper_branch", false);
        cfg.drive.nu_minus_db = c.get_optional<double>("nu_minus_dB");
        cfg.drive.nu_minus_ref = c.get<std::string>("nu_minus_ref", "gamma");
        cfg.drive.w_bar = c.get_optional<double>("W_bar");
        cfg.drive.e_bar = c.get_optional<double>("E_bar");
        c.finish();
        for (const std::string& ref : {cfg.drive.nu_plus_ref, cfg.drive.nu_minus_ref})
            if (ref != "gamma" && ref != "Gamma")
                throw config_error("drive: flux reference must be 'gamma' or 'Gamma'");
    }
    {
        detail::KeyChecker c(doc.contains("cycle") ? doc.at("cycle") : json::object(),
                             "cycle", &cfg.resolved["cycle"]);
        cfg.n_periods = c.get<int>("n_periods", 2);
        cfg.samples_per_period = c.get<int>("samples_per_period", 256);
        cfg.control.safety = c.get<double>("dt_safety", 0.05);
        const double dt_ns = c.get<double>("dt_ns", 0.0);
        cfg.control.dt_override = dt_ns > 0.0 ? dt_ns * 1e-9 : 0.0;
        cfg.control.max_extra_periods = c.get<int>("max_extra_periods", 64);
        cfg.control.settle_rate_factor = c.get<double>("settle_rate_factor", 20.0);
        cfg.control.settle_periods = c.get<double>("settle_periods", 5.0);
        cfg.control.state_stride = c.get<int>("state_stride", 1);
        c.finish();
    }
    {
        detail::KeyChecker c(doc.contains("spectrum") ? doc.at("spectrum") : json::object(),
                             "spectrum", &cfg.resolved["spectrum"]);
        cfg.max_order = c.get<int>("max_order", 7);
        const std::string mode = c.get<std::string>("include", "full");
        if (mode == "full")
            cfg.mode = DetectionMode::full;
        else if (mode == "probe_only")
            cfg.mode = DetectionMode::probe_only;
        else
            throw config_error("spectrum.include must be 'full' or 'probe_only'");
        cfg.gain_db = c.get<double>("gain_dB", 0.0);
        cfg.floor_dbm = c.get<double>("floor_dBm", -131.0);
        c.finish();
    }
    return cfg;
}

inline json resolve_run_config(const RunConfig& cfg) {
    json doc = cfg.resolved;
    // Subcommand sections pass through untouched.
    for (const std::string key :
         {"sweep", "g2", "antibunching", "classical", "perturb", "fit_transmission",
          "fit_map", "compare"})
        if (cfg.raw.contains(key)) doc[key] = cfg.raw.at(key);
    return doc;
}

inline SweepGrid parse_sweep_grid(const json& doc) {
    if (!doc.contains("sweep")) throw config_error("config: missing 'sweep' section");
    detail::KeyChecker c(doc.at("sweep"), "sweep");
    const auto axis_of = [](const std::string& name) {
        if (name == "nu_plus_over_gamma_dB") return SweepAxis::nu_plus_over_gamma_db;
        if (name == "nu_minus_over_gamma_dB") return SweepAxis::nu_minus_over_gamma_db;
        if (name == "nu_minus_over_Gamma_dB") return SweepAxis::nu_minus_over_Gamma_db;
        if (name == "Gamma_over_gamma_dB") return SweepAxis::gamma_ratio_db;
        throw config_error("sweep: unknown axis '" + name + "'");
    };
    SweepGrid grid;
    grid.axis1 = axis_of(c.get<std::string>("axis1", "nu_plus_over_gamma_dB"));
    grid.axis2 = axis_of(c.get<std::string>("axis2", "nu_minus_over_Gamma_dB"));
    grid.axis1_values = SweepGrid::linspace(c.get<double>("axis1_from", -30.0),
                                            c.get<double>("axis1_to", -10.0),
                                            c.get<int>("axis1_points", 41));
    grid.axis2_values = SweepGrid::linspace(c.get<double>("axis2_from", -25.0),
                                            c.get<double>("axis2_to", 0.0),
                                            c.get<int>("axis2_points", 41));
    (void)c.get<bool>("cache", true);
    c.finish();
    grid.validate();
    return grid;
}

} // namespace qwm
