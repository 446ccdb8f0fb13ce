#pragma once

// Least-squares calibration: joint transmission-spectroscopy fits and
// mixing-map fits against the simulator. The optimizer is a bounded
// Levenberg-Marquardt on numerical Jacobians with a Nelder-Mead fallback;
// gain offsets of map fits are affine in dB and profiled out analytically.

#include "qwm/analytic.hpp"
#include "qwm/errors.hpp"
#include "qwm/sweep.hpp"

#include <Eigen/Dense>

#include <charconv>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace qwm {

// ---------------------------------------------------------------------------
// Generic bounded least squares.

struct FitOptions {
    int max_iterations = 200;
    double xtol = 1e-12;
    double ftol = 1e-14;
    double initial_lambda = 1e-3;
    double jacobian_step = 1e-7;  // relative forward-difference step
    bool simplex_fallback = true;
    // Per-parameter magnitude scales; the difference step is
    // jacobian_step * max(typical_j, |x_j|). Empty means 1.0 for all.
    Eigen::VectorXd typical;
};

struct FitDiagnostics {
    int iterations = 0;
    double final_step_norm = 0.0;
    bool converged = false;
    std::string method = "levenberg-marquardt";
    std::vector<int> unidentifiable;   // parameter indices with ~zero sensitivity
    std::vector<double> cost_history;  // accepted costs, strictly non-increasing
};

struct LeastSquaresResult {
    Eigen::VectorXd params;
    double residual_norm = 0.0;  // sqrt(sum of squared residuals)
    Eigen::VectorXd confidence;  // 95% half-widths from the quadratic model
    FitDiagnostics diagnostics;
};

struct fit_nonconvergence : fit_error {
    explicit fit_nonconvergence(const std::string& what, LeastSquaresResult best_so_far)
        : fit_error(what), best(std::move(best_so_far)) {}
    LeastSquaresResult best;
};

namespace detail {

inline Eigen::VectorXd clamp_to_bounds(Eigen::VectorXd x, const Eigen::VectorXd& lo,
                                       const Eigen::VectorXd& hi) {
    for (Eigen::Index i = 0; i < x.size(); ++i)
        x(i) = std::min(hi(i), std::max(lo(i), x(i)));
    return x;
}

} // namespace detail

inline LeastSquaresResult levenberg_marquardt(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residuals,
    Eigen::VectorXd x0, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
    const FitOptions& opt = {}) {
    const Eigen::Index n = x0.size();
    if (lower.size() != n || upper.size() != n)
        throw param_error("levenberg_marquardt: bound size mismatch");

    Eigen::VectorXd x = detail::clamp_to_bounds(std::move(x0), lower, upper);
    Eigen::VectorXd r = residuals(x);
    double cost = 0.5 * r.squaredNorm();
    const auto typical = [&](Eigen::Index j) {
        return opt.typical.size() == n ? std::abs(opt.typical(j)) : 1.0;
    };

    LeastSquaresResult out;
    out.diagnostics.cost_history.push_back(cost);
    double lambda = opt.initial_lambda;
    double step_norm = 0.0;
    bool converged = false;
    Eigen::MatrixXd jac(r.size(), n);

    int it = 0;
    for (; it < opt.max_iterations && !converged; ++it) {
        // Forward-difference Jacobian, stepping inward at active bounds.
        for (Eigen::Index j = 0; j < n; ++j) {
            double h = opt.jacobian_step * std::max(typical(j), std::abs(x(j)));
            if (x(j) + h > upper(j)) h = -h;
            Eigen::VectorXd xj = x;
            xj(j) += h;
            jac.col(j) = (residuals(xj) - r) / h;
        }

        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jtr = jac.transpose() * r;
        const double jtj_max = jtj.diagonal().maxCoeff();
        out.diagnostics.unidentifiable.clear();
        for (Eigen::Index j = 0; j < n; ++j)
            if (jtj(j, j) <= 1e-14 * std::max(jtj_max, 1e-300))
                out.diagnostics.unidentifiable.push_back(static_cast<int>(j));

        bool accepted = false;
        for (int attempt = 0; attempt < 16; ++attempt) {
            Eigen::MatrixXd damped = jtj;
            damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12 * jtj_max);
            const Eigen::VectorXd step = damped.ldlt().solve(-jtr);
            const Eigen::VectorXd trial =
                detail::clamp_to_bounds(x + step, lower, upper);
            const Eigen::VectorXd rt = residuals(trial);
            const double trial_cost = 0.5 * rt.squaredNorm();
            if (trial_cost < cost) {
                step_norm = (trial - x).norm();
                x = trial;
                r = rt;
                cost = trial_cost;
                lambda = std::max(1e-12, lambda / 3.0);
                accepted = true;
                out.diagnostics.cost_history.push_back(cost);
                break;
            }
            lambda *= 4.0;
        }
        if (!accepted) {
            converged = step_norm > 0.0 || it > 0;  // stalled at a minimum
            break;
        }
        if (step_norm <= opt.xtol * (1.0 + x.norm())) converged = true;
        const auto& hist = out.diagnostics.cost_history;
        if (hist.size() >= 2) {
            const double drop = hist[hist.size() - 2] - hist.back();
            if (drop <= opt.ftol * std::max(hist.back(), 1e-300)) converged = true;
        }
    }

    out.params = x;
    out.residual_norm = std::sqrt(2.0 * cost);
    out.diagnostics.iterations = it;
    out.diagnostics.final_step_norm = step_norm;
    out.diagnostics.converged = converged;

    // Confidence half-widths from the quadratic model at the solution.
    const Eigen::Index m = r.size();
    out.confidence = Eigen::VectorXd::Zero(n);
    if (m > n) {
        for (Eigen::Index j = 0; j < n; ++j) {
            double h = opt.jacobian_step * std::max(typical(j), std::abs(x(j)));
            if (x(j) + h > upper(j)) h = -h;
            Eigen::VectorXd xj = x;
            xj(j) += h;
            jac.col(j) = (residuals(xj) - r) / h;
        }
        const double sigma2 = 2.0 * cost / static_cast<double>(m - n);
        const Eigen::MatrixXd cov =
            sigma2 * (jac.transpose() * jac)
                         .ldlt()
                         .solve(Eigen::MatrixXd::Identity(n, n));
        for (Eigen::Index j = 0; j < n; ++j)
            out.confidence(j) = 1.96 * std::sqrt(std::max(0.0, cov(j, j)));
    }
    return out;
}

// Nelder-Mead on the squared-residual objective; fallback for the cases
// where the damped normal equations stall.
inline LeastSquaresResult nelder_mead(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residuals,
    Eigen::VectorXd x0, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
    int max_iterations = 2000, double ftol = 1e-12) {
    const Eigen::Index n = x0.size();
    const auto cost_of = [&](const Eigen::VectorXd& x) {
        return 0.5 * residuals(detail::clamp_to_bounds(x, lower, upper)).squaredNorm();
    };

    std::vector<Eigen::VectorXd> simplex(n + 1, detail::clamp_to_bounds(x0, lower, upper));
    std::vector<double> cost(n + 1);
    for (Eigen::Index j = 0; j < n; ++j)
        simplex[j + 1](j) += 0.05 * std::max(1.0, std::abs(simplex[j + 1](j)));
    for (size_t i = 0; i < simplex.size(); ++i) cost[i] = cost_of(simplex[i]);

    int it = 0;
    for (; it < max_iterations; ++it) {
        std::vector<size_t> idx(simplex.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return cost[a] < cost[b]; });
        if (cost[idx.back()] - cost[idx.front()] <=
            ftol * (std::abs(cost[idx.front()]) + 1e-300))
            break;

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (size_t i = 0; i + 1 < idx.size(); ++i) centroid += simplex[idx[i]];
        centroid /= static_cast<double>(n);

        const size_t worst = idx.back();
        const Eigen::VectorXd reflect = centroid + (centroid - simplex[worst]);
        const double c_reflect = cost_of(reflect);
        if (c_reflect < cost[idx.front()]) {
            const Eigen::VectorXd expand = centroid + 2.0 * (centroid - simplex[worst]);
            const double c_expand = cost_of(expand);
            if (c_expand < c_reflect) {
                simplex[worst] = expand;
                cost[worst] = c_expand;
            } else {
                simplex[worst] = reflect;
                cost[worst] = c_reflect;
            }
        } else if (c_reflect < cost[idx[idx.size() - 2]]) {
            simplex[worst] = reflect;
            cost[worst] = c_reflect;
        } else {
            const Eigen::VectorXd contract =
                centroid + 0.5 * (simplex[worst] - centroid);
            const double c_contract = cost_of(contract);
            if (c_contract < cost[worst]) {
                simplex[worst] = contract;
                cost[worst] = c_contract;
            } else {
                for (size_t i = 0; i < simplex.size(); ++i) {
                    if (i == idx.front()) continue;
                    simplex[i] = simplex[idx.front()] + 0.5 * (simplex[i] - simplex[idx.front()]);
                    cost[i] = cost_of(simplex[i]);
                }
            }
        }
    }

    size_t best = 0;
    for (size_t i = 1; i < simplex.size(); ++i)
        if (cost[i] < cost[best]) best = i;
    LeastSquaresResult out;
    out.params = detail::clamp_to_bounds(simplex[best], lower, upper);
    out.residual_norm = std::sqrt(2.0 * cost[best]);
    out.confidence = Eigen::VectorXd::Zero(n);
    out.diagnostics.iterations = it;
    out.diagnostics.converged = it < max_iterations;
    out.diagnostics.method = "nelder-mead";
    return out;
}

// ---------------------------------------------------------------------------
// Measured data.

struct MeasuredTrace {
    std::vector<double> freq_hz;       // strictly increasing
    std::vector<complexd> values;      // complex samples, or (mag, 0) if magnitude_only
    bool magnitude_only = false;
    std::vector<double> variance;      // optional per-point variance

    void validate(size_t n_free_params) const {
        if (freq_hz.size() != values.size() || freq_hz.empty())
            throw param_error("MeasuredTrace: empty or mismatched columns");
        for (size_t i = 1; i < freq_hz.size(); ++i)
            if (freq_hz[i] <= freq_hz[i - 1])
                throw param_error("MeasuredTrace: frequencies must increase strictly");
        if (freq_hz.size() < n_free_params + 2)
            throw param_error("MeasuredTrace: too few samples for the free parameters");
    }
};

// CSV with a one-line header: freq_hz,re,im or freq_hz,mag. Any other header
// is rejected.
inline MeasuredTrace read_trace_csv(std::istream& is) {
    MeasuredTrace trace;
    std::string line;
    if (!std::getline(is, line)) throw config_error("trace CSV: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "freq_hz,re,im")
        trace.magnitude_only = false;
    else if (line == "freq_hz,mag")
        trace.magnitude_only = true;
    else
        throw config_error("trace CSV: unknown header '" + line + "'");

    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(std::stod(cell));
        const size_t expected = trace.magnitude_only ? 2 : 3;
        if (cells.size() != expected)
            throw config_error("trace CSV: wrong column count in '" + line + "'");
        trace.freq_hz.push_back(cells[0]);
        trace.values.push_back(trace.magnitude_only ? complexd(cells[1], 0.0)
                                                    : complexd(cells[1], cells[2]));
    }
    return trace;
}

inline MixingMap read_mixing_map_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw config_error("map CSV: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "axis1_dB,axis2_dB,order,power_dB")
        throw config_error("map CSV: unknown header '" + line + "'");

    struct Row {
        double a1, a2, p;
        int order;
    };
    std::vector<Row> rows;
    std::vector<double> a1s, a2s;
    std::vector<int> orders;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != 4)
            throw config_error("map CSV: wrong column count in '" + line + "'");
        Row r{std::stod(cells[0]), std::stod(cells[1]), std::stod(cells[3]),
              std::stoi(cells[2])};
        rows.push_back(r);
        if (std::find(a1s.begin(), a1s.end(), r.a1) == a1s.end()) a1s.push_back(r.a1);
        if (std::find(a2s.begin(), a2s.end(), r.a2) == a2s.end()) a2s.push_back(r.a2);
        if (std::find(orders.begin(), orders.end(), r.order) == orders.end())
            orders.push_back(r.order);
    }
    std::sort(a1s.begin(), a1s.end());
    std::sort(a2s.begin(), a2s.end());
    std::sort(orders.begin(), orders.end());

    MixingMap map;
    map.grid.axis1_values = a1s;
    map.grid.axis2_values = a2s;
    map.orders = orders;
    map.power.assign(orders.size(), std::vector<std::vector<double>>(
                                        a1s.size(), std::vector<double>(a2s.size(), 0.0)));
    map.ok.assign(a1s.size(), std::vector<uint8_t>(a2s.size(), 0));
    const auto index_of = [](const std::vector<double>& v, double x) {
        return static_cast<int>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
    };
    for (const Row& r : rows) {
        const int i = index_of(a1s, r.a1);
        const int j = index_of(a2s, r.a2);
        const int q = static_cast<int>(std::lower_bound(orders.begin(), orders.end(),
                                                        r.order) -
                                       orders.begin());
        map.power[q][i][j] = db_to_linear(r.p);
        map.ok[i][j] = 1;
    }
    return map;
}

// ---------------------------------------------------------------------------
// Transmission fit (spectroscopy workflow).

struct TransmissionFitSetup {
    TransmissionParams init{};
    std::vector<double> detuning_init;  // omega_p - omega_s per trace, rad/s
    // Free masks; fixed parameters keep their init values.
    bool free_gamma = true;
    bool free_gamma_phi = true;
    bool free_Gamma = true;
    bool free_Gamma_phi = true;
    bool free_prefactor = true;
    bool free_omega_s = true;
    bool free_detunings = true;
    bool probe_enabled = true;
};

struct NamedFit {
    std::map<std::string, double> values;
    std::map<std::string, double> confidence;
    double residual_norm = 0.0;
    FitDiagnostics diagnostics;
};

inline NamedFit fit_transmission(const std::vector<MeasuredTrace>& traces,
                                 const TransmissionFitSetup& setup,
                                 const FitOptions& opt = {}) {
    if (traces.empty()) throw param_error("fit_transmission: no traces");
    if (setup.detuning_init.size() != traces.size())
        throw param_error("fit_transmission: one detuning per trace required");

    std::vector<std::string> names;
    std::vector<double> init, lo, hi;
    const auto add = [&](const std::string& name, double v, double l, double h,
                         bool free) {
        if (!free) return;
        names.push_back(name);
        init.push_back(v);
        lo.push_back(l);
        hi.push_back(h);
    };
    std::vector<double> typical;
    const auto add_scale = [&](double scale, bool free) {
        if (free) typical.push_back(scale);
    };
    const double big = 1e12;
    const double rate_scale = std::max(setup.init.gamma, setup.init.Gamma);
    add("gamma", setup.init.gamma, 0.0, big, setup.free_gamma);
    add_scale(rate_scale, setup.free_gamma);
    add("gamma_phi", setup.init.gamma_phi, 0.0, big, setup.free_gamma_phi);
    add_scale(rate_scale, setup.free_gamma_phi);
    add("Gamma", setup.init.Gamma, 0.0, big, setup.free_Gamma);
    add_scale(rate_scale, setup.free_Gamma);
    add("Gamma_phi", setup.init.Gamma_phi, 0.0, big, setup.free_Gamma_phi);
    add_scale(rate_scale, setup.free_Gamma_phi);
    add("prefactor", setup.init.prefactor, 0.0, big, setup.free_prefactor);
    add_scale(std::max(0.01, setup.init.prefactor), setup.free_prefactor);
    add("omega_s", setup.init.omega_s, -big, big, setup.free_omega_s);
    add_scale(rate_scale, setup.free_omega_s);
    for (size_t i = 0; i < traces.size(); ++i) {
        add("detuning_" + std::to_string(i), setup.detuning_init[i], -big, big,
            setup.free_detunings);
        add_scale(rate_scale, setup.free_detunings);
    }

    size_t n_rows = 0;
    for (size_t i = 0; i < traces.size(); ++i) {
        traces[i].validate(names.size());
        n_rows += traces[i].values.size() * (traces[i].magnitude_only ? 1 : 2);
    }

    const auto unpack = [&](const Eigen::VectorXd& x) {
        TransmissionParams p = setup.init;
        std::vector<double> det = setup.detuning_init;
        for (size_t j = 0; j < names.size(); ++j) {
            const double v = x(static_cast<Eigen::Index>(j));
            const std::string& n = names[j];
            if (n == "gamma") p.gamma = v;
            else if (n == "gamma_phi") p.gamma_phi = v;
            else if (n == "Gamma") p.Gamma = v;
            else if (n == "Gamma_phi") p.Gamma_phi = v;
            else if (n == "prefactor") p.prefactor = v;
            else if (n == "omega_s") p.omega_s = v;
            else if (n.rfind("detuning_", 0) == 0)
                det[std::stoul(n.substr(9))] = v;
        }
        return std::make_pair(p, det);
    };

    const auto residuals = [&](const Eigen::VectorXd& x) {
        auto [p, det] = unpack(x);
        Eigen::VectorXd r(static_cast<Eigen::Index>(n_rows));
        Eigen::Index row = 0;
        for (size_t i = 0; i < traces.size(); ++i) {
            TransmissionParams pi = p;
            pi.omega_p = p.omega_s + det[i];
            for (size_t s = 0; s < traces[i].freq_hz.size(); ++s) {
                const double w = two_pi * traces[i].freq_hz[s];
                const double weight =
                    traces[i].variance.empty()
                        ? 1.0
                        : 1.0 / std::sqrt(std::max(traces[i].variance[s], 1e-300));
                const complexd model = transmission(w, setup.probe_enabled, pi);
                if (traces[i].magnitude_only) {
                    r(row++) = weight * (std::abs(model) - traces[i].values[s].real());
                } else {
                    r(row++) = weight * (model.real() - traces[i].values[s].real());
                    r(row++) = weight * (model.imag() - traces[i].values[s].imag());
                }
            }
        }
        return r;
    };

    Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(init.data(), init.size());
    Eigen::VectorXd lov = Eigen::Map<const Eigen::VectorXd>(lo.data(), lo.size());
    Eigen::VectorXd hiv = Eigen::Map<const Eigen::VectorXd>(hi.data(), hi.size());
    FitOptions scaled_opt = opt;
    scaled_opt.typical = Eigen::Map<const Eigen::VectorXd>(typical.data(), typical.size());
    LeastSquaresResult res = levenberg_marquardt(residuals, x0, lov, hiv, scaled_opt);
    if (!res.diagnostics.converged && opt.simplex_fallback) {
        res = nelder_mead(residuals, res.params, lov, hiv);
    }

    NamedFit out;
    out.residual_norm = res.residual_norm;
    out.diagnostics = res.diagnostics;
    for (size_t j = 0; j < names.size(); ++j) {
        out.values[names[j]] = res.params(static_cast<Eigen::Index>(j));
        out.confidence[names[j]] = res.confidence(static_cast<Eigen::Index>(j));
    }
    if (!res.diagnostics.converged)
        throw fit_nonconvergence("fit_transmission did not converge", res);
    return out;
}

// ---------------------------------------------------------------------------
// Mixing-map fit (cascaded-mixing workflow).

struct MapFitSetup {
    CascadeParams init{};
    SweepSettings sweep{};
    bool free_alpha = true;
    bool free_Gamma = false;
    bool free_gamma = false;
    bool per_order_gain = false;  // otherwise one global dB offset, profiled out
    double power_floor_db = -280.0;  // points below this (in model or data) are skipped
};

struct MapFitResult {
    NamedFit fit;
    std::vector<double> gain_db;  // per order, or a single global entry
};

inline MapFitResult fit_mixing_map(const MixingMap& measured, const SweepGrid& grid,
                                   const MapFitSetup& setup, const FitOptions& opt = {}) {
    std::vector<std::string> names;
    std::vector<double> init, lo, hi;
    if (setup.free_alpha) {
        names.push_back("alpha");
        init.push_back(setup.init.alpha);
        lo.push_back(0.0);
        hi.push_back(1.0);
    }
    if (setup.free_Gamma) {
        names.push_back("Gamma");
        init.push_back(setup.init.Gamma);
        lo.push_back(1e-6 * setup.init.Gamma);
        hi.push_back(1e6 * setup.init.Gamma);
    }
    if (setup.free_gamma) {
        names.push_back("gamma");
        init.push_back(setup.init.gamma);
        lo.push_back(1e-6 * setup.init.gamma);
        hi.push_back(1e6 * setup.init.gamma);
    }
    if (measured.grid.axis1_values.size() != grid.axis1_values.size() ||
        measured.grid.axis2_values.size() != grid.axis2_values.size())
        throw param_error("fit_mixing_map: measured grid does not match the "
                          "simulation grid");

    // Forward sweeps are expensive; memoize on the physical parameter vector.
    std::map<std::vector<double>, MixingMap> cache;
    const auto forward = [&](const Eigen::VectorXd& x) -> const MixingMap& {
        std::vector<double> key(x.data(), x.data() + x.size());
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        CascadeParams p = setup.init;
        for (size_t j = 0; j < names.size(); ++j) {
            const double v = x(static_cast<Eigen::Index>(j));
            if (names[j] == "alpha") p.alpha = v;
            else if (names[j] == "Gamma") p.Gamma = v;
            else if (names[j] == "gamma") p.gamma = v;
        }
        return cache.emplace(std::move(key), sweep_map(grid, p, setup.sweep))
            .first->second;
    };

    std::vector<double> last_gains;
    const auto residuals = [&](const Eigen::VectorXd& x) {
        const MixingMap& sim = forward(x);
        const size_t n_orders = measured.orders.size();
        const size_t n_gains = setup.per_order_gain ? n_orders : 1;
        std::vector<double> gain(n_gains, 0.0);
        std::vector<long> count(n_gains, 0);
        std::vector<std::tuple<size_t, double, double>> pairs;  // (gain idx, meas, sim)
        for (size_t q = 0; q < n_orders; ++q) {
            const int sq = sim.order_index(measured.orders[q]);
            for (size_t i = 0; i < grid.axis1_values.size(); ++i)
                for (size_t j = 0; j < grid.axis2_values.size(); ++j) {
                    if (!measured.ok[i][j] || !sim.ok[i][j]) continue;
                    const double meas_db =
                        linear_to_db(std::max(measured.power[q][i][j], 1e-300));
                    const double sim_db = sim.power_db(
                        sq, static_cast<int>(i), static_cast<int>(j));
                    if (meas_db < setup.power_floor_db || sim_db < setup.power_floor_db)
                        continue;
                    const size_t gi = setup.per_order_gain ? q : 0;
                    gain[gi] += meas_db - sim_db;
                    ++count[gi];
                    pairs.emplace_back(gi, meas_db, sim_db);
                }
        }
        for (size_t g = 0; g < n_gains; ++g)
            if (count[g] > 0) gain[g] /= static_cast<double>(count[g]);
        last_gains = gain;
        Eigen::VectorXd r(static_cast<Eigen::Index>(pairs.size()));
        for (size_t s = 0; s < pairs.size(); ++s) {
            const auto& [gi, meas_db, sim_db] = pairs[s];
            r(static_cast<Eigen::Index>(s)) = sim_db + gain[gi] - meas_db;
        }
        return r;
    };

    // All physical parameters fixed: evaluate once with profiled gains.
    if (names.empty()) {
        const Eigen::VectorXd r = residuals(Eigen::VectorXd());
        MapFitResult out;
        out.fit.residual_norm = r.norm();
        out.fit.diagnostics.converged = true;
        out.fit.diagnostics.method = "gain-profile-only";
        out.gain_db = last_gains;
        return out;
    }

    Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(init.data(), init.size());
    Eigen::VectorXd lov = Eigen::Map<const Eigen::VectorXd>(lo.data(), lo.size());
    Eigen::VectorXd hiv = Eigen::Map<const Eigen::VectorXd>(hi.data(), hi.size());
    FitOptions map_opt = opt;
    map_opt.jacobian_step = std::max(opt.jacobian_step, 1e-4);
    LeastSquaresResult res = levenberg_marquardt(residuals, x0, lov, hiv, map_opt);

    MapFitResult out;
    out.fit.residual_norm = res.residual_norm;
    out.fit.diagnostics = res.diagnostics;
    for (size_t j = 0; j < names.size(); ++j) {
        out.fit.values[names[j]] = res.params(static_cast<Eigen::Index>(j));
        out.fit.confidence[names[j]] = res.confidence(static_cast<Eigen::Index>(j));
    }
    residuals(res.params);  // refresh gains at the solution
    out.gain_db = last_gains;
    if (!res.diagnostics.converged)
        throw fit_nonconvergence("fit_mixing_map did not converge", res);
    return out;
}

} // namespace qwm
