#include <catch2/catch_amalgamated.hpp>

#include "qwm/fit.hpp"

#include <random>
#include <sstream>

using namespace qwm;
using Catch::Approx;

namespace {

// Fig. 3 style parameter set, rates as rad/us, frequencies in MHz.
TransmissionParams fig3_params() {
    TransmissionParams p;
    p.gamma = two_pi * 1.74;
    p.gamma_phi = two_pi * 0.15;
    p.Gamma = two_pi * 1.70;
    p.Gamma_phi = two_pi * 0.19;
    p.omega_s = two_pi * 5100.0;
    p.cc_over_ce = 0.1;
    p.prefactor = 0.13;
    return p;
}

std::vector<MeasuredTrace> synth_traces(const TransmissionParams& truth,
                                        const std::vector<double>& detunings,
                                        double noise, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<MeasuredTrace> traces;
    double peak = 0.0;
    for (double det : detunings) {
        TransmissionParams p = truth;
        p.omega_p = truth.omega_s + det;
        MeasuredTrace tr;
        for (int i = 0; i <= 400; ++i) {
            const double w = truth.omega_s + two_pi * (-6.0 + 12.0 * i / 400.0);
            tr.freq_hz.push_back(w / two_pi);  // "Hz" carrying the same unit system
            const complexd t = transmission(w, true, p);
            peak = std::max(peak, std::abs(t));
            tr.values.push_back(t);
        }
        traces.push_back(std::move(tr));
    }
    for (auto& tr : traces)
        for (auto& v : tr.values)
            v += noise * peak * complexd(n(rng), n(rng));
    return traces;
}

} // namespace

TEST_CASE("levenberg-marquardt basics", "[fit]") {
    SECTION("recovers an exponential model and never increases the cost") {
        const auto truth = Eigen::Vector2d(1.7, 0.35);
        std::vector<double> ts;
        for (int i = 0; i < 40; ++i) ts.push_back(0.1 * i);
        const auto residuals = [&](const Eigen::VectorXd& x) {
            Eigen::VectorXd r(ts.size());
            for (size_t i = 0; i < ts.size(); ++i)
                r(i) = x(0) * std::exp(-x(1) * ts[i]) -
                       truth(0) * std::exp(-truth(1) * ts[i]);
            return r;
        };
        Eigen::VectorXd x0(2), lo(2), hi(2);
        x0 << 0.5, 1.0;
        lo << 0.0, 0.0;
        hi << 10.0, 10.0;
        const auto res = levenberg_marquardt(residuals, x0, lo, hi);
        REQUIRE(res.diagnostics.converged);
        REQUIRE(res.params(0) == Approx(truth(0)).margin(1e-8));
        REQUIRE(res.params(1) == Approx(truth(1)).margin(1e-8));
        const auto& hist = res.diagnostics.cost_history;
        for (size_t i = 1; i < hist.size(); ++i) REQUIRE(hist[i] <= hist[i - 1]);
    }

    SECTION("solution respects bounds when the optimum is outside") {
        const auto residuals = [&](const Eigen::VectorXd& x) {
            Eigen::VectorXd r(1);
            r(0) = x(0) - 5.0;
            return r;
        };
        Eigen::VectorXd x0(1), lo(1), hi(1);
        x0 << 0.5;
        lo << 0.0;
        hi << 2.0;
        const auto res = levenberg_marquardt(residuals, x0, lo, hi);
        REQUIRE(res.params(0) == Approx(2.0).margin(1e-12));
    }

    SECTION("simplex fallback minimizes too") {
        const auto residuals = [&](const Eigen::VectorXd& x) {
            Eigen::VectorXd r(2);
            r(0) = std::abs(x(0) - 1.0);  // kink defeats the quadratic model
            r(1) = 0.5 * (x(1) + 2.0);
            return r;
        };
        Eigen::VectorXd x0(2), lo(2), hi(2);
        x0 << 4.0, 4.0;
        lo << -10.0, -10.0;
        hi << 10.0, 10.0;
        const auto res = nelder_mead(residuals, x0, lo, hi);
        REQUIRE(res.params(0) == Approx(1.0).margin(1e-4));
        REQUIRE(res.params(1) == Approx(-2.0).margin(1e-4));
    }
}

TEST_CASE("trace CSV ingestion", "[fit]") {
    SECTION("complex format") {
        std::istringstream is("freq_hz,re,im\n1.0,0.5,-0.25\n2.0,0.1,0.0\n");
        const MeasuredTrace tr = read_trace_csv(is);
        REQUIRE(tr.freq_hz.size() == 2);
        REQUIRE_FALSE(tr.magnitude_only);
        REQUIRE(tr.values[0] == complexd(0.5, -0.25));
    }

    SECTION("magnitude format") {
        std::istringstream is("freq_hz,mag\n1.0,0.5\n");
        const MeasuredTrace tr = read_trace_csv(is);
        REQUIRE(tr.magnitude_only);
    }

    SECTION("unknown columns are rejected") {
        std::istringstream is("freq_hz,re,im,phase\n1.0,0.5,-0.25,0.1\n");
        REQUIRE_THROWS_AS(read_trace_csv(is), config_error);
    }
}

TEST_CASE("transmission fit round trips", "[fit]") {
    const TransmissionParams truth = fig3_params();
    const std::vector<double> dets = {two_pi * 0.60, two_pi * -0.01, two_pi * -0.51};

    // The lumped prefactor is degenerate with gamma/(2 gamma_2) in the source
    // peak height, so it is calibrated first (detuned-probe workflow, below)
    // and held fixed in the joint fit, matching the published procedure.
    TransmissionFitSetup setup;
    setup.init = truth;
    setup.init.gamma *= 1.3;
    setup.init.gamma_phi *= 0.6;
    setup.init.Gamma *= 0.8;
    setup.init.Gamma_phi *= 1.5;
    setup.free_prefactor = false;
    setup.detuning_init = {two_pi * 0.5, 0.0, two_pi * -0.4};

    SECTION("zero noise recovers the generator almost exactly") {
        const auto traces = synth_traces(truth, dets, 0.0, 1);
        const NamedFit fit = fit_transmission(traces, setup);
        REQUIRE(fit.values.at("gamma") == Approx(truth.gamma).epsilon(1e-6));
        REQUIRE(fit.values.at("gamma_phi") == Approx(truth.gamma_phi).epsilon(1e-5));
        REQUIRE(fit.values.at("Gamma") == Approx(truth.Gamma).epsilon(1e-6));
        REQUIRE(fit.values.at("Gamma_phi") == Approx(truth.Gamma_phi).epsilon(1e-5));
        for (size_t i = 0; i < dets.size(); ++i)
            REQUIRE(fit.values.at("detuning_" + std::to_string(i)) ==
                    Approx(dets[i]).margin(two_pi * 1e-5));
    }

    SECTION("one percent noise recovers rates within five percent") {
        const auto traces = synth_traces(truth, dets, 0.01, 42);
        const NamedFit fit = fit_transmission(traces, setup);
        REQUIRE(fit.values.at("gamma") == Approx(truth.gamma).epsilon(0.05));
        REQUIRE(fit.values.at("gamma_phi") == Approx(truth.gamma_phi).epsilon(0.05));
        REQUIRE(fit.values.at("Gamma") == Approx(truth.Gamma).epsilon(0.05));
        REQUIRE(fit.values.at("Gamma_phi") == Approx(truth.Gamma_phi).epsilon(0.05));
    }

    SECTION("detuned probe pins the prefactor from the peak") {
        // Probe far detuned (t_p = 1): |t|_max = prefactor * Cc/Ce when
        // gamma_phi = 0, so prefactor = |t|_max / (Cc/Ce).
        TransmissionParams p = truth;
        p.gamma_phi = 0.0;
        TransmissionFitSetup s2;
        s2.init = p;
        s2.init.prefactor = 0.05;
        s2.free_gamma = s2.free_gamma_phi = s2.free_Gamma = s2.free_Gamma_phi = false;
        s2.free_omega_s = false;
        s2.free_detunings = false;
        s2.probe_enabled = false;
        s2.detuning_init = {0.0};

        MeasuredTrace tr;
        for (int i = 0; i <= 200; ++i) {
            const double w = p.omega_s + two_pi * (-4.0 + 8.0 * i / 200.0);
            TransmissionParams gen = p;
            gen.prefactor = 0.13;
            tr.freq_hz.push_back(w / two_pi);
            tr.values.push_back(transmission(w, false, gen));
        }
        const NamedFit fit = fit_transmission({tr}, s2);
        REQUIRE(fit.values.at("prefactor") == Approx(0.13).epsilon(1e-8));

        double peak = 0.0;
        for (const auto& v : tr.values) peak = std::max(peak, std::abs(v));
        REQUIRE(peak == Approx(0.013).epsilon(1e-9));
        REQUIRE(fit.values.at("prefactor") == Approx(peak / p.cc_over_ce).epsilon(1e-8));
    }
}

TEST_CASE("mixing-map fit", "[fit]") {
    CascadeParams truth;
    truth.gamma = 1.0;
    truth.Gamma = 1.06;
    truth.eta = truth.gamma / 100.0;
    truth.alpha = 0.79;
    truth.delta_omega = 0.06;

    SweepGrid grid;
    grid.axis1 = SweepAxis::nu_plus_over_gamma_db;
    grid.axis2 = SweepAxis::nu_minus_over_Gamma_db;
    grid.axis1_values = SweepGrid::linspace(-22.0, -11.0, 5);
    grid.axis2_values = SweepGrid::linspace(-16.0, -6.0, 5);

    SweepSettings sweep;
    sweep.samples_per_period = 128;
    sweep.orders = {-5, -3, -1, 1, 3};

    const MixingMap measured = sweep_map(grid, truth, sweep);
    REQUIRE(measured.failures.empty());

    SECTION("identity: fitting a map against itself with everything fixed") {
        MapFitSetup setup;
        setup.init = truth;
        setup.sweep = sweep;
        setup.free_alpha = false;
        const MapFitResult res = fit_mixing_map(measured, grid, setup);
        REQUIRE(res.fit.residual_norm == Approx(0.0).margin(1e-9));
        REQUIRE(res.gain_db.size() == 1);
        REQUIRE(res.gain_db[0] == Approx(0.0).margin(1e-9));
    }

    SECTION("alpha recovery from an offset start with noise") {
        // 0.5 dB measurement noise on top of a 6 dB global gain.
        MixingMap noisy = measured;
        std::mt19937_64 rng(7);
        std::normal_distribution<double> n(0.0, 1.0);
        for (size_t q = 0; q < noisy.orders.size(); ++q)
            for (auto& row : noisy.power[q])
                for (auto& v : row)
                    v = db_to_linear(linear_to_db(std::max(v, 1e-300)) + 6.0 +
                                     0.5 * n(rng));

        MapFitSetup setup;
        setup.init = truth;
        setup.init.alpha = 0.6;
        setup.sweep = sweep;
        setup.power_floor_db = -90.0;
        FitOptions opt;
        opt.max_iterations = 30;
        const MapFitResult res = fit_mixing_map(noisy, grid, setup, opt);
        REQUIRE(res.fit.values.at("alpha") == Approx(0.79).margin(0.03));
        REQUIRE(res.gain_db[0] == Approx(6.0).margin(0.5));
    }
}

TEST_CASE("classical-limit map fit with the analytic forward model", "[fit]") {
    // kappa-grid map generated by the mixing formula; recover Gamma_2/Gamma.
    const double g2g_truth = 0.62;
    std::vector<double> k_grid;
    for (int i = 0; i < 6; ++i) k_grid.push_back(0.08 + 0.3 * i);

    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> data;
    for (double kp : k_grid)
        for (double km : k_grid)
            for (int p = 0; p <= 2; ++p) {
                ClassicalMixInputs in;
                in.kappa_plus = kp;
                in.kappa_minus = km;
                in.gamma2_over_gamma = g2g_truth;
                in.order = p;
                in.branch = MixBranch::minus;
                data.push_back(classical_mixing_amplitude(in) + 1e-4 * n(rng));
            }

    const auto residuals = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd r(data.size());
        size_t s = 0;
        for (double kp : k_grid)
            for (double km : k_grid)
                for (int p = 0; p <= 2; ++p) {
                    ClassicalMixInputs in;
                    in.kappa_plus = kp;
                    in.kappa_minus = km;
                    in.gamma2_over_gamma = x(0);
                    in.order = p;
                    in.branch = MixBranch::minus;
                    r(s) = classical_mixing_amplitude(in) - data[s];
                    ++s;
                }
        return r;
    };
    Eigen::VectorXd x0(1), lo(1), hi(1);
    x0 << 0.5;
    lo << 0.5;
    hi << 5.0;
    const auto res = levenberg_marquardt(residuals, x0, lo, hi);
    REQUIRE(res.params(0) == Approx(g2g_truth).epsilon(0.02));
}
