#include <catch2/catch_amalgamated.hpp>

#include "qwm/analytic.hpp"
#include "qwm/integrator.hpp"
#include "qwm/spectrum.hpp"

#include <cmath>
#include <vector>

using namespace qwm;
using Catch::Approx;

namespace {

// Test-only Bloch oracle: resonant drive about y, pure radiative decay,
// integrated with a plain RK4 independent of the library's propagator.
struct BlochOracle {
    double omega, gamma;

    std::array<double, 3> derivative(const std::array<double, 3>& v) const {
        return {-0.5 * gamma * v[0] + omega * v[2],
                -0.5 * gamma * v[1],
                -omega * v[0] - gamma * (1.0 + v[2])};
    }

    // Evolve from the ground state for time tau; returns excited population.
    double excited_after(double tau, int n_steps = 200000) const {
        std::array<double, 3> v{0.0, 0.0, -1.0};
        const double dt = tau / n_steps;
        for (int i = 0; i < n_steps; ++i) {
            const auto k1 = derivative(v);
            std::array<double, 3> t2{}, t3{}, t4{};
            for (int j = 0; j < 3; ++j) t2[j] = v[j] + 0.5 * dt * k1[j];
            const auto k2 = derivative(t2);
            for (int j = 0; j < 3; ++j) t3[j] = v[j] + 0.5 * dt * k2[j];
            const auto k3 = derivative(t3);
            for (int j = 0; j < 3; ++j) t4[j] = v[j] + dt * k3[j];
            const auto k4 = derivative(t4);
            for (int j = 0; j < 3; ++j)
                v[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        return 0.5 * (1.0 + v[2]);
    }

    double steady_excited() const {
        const double r = 2.0 * omega * omega / (gamma * gamma);
        return 0.5 * r / (1.0 + r);
    }
};

} // namespace

TEST_CASE("g2 limits and branch continuity", "[analytic]") {
    const double gamma = 1.0;

    SECTION("g2(0) = 0 for any drive") {
        for (double om : {0.01, 0.26, 1.0, 5.0})
            REQUIRE(g2(0.0, {om * gamma, gamma}) == Approx(0.0).margin(1e-14));
    }

    SECTION("g2 -> 1 at long delay") {
        for (double om : {0.05, 0.5, 2.0})
            REQUIRE(g2(50.0 / gamma, {om * gamma, gamma}) == Approx(1.0).margin(1e-10));
    }

    SECTION("continuous across the Omega = gamma/4 branch point") {
        for (double tau : {0.3, 1.0, 4.0, 20.0}) {
            const double lo = g2(tau, {gamma * (0.25 - 1e-6), gamma});
            const double hi = g2(tau, {gamma * (0.25 + 1e-6), gamma});
            REQUIRE(std::abs(hi - lo) <= 1e-5);
        }
    }

    SECTION("bounded between 0 and 2") {
        for (double om : {0.01, 0.1, 0.25, 0.3, 1.0, 3.0, 10.0}) {
            for (int i = 0; i <= 2000; ++i) {
                const double tau = 30.0 * i / 2000.0;
                const double val = g2(tau, {om * gamma, gamma});
                REQUIRE(val >= -1e-9);
                REQUIRE(val <= 2.0 + 1e-9);
            }
        }
    }

    SECTION("matches the quantum-regression Bloch oracle") {
        // Value at tau = pi/Omega_g for Omega = gamma, plus off-node points.
        const double om = gamma;
        const double omega_g = std::sqrt(om * om - gamma * gamma / 16.0);
        const BlochOracle oracle{om, gamma};
        for (double tau : {std::numbers::pi / omega_g, 0.7 / gamma, 2.3 / gamma}) {
            const double expected = oracle.excited_after(tau) / oracle.steady_excited();
            REQUIRE(g2(tau, {om, gamma}) == Approx(expected).margin(1e-6));
        }
    }
}

TEST_CASE("antibunching integral", "[analytic]") {
    const double gamma = 1.0;

    SECTION("narrowband probe sees classical statistics") {
        for (double om : {0.25, 1.0, 5.0})
            REQUIRE(antibunching_A(1e-4 * gamma, {om * gamma, gamma}) ==
                    Approx(1.0).margin(1e-3));
    }

    SECTION("broadband probe sees full antibunching") {
        for (double om : {0.25, 1.0, 5.0})
            REQUIRE(antibunching_A(1e4 * gamma, {om * gamma, gamma}) ==
                    Approx(0.0).margin(1e-3));
    }

    SECTION("matches a brute-force trapezoid with a million points") {
        const SourceDriveParams src{5.0 * gamma, gamma};
        const double Gamma = 5.0 * gamma;
        const long n = 1'000'000;
        const double h = (1.0 / Gamma) / n;
        double acc = 0.5 * (g2(0.0, src) + g2(1.0 / Gamma, src));
        for (long i = 1; i < n; ++i) acc += g2(i * h, src);
        const double brute = Gamma * acc * h;
        REQUIRE(antibunching_A(Gamma, src) == Approx(brute).margin(1e-8));
    }

    SECTION("monotone decreasing in Gamma for weak drive") {
        for (double om : {0.25, 0.6, 1.0}) {
            double prev = 2.0;
            for (double lg = -2.0; lg <= 2.01; lg += 0.25) {
                const double a = antibunching_A(std::pow(10.0, lg) * gamma,
                                                {om * gamma, gamma});
                REQUIRE(a < prev + 1e-12);
                prev = a;
            }
        }
    }
}

TEST_CASE("classical mixing amplitudes", "[analytic]") {
    SECTION("worked values at the symmetric point") {
        ClassicalMixInputs in;
        in.kappa_plus = in.kappa_minus = 0.25;
        in.gamma2_over_gamma = 0.5;
        in.order = 0;
        in.branch = MixBranch::plus;
        REQUIRE(classical_mixing_amplitude(in) == Approx(0.361803).margin(2e-6));

        in.order = 1;
        in.branch = MixBranch::minus;
        REQUIRE(classical_mixing_amplitude(in) == Approx(0.052786).margin(2e-6));
    }

    SECTION("single tone produces no mixing") {
        ClassicalMixInputs in;
        in.kappa_plus = 0.3;
        in.kappa_minus = 0.0;
        in.gamma2_over_gamma = 0.5;
        for (int p = 1; p <= 4; ++p) {
            in.order = p;
            in.branch = MixBranch::plus;
            REQUIRE(classical_mixing_amplitude(in) == 0.0);
            in.branch = MixBranch::minus;
            REQUIRE(classical_mixing_amplitude(in) == 0.0);
        }
        // No component at the absent tone's frequency either.
        in.order = 0;
        in.branch = MixBranch::minus;
        REQUIRE(classical_mixing_amplitude(in) == Approx(0.0).margin(1e-15));
    }

    SECTION("branch exchange symmetry") {
        for (double kp : {0.07, 0.9}) {
            for (double km : {0.2, 1.4}) {
                for (int p = 0; p <= 3; ++p) {
                    ClassicalMixInputs a;
                    a.kappa_plus = kp;
                    a.kappa_minus = km;
                    a.gamma2_over_gamma = 0.8;
                    a.order = p;
                    a.branch = MixBranch::plus;
                    ClassicalMixInputs b = a;
                    b.kappa_plus = km;
                    b.kappa_minus = kp;
                    b.branch = MixBranch::minus;
                    REQUIRE(classical_mixing_amplitude(a) ==
                            Approx(classical_mixing_amplitude(b)).margin(1e-15));
                }
            }
        }
    }

    SECTION("unphysical dephasing rejected") {
        ClassicalMixInputs in;
        in.kappa_plus = in.kappa_minus = 0.1;
        in.gamma2_over_gamma = 0.49;
        REQUIRE_THROWS_AS(classical_mixing_amplitude(in), param_error);
    }

    SECTION("matches the bichromatic master-equation oracle") {
        // Spot-check of the acceptance-grade comparison: output-field
        // components (carrier + scattered) against the formula.
        const double Gamma = 1.0;
        for (auto [kp, km] : std::vector<std::pair<double, double>>{
                 {0.25, 0.25}, {0.05, 0.5}, {1.5, 0.2}}) {
            BichromaticQubitParams p;
            p.Gamma = Gamma;
            p.delta_omega = Gamma / 200.0;
            p.E_plus = std::sqrt(Gamma * kp);
            p.E_minus = std::sqrt(Gamma * km);
            StepControl c;
            c.settle_periods = 1.0;
            const QubitTrajectory traj = single_qubit_bichromatic(p, 2, 512, c);
            const auto spec = fourier_components(traj, odd_orders_up_to(5));
            for (int k : spec.orders) {
                complexd detected = spec.amplitude(k) / std::sqrt(2.0);
                if (k == +1) detected += std::sqrt(kp);
                if (k == -1) detected += std::sqrt(km);
                ClassicalMixInputs in;
                in.kappa_plus = kp;
                in.kappa_minus = km;
                in.gamma2_over_gamma = 0.5;
                in.order = (std::abs(k) - 1) / 2;
                in.branch = k > 0 ? MixBranch::plus : MixBranch::minus;
                const double formula = classical_mixing_amplitude(in);
                REQUIRE(std::abs(detected) == Approx(std::abs(formula)).epsilon(0.01));
            }
        }
    }
}

TEST_CASE("low-power transmission model", "[analytic]") {
    TransmissionParams p;
    p.gamma = mhz_to_rad(1.74);
    p.gamma_phi = mhz_to_rad(0.15);
    p.Gamma = mhz_to_rad(1.70);
    p.Gamma_phi = mhz_to_rad(0.19);
    p.omega_s = mhz_to_rad(5100.0);
    p.omega_p = p.omega_s;

    SECTION("resonant probe extinguishes fully without dephasing") {
        TransmissionParams q = p;
        q.Gamma_phi = 0.0;
        REQUIRE(std::abs(transmission_probe_factor(q.omega_p, q)) ==
                Approx(0.0).margin(1e-14));
    }

    SECTION("detuned probe is transparent") {
        REQUIRE(std::abs(transmission_probe_factor(p.omega_p + mhz_to_rad(5000.0), p)) ==
                Approx(1.0).margin(1e-5));
    }

    SECTION("on-resonance probe dip at the reported fit parameters") {
        // 1 - (Gamma/2)/Gamma_2 = 1 - 0.85/1.04
        const double tp = std::abs(transmission_probe_factor(p.omega_p, p));
        REQUIRE(tp == Approx(1.0 - 0.85 / 1.04).margin(1e-5));
        REQUIRE(tp == Approx(0.18269).margin(1e-4));
    }

    SECTION("prefactor scales the source peak") {
        TransmissionParams q = p;
        q.gamma_phi = 0.0;
        q.prefactor = 0.13;
        q.cc_over_ce = 0.1;
        const complexd t = transmission(q.omega_s, false, q);
        REQUIRE(std::abs(t) == Approx(0.013).margin(1e-9));
    }
}

TEST_CASE("coherent emission amplitude of the driven source", "[analytic]") {
    const double gamma = 1.0;

    SECTION("no drive, no coherence") {
        REQUIRE(std::abs(coherent_emission_amplitude({0.0, gamma}).amplitude) == 0.0);
    }

    SECTION("saturation kills the coherent component") {
        REQUIRE(std::abs(coherent_emission_amplitude({500.0 * gamma, gamma}).amplitude /
                         gamma) <= 2e-3);
    }

    SECTION("maximum coherence is 1/(2 sqrt(2)) at the saturation knee") {
        double best = 0.0, best_om = 0.0;
        for (double om = 0.05; om <= 3.0; om += 0.0005) {
            const double c =
                std::abs(coherent_emission_amplitude({om * gamma, gamma}).sigma_minus);
            if (c > best) {
                best = c;
                best_om = om;
            }
        }
        REQUIRE(best == Approx(1.0 / (2.0 * std::sqrt(2.0))).margin(1e-6));
        REQUIRE(best_om == Approx(1.0 / std::sqrt(2.0)).margin(2e-3));
    }

    SECTION("steady state agrees with long-time integration") {
        const BlochOracle oracle{0.8 * gamma, gamma};
        const double pe = oracle.excited_after(60.0 / gamma);
        const BlochSteadyState ss = driven_qubit_steady_state(0.8 * gamma, 0.0, gamma);
        REQUIRE(ss.excited_population() == Approx(pe).margin(1e-6));
    }
}
