#include <catch2/catch_amalgamated.hpp>

#include "qwm/integrator.hpp"
#include "qwm/spectrum.hpp"

#include <cmath>
#include <vector>

using namespace qwm;
using Catch::Approx;

namespace {

CascadeParams base_params() {
    CascadeParams p;
    p.gamma = 1.0;
    p.Gamma = 1.1;
    p.eta = 0.01;
    p.alpha = 0.8;
    p.delta_omega = 0.05;
    return p;
}

} // namespace

TEST_CASE("undriven excited probe decays exponentially", "[integrator]") {
    CascadeParams p = base_params();
    p.alpha = 0.0;

    Matrix4c rho0 = Matrix4c::Zero();
    rho0(1, 1) = 1.0;  // |g_s e_p>

    const double t_end = 3.0 / p.Gamma;
    std::vector<double> pe;
    integrate(TwoQubitState{rho0}, p, t_end, {},
              [&](double, const Matrix4c& rho) { pe.push_back(rho(1, 1).real()); }, 64);
    const double expected = std::exp(-p.Gamma * t_end);
    REQUIRE(pe.back() == Approx(expected).epsilon(1e-6));
}

TEST_CASE("resonant probe Rabi oscillations match the damped Bloch solution",
          "[integrator]") {
    CascadeParams p = base_params();
    p.alpha = 0.0;
    p.W = 0.0;
    p.E = 0.9;  // Omega_E = 2 sqrt(Gamma/2) E
    // Make the probe tone resonant with the probe qubit.
    p.detuning_probe = -p.probe_detuning_sign() * p.delta_omega;

    const double omega_e = p.probe_rabi();
    const double t_end = 25.0 / p.Gamma;
    std::vector<double> times, pe;
    integrate(TwoQubitState::ground(), p, t_end, {},
              [&](double t, const Matrix4c& rho) {
                  times.push_back(t);
                  pe.push_back((rho(1, 1) + rho(3, 3)).real());
              },
              2000);
    double max_err = 0.0;
    for (size_t i = 0; i < pe.size(); ++i) {
        const double ref = damped_rabi_excited_population(omega_e, p.Gamma, times[i]);
        max_err = std::max(max_err, std::abs(pe[i] - ref));
    }
    REQUIRE(max_err <= 1e-4);
}

TEST_CASE("trace is preserved along a driven cascade", "[integrator]") {
    // Reported fit parameters of the cascaded-mixing map, in rad/us.
    CascadeParams p;
    p.gamma = two_pi * 1.7;
    p.Gamma = two_pi * 1.8;
    p.eta = p.gamma / 100.0;
    p.alpha = 0.79;
    p.delta_omega = two_pi * 0.05;
    p.W = source_drive_for_flux(db_to_linear(-9.9) * p.gamma, p);
    p.E = probe_drive_for_flux(db_to_linear(-4.0) * p.gamma);

    double worst = 0.0;
    integrate(TwoQubitState::ground(), p, 50.0 / p.Gamma, {},
              [&](double, const Matrix4c& rho) {
                  worst = std::max(worst, std::abs(rho.trace().real() - 1.0));
              },
              200);
    REQUIRE(worst <= 1e-9);
}

TEST_CASE("probe never back-acts on the source", "[integrator]") {
    CascadeParams p = base_params();
    p.W = 1.2;
    p.E = 0.7;
    p.gamma_phi = 0.03;

    const double t_end = 40.0 / p.gamma;
    StepControl c;
    int substeps = 0;
    const double dt = snap_dt(cascade_raw_dt(p, c), t_end / 512, substeps);
    c.dt_override = dt;

    std::vector<Matrix2c> reduced;
    integrate(TwoQubitState::ground(), p, t_end, c,
              [&](double, const Matrix4c& rho) {
                  reduced.push_back(partial_trace(rho, Subsystem::source));
              },
              512);

    // Standalone source: same rates, same tone, integrated with the same dt.
    BichromaticQubitParams sp;
    sp.Gamma = p.gamma_total();
    sp.Gamma_phi = p.gamma_phi;
    sp.detuning = p.detuning_source;
    sp.delta_omega = p.delta_omega;
    const complexd amp = std::sqrt(p.eta) * p.W / std::sqrt(0.5 * sp.Gamma);
    if (p.source_detuning_sign > 0)
        sp.E_plus = amp;
    else
        sp.E_minus = amp;

    const QubitGenerator gen = build_bichromatic_generator(sp);
    FixedStepIntegrator<2> stepper(gen, dt);
    Matrix2c ground = Matrix2c::Zero();
    ground(0, 0) = 1.0;
    stepper.set_state(ground, 0.0);

    double worst = 0.0;
    for (size_t i = 0; i < reduced.size(); ++i) {
        worst = std::max(worst,
                         (stepper.state() - reduced[i]).cwiseAbs().maxCoeff());
        stepper.advance(substeps, c);
    }
    REQUIRE(worst <= 1e-8);
}

TEST_CASE("alpha = 0 decouples the probe", "[integrator]") {
    CascadeParams p = base_params();
    p.alpha = 0.0;
    p.W = 1.0;
    p.E = 0.8;
    p.Gamma_phi = 0.02;

    const double t_end = 30.0 / p.Gamma;
    StepControl c;
    int substeps = 0;
    const double dt = snap_dt(cascade_raw_dt(p, c), t_end / 256, substeps);
    c.dt_override = dt;

    std::vector<Matrix2c> reduced;
    integrate(TwoQubitState::ground(), p, t_end, c,
              [&](double, const Matrix4c& rho) {
                  reduced.push_back(partial_trace(rho, Subsystem::probe));
              },
              256);

    BichromaticQubitParams bp;
    bp.Gamma = p.Gamma;
    bp.Gamma_phi = p.Gamma_phi;
    bp.detuning = p.detuning_probe;
    bp.delta_omega = p.delta_omega;
    if (p.probe_detuning_sign() > 0)
        bp.E_plus = p.E;
    else
        bp.E_minus = p.E;

    const QubitGenerator gen = build_bichromatic_generator(bp);
    FixedStepIntegrator<2> stepper(gen, dt);
    Matrix2c ground = Matrix2c::Zero();
    ground(0, 0) = 1.0;
    stepper.set_state(ground, 0.0);

    double worst = 0.0;
    for (size_t i = 0; i < reduced.size(); ++i) {
        worst = std::max(worst,
                         (stepper.state() - reduced[i]).cwiseAbs().maxCoeff());
        stepper.advance(substeps, c);
    }
    REQUIRE(worst <= 1e-9);
}

TEST_CASE("halving the step reduces the error at fourth order", "[integrator]") {
    CascadeParams p = base_params();
    p.W = 1.5;
    p.E = 1.0;

    const double t_end = 8.0 / p.gamma;
    const auto run = [&](double dt) {
        StepControl c;
        c.dt_override = dt;
        c.validate_every = 0;
        return integrate(TwoQubitState::ground(), p, t_end, c, {}, 1).rho;
    };
    const Matrix4c ref = run(0.0025);
    const Matrix4c a = run(0.04);
    const Matrix4c b = run(0.02);
    const double e1 = (a - ref).cwiseAbs().maxCoeff();
    const double e2 = (b - ref).cwiseAbs().maxCoeff();
    const double order = std::log2(e1 / e2);
    REQUIRE(order >= 3.5);
    REQUIRE(order <= 4.5);
}

TEST_CASE("steady cycle certification and sampling", "[integrator]") {
    SECTION("monochromatically driven source emits a single line") {
        CascadeParams p = base_params();
        p.W = 1.0;
        p.E = 0.0;
        const Trajectory traj = steady_cycle(p, 2, 128);
        REQUIRE(traj.certification_residual <= 1e-6);
        REQUIRE(traj.times.size() == 2 * 128);

        const auto spec = fourier_components(
            traj.sigma_s, traj.times, p.delta_omega, traj.n_periods,
            traj.samples_per_period, {-3, -1, 1, 3});
        const double main = std::abs(spec.amplitude(p.source_detuning_sign));
        REQUIRE(main > 0.01);
        for (int k : {-3, 3}) REQUIRE(std::abs(spec.amplitude(k)) <= 1e-10 * main);
        REQUIRE(std::abs(spec.amplitude(-p.source_detuning_sign)) <= 1e-10 * main);
    }

    SECTION("no drives, no response") {
        CascadeParams p = base_params();
        const Trajectory traj = steady_cycle(p, 1, 64);
        for (const auto& s : traj.sigma_p) REQUIRE(std::abs(s) <= 1e-14);
        for (const auto& s : traj.sigma_s) REQUIRE(std::abs(s) <= 1e-14);
        for (double c : traj.concurrence) REQUIRE(c <= 1e-9);
    }

    SECTION("sampled window spans exactly n periods") {
        CascadeParams p = base_params();
        p.W = 0.5;
        p.E = 0.5;
        const Trajectory traj = steady_cycle(p, 3, 64);
        REQUIRE(traj.times.size() == 3 * 64);
        const double span = traj.times.back() - traj.times.front();
        const double expected = 3.0 * traj.period - traj.sample_interval();
        REQUIRE(span == Approx(expected).epsilon(1e-9));
        // Every stored state is a valid density matrix.
        for (const auto& rho : traj.states) REQUIRE(TwoQubitState{rho}.is_valid());
    }
}

TEST_CASE("step budget exhaustion raises an integration error", "[integrator]") {
    CascadeParams p = base_params();
    StepControl c;
    c.max_steps = 10;
    REQUIRE_THROWS_AS(integrate(TwoQubitState::ground(), p, 100.0, c, {}, 1),
                      integration_error);
}
