#include <catch2/catch_amalgamated.hpp>

#include "qwm/spectrum.hpp"
#include "qwm/sweep.hpp"

#include <sstream>

using namespace qwm;
using Catch::Approx;

namespace {

std::vector<double> sample_times(double delta_omega, int n_periods, int spp,
                                 double t0 = 0.0) {
    const double period = two_pi / delta_omega;
    std::vector<double> t(static_cast<size_t>(n_periods) * spp);
    for (size_t i = 0; i < t.size(); ++i) t[i] = t0 + i * period / spp;
    return t;
}

CascadeParams quick_params() {
    CascadeParams p;
    p.gamma = 1.0;
    p.Gamma = 1.2;
    p.eta = 0.01;
    p.alpha = 0.9;
    p.delta_omega = 0.06;
    return p;
}

} // namespace

TEST_CASE("fourier components recover pure tones exactly", "[spectrum]") {
    const double dw = 0.31;
    const auto times = sample_times(dw, 4, 256, 3.7);

    SECTION("single tone at k = -1") {
        std::vector<complexd> series(times.size());
        for (size_t i = 0; i < series.size(); ++i)
            series[i] = std::polar(1.0, -dw * times[i]);
        const auto spec =
            fourier_components(series, times, dw, 4, 256, {-3, -1, 1, 3});
        REQUIRE(std::abs(spec.amplitude(-1) - 1.0) <= 1e-12);
        for (int k : {-3, 1, 3}) REQUIRE(std::abs(spec.amplitude(k)) <= 1e-12);
    }

    SECTION("tone with amplitude 0.5 at k = +3") {
        std::vector<complexd> series(times.size());
        for (size_t i = 0; i < series.size(); ++i)
            series[i] = 0.5 * std::polar(1.0, 3.0 * dw * times[i]);
        const auto spec = fourier_components(series, times, dw, 4, 256, {3});
        REQUIRE(std::abs(spec.amplitude(3) - 0.5) <= 1e-12);
    }

    SECTION("two tones with irrational amplitude ratio") {
        const complexd a1 = complexd(std::numbers::sqrt2, -0.3);
        const complexd a2 = complexd(0.1, std::numbers::pi / 5.0);
        std::vector<complexd> series(times.size());
        for (size_t i = 0; i < series.size(); ++i)
            series[i] = a1 * std::polar(1.0, -dw * times[i]) +
                        a2 * std::polar(1.0, 5.0 * dw * times[i]);
        const auto spec = fourier_components(series, times, dw, 4, 256, {-1, 5});
        REQUIRE(std::abs(spec.amplitude(-1) - a1) <= 1e-12);
        REQUIRE(std::abs(spec.amplitude(5) - a2) <= 1e-12);
    }

    SECTION("non-integer period coverage is rejected") {
        std::vector<complexd> series(times.size() - 3, 0.0);
        std::vector<double> t(times.begin(), times.end() - 3);
        REQUIRE_THROWS_AS(fourier_components(series, t, dw, 4, 256, {1}), param_error);
    }
}

TEST_CASE("detected field composition", "[spectrum]") {
    SECTION("no drives, identically zero") {
        CascadeParams p = quick_params();
        const Trajectory traj = steady_cycle(p, 1, 64);
        const auto series = detected_field(traj, p);
        for (const auto& s : series) REQUIRE(std::abs(s) <= 1e-14);
    }

    SECTION("decoupled probe equals carrier plus single-qubit response") {
        CascadeParams p = quick_params();
        p.alpha = 0.0;
        p.E = 0.7;
        const Trajectory traj = steady_cycle(p, 2, 128);
        const auto full = detected_field(traj, p, DetectionMode::full);
        const auto probe = detected_field(traj, p, DetectionMode::probe_only);
        for (size_t i = 0; i < full.size(); ++i) {
            const complexd carrier =
                p.E * std::polar(1.0, p.probe_detuning_sign() * p.delta_omega *
                                          traj.times[i]);
            REQUIRE(std::abs(full[i] - (carrier + probe[i])) <= 1e-12);
        }
    }
}

TEST_CASE("spectral structure of the driven cascade", "[spectrum]") {
    CascadeParams p = quick_params();
    p.W = 1.1;
    p.E = 0.5;
    const Trajectory traj = steady_cycle(p, 2, 256);
    const auto series = detected_field(traj, p);

    SECTION("even harmonics vanish for two-level mixing") {
        const auto spec = fourier_components(traj, series,
                                             {-4, -3, -2, -1, 0, 1, 2, 3, 4});
        double max_odd = 0.0;
        for (int k : {-3, -1, 1, 3})
            max_odd = std::max(max_odd, std::abs(spec.amplitude(k)));
        for (int k : {-4, -2, 0, 2, 4})
            REQUIRE(std::abs(spec.amplitude(k)) <= 1e-8 * max_odd);
    }

    SECTION("Parseval: the coherent comb carries the mean square") {
        const auto spec = fourier_components(traj, series, odd_orders_up_to(15));
        double sum = 0.0;
        for (double pw : spec.powers) sum += pw;
        REQUIRE(sum >= 0.999 * mean_square(series));
    }

    SECTION("doubling samples per period is spectrally converged") {
        const auto spec1 = fourier_components(traj, series, odd_orders_up_to(5));
        const Trajectory traj2 = steady_cycle(p, 2, 512);
        const auto spec2 =
            fourier_components(traj2, detected_field(traj2, p), odd_orders_up_to(5));
        for (size_t q = 0; q < spec1.orders.size(); ++q) {
            const double a = std::abs(spec1.amplitudes[q]);
            const double b = std::abs(spec2.amplitudes[q]);
            if (b > 1e-12) REQUIRE(std::abs(a - b) / b <= 1e-8);
        }
    }
}

TEST_CASE("classical order symmetry under drive exchange", "[spectrum]") {
    // alpha = 0 configuration with both tones on the probe: swapping the tone
    // amplitudes mirrors the spectrum.
    BichromaticQubitParams bp;
    bp.Gamma = 1.0;
    bp.delta_omega = 0.02;
    bp.E_plus = 0.6;
    bp.E_minus = 0.35;
    StepControl c;
    c.settle_periods = 1.0;
    const auto ta = single_qubit_bichromatic(bp, 2, 256, c);
    std::swap(bp.E_plus, bp.E_minus);
    const auto tb = single_qubit_bichromatic(bp, 2, 256, c);

    const auto sa = fourier_components(ta, odd_orders_up_to(7));
    const auto sb = fourier_components(tb, odd_orders_up_to(7));
    for (int k : sa.orders)
        REQUIRE(std::abs(sa.amplitude(k)) ==
                Approx(std::abs(sb.amplitude(-k))).margin(1e-9));
}

TEST_CASE("sweep map over a small grid", "[sweep]") {
    CascadeParams p = quick_params();
    p.eta = p.gamma / 100.0;

    SweepGrid grid;
    grid.axis1 = SweepAxis::nu_plus_over_gamma_db;
    grid.axis2 = SweepAxis::nu_minus_over_Gamma_db;
    grid.axis1_values = {-20.0, -15.0, -12.0};
    grid.axis2_values = {-18.0, -12.0, -8.0};

    SweepSettings s;
    s.samples_per_period = 128;
    s.orders = odd_orders_up_to(5);

    const MixingMap map = sweep_map(grid, p, s);
    REQUIRE(map.failures.empty());

    SECTION("single point equals direct computation") {
        CascadeParams q = p;
        apply_axis(q, grid.axis1, grid.axis1_values[1]);
        apply_axis(q, grid.axis2, grid.axis2_values[2]);
        const auto spec = point_spectrum(q, s);
        for (size_t k = 0; k < map.orders.size(); ++k)
            REQUIRE(map.power[k][1][2] == Approx(spec.powers[k]).epsilon(1e-12));
    }

    SECTION("two workers produce bit-identical maps") {
        SweepSettings s2 = s;
        s2.jobs = 2;
        const MixingMap map2 = sweep_map(grid, p, s2);
        for (size_t q = 0; q < map.orders.size(); ++q)
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    REQUIRE(map.power[q][i][j] == map2.power[q][i][j]);
    }

    SECTION("CSV long format has one row per point and order") {
        std::ostringstream os;
        write_mixing_map_csv(map, os);
        const std::string text = os.str();
        size_t rows = 0;
        for (char ch : text) rows += (ch == '\n');
        REQUIRE(rows == 1 + map.orders.size() * 9);
        REQUIRE(text.rfind("axis1_dB,axis2_dB,order,power_dB\n", 0) == 0);
    }

    SECTION("svg heatmap renders") {
        std::ostringstream os;
        write_heatmap_svg(map, -3, os);
        REQUIRE(os.str().find("<svg") != std::string::npos);
        REQUIRE(os.str().find("</svg>") != std::string::npos);
    }
}
