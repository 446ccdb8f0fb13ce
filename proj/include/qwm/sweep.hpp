#pragma once

// 2-D parameter sweeps of the cascaded mixing spectrum, with CSV/JSON/SVG
// serialization. Grid points are independent runs distributed over a worker
// pool; results are written into index-addressed slots so the map content is
// identical for any worker count.

#include "qwm/params.hpp"
#include "qwm/spectrum.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace qwm {

enum class SweepAxis {
    nu_plus_over_gamma_db,   // source coherent flux / gamma, dB
    nu_minus_over_gamma_db,  // probe tone flux / gamma, dB
    nu_minus_over_Gamma_db,  // probe tone flux / Gamma, dB
    gamma_ratio_db,          // 10 log10(Gamma/gamma)
};

inline const char* axis_name(SweepAxis a) {
    switch (a) {
    case SweepAxis::nu_plus_over_gamma_db: return "nu_plus_over_gamma_dB";
    case SweepAxis::nu_minus_over_gamma_db: return "nu_minus_over_gamma_dB";
    case SweepAxis::nu_minus_over_Gamma_db: return "nu_minus_over_Gamma_dB";
    case SweepAxis::gamma_ratio_db: return "Gamma_over_gamma_dB";
    }
    return "unknown";
}

struct SweepGrid {
    SweepAxis axis1 = SweepAxis::nu_plus_over_gamma_db;
    SweepAxis axis2 = SweepAxis::nu_minus_over_Gamma_db;
    std::vector<double> axis1_values;  // dB, strictly monotonic
    std::vector<double> axis2_values;

    void validate() const {
        for (const auto* v : {&axis1_values, &axis2_values}) {
            if (v->size() < 1) throw param_error("SweepGrid: empty axis");
            for (size_t i = 1; i < v->size(); ++i)
                if ((*v)[i] <= (*v)[i - 1])
                    throw param_error("SweepGrid: axis values must increase strictly");
        }
    }

    static std::vector<double> linspace(double lo, double hi, int n) {
        std::vector<double> v(n);
        for (int i = 0; i < n; ++i)
            v[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1.0);
        return v;
    }
};

// Apply one axis coordinate to a parameter template. Drive axes set W or E
// from the requested flux; the ratio axis rescales Gamma against gamma.
inline void apply_axis(CascadeParams& p, SweepAxis axis, double value_db) {
    switch (axis) {
    case SweepAxis::nu_plus_over_gamma_db:
        p.W = source_drive_for_flux(db_to_linear(value_db) * p.gamma, p);
        break;
    case SweepAxis::nu_minus_over_gamma_db:
        p.E = probe_drive_for_flux(db_to_linear(value_db) * p.gamma);
        break;
    case SweepAxis::nu_minus_over_Gamma_db:
        p.E = probe_drive_for_flux(db_to_linear(value_db) * p.Gamma);
        break;
    case SweepAxis::gamma_ratio_db:
        p.Gamma = db_to_linear(value_db) * p.gamma;
        break;
    }
}

struct SweepSettings {
    int n_periods = 2;
    int samples_per_period = 256;
    std::vector<int> orders = odd_orders_up_to(7);
    DetectionMode mode = DetectionMode::full;
    StepControl control{};
    int jobs = 1;
    std::function<void(int, int)> progress;  // (done, total), serialized
    // Per-point resume cache: plain-text files under cache_dir, keyed by the
    // caller-provided tag (hash of the physics configuration) and grid index.
    std::string cache_dir;
    std::string cache_tag;
};

struct MixingMap {
    SweepGrid grid;
    std::vector<int> orders;
    // power[q][i][j]: linear flux of order q at (axis1 i, axis2 j).
    std::vector<std::vector<std::vector<double>>> power;
    std::vector<std::vector<uint8_t>> ok;  // per-point success mask
    std::vector<std::string> failures;     // "i,j: message"
    CascadeParams params_template{};

    double power_db(int order_index, int i, int j, double gain_db = 0.0) const {
        return linear_to_db(std::max(power[order_index][i][j], 1e-300)) + gain_db;
    }

    int order_index(int order) const {
        for (size_t q = 0; q < orders.size(); ++q)
            if (orders[q] == order) return static_cast<int>(q);
        throw param_error("MixingMap: order not present");
    }
};

// Spectrum of one grid point: steady cycle -> detected field -> Fourier.
inline SidebandSpectrum point_spectrum(const CascadeParams& p, const SweepSettings& s) {
    const Trajectory traj = steady_cycle(p, s.n_periods, s.samples_per_period, s.control);
    const auto series = detected_field(traj, p, s.mode);
    return fourier_components(traj, series, s.orders);
}

namespace detail {

inline std::string cache_path(const SweepSettings& s, int i, int j) {
    return s.cache_dir + "/" + s.cache_tag + "_" + std::to_string(i) + "_" +
           std::to_string(j) + ".txt";
}

inline bool load_cached_point(const SweepSettings& s, int i, int j,
                              std::vector<double>& powers) {
    if (s.cache_dir.empty()) return false;
    std::ifstream is(cache_path(s, i, j));
    if (!is) return false;
    powers.assign(s.orders.size(), 0.0);
    for (size_t q = 0; q < s.orders.size(); ++q) {
        int order = 0;
        if (!(is >> order >> powers[q]) || order != s.orders[q]) return false;
    }
    return true;
}

inline void store_cached_point(const SweepSettings& s, int i, int j,
                               const std::vector<double>& powers) {
    if (s.cache_dir.empty()) return;
    const std::string path = cache_path(s, i, j);
    std::ofstream os(path + ".tmp");
    for (size_t q = 0; q < s.orders.size(); ++q) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%d %.17g\n", s.orders[q], powers[q]);
        os << buf;
    }
    os.close();
    std::rename((path + ".tmp").c_str(), path.c_str());
}

} // namespace detail

inline MixingMap sweep_map(const SweepGrid& grid, const CascadeParams& params_template,
                           const SweepSettings& settings) {
    grid.validate();
    const int n1 = static_cast<int>(grid.axis1_values.size());
    const int n2 = static_cast<int>(grid.axis2_values.size());
    const int n_orders = static_cast<int>(settings.orders.size());

    MixingMap map;
    map.grid = grid;
    map.orders = settings.orders;
    map.params_template = params_template;
    map.power.assign(n_orders, std::vector<std::vector<double>>(
                                   n1, std::vector<double>(n2, 0.0)));
    map.ok.assign(n1, std::vector<uint8_t>(n2, 0));

    std::vector<std::string> failures(static_cast<size_t>(n1) * n2);
    std::atomic<int> next{0};
    std::atomic<int> done{0};
    std::mutex progress_mutex;

    const auto worker = [&]() {
        for (;;) {
            const int idx = next.fetch_add(1);
            if (idx >= n1 * n2) return;
            const int i = idx / n2;
            const int j = idx % n2;
            CascadeParams p = params_template;
            try {
                std::vector<double> cached;
                if (detail::load_cached_point(settings, i, j, cached)) {
                    for (int q = 0; q < n_orders; ++q) map.power[q][i][j] = cached[q];
                    map.ok[i][j] = 1;
                } else {
                    apply_axis(p, grid.axis1, grid.axis1_values[i]);
                    apply_axis(p, grid.axis2, grid.axis2_values[j]);
                    const SidebandSpectrum spec = point_spectrum(p, settings);
                    for (int q = 0; q < n_orders; ++q)
                        map.power[q][i][j] = spec.powers[q];
                    map.ok[i][j] = 1;
                    detail::store_cached_point(settings, i, j, spec.powers);
                }
            } catch (const std::exception& e) {
                failures[idx] = std::to_string(i) + "," + std::to_string(j) + ": " + e.what();
            }
            const int d = done.fetch_add(1) + 1;
            if (settings.progress) {
                std::lock_guard<std::mutex> lock(progress_mutex);
                settings.progress(d, n1 * n2);
            }
        }
    };

    const int jobs = std::max(1, settings.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& f : failures)
        if (!f.empty()) map.failures.push_back(std::move(f));
    return map;
}

// ---------------------------------------------------------------------------
// Serialization. CSV is the long format consumed by the fit module; numbers
// are printed with %.12g so identical runs produce identical bytes.

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

inline void write_mixing_map_csv(const MixingMap& map, std::ostream& os) {
    os << "axis1_dB,axis2_dB,order,power_dB\n";
    for (size_t q = 0; q < map.orders.size(); ++q)
        for (size_t i = 0; i < map.grid.axis1_values.size(); ++i)
            for (size_t j = 0; j < map.grid.axis2_values.size(); ++j) {
                if (!map.ok[i][j]) continue;
                os << format_double(map.grid.axis1_values[i]) << ','
                   << format_double(map.grid.axis2_values[j]) << ',' << map.orders[q]
                   << ',' << format_double(map.power_db(static_cast<int>(q),
                                                        static_cast<int>(i),
                                                        static_cast<int>(j)))
                   << '\n';
            }
}

// Minimal SVG heatmap, one panel per call. Plumbing only; the numbers live
// in the CSV/JSON outputs.
inline void write_heatmap_svg(const MixingMap& map, int order, std::ostream& os,
                              double floor_db = -300.0, double gain_db = 0.0) {
    const int q = map.order_index(order);
    const int n1 = static_cast<int>(map.grid.axis1_values.size());
    const int n2 = static_cast<int>(map.grid.axis2_values.size());
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j) {
            if (!map.ok[i][j]) continue;
            const double v = std::max(map.power_db(q, i, j, gain_db), floor_db);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (hi <= lo) hi = lo + 1.0;

    const int cell = 8, margin = 40;
    const int width = margin * 2 + cell * n1;
    const int height = margin * 2 + cell * n2;
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='"
       << height << "'>\n";
    os << "<text x='" << margin << "' y='20' font-size='12'>order " << order
       << " (" << axis_name(map.grid.axis1) << " vs " << axis_name(map.grid.axis2)
       << "), dB range [" << format_double(lo) << ", " << format_double(hi)
       << "]</text>\n";
    for (int i = 0; i < n1; ++i) {
        for (int j = 0; j < n2; ++j) {
            double u = 0.0;
            if (map.ok[i][j]) {
                const double v = std::max(map.power_db(q, i, j, gain_db), floor_db);
                u = (v - lo) / (hi - lo);
            }
            const int r = static_cast<int>(255 * u);
            const int g = static_cast<int>(80 * (1.0 - u) + 120 * u * (1.0 - u) * 4.0 * 0.5);
            const int b = static_cast<int>(255 * (1.0 - u));
            os << "<rect x='" << margin + cell * i << "' y='"
               << margin + cell * (n2 - 1 - j) << "' width='" << cell << "' height='"
               << cell << "' fill='rgb(" << r << ',' << g << ',' << b << ")'/>\n";
        }
    }
    os << "</svg>\n";
}

} // namespace qwm
