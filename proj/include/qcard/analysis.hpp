#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <system_error>
#include <thread>
#include <vector>

#include <qcard/errors.hpp>
#include <qcard/postproc.hpp>
#include <qcard/sim.hpp>
#include <qcard/trainer.hpp>

// Value-distribution study of the post-processing heads on Haar-random
// states, plus CSV/SVG report emission for training and evaluation runs.
namespace qcard::analysis {

struct Histogram {
    std::string label;                  // descriptor used in report file names
    std::vector<double> edges;          // bin boundaries, strictly increasing
    std::vector<std::uint64_t> counts;  // one per bin
    std::uint64_t total_samples = 0;
};

inline constexpr std::size_t kDefaultBins = 100;
inline constexpr std::uint64_t kDefaultSamples = 100000;

// Register size used for the distribution study: width-8 heads read an
// 8-qubit register, everything else a 4-qubit one.
inline int default_hist_qubits(const postproc::PostLayer& layer) {
    return layer.width == 8 ? 8 : 4;
}

namespace detail {

// Shortest decimal form that round-trips to the same double; keeps every
// emitted file byte-stable across reruns.
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Per-sample generator seed. Mixing (seed, index) instead of adding keeps
// nearby base seeds from sharing sample windows, and keeps sample i
// independent of how samples are split across workers.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::string csv_field(const std::string& raw) {
    if (raw.find_first_of(",\"\n") == std::string::npos) return raw;
    std::string quoted = "\"";
    for (char c : raw) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

}  // namespace detail

// Feeds measurement probabilities of Haar-random states through the layer
// and bins the outputs. Scalars are pinned to the neutral study setting
// (all 1, place-value base 2) so the shape reflects the head alone. Bins
// cover the observed range uniformly; a degenerate range widens to +-0.5
// around the single value. Sample i always draws from a seed mixed from
// (seed, i), so the result is identical for any worker count.
inline Histogram value_distribution(const postproc::PostLayer& layer, int n_qubits,
                                    std::uint64_t samples, std::uint64_t seed,
                                    std::size_t bins = kDefaultBins,
                                    unsigned workers = 1) {
    postproc::PostLayer probe = layer;
    std::fill(probe.scalars.begin(), probe.scalars.end(), 1.0);
    if ((probe.kind == postproc::LayerKind::PlaceValue ||
         probe.kind == postproc::LayerKind::PlaceValueNeg) &&
        !probe.scalars.empty()) {
        probe.scalars[0] = 2.0;
    }
    postproc::validate(probe);
    if (n_qubits < 1 || n_qubits > sim::kMaxQubits) {
        throw ConfigError("histogram register must use 1.." +
                          std::to_string(sim::kMaxQubits) + " qubits, got " +
                          std::to_string(n_qubits));
    }
    const std::size_t dim = std::size_t{1} << n_qubits;
    if (static_cast<std::size_t>(probe.width) > dim) {
        throw ConfigError("layer width " + std::to_string(probe.width) +
                          " exceeds the " + std::to_string(dim) +
                          " basis states of " + std::to_string(n_qubits) +
                          " qubits");
    }
    if (samples == 0) throw UsageError("histogram needs at least one sample");
    if (bins == 0) throw UsageError("histogram needs at least one bin");

    std::vector<double> values(samples);
    const unsigned stride = std::max(1u, workers);
    auto sample_range = [&](unsigned first) {
        for (std::uint64_t i = first; i < samples; i += stride) {
            auto state =
                sim::haar_random_state(n_qubits, detail::derive_seed(seed, i));
            values[i] = postproc::eval(probe, sim::probabilities(state));
        }
    };
    if (stride == 1) {
        sample_range(0);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> failures(stride);
        for (unsigned w = 0; w < stride; ++w) {
            pool.emplace_back([&, w] {
                try {
                    sample_range(w);
                } catch (...) {
                    failures[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& f : failures) {
            if (f) std::rethrow_exception(f);
        }
    }

    auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    double lo = *lo_it;
    double hi = *hi_it;
    if (!std::isfinite(lo) || !std::isfinite(hi)) {
        throw NumericError("histogram sampling produced a non-finite value");
    }
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    }

    Histogram hist;
    hist.label = std::string(postproc::kind_name(probe.kind)) + "_w" +
                 std::to_string(probe.width);
    hist.total_samples = samples;
    hist.edges.resize(bins + 1);
    const double bin_width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t b = 0; b <= bins; ++b) {
        hist.edges[b] = lo + bin_width * static_cast<double>(b);
    }
    hist.edges[bins] = hi;
    hist.counts.assign(bins, 0);
    for (double v : values) {
        std::size_t b = v >= hi ? bins - 1
                                : static_cast<std::size_t>((v - lo) / bin_width);
        if (b >= bins) b = bins - 1;
        ++hist.counts[b];
    }
    return hist;
}

// Baseline mean abs log error divided by the model's. Equal errors give
// exactly 1; a zero-error model gives +infinity, rendered as "exact".
inline double improvement_factor(const trainer::RunReport& report,
                                 const std::vector<double>& baseline_abs_log_errors) {
    if (report.queries.empty()) throw UsageError("report covers no queries");
    if (baseline_abs_log_errors.size() != report.queries.size()) {
        throw UsageError("baseline covers " +
                         std::to_string(baseline_abs_log_errors.size()) +
                         " queries but the report covers " +
                         std::to_string(report.queries.size()));
    }
    double total = 0.0;
    for (double err : baseline_abs_log_errors) total += err;
    const double baseline_mean =
        total / static_cast<double>(baseline_abs_log_errors.size());
    if (report.mean_abs_log_error == 0.0) {
        return baseline_mean == 0.0 ? 1.0
                                    : std::numeric_limits<double>::infinity();
    }
    return baseline_mean / report.mean_abs_log_error;
}

inline std::string format_factor(double factor) {
    if (std::isinf(factor)) return "exact";
    return detail::format_double(factor);
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) throw UsageError("failed while writing " + path.string());
}

inline std::string metrics_csv(const trainer::RunReport& report) {
    const bool with_baseline = report.baseline_mean_abs_log_error.has_value();
    std::string csv = "query,predicted_log,true_log,abs_log_error";
    if (with_baseline) csv += ",baseline_abs_log_error,improvement_factor";
    csv += '\n';
    for (const auto& q : report.queries) {
        csv += csv_field(q.query_id);
        csv += ',' + format_double(q.predicted_log);
        csv += ',' + format_double(q.true_log);
        csv += ',' + format_double(q.abs_log_error);
        if (with_baseline) {
            csv += ',';
            if (q.baseline_abs_log_error) {
                csv += format_double(*q.baseline_abs_log_error);
            }
            csv += ',';
        }
        csv += '\n';
    }
    csv += "aggregate,,," + format_double(report.mean_abs_log_error);
    if (with_baseline) {
        csv += ',' + format_double(*report.baseline_mean_abs_log_error) + ',';
        if (report.exact_model) {
            csv += "exact";
        } else if (report.improvement_factor) {
            csv += format_double(*report.improvement_factor);
        }
    }
    csv += '\n';
    return csv;
}

inline std::string loss_curve_csv(const std::vector<double>& loss_curve) {
    std::string csv = "episode,mean_loss\n";
    for (std::size_t i = 0; i < loss_curve.size(); ++i) {
        csv += std::to_string(i) + ',' + format_double(loss_curve[i]) + '\n';
    }
    return csv;
}

inline std::string histogram_csv(const Histogram& hist) {
    std::string csv = "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b < hist.counts.size(); ++b) {
        csv += format_double(hist.edges[b]) + ',' +
               format_double(hist.edges[b + 1]) + ',' +
               std::to_string(hist.counts[b]) + '\n';
    }
    return csv;
}

// Standalone bar chart; fixed canvas, no external assets, all coordinates
// formatted through format_double so reruns emit identical bytes.
inline std::string histogram_svg(const Histogram& hist) {
    constexpr double kLeft = 60.0;
    constexpr double kRight = 620.0;
    constexpr double kTop = 40.0;
    constexpr double kBottom = 360.0;
    const std::size_t bins = hist.counts.size();
    const std::uint64_t peak =
        std::max<std::uint64_t>(1, *std::max_element(hist.counts.begin(),
                                                     hist.counts.end()));
    std::string svg =
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
        "viewBox=\"0 0 640 400\">\n"
        "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n"
        "<text x=\"320\" y=\"24\" text-anchor=\"middle\" "
        "font-family=\"sans-serif\" font-size=\"16\">" +
        hist.label + " (" + std::to_string(hist.total_samples) +
        " samples)</text>\n";
    const double span = kRight - kLeft;
    for (std::size_t b = 0; b < bins; ++b) {
        if (hist.counts[b] == 0) continue;
        const double x = kLeft + span * static_cast<double>(b) /
                                    static_cast<double>(bins);
        const double w = span / static_cast<double>(bins);
        const double h = (kBottom - kTop) * static_cast<double>(hist.counts[b]) /
                         static_cast<double>(peak);
        svg += "<rect x=\"" + format_double(x) + "\" y=\"" +
               format_double(kBottom - h) + "\" width=\"" + format_double(w) +
               "\" height=\"" + format_double(h) + "\" fill=\"#4477aa\"/>\n";
    }
    svg += "<line x1=\"60\" y1=\"360\" x2=\"620\" y2=\"360\" stroke=\"black\"/>\n"
           "<line x1=\"60\" y1=\"40\" x2=\"60\" y2=\"360\" stroke=\"black\"/>\n";
    svg += "<text x=\"60\" y=\"380\" font-family=\"sans-serif\" "
           "font-size=\"12\">" +
           format_double(hist.edges.front()) + "</text>\n";
    svg += "<text x=\"620\" y=\"380\" text-anchor=\"end\" "
           "font-family=\"sans-serif\" font-size=\"12\">" +
           format_double(hist.edges.back()) + "</text>\n";
    svg += "<text x=\"56\" y=\"44\" text-anchor=\"end\" "
           "font-family=\"sans-serif\" font-size=\"12\">" +
           std::to_string(peak) + "</text>\n";
    svg += "</svg>\n";
    return svg;
}

}  // namespace detail

struct ReportFiles {
    std::vector<std::filesystem::path> written;
};

namespace detail {

inline void ensure_dir(const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw UsageError("cannot create output directory " + out_dir.string() +
                         ": " + ec.message());
    }
}

}  // namespace detail

// Writes hist_<label>.csv plus a standalone hist_<label>.svg chart per
// histogram. Reruns with the same inputs produce byte-identical files.
inline ReportFiles emit_histograms(const std::vector<Histogram>& histograms,
                                   const std::filesystem::path& out_dir) {
    detail::ensure_dir(out_dir);
    ReportFiles files;
    for (const auto& hist : histograms) {
        const auto csv_path = out_dir / ("hist_" + hist.label + ".csv");
        detail::write_text_file(csv_path, detail::histogram_csv(hist));
        files.written.push_back(csv_path);
        const auto svg_path = out_dir / ("hist_" + hist.label + ".svg");
        detail::write_text_file(svg_path, detail::histogram_svg(hist));
        files.written.push_back(svg_path);
    }
    return files;
}

// Writes metrics.csv (per-query rows plus one aggregate footer row),
// loss_curve.csv, and the histogram files. Reruns with the same inputs
// produce byte-identical files.
inline ReportFiles emit_report(const trainer::RunReport& report,
                               const std::vector<double>& loss_curve,
                               const std::vector<Histogram>& histograms,
                               const std::filesystem::path& out_dir) {
    detail::ensure_dir(out_dir);
    ReportFiles files;
    auto emit = [&](const std::string& name, const std::string& content) {
        const auto path = out_dir / name;
        detail::write_text_file(path, content);
        files.written.push_back(path);
    };
    emit("metrics.csv", detail::metrics_csv(report));
    emit("loss_curve.csv", detail::loss_curve_csv(loss_curve));
    auto hist_files = emit_histograms(histograms, out_dir);
    files.written.insert(files.written.end(), hist_files.written.begin(),
                         hist_files.written.end());
    return files;
}

}  // namespace qcard::analysis
