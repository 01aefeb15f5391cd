#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "cdrdiff/evaluation.hpp"

namespace cdrdiff::eval {

double aar(std::string_view reference, std::string_view design) {
    if (reference.size() != design.size()) throw MetricError("aar: sequence lengths differ");
    if (reference.empty()) throw MetricError("aar: empty sequences");
    std::size_t same = 0;
    for (std::size_t i = 0; i < reference.size(); ++i) same += reference[i] == design[i];
    return 100.0 * static_cast<double>(same) / static_cast<double>(reference.size());
}

double rmsd_ca(std::span<const geom::Vec3> reference, std::span<const geom::Vec3> design) {
    if (reference.size() != design.size()) throw MetricError("rmsd_ca: point counts differ");
    if (reference.empty()) throw MetricError("rmsd_ca: no points");
    double sum = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        if (!reference[i].allFinite() || !design[i].allFinite()) throw MetricError("rmsd_ca: non-finite coordinate");
        sum += (reference[i] - design[i]).squaredNorm();
    }
    return std::sqrt(sum / static_cast<double>(reference.size()));
}

Summary summarize(std::span<const double> values) {
    Summary s;
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    s.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    return s;
}

MetricReport make_report(std::vector<MetricRow> rows) {
    MetricReport r;
    r.rows = std::move(rows);
    std::vector<double> a, d;
    for (const auto& row : r.rows) {
        a.push_back(row.aar);
        d.push_back(row.rmsd);
    }
    r.aar = summarize(a);
    r.rmsd = summarize(d);
    return r;
}

std::string report_csv(const MetricReport& report) {
    std::string out = "design_id,cdr,aar,rmsd\n";
    for (const auto& row : report.rows) out += fmt::format("{},{},{:.6f},{:.6f}\n", row.design_id, row.cdr, row.aar, row.rmsd);
    out += fmt::format("mean,,{:.6f},{:.6f}\n", report.aar.mean, report.rmsd.mean);
    out += fmt::format("median,,{:.6f},{:.6f}\n", report.aar.median, report.rmsd.median);
    return out;
}

}  // namespace cdrdiff::eval
