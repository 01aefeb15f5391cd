/**
 * Reference-based metrics for designed regions.
 */

#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdrdiff/geometry.hpp"

namespace cdrdiff::eval {

class MetricError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Percentage of positions with equal residues.
double aar(std::string_view reference, std::string_view design);
/// Root mean squared Ca distance in a shared frame, without superposition.
double rmsd_ca(std::span<const geom::Vec3> reference, std::span<const geom::Vec3> design);

struct MetricRow {
    std::string design_id;
    std::string cdr;
    double aar = 0.0;
    double rmsd = 0.0;
};

struct Summary {
    double mean = 0.0;
    double median = 0.0;
};

struct MetricReport {
    std::vector<MetricRow> rows;
    Summary aar;
    Summary rmsd;
    /// Interface energy improvement needs an external energy function.
    std::string imp = "not computed";
};

Summary summarize(std::span<const double> values);
MetricReport make_report(std::vector<MetricRow> rows);
/// design_id,cdr,aar,rmsd rows followed by mean and median rows.
std::string report_csv(const MetricReport& report);

}  // namespace cdrdiff::eval
