#ifndef UMYOPS_METRICS_METRICS_HPP
#define UMYOPS_METRICS_METRICS_HPP

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "umyops/core/array2d.hpp"
#include "umyops/tps/tps.hpp"

namespace umyops::metrics {

// Raised when a metric has no defined value (e.g. Hausdorff of an empty
// mask). Reporting layers catch it and record the value as missing.
class UndefinedMetric : public std::runtime_error {
public:
    explicit UndefinedMetric(const std::string& what) : std::runtime_error(what) {}
};

double dice_hard(const MaskU8& a, const MaskU8& b);

// Symmetric Hausdorff distance between 4-connectivity boundary point sets,
// in millimetres. Throws UndefinedMetric when either mask is empty.
double hausdorff_mm(const MaskU8& a, const MaskU8& b, const std::array<double, 2>& spacing_mm);

struct SenPre {
    double sen = 0.0, pre = 0.0;
    bool sen_defined = false, pre_defined = false;
};
SenPre sensitivity_precision(const MaskU8& pred, const MaskU8& gold);

struct RegScore {
    double dice = 0.0;
    std::optional<double> hd_mm;
};
RegScore eval_registration(const MaskU8& warped_src_label, const MaskU8& tgt_label,
                           const std::array<double, 2>& spacing_mm);

// Per-point norms sqrt((dx/H)^2 + (dy/W)^2) pooled over all sets.
struct DispStats {
    double median = 0.0, q1 = 0.0, q3 = 0.0, max = 0.0;
    size_t count = 0;
};
DispStats displacement_stats(const std::vector<tps::DisplacementSet>& sets, double H, double W);

// mean (stdev) aggregation that tracks missing entries.
struct Aggregate {
    double mean = 0.0, stdev = 0.0;
    int n = 0, missing = 0;
};
Aggregate aggregate(const std::vector<std::optional<double>>& values);

// Per-sample rows plus mean (stdev) footer; serializable as CSV and JSON.
class ReportTable {
public:
    ReportTable(std::string schema, std::vector<std::string> columns);

    void add_row(const std::string& id, std::vector<std::optional<double>> values);
    void write_csv(const std::string& path) const;
    nlohmann::json to_json() const;

    const std::vector<std::string>& columns() const { return columns_; }
    size_t row_count() const { return rows_.size(); }

private:
    std::string schema_;
    std::vector<std::string> columns_;
    std::vector<std::pair<std::string, std::vector<std::optional<double>>>> rows_;
};

} // namespace umyops::metrics

#endif
