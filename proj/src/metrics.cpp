#include "umyops/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "umyops/core/errors.hpp"

namespace umyops::metrics {

namespace {

void require_same_shape(const MaskU8& a, const MaskU8& b, const char* who) {
    if (!a.same_shape(b)) throw InvalidArgument(std::string(who) + ": shape mismatch");
}

std::vector<std::array<int, 2>> boundary_points(const MaskU8& m) {
    std::vector<std::array<int, 2>> pts;
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) {
            if (m(r, c) == 0) continue;
            bool edge = r == 0 || r == m.rows() - 1 || c == 0 || c == m.cols() - 1;
            if (!edge)
                edge = m(r - 1, c) == 0 || m(r + 1, c) == 0 || m(r, c - 1) == 0 || m(r, c + 1) == 0;
            if (edge) pts.push_back({r, c});
        }
    return pts;
}

double quantile(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return 0.0;
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const size_t lo = static_cast<size_t>(std::floor(h));
    const size_t hi = static_cast<size_t>(std::ceil(h));
    return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}

} // namespace

double dice_hard(const MaskU8& a, const MaskU8& b) {
    require_same_shape(a, b, "dice_hard");
    long inter = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        const bool pa = a.raw()[i] != 0;
        const bool pb = b.raw()[i] != 0;
        inter += pa && pb;
        na += pa;
        nb += pb;
    }
    if (na + nb == 0) return 1.0;  // two empty masks agree perfectly
    return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

double hausdorff_mm(const MaskU8& a, const MaskU8& b, const std::array<double, 2>& spacing_mm) {
    require_same_shape(a, b, "hausdorff_mm");
    const auto pa = boundary_points(a);
    const auto pb = boundary_points(b);
    if (pa.empty() || pb.empty())
        throw UndefinedMetric("hausdorff_mm: empty mask");

    const double sr = spacing_mm[0], sc = spacing_mm[1];
    auto directed = [&](const std::vector<std::array<int, 2>>& from,
                        const std::vector<std::array<int, 2>>& to) {
        double worst = 0.0;
        for (const auto& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : to) {
                const double dr = (p[0] - q[0]) * sr;
                const double dc = (p[1] - q[1]) * sc;
                const double d2 = dr * dr + dc * dc;
                if (d2 < best) best = d2;
            }
            if (best > worst) worst = best;
        }
        return worst;
    };
    return std::sqrt(std::max(directed(pa, pb), directed(pb, pa)));
}

SenPre sensitivity_precision(const MaskU8& pred, const MaskU8& gold) {
    require_same_shape(pred, gold, "sensitivity_precision");
    long tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred.raw()[i] != 0;
        const bool g = gold.raw()[i] != 0;
        tp += p && g;
        fp += p && !g;
        fn += !p && g;
    }
    SenPre out;
    out.sen_defined = (tp + fn) > 0;
    out.pre_defined = (tp + fp) > 0;
    out.sen = out.sen_defined ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    out.pre = out.pre_defined ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    return out;
}

RegScore eval_registration(const MaskU8& warped_src_label, const MaskU8& tgt_label,
                           const std::array<double, 2>& spacing_mm) {
    RegScore s;
    s.dice = dice_hard(warped_src_label, tgt_label);
    try {
        s.hd_mm = hausdorff_mm(warped_src_label, tgt_label, spacing_mm);
    } catch (const UndefinedMetric&) {
        s.hd_mm.reset();
    }
    return s;
}

DispStats displacement_stats(const std::vector<tps::DisplacementSet>& sets, double H, double W) {
    if (!(H > 0.0) || !(W > 0.0)) throw InvalidArgument("displacement_stats: bad frame");
    std::vector<double> norms;
    for (const auto& s : sets)
        for (const auto& [dx, dy] : s.deltas)
            norms.push_back(std::sqrt((dx / H) * (dx / H) + (dy / W) * (dy / W)));
    DispStats out;
    out.count = norms.size();
    if (norms.empty()) return out;
    std::sort(norms.begin(), norms.end());
    out.median = quantile(norms, 0.5);
    out.q1 = quantile(norms, 0.25);
    out.q3 = quantile(norms, 0.75);
    out.max = norms.back();
    return out;
}

Aggregate aggregate(const std::vector<std::optional<double>>& values) {
    Aggregate a;
    double sum = 0.0;
    for (const auto& v : values) {
        if (v) {
            sum += *v;
            ++a.n;
        } else {
            ++a.missing;
        }
    }
    if (a.n == 0) return a;
    a.mean = sum / a.n;
    double ss = 0.0;
    for (const auto& v : values)
        if (v) ss += (*v - a.mean) * (*v - a.mean);
    a.stdev = a.n > 1 ? std::sqrt(ss / (a.n - 1)) : 0.0;
    return a;
}

ReportTable::ReportTable(std::string schema, std::vector<std::string> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {}

void ReportTable::add_row(const std::string& id, std::vector<std::optional<double>> values) {
    if (values.size() != columns_.size())
        throw InvalidArgument("ReportTable: column count mismatch");
    rows_.emplace_back(id, std::move(values));
}

void ReportTable::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("ReportTable: cannot write " + path);
    out << "# schema: " << schema_ << '\n';
    out << "id";
    for (const auto& c : columns_) out << ',' << c;
    out << '\n';
    out.precision(10);
    for (const auto& [id, vals] : rows_) {
        out << id;
        for (const auto& v : vals) {
            out << ',';
            if (v) out << *v;
        }
        out << '\n';
    }
    // mean (stdev) footer, missing values excluded
    std::vector<Aggregate> aggs;
    for (size_t c = 0; c < columns_.size(); ++c) {
        std::vector<std::optional<double>> col;
        for (const auto& [id, vals] : rows_) col.push_back(vals[c]);
        aggs.push_back(aggregate(col));
    }
    out << "mean";
    for (const auto& a : aggs) out << ',' << a.mean;
    out << "\nstdev";
    for (const auto& a : aggs) out << ',' << a.stdev;
    out << "\nmissing";
    for (const auto& a : aggs) out << ',' << a.missing;
    out << '\n';
}

nlohmann::json ReportTable::to_json() const {
    nlohmann::json j;
    j["schema"] = schema_;
    j["columns"] = columns_;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& [id, vals] : rows_) {
        nlohmann::json r;
        r["id"] = id;
        nlohmann::json vj = nlohmann::json::array();
        for (const auto& v : vals) {
            if (v)
                vj.push_back(*v);
            else
                vj.push_back(nullptr);
        }
        r["values"] = std::move(vj);
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    nlohmann::json agg;
    for (size_t c = 0; c < columns_.size(); ++c) {
        std::vector<std::optional<double>> col;
        for (const auto& [id, vals] : rows_) col.push_back(vals[c]);
        const Aggregate a = aggregate(col);
        agg[columns_[c]] = {{"mean", a.mean}, {"stdev", a.stdev}, {"n", a.n}, {"missing", a.missing}};
    }
    j["aggregate"] = std::move(agg);
    return j;
}

} // namespace umyops::metrics
