#include "nesy/metrics.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nesy {

double predictive_accuracy(const std::vector<EvalRecord>& records) {
    if (records.empty()) throw std::runtime_error("predictive_accuracy: no records");
    size_t correct = 0;
    for (const auto& r : records)
        if (r.valid && r.pred == r.truth) ++correct;
    return static_cast<double>(correct) / records.size();
}

double explanatory_fidelity(const std::vector<EvalRecord>& records) {
    if (records.empty()) throw std::runtime_error("explanatory_fidelity: no records");
    size_t hit = 0;
    for (const auto& r : records)
        if (!r.extracted.v.empty() && r.extracted == r.generating) ++hit;
    return static_cast<double>(hit) / records.size();
}

std::vector<double> feature_f1(const std::vector<EvalRecord>& records, const FeatureSpace& space) {
    if (records.empty()) throw std::runtime_error("feature_f1: no records");
    const size_t k = space.num_features();
    std::vector<double> out(k, 0.0);
    for (size_t f = 0; f < k; ++f) {
        const size_t n = space.domain_size(f);
        double macro = 0.0;
        for (size_t val = 0; val < n; ++val) {
            size_t tp = 0, fp = 0, fn = 0;
            for (const auto& r : records) {
                const bool truth_is = r.generating.v[f] == val;
                const bool pred_is = !r.extracted.v.empty() && r.extracted.v[f] == val;
                if (truth_is && pred_is) ++tp;
                else if (!truth_is && pred_is) ++fp;
                else if (truth_is && !pred_is) ++fn;
            }
            const size_t denom = 2 * tp + fp + fn;
            macro += denom ? 2.0 * tp / denom : 0.0;  // unseen value scores 0
        }
        out[f] = macro / n;
    }
    return out;
}

std::vector<double> running_average(const std::vector<double>& series, size_t window) {
    if (series.empty()) throw std::runtime_error("running_average: empty series");
    if (window < 1) throw std::runtime_error("running_average: window must be >= 1");
    std::vector<double> out(series.size());
    for (size_t i = 0; i < series.size(); ++i) {
        const size_t span = std::min(i + 1, window);
        double acc = 0.0;
        for (size_t j = i + 1 - span; j <= i; ++j) acc += series[j];
        out[i] = acc / span;
    }
    return out;
}

bool better(double p1, double e1, double p2, double e2) { return p1 > p2 && e1 > e2; }

std::string metrics_csv_header() {
    std::string h = "run_id,variant,alpha,epoch,pred_acc,expl_fid";
    for (int f = 1; f <= 9; ++f) h += ",f1_f" + std::to_string(f);
    return h;
}

std::string metrics_csv_row(const MetricsRow& row) {
    std::ostringstream s;
    s.precision(10);
    s << row.run_id << ',' << row.variant << ',' << row.alpha << ',' << row.epoch << ','
      << row.pred_acc << ',' << row.expl_fid;
    for (size_t f = 0; f < 9; ++f) {
        s << ',';
        if (f < row.f1.size()) s << row.f1[f];
    }
    return s.str();
}

void save_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("metrics: cannot write " + path);
    out << metrics_csv_header() << "\n";
    for (const auto& r : rows) out << metrics_csv_row(r) << "\n";
    if (!out) throw std::runtime_error("metrics: write failed for " + path);
}

std::vector<MetricsRow> load_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("metrics: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != metrics_csv_header())
        throw std::runtime_error("metrics: unexpected header in " + path);
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cols.push_back(cell);
        cols.resize(15);  // trailing blanks drop out of getline
        MetricsRow r;
        r.run_id = cols[0];
        r.variant = cols[1];
        r.alpha = std::stod(cols[2]);
        r.epoch = std::stoi(cols[3]);
        r.pred_acc = std::stod(cols[4]);
        r.expl_fid = std::stod(cols[5]);
        for (size_t f = 6; f < 15 && !cols[f].empty(); ++f) r.f1.push_back(std::stod(cols[f]));
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace nesy
