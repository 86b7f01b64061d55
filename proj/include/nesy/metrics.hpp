#pragma once

#include <string>
#include <vector>

#include "nesy/logic.hpp"

namespace nesy {

// One test instance after deduction. `pred` uses class indices with kBottom
// and kInvalid as in semloss; `valid` is false for invalid predictions.
struct EvalRecord {
    int truth = 0;
    int pred = 0;
    bool valid = true;
    Assignment generating;  // conjunct that produced the instance
    Assignment extracted;   // assignment the model committed to (empty if none)
};

// correct / total; invalid predictions count as wrong
double predictive_accuracy(const std::vector<EvalRecord>& records);

// fraction whose extracted assignment equals the generating conjunct exactly
double explanatory_fidelity(const std::vector<EvalRecord>& records);

// Per feature, the macro average of one-vs-rest F1 over the feature's values.
// Values never seen in truth or prediction contribute 0. Records lacking an
// extracted assignment count as a false negative for the true value.
std::vector<double> feature_f1(const std::vector<EvalRecord>& records, const FeatureSpace& space);

// element i = mean of the trailing min(i+1, window) values
std::vector<double> running_average(const std::vector<double>& series, size_t window = 100);

// strict dominance on (predictive, explanatory) pairs
bool better(double p1, double e1, double p2, double e2);

// One metrics CSV row per evaluation point. F1 columns beyond the feature
// count stay blank.
struct MetricsRow {
    std::string run_id;
    std::string variant;
    double alpha = 0.0;
    int epoch = 0;
    double pred_acc = 0.0;
    double expl_fid = 0.0;
    std::vector<double> f1;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);
void save_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> load_metrics_csv(const std::string& path);

}  // namespace nesy
