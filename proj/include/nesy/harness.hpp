#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nesy/chess.hpp"
#include "nesy/dataset.hpp"
#include "nesy/logic.hpp"
#include "nesy/metrics.hpp"
#include "nesy/nn/network.hpp"
#include "nesy/semloss.hpp"
#include "nesy/ts.hpp"

namespace nesy {

// Experiment settings. Negative numeric fields resolve to the per-domain
// defaults (desk scale unless full_scale is set); desk scale shrinks epoch
// counts and the chess subset so a full protocol fits on a workstation.
struct RunConfig {
    std::string domain = "ts";   // ts | chess
    std::string variant = "N";   // N (segmented) | N1 (pretrained) | N0 (scratch)
    double alpha = 0.1;          // label corruption rate for N1 pretraining
    int reps = -1;
    uint64_t seed = 7;
    int lower = 5, upper = 8;    // conjuncts per class drawn from [lower, upper)
    double sigma = 0.05;         // ts stream noise
    bool full_scale = false;

    int epochs = -1;
    double lr = -1.0;
    int batch = -1;
    int pretrain_epochs = -1;
    double pretrain_lr = -1.0;
    int pretrain_batch = -1;
    int chess_train = -1, chess_test = -1;

    std::string theory_path;     // ts only: fix the theory instead of sampling per rep
    std::string glyph_images, glyph_labels;  // IDX pair; empty = synthetic glyphs
    std::string out_dir = "runs";

    int resolved_reps() const;
    int resolved_epochs() const;
    double resolved_lr() const;
    int resolved_batch() const;
    int resolved_pretrain_epochs() const;
    double resolved_pretrain_lr() const;
    int resolved_pretrain_batch() const;
    int resolved_chess_train() const;
    int resolved_chess_test() const;
};

RunConfig parse_config_json(const std::string& text);
std::string config_json(const RunConfig& cfg);
RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& cfg);

// Everything the variants of one repetition share. Both window widths come
// from the same underlying streams (equal stream_hash); the widened space
// carries the segmented variant's per-segment feedback. win150 windows are
// additionally renormalized per segment (see renormalize_segments).
struct TsRepData {
    Theory theory;            // 3 features x 3 shapes
    FeedbackSet feedback;     // partition of the 27 assignments
    Theory wide_theory;       // same conjuncts over 3 features x 9 shapes
    FeedbackSet wide_feedback;
    TsDatasets win256;        // unsegmented variants
    TsDatasets win150;        // segmented variant
};
TsRepData make_ts_rep(uint64_t rep_seed, double sigma, int lower, int upper,
                      const Theory* fixed_theory = nullptr);

// Chess data is fixed for the whole experiment; repetitions only vary
// initialization and corruption draws.
struct ChessData {
    Theory theory;
    FeedbackSet feedback;
    Dataset train, test;
};
ChessData make_chess_data(uint64_t seed, int n_train, int n_test,
                          const std::string& idx_images = "", const std::string& idx_labels = "");

struct RunRecord {
    std::string run_id, domain, variant;
    double alpha = 0.0;
    int rep = 0;
    uint64_t seed = 0;
    std::vector<MetricsRow> epochs;  // epoch 0 = before any semantic-loss training
    MetricsRow initial, final_raw;
    double smooth_acc = 0.0, smooth_fid = 0.0;  // trailing-window headline
    int zero_mass_events = 0, skipped_steps = 0;
    uint64_t train_hash = 0, test_hash = 0;
    double wall_seconds = 0.0;
};

// Cross-entropy training of the unsegmented extractor on corrupted feature
// labels. The rng draws for corruption and training derive from rep_seed and
// alpha, so repeated calls reproduce the same weights.
Network<float> pretrain_extractor_ts(const TsRepData& rep, double alpha, const RunConfig& cfg,
                                     uint64_t rep_seed);
Network<float> pretrain_extractor_chess(const ChessData& data, double alpha, const RunConfig& cfg,
                                        uint64_t rep_seed);

// Semantic-loss training of one variant, with a test evaluation before
// training and after every epoch. `pretrained` seeds N1 and must be null
// otherwise.
RunRecord run_variant_ts(const RunConfig& cfg, const TsRepData& rep, int rep_index,
                         const Network<float>* pretrained);
RunRecord run_variant_chess(const RunConfig& cfg, const ChessData& data, int rep_index,
                            const Network<float>* pretrained);

// deduction + scoring of a trained extractor on a test set
std::vector<EvalRecord> evaluate_ts(const Network<float>& net, const Dataset& test,
                                    const Theory& theory, bool segmented);
std::vector<EvalRecord> evaluate_chess(const Network<float>& net, const Dataset& test,
                                       const FeedbackSet& fb, bool segmented);

// fraction of (instance, feature) pairs whose per-group argmax hits the
// stored assignment; used to sanity-check pretraining
double per_feature_accuracy(const Network<float>& net, const Dataset& d);

// one protocol cell to execute: variant plus (for N1) its corruption rate
struct VariantSpec {
    std::string variant;
    double alpha = 0.0;
};

// The full repetition protocol over shared per-rep data. When out_dir is
// nonempty, per-run metrics CSVs land there.
std::vector<RunRecord> run_experiment(const RunConfig& base, const std::vector<VariantSpec>& variants,
                                      const std::string& out_dir = "");

struct SummaryCell {
    std::string variant;
    double alpha = 0.0;
    int n = 0;  // repetitions aggregated
    double acc_mean = 0.0, acc_std = 0.0;
    double fid_mean = 0.0, fid_std = 0.0;
    std::vector<double> f1_mean, f1_std;
    // epoch-0 aggregates: for N1 this is the pretrain-only model
    double init_acc_mean = 0.0, init_fid_mean = 0.0;
};

struct ConjectureCheck {
    std::string left, right;  // e.g. "N" vs "N1@0.1"
    bool holds = false;
};

struct Summary {
    std::string domain;
    std::vector<SummaryCell> cells;            // N first, N1 by alpha, N0 last
    std::vector<ConjectureCheck> conjectures;  // strict-dominance comparisons
    int zero_mass_events = 0;
};

Summary aggregate_report(const std::vector<RunRecord>& records);
const SummaryCell* find_cell(const Summary& s, const std::string& variant, double alpha = 0.0);

std::string summary_csv(const Summary& s);
std::string summary_json_text(const Summary& s);
Summary parse_summary_json(const std::string& text);

// per-alpha grouped bars, pretrain-only vs fine-tuned; byte-deterministic
std::string plot_csv(const Summary& s);
std::string plot_svg(const Summary& s);
void emit_plots(const Summary& s, const std::string& out_dir);

}  // namespace nesy
