#include "nesy/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace nesy {

namespace {

uint64_t dseed(uint64_t seed, const std::string& tag) { return derive_seed(seed, fnv1a(tag)); }
uint64_t dseed(uint64_t seed, const std::string& tag, uint64_t b) {
    return derive_seed(seed, fnv1a(tag), b);
}

std::string fmt_alpha(double a) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", a);
    return buf;
}

std::string fmt6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

double vec_mean(const std::vector<double>& xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
}

// sample standard deviation; 0 for a single observation
double vec_std(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double mu = vec_mean(xs);
    double ss = 0.0;
    for (const double x : xs) ss += (x - mu) * (x - mu);
    return std::sqrt(ss / (xs.size() - 1));
}

// Per-sample semantic loss over consecutive logit rows (row width = summed
// domain sizes of fb.space). Rows hitting zero feedback mass contribute no
// gradient; the rest are scaled to a mean. Returns the zero-mass count.
int semloss_apply(const float* logits, int nsamp, const FeedbackSet& fb, const int* labels,
                  float* dlogits) {
    size_t width = 0;
    for (size_t f = 0; f < fb.space.num_features(); ++f) width += fb.space.domain_size(f);
    std::vector<double> row(width);
    int zero = 0;
    for (int i = 0; i < nsamp; ++i) {
        const float* lr = logits + static_cast<size_t>(i) * width;
        for (size_t j = 0; j < width; ++j) row[j] = lr[j];
        const GroupedDistribution dist = grouped_softmax(row, fb.space);
        const SemLossResult res = semantic_loss(dist, fb.sets[labels[i]]);
        if (res.zero_mass) {
            ++zero;
            continue;
        }
        float* dr = dlogits + static_cast<size_t>(i) * width;
        for (size_t j = 0; j < width; ++j) dr[j] = static_cast<float>(res.dlogits[j]);
    }
    const int used = nsamp - zero;
    if (used > 0) {
        const float s = 1.0f / used;
        for (size_t j = 0; j < static_cast<size_t>(nsamp) * width; ++j) dlogits[j] *= s;
    }
    return zero;
}

// cell f of the 3x3 board grid: column f%3, board row f/3 counted from the
// bottom, so pixel rows run from the top
void split_board_cells(const float* board, float* cells) {
    for (int f = 0; f < 9; ++f) {
        const int x = f % 3, y = f / 3;
        const int r0 = (2 - y) * 28, c0 = x * 28;
        for (int r = 0; r < 28; ++r)
            std::copy_n(board + (r0 + r) * 84 + c0, 28, cells + (static_cast<size_t>(f) * 28 + r) * 28);
    }
}

int argmax_group(const float* v, int n) {
    int best = 0;
    for (int j = 1; j < n; ++j)
        if (v[j] > v[best]) best = j;
    return best;
}

MetricsRow make_row(const std::string& run_id, const std::string& variant, double alpha, int epoch,
                    const std::vector<EvalRecord>& recs, const FeatureSpace& space) {
    MetricsRow row;
    row.run_id = run_id;
    row.variant = variant;
    row.alpha = alpha;
    row.epoch = epoch;
    row.pred_acc = predictive_accuracy(recs);
    row.expl_fid = explanatory_fidelity(recs);
    row.f1 = feature_f1(recs, space);
    return row;
}

struct EpochStats {
    int zero_mass = 0;
    int skipped = 0;
};

// One pass of semantic-loss minibatch training. `sub` is the number of
// network inputs per dataset item (segments); `gather` copies item i into the
// batch buffer.
template <class Gather>
EpochStats semloss_epoch(Network<float>& net, const Dataset& ds, const FeedbackSet& fb, int sub,
                         int batch, double lr, Rng& order_rng, Rng& drop_rng, Gather&& gather) {
    EpochStats st;
    const int item = ds.item_size();
    const size_t in_numel = net.bounds.front().numel();
    const int outw = net.arch.output_width();
    std::vector<int> idx(ds.n);
    std::iota(idx.begin(), idx.end(), 0);
    order_rng.shuffle(idx);

    std::vector<float> input(static_cast<size_t>(batch) * item);
    std::vector<float> logits(static_cast<size_t>(batch) * sub * outw);
    std::vector<float> dlogits(logits.size());
    std::vector<int> labels(batch);
    FwdCache<float> cache;

    for (int s0 = 0; s0 < ds.n; s0 += batch) {
        const int nb = std::min(batch, ds.n - s0);
        for (int k = 0; k < nb; ++k) {
            gather(ds.item(idx[s0 + k]), input.data() + static_cast<size_t>(k) * item);
            labels[k] = ds.label[idx[s0 + k]];
        }
        if (static_cast<size_t>(item) != in_numel * sub)
            throw std::runtime_error("train: item size does not match network input");
        forward(net, input.data(), nb * sub, logits.data(), &cache, &drop_rng);
        std::fill(dlogits.begin(), dlogits.end(), 0.0f);
        const int zm = semloss_apply(logits.data(), nb, fb, labels.data(), dlogits.data());
        st.zero_mass += zm;
        if (zm == nb) {
            ++st.skipped;
            continue;
        }
        zero_grad(net);
        backward(net, cache, dlogits.data());
        if (!adam_step(net, lr)) ++st.skipped;
    }
    return st;
}

void finalize_record(RunRecord& rec, std::chrono::steady_clock::time_point t0) {
    rec.initial = rec.epochs.front();
    rec.final_raw = rec.epochs.back();
    std::vector<double> acc, fid;
    for (size_t i = 1; i < rec.epochs.size(); ++i) {
        acc.push_back(rec.epochs[i].pred_acc);
        fid.push_back(rec.epochs[i].expl_fid);
    }
    if (acc.empty()) {  // zero training epochs
        acc.push_back(rec.initial.pred_acc);
        fid.push_back(rec.initial.expl_fid);
    }
    rec.smooth_acc = running_average(acc, 100).back();
    rec.smooth_fid = running_average(fid, 100).back();
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// fine-tuning starts from pretrained weights but with a fresh optimizer
void reset_optimizer(Network<float>& net) {
    net.step = 0;
    for (auto& l : net.layers)
        for (auto* p : {&l.weight, &l.bias}) {
            std::fill(p->m.begin(), p->m.end(), 0.0f);
            std::fill(p->v.begin(), p->v.end(), 0.0f);
        }
}

}  // namespace

int RunConfig::resolved_reps() const { return reps > 0 ? reps : (full_scale ? 5 : 3); }

int RunConfig::resolved_epochs() const {
    if (epochs >= 0) return epochs;
    if (domain == "chess") return full_scale ? 15 : 5;
    // desk scale shortens only the fine-tuned variants; the segmented model
    // trains from scratch and keeps its full schedule
    if (variant == "N") return 300;
    return full_scale ? 300 : 100;
}

double RunConfig::resolved_lr() const {
    if (lr > 0) return lr;
    if (domain == "chess") return variant == "N" ? 1e-3 : 1e-5;
    return 1e-4;
}

int RunConfig::resolved_batch() const {
    if (batch > 0) return batch;
    return domain == "chess" ? 1 : 64;
}

int RunConfig::resolved_pretrain_epochs() const {
    if (pretrain_epochs >= 0) return pretrain_epochs;
    return domain == "chess" ? 40 : 200;
}

double RunConfig::resolved_pretrain_lr() const { return pretrain_lr > 0 ? pretrain_lr : 1e-4; }

int RunConfig::resolved_pretrain_batch() const { return pretrain_batch > 0 ? pretrain_batch : 64; }

int RunConfig::resolved_chess_train() const {
    if (chess_train > 0) return chess_train;
    return full_scale ? 9000 : 1000;
}

int RunConfig::resolved_chess_test() const {
    if (chess_test > 0) return chess_test;
    return full_scale ? 2000 : 500;
}

RunConfig parse_config_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    RunConfig c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("domain", c.domain);
    get("variant", c.variant);
    get("alpha", c.alpha);
    get("reps", c.reps);
    get("seed", c.seed);
    get("lower", c.lower);
    get("upper", c.upper);
    get("sigma", c.sigma);
    get("full_scale", c.full_scale);
    get("epochs", c.epochs);
    get("lr", c.lr);
    get("batch", c.batch);
    get("pretrain_epochs", c.pretrain_epochs);
    get("pretrain_lr", c.pretrain_lr);
    get("pretrain_batch", c.pretrain_batch);
    get("chess_train", c.chess_train);
    get("chess_test", c.chess_test);
    get("theory_path", c.theory_path);
    get("glyph_images", c.glyph_images);
    get("glyph_labels", c.glyph_labels);
    get("out_dir", c.out_dir);
    if (c.domain != "ts" && c.domain != "chess") throw std::runtime_error("config: unknown domain");
    if (c.variant != "N" && c.variant != "N1" && c.variant != "N0")
        throw std::runtime_error("config: unknown variant");
    if (c.alpha < 0.0 || c.alpha > 1.0) throw std::runtime_error("config: alpha outside [0,1]");
    return c;
}

std::string config_json(const RunConfig& c) {
    nlohmann::json j;
    j["domain"] = c.domain;
    j["variant"] = c.variant;
    j["alpha"] = c.alpha;
    j["reps"] = c.reps;
    j["seed"] = c.seed;
    j["lower"] = c.lower;
    j["upper"] = c.upper;
    j["sigma"] = c.sigma;
    j["full_scale"] = c.full_scale;
    j["epochs"] = c.epochs;
    j["lr"] = c.lr;
    j["batch"] = c.batch;
    j["pretrain_epochs"] = c.pretrain_epochs;
    j["pretrain_lr"] = c.pretrain_lr;
    j["pretrain_batch"] = c.pretrain_batch;
    j["chess_train"] = c.chess_train;
    j["chess_test"] = c.chess_test;
    j["theory_path"] = c.theory_path;
    j["glyph_images"] = c.glyph_images;
    j["glyph_labels"] = c.glyph_labels;
    j["out_dir"] = c.out_dir;
    return j.dump(2) + "\n";
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_json(ss.str());
}

void save_config(const std::string& path, const RunConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("config: cannot write " + path);
    out << config_json(cfg);
}

TsRepData make_ts_rep(uint64_t rep_seed, double sigma, int lower, int upper,
                      const Theory* fixed_theory) {
    TsRepData rep;
    if (fixed_theory) {
        rep.theory = *fixed_theory;
    } else {
        Rng trng(dseed(rep_seed, "theory"));
        const FeatureSpace space = make_ts_space(trng);
        rep.theory = sample_theory(space, {"a", "b", "c"}, lower, upper, trng);
    }
    rep.feedback = build_feedback(rep.theory);

    rep.wide_theory = rep.theory;
    rep.wide_theory.space = ts_shape_space();
    for (auto& def : rep.wide_theory.defs)
        for (auto& conj : def)
            conj = map_assignment(conj, rep.theory.space, rep.wide_theory.space);
    canonicalize(rep.wide_theory);
    rep.wide_feedback = build_feedback(rep.wide_theory);

    Rng d256(dseed(rep_seed, "data"));
    Rng d150(dseed(rep_seed, "data"));
    rep.win256 = generate_ts_dataset(rep.theory, sigma, 256, d256);
    rep.win150 = generate_ts_dataset(rep.theory, sigma, 150, d150);
    if (rep.win256.train.stream_hash != rep.win150.train.stream_hash ||
        rep.win256.test.stream_hash != rep.win150.test.stream_hash)
        throw std::runtime_error("ts rep: window widths diverged from shared streams");

    // The segmented extractor consumes one segment at a time, so its windows
    // get per-segment normalization. Window-level statistics otherwise leak
    // the neighboring shapes into each segment, which lets training settle on
    // consistent but wrong shape labellings.
    for (Dataset* d : {&rep.win150.train, &rep.win150.test})
        for (int i = 0; i < d->n; ++i) renormalize_segments(d->item(i), 150);
    return rep;
}

ChessData make_chess_data(uint64_t seed, int n_train, int n_test, const std::string& idx_images,
                          const std::string& idx_labels) {
    ChessData data;
    data.theory = chess_theory();
    data.feedback = build_chess_feedback();

    GlyphSource train_glyphs, test_glyphs;
    if (!idx_images.empty()) {
        // one IDX source: even pool entries render train boards, odd test
        const GlyphSource all = load_glyphs_idx(idx_images, idx_labels);
        for (int c = 0; c < 8; ++c) {
            for (size_t i = 0; i < all.pools[c].size(); ++i)
                (i % 2 ? test_glyphs : train_glyphs).pools[c].push_back(all.pools[c][i]);
            if (train_glyphs.pools[c].empty() || test_glyphs.pools[c].empty())
                throw std::runtime_error("chess data: IDX pool too small to split");
        }
    } else {
        Rng g0(dseed(seed, "glyphs-train"));
        Rng g1(dseed(seed, "glyphs-test"));
        train_glyphs = synthetic_glyphs(g0);
        test_glyphs = synthetic_glyphs(g1);
    }

    Rng btrain(dseed(seed, "boards-train"));
    Rng btest(dseed(seed, "boards-test"));
    data.train = generate_chess_dataset(n_train, train_glyphs, data.feedback, btrain);
    data.test = generate_chess_dataset(n_test, test_glyphs, data.feedback, btest);
    return data;
}

std::vector<EvalRecord> evaluate_ts(const Network<float>& net, const Dataset& test,
                                    const Theory& theory, bool segmented) {
    const FeatureSpace wide = ts_shape_space();
    // per conjunct, its value indices in the widened per-segment space
    std::vector<std::vector<std::array<int, 3>>> wide_idx(theory.defs.size());
    if (segmented)
        for (size_t c = 0; c < theory.defs.size(); ++c)
            for (const auto& conj : theory.defs[c]) {
                std::array<int, 3> g{};
                for (size_t f = 0; f < 3; ++f) {
                    g[f] = wide.value_index(f, theory.space.domains[f][conj.v[f]]);
                    if (g[f] < 0) throw std::runtime_error("evaluate: shape missing from wide space");
                }
                wide_idx[c].push_back(g);
            }

    const int sub = segmented ? 3 : 1;
    const int outw = net.arch.output_width();
    const size_t width = static_cast<size_t>(sub) * outw;
    const int chunk = 128;
    std::vector<float> logits(static_cast<size_t>(chunk) * width);
    std::vector<double> row(width);
    std::vector<EvalRecord> recs(test.n);

    for (int s0 = 0; s0 < test.n; s0 += chunk) {
        const int nb = std::min(chunk, test.n - s0);
        forward(net, test.item(s0), nb * sub, logits.data());
        for (int k = 0; k < nb; ++k) {
            const float* lr = logits.data() + static_cast<size_t>(k) * width;
            for (size_t j = 0; j < width; ++j) row[j] = lr[j];
            EvalRecord& rec = recs[s0 + k];
            rec.truth = test.label[s0 + k];
            rec.generating = test.truth[s0 + k];
            if (!segmented) {
                const GroupedDistribution dist = grouped_softmax(row, theory.space);
                const Deduction d = deduce_max_conjunct(dist, theory);
                rec.pred = d.label;
                rec.extracted = d.extracted;
            } else {
                // Segments always carry feature 1 first, but test windows may
                // play the remaining two shapes in either order, so a
                // conjunct's score is the better of the two segment matchings.
                const GroupedDistribution dist = grouped_softmax(row, wide);
                double best = -1.0;
                for (size_t c = 0; c < theory.defs.size(); ++c)
                    for (size_t ci = 0; ci < theory.defs[c].size(); ++ci) {
                        const auto& g = wide_idx[c][ci];
                        const double straight = dist.p[0][g[0]] * dist.p[1][g[1]] * dist.p[2][g[2]];
                        const double swapped = dist.p[0][g[0]] * dist.p[1][g[2]] * dist.p[2][g[1]];
                        const double score = std::max(straight, swapped);
                        if (score > best) {
                            best = score;
                            rec.pred = static_cast<int>(c);
                            rec.extracted = theory.defs[c][ci];
                        }
                    }
            }
            rec.valid = true;
        }
    }
    return recs;
}

std::vector<EvalRecord> evaluate_chess(const Network<float>& net, const Dataset& test,
                                       const FeedbackSet& fb, bool segmented) {
    const int sub = segmented ? 9 : 1;
    const int outw = net.arch.output_width();
    const size_t width = static_cast<size_t>(sub) * outw;
    const int chunk = 64;
    const int item = test.item_size();
    std::vector<float> input(static_cast<size_t>(chunk) * item);
    std::vector<float> logits(static_cast<size_t>(chunk) * width);
    std::vector<EvalRecord> recs(test.n);

    for (int s0 = 0; s0 < test.n; s0 += chunk) {
        const int nb = std::min(chunk, test.n - s0);
        if (segmented) {
            for (int k = 0; k < nb; ++k)
                split_board_cells(test.item(s0 + k), input.data() + static_cast<size_t>(k) * item);
            forward(net, input.data(), nb * sub, logits.data());
        } else {
            forward(net, test.item(s0), nb, logits.data());
        }
        for (int k = 0; k < nb; ++k) {
            const float* lr = logits.data() + static_cast<size_t>(k) * width;
            Assignment a;
            a.v.resize(9);
            for (int f = 0; f < 9; ++f) a.v[f] = static_cast<uint8_t>(argmax_group(lr + f * 8, 8));
            const Deduction d = deduce_exact_match(a, fb);
            EvalRecord& rec = recs[s0 + k];
            rec.truth = test.label[s0 + k];
            rec.generating = test.truth[s0 + k];
            rec.pred = d.label;
            rec.valid = d.label >= 0;
            rec.extracted = a;
        }
    }
    return recs;
}

double per_feature_accuracy(const Network<float>& net, const Dataset& d) {
    const auto& groups = net.arch.groups;
    const int outw = net.arch.output_width();
    const int chunk = 128;
    std::vector<float> logits(static_cast<size_t>(chunk) * outw);
    size_t hits = 0, total = 0;
    for (int s0 = 0; s0 < d.n; s0 += chunk) {
        const int nb = std::min(chunk, d.n - s0);
        forward(net, d.item(s0), nb, logits.data());
        for (int k = 0; k < nb; ++k) {
            const float* lr = logits.data() + static_cast<size_t>(k) * outw;
            int off = 0;
            for (size_t f = 0; f < groups.size(); ++f) {
                if (argmax_group(lr + off, groups[f]) == d.truth[s0 + k].v[f]) ++hits;
                ++total;
                off += groups[f];
            }
        }
    }
    return static_cast<double>(hits) / total;
}

namespace {

// shared cross-entropy pretraining loop over (input, assignment) pairs
Network<float> pretrain_loop(const ArchSpec& arch, const Dataset& ds,
                             const std::vector<Assignment>& targets, int epochs, double lr,
                             int batch, uint64_t seed_init, uint64_t seed_shuffle,
                             uint64_t seed_drop) {
    Rng init(seed_init);
    Network<float> net = make_network<float>(arch, init);
    const int G = static_cast<int>(arch.groups.size());
    const int outw = net.arch.output_width();
    const int item = ds.item_size();

    Rng order_rng(seed_shuffle);
    Rng drop_rng(seed_drop);
    std::vector<int> idx(ds.n);
    std::vector<float> input(static_cast<size_t>(batch) * item);
    std::vector<float> logits(static_cast<size_t>(batch) * outw);
    std::vector<float> dlogits(logits.size());
    std::vector<int> tgt(static_cast<size_t>(batch) * G);
    FwdCache<float> cache;

    for (int e = 0; e < epochs; ++e) {
        std::iota(idx.begin(), idx.end(), 0);
        order_rng.shuffle(idx);
        for (int s0 = 0; s0 < ds.n; s0 += batch) {
            const int nb = std::min(batch, ds.n - s0);
            for (int k = 0; k < nb; ++k) {
                const int i = idx[s0 + k];
                std::copy_n(ds.item(i), item, input.data() + static_cast<size_t>(k) * item);
                for (int g = 0; g < G; ++g) tgt[static_cast<size_t>(k) * G + g] = targets[i].v[g];
            }
            forward(net, input.data(), nb, logits.data(), &cache, &drop_rng);
            cross_entropy(logits.data(), nb, arch.groups, tgt.data(), dlogits.data());
            zero_grad(net);
            backward(net, cache, dlogits.data());
            adam_step(net, lr);
        }
    }
    return net;
}

}  // namespace

Network<float> pretrain_extractor_ts(const TsRepData& rep, double alpha, const RunConfig& cfg,
                                     uint64_t rep_seed) {
    const std::string tag = "a" + fmt_alpha(alpha);
    Rng crng(dseed(rep_seed, "corrupt-" + tag));
    const Dataset corrupted = corrupt_ts_labels(rep.win256.train, alpha, crng);
    return pretrain_loop(ts_window_arch(), corrupted, corrupted.truth,
                         cfg.resolved_pretrain_epochs(), cfg.resolved_pretrain_lr(),
                         cfg.resolved_pretrain_batch(), dseed(rep_seed, "pre-init-" + tag),
                         dseed(rep_seed, "pre-shuffle-" + tag), dseed(rep_seed, "pre-drop-" + tag));
}

Network<float> pretrain_extractor_chess(const ChessData& data, double alpha, const RunConfig& cfg,
                                        uint64_t rep_seed) {
    const std::string tag = "a" + fmt_alpha(alpha);
    Rng crng(dseed(rep_seed, "corrupt-" + tag));
    std::vector<Assignment> targets(data.train.n);
    for (int i = 0; i < data.train.n; ++i) {
        const Board b = assignment_to_board(data.train.truth[i]);
        targets[i] = pieces_to_assignment(corrupt_pieces(b, alpha, crng));
    }
    return pretrain_loop(chess_board_arch(), data.train, targets, cfg.resolved_pretrain_epochs(),
                         cfg.resolved_pretrain_lr(), cfg.resolved_pretrain_batch(),
                         dseed(rep_seed, "pre-init-" + tag), dseed(rep_seed, "pre-shuffle-" + tag),
                         dseed(rep_seed, "pre-drop-" + tag));
}

namespace {

RunRecord init_record(const RunConfig& cfg, int rep_index) {
    RunRecord rec;
    rec.domain = cfg.domain;
    rec.variant = cfg.variant;
    rec.alpha = cfg.variant == "N1" ? cfg.alpha : 0.0;
    rec.rep = rep_index;
    rec.seed = cfg.seed;
    rec.run_id = cfg.domain + "-" + cfg.variant +
                 (cfg.variant == "N1" ? "-a" + fmt_alpha(cfg.alpha) : "") + "-r" +
                 std::to_string(rep_index);
    return rec;
}

void check_variant(const RunConfig& cfg, const Network<float>* pretrained) {
    if (cfg.variant != "N" && cfg.variant != "N1" && cfg.variant != "N0")
        throw std::runtime_error("run: unknown variant " + cfg.variant);
    if ((cfg.variant == "N1") != (pretrained != nullptr))
        throw std::runtime_error("run: pretrained weights required iff variant is N1");
}

}  // namespace

RunRecord run_variant_ts(const RunConfig& cfg, const TsRepData& rep, int rep_index,
                         const Network<float>* pretrained) {
    check_variant(cfg, pretrained);
    const auto t0 = std::chrono::steady_clock::now();
    const bool seg = cfg.variant == "N";
    const Dataset& train = seg ? rep.win150.train : rep.win256.train;
    const Dataset& test = seg ? rep.win150.test : rep.win256.test;
    const FeedbackSet& fb = seg ? rep.wide_feedback : rep.feedback;
    const uint64_t rep_seed = dseed(cfg.seed, "rep", rep_index);

    RunRecord rec = init_record(cfg, rep_index);
    rec.train_hash = train.content_hash();
    rec.test_hash = test.content_hash();

    Network<float> net;
    if (pretrained) {
        net = *pretrained;
        reset_optimizer(net);
    } else {
        Rng init(dseed(rep_seed, "init-" + cfg.variant));
        net = make_network<float>(seg ? ts_segment_arch() : ts_window_arch(), init);
    }

    auto eval_row = [&](int epoch) {
        return make_row(rec.run_id, cfg.variant, rec.alpha, epoch,
                        evaluate_ts(net, test, rep.theory, seg), rep.theory.space);
    };
    rec.epochs.push_back(eval_row(0));

    const std::string tag = cfg.variant + (cfg.variant == "N1" ? "-a" + fmt_alpha(cfg.alpha) : "");
    Rng order_rng(dseed(rep_seed, "shuffle-" + tag));
    Rng drop_rng(dseed(rep_seed, "drop-" + tag));
    const int E = cfg.resolved_epochs();
    for (int e = 1; e <= E; ++e) {
        const EpochStats st =
            semloss_epoch(net, train, fb, seg ? 3 : 1, cfg.resolved_batch(), cfg.resolved_lr(),
                          order_rng, drop_rng,
                          [&](const float* src, float* dst) { std::copy_n(src, train.item_size(), dst); });
        rec.zero_mass_events += st.zero_mass;
        rec.skipped_steps += st.skipped;
        rec.epochs.push_back(eval_row(e));
    }

    if (test.content_hash() != rec.test_hash)
        throw std::runtime_error("run: test data changed during training");
    finalize_record(rec, t0);
    return rec;
}

RunRecord run_variant_chess(const RunConfig& cfg, const ChessData& data, int rep_index,
                            const Network<float>* pretrained) {
    check_variant(cfg, pretrained);
    const auto t0 = std::chrono::steady_clock::now();
    const bool seg = cfg.variant == "N";
    const uint64_t rep_seed = dseed(cfg.seed, "rep", rep_index);

    RunRecord rec = init_record(cfg, rep_index);
    rec.train_hash = data.train.content_hash();
    rec.test_hash = data.test.content_hash();

    Network<float> net;
    if (pretrained) {
        net = *pretrained;
        reset_optimizer(net);
    } else {
        Rng init(dseed(rep_seed, "init-" + cfg.variant));
        net = make_network<float>(seg ? chess_cell_arch() : chess_board_arch(), init);
    }

    auto eval_row = [&](int epoch) {
        return make_row(rec.run_id, cfg.variant, rec.alpha, epoch,
                        evaluate_chess(net, data.test, data.feedback, seg), data.theory.space);
    };
    rec.epochs.push_back(eval_row(0));

    const std::string tag = cfg.variant + (cfg.variant == "N1" ? "-a" + fmt_alpha(cfg.alpha) : "");
    Rng order_rng(dseed(rep_seed, "shuffle-" + tag));
    Rng drop_rng(dseed(rep_seed, "drop-" + tag));
    const int E = cfg.resolved_epochs();
    const int item = data.train.item_size();
    for (int e = 1; e <= E; ++e) {
        EpochStats st;
        if (seg) {
            st = semloss_epoch(net, data.train, data.feedback, 9, cfg.resolved_batch(),
                               cfg.resolved_lr(), order_rng, drop_rng,
                               [&](const float* src, float* dst) { split_board_cells(src, dst); });
        } else {
            st = semloss_epoch(net, data.train, data.feedback, 1, cfg.resolved_batch(),
                               cfg.resolved_lr(), order_rng, drop_rng,
                               [&](const float* src, float* dst) { std::copy_n(src, item, dst); });
        }
        rec.zero_mass_events += st.zero_mass;
        rec.skipped_steps += st.skipped;
        rec.epochs.push_back(eval_row(e));
    }

    if (data.test.content_hash() != rec.test_hash)
        throw std::runtime_error("run: test data changed during training");
    finalize_record(rec, t0);
    return rec;
}

std::vector<RunRecord> run_experiment(const RunConfig& base, const std::vector<VariantSpec>& variants,
                                      const std::string& out_dir) {
    if (variants.empty()) throw std::runtime_error("experiment: no variants requested");
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    std::vector<RunRecord> records;
    const int R = base.resolved_reps();

    Theory fixed_theory;
    const bool have_fixed = !base.theory_path.empty();
    if (have_fixed) fixed_theory = load_theory(base.theory_path);

    ChessData chess;
    if (base.domain == "chess")
        chess = make_chess_data(base.seed, base.resolved_chess_train(), base.resolved_chess_test(),
                                base.glyph_images, base.glyph_labels);

    for (int rep = 0; rep < R; ++rep) {
        const uint64_t rep_seed = dseed(base.seed, "rep", rep);
        TsRepData ts;
        if (base.domain == "ts")
            ts = make_ts_rep(rep_seed, base.sigma, base.lower, base.upper,
                             have_fixed ? &fixed_theory : nullptr);

        std::map<double, Network<float>> pretrained;
        for (const auto& vs : variants) {
            RunConfig cfg = base;
            cfg.variant = vs.variant;
            cfg.alpha = vs.alpha;
            const Network<float>* pnet = nullptr;
            if (vs.variant == "N1") {
                auto it = pretrained.find(vs.alpha);
                if (it == pretrained.end())
                    it = pretrained
                             .emplace(vs.alpha, base.domain == "ts"
                                                    ? pretrain_extractor_ts(ts, vs.alpha, cfg, rep_seed)
                                                    : pretrain_extractor_chess(chess, vs.alpha, cfg,
                                                                               rep_seed))
                             .first;
                pnet = &it->second;
            }
            RunRecord rec = base.domain == "ts" ? run_variant_ts(cfg, ts, rep, pnet)
                                                : run_variant_chess(cfg, chess, rep, pnet);
            if (!out_dir.empty())
                save_metrics_csv(out_dir + "/" + rec.run_id + "-metrics.csv", rec.epochs);
            records.push_back(std::move(rec));
        }
    }
    return records;
}

Summary aggregate_report(const std::vector<RunRecord>& records) {
    if (records.empty()) throw std::runtime_error("report: no records");
    Summary s;
    s.domain = records.front().domain;

    // cell key -> record indices, ordered N, N1 by alpha, N0
    auto cell_rank = [](const RunRecord& r) {
        if (r.variant == "N") return std::pair<int, double>(0, 0.0);
        if (r.variant == "N1") return std::pair<int, double>(1, r.alpha);
        return std::pair<int, double>(2, 0.0);
    };
    std::map<std::pair<int, double>, std::vector<const RunRecord*>> cells;
    for (const auto& r : records) {
        cells[cell_rank(r)].push_back(&r);
        s.zero_mass_events += r.zero_mass_events;
    }

    for (const auto& [key, recs] : cells) {
        SummaryCell cell;
        cell.variant = recs.front()->variant;
        cell.alpha = recs.front()->alpha;
        cell.n = static_cast<int>(recs.size());
        std::vector<double> acc, fid, iacc, ifid;
        for (const auto* r : recs) {
            acc.push_back(r->final_raw.pred_acc);
            fid.push_back(r->final_raw.expl_fid);
            iacc.push_back(r->initial.pred_acc);
            ifid.push_back(r->initial.expl_fid);
        }
        cell.acc_mean = vec_mean(acc);
        cell.acc_std = vec_std(acc);
        cell.fid_mean = vec_mean(fid);
        cell.fid_std = vec_std(fid);
        cell.init_acc_mean = vec_mean(iacc);
        cell.init_fid_mean = vec_mean(ifid);
        const size_t nf = recs.front()->final_raw.f1.size();
        for (size_t f = 0; f < nf; ++f) {
            std::vector<double> v;
            for (const auto* r : recs) v.push_back(r->final_raw.f1[f]);
            cell.f1_mean.push_back(vec_mean(v));
            cell.f1_std.push_back(vec_std(v));
        }
        s.cells.push_back(std::move(cell));
    }

    const SummaryCell* n = find_cell(s, "N");
    const SummaryCell* n0 = find_cell(s, "N0");
    auto add_check = [&](const std::string& l, const SummaryCell& a, const std::string& r,
                         const SummaryCell& b) {
        s.conjectures.push_back({l, r, better(a.acc_mean, a.fid_mean, b.acc_mean, b.fid_mean)});
    };
    if (n && n0) add_check("N", *n, "N0", *n0);
    for (const auto& cell : s.cells)
        if (cell.variant == "N1") {
            const std::string name = "N1@" + fmt_alpha(cell.alpha);
            if (n) add_check("N", *n, name, cell);
            if (n0) add_check(name, cell, "N0", *n0);
        }
    return s;
}

const SummaryCell* find_cell(const Summary& s, const std::string& variant, double alpha) {
    for (const auto& c : s.cells)
        if (c.variant == variant && (variant != "N1" || std::abs(c.alpha - alpha) < 1e-12)) return &c;
    return nullptr;
}

std::string summary_csv(const Summary& s) {
    std::string out =
        "variant,alpha,reps,pred_acc_mean,pred_acc_std,expl_fid_mean,expl_fid_std,"
        "init_acc_mean,init_fid_mean";
    for (int f = 1; f <= 9; ++f)
        out += ",f1_f" + std::to_string(f) + "_mean,f1_f" + std::to_string(f) + "_std";
    out += "\n";
    for (const auto& c : s.cells) {
        out += c.variant + "," + fmt_alpha(c.alpha) + "," + std::to_string(c.n) + "," +
               fmt6(c.acc_mean) + "," + fmt6(c.acc_std) + "," + fmt6(c.fid_mean) + "," +
               fmt6(c.fid_std) + "," + fmt6(c.init_acc_mean) + "," + fmt6(c.init_fid_mean);
        for (size_t f = 0; f < 9; ++f) {
            if (f < c.f1_mean.size())
                out += "," + fmt6(c.f1_mean[f]) + "," + fmt6(c.f1_std[f]);
            else
                out += ",,";
        }
        out += "\n";
    }
    return out;
}

std::string summary_json_text(const Summary& s) {
    nlohmann::json j;
    j["domain"] = s.domain;
    j["zero_mass_events"] = s.zero_mass_events;
    j["cells"] = nlohmann::json::array();
    for (const auto& c : s.cells) {
        nlohmann::json jc;
        jc["variant"] = c.variant;
        jc["alpha"] = c.alpha;
        jc["reps"] = c.n;
        jc["pred_acc_mean"] = c.acc_mean;
        jc["pred_acc_std"] = c.acc_std;
        jc["expl_fid_mean"] = c.fid_mean;
        jc["expl_fid_std"] = c.fid_std;
        jc["init_acc_mean"] = c.init_acc_mean;
        jc["init_fid_mean"] = c.init_fid_mean;
        jc["f1_mean"] = c.f1_mean;
        jc["f1_std"] = c.f1_std;
        j["cells"].push_back(jc);
    }
    j["conjectures"] = nlohmann::json::array();
    for (const auto& cj : s.conjectures)
        j["conjectures"].push_back({{"left", cj.left}, {"right", cj.right}, {"holds", cj.holds}});
    return j.dump(2) + "\n";
}

Summary parse_summary_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    Summary s;
    s.domain = j.at("domain").get<std::string>();
    s.zero_mass_events = j.value("zero_mass_events", 0);
    for (const auto& jc : j.at("cells")) {
        SummaryCell c;
        c.variant = jc.at("variant").get<std::string>();
        c.alpha = jc.at("alpha").get<double>();
        c.n = jc.at("reps").get<int>();
        c.acc_mean = jc.at("pred_acc_mean").get<double>();
        c.acc_std = jc.at("pred_acc_std").get<double>();
        c.fid_mean = jc.at("expl_fid_mean").get<double>();
        c.fid_std = jc.at("expl_fid_std").get<double>();
        c.init_acc_mean = jc.at("init_acc_mean").get<double>();
        c.init_fid_mean = jc.at("init_fid_mean").get<double>();
        c.f1_mean = jc.at("f1_mean").get<std::vector<double>>();
        c.f1_std = jc.at("f1_std").get<std::vector<double>>();
        s.cells.push_back(std::move(c));
    }
    if (j.contains("conjectures"))
        for (const auto& jc : j.at("conjectures"))
            s.conjectures.push_back({jc.at("left").get<std::string>(),
                                     jc.at("right").get<std::string>(),
                                     jc.at("holds").get<bool>()});
    return s;
}

namespace {

std::vector<const SummaryCell*> pretrain_cells(const Summary& s) {
    std::vector<const SummaryCell*> ptr;
    for (const auto& c : s.cells)
        if (c.variant == "N1") ptr.push_back(&c);
    if (ptr.empty()) throw std::runtime_error("plot: summary holds no pretrained cells");
    return ptr;  // cells are already sorted by alpha
}

}  // namespace

std::string plot_csv(const Summary& s) {
    std::string out = "alpha,pretrain_acc,finetuned_acc,pretrain_fid,finetuned_fid\n";
    for (const auto* c : pretrain_cells(s))
        out += fmt_alpha(c->alpha) + "," + fmt6(c->init_acc_mean) + "," + fmt6(c->acc_mean) + "," +
               fmt6(c->init_fid_mean) + "," + fmt6(c->fid_mean) + "\n";
    return out;
}

std::string plot_svg(const Summary& s) {
    const auto cells = pretrain_cells(s);
    const int ng = static_cast<int>(cells.size());

    // two panels: class accuracy left, explanatory fidelity right
    const double pw = 330.0, ph = 230.0, top = 46.0;
    const double px[2] = {50.0, 420.0};
    std::string svg =
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"790\" height=\"330\" "
        "viewBox=\"0 0 790 330\" font-family=\"sans-serif\">\n"
        "<rect width=\"790\" height=\"330\" fill=\"#ffffff\"/>\n";
    char buf[256];

    const char* titles[2] = {"Class accuracy (%)", "Explanatory fidelity (%)"};
    for (int panel = 0; panel < 2; ++panel) {
        const double x0 = px[panel], y0 = top;
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%.1f\" y=\"30\" font-size=\"14\">%s</text>\n", x0, titles[panel]);
        svg += buf;
        for (int tick = 0; tick <= 4; ++tick) {
            const double v = 25.0 * tick;
            const double y = y0 + ph * (1.0 - v / 100.0);
            std::snprintf(buf, sizeof(buf),
                          "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                          "stroke=\"#dddddd\"/>\n",
                          x0, y, x0 + pw, y);
            svg += buf;
            std::snprintf(buf, sizeof(buf),
                          "<text x=\"%.1f\" y=\"%.1f\" font-size=\"10\" text-anchor=\"end\" "
                          "fill=\"#555555\">%.0f</text>\n",
                          x0 - 6.0, y + 3.5, v);
            svg += buf;
        }
        const double group_w = pw / ng;
        const double bar_w = group_w * 0.32;
        for (int g = 0; g < ng; ++g) {
            const double vals[2] = {
                panel == 0 ? cells[g]->init_acc_mean : cells[g]->init_fid_mean,
                panel == 0 ? cells[g]->acc_mean : cells[g]->fid_mean,
            };
            const char* fills[2] = {"#9aa5b1", "#3a6ea5"};
            for (int b = 0; b < 2; ++b) {
                const double h = ph * std::clamp(vals[b], 0.0, 1.0);
                const double bx = x0 + g * group_w + group_w * 0.5 + (b == 0 ? -bar_w : 0.0);
                std::snprintf(buf, sizeof(buf),
                              "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" "
                              "fill=\"%s\"/>\n",
                              bx, y0 + ph - h, bar_w, h, fills[b]);
                svg += buf;
                std::snprintf(buf, sizeof(buf),
                              "<text x=\"%.2f\" y=\"%.2f\" font-size=\"9\" text-anchor=\"middle\" "
                              "fill=\"#333333\">%.1f</text>\n",
                              bx + bar_w / 2.0, y0 + ph - h - 3.0, 100.0 * vals[b]);
                svg += buf;
            }
            std::snprintf(buf, sizeof(buf),
                          "<text x=\"%.2f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"middle\">"
                          "a=%s</text>\n",
                          x0 + g * group_w + group_w * 0.5, y0 + ph + 16.0,
                          fmt_alpha(cells[g]->alpha).c_str());
            svg += buf;
        }
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                      "stroke=\"#333333\"/>\n",
                      x0, y0 + ph, x0 + pw, y0 + ph);
        svg += buf;
    }
    svg +=
        "<rect x=\"560\" y=\"16\" width=\"12\" height=\"12\" fill=\"#9aa5b1\"/>"
        "<text x=\"576\" y=\"26\" font-size=\"11\">pretrain only</text>\n"
        "<rect x=\"660\" y=\"16\" width=\"12\" height=\"12\" fill=\"#3a6ea5\"/>"
        "<text x=\"676\" y=\"26\" font-size=\"11\">fine-tuned</text>\n"
        "</svg>\n";
    return svg;
}

void emit_plots(const Summary& s, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    for (const auto& [name, text] :
         {std::pair<std::string, std::string>{"pretrain_vs_finetune.csv", plot_csv(s)},
          {"pretrain_vs_finetune.svg", plot_svg(s)}}) {
        const std::string path = out_dir + "/" + name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("plot: cannot write " + path);
        out << text;
    }
}

}  // namespace nesy
