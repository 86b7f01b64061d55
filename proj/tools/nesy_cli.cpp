// Command-line front end: theory/data generation, feedback caches,
// pretraining, the full training protocol, and report/plot regeneration.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nesy/harness.hpp"

namespace fs = std::filesystem;
using namespace nesy;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

std::vector<double> parse_alpha_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    if (out.empty()) throw std::runtime_error("empty alpha list");
    return out;
}

// common flags shared by most subcommands; each returns the resolved config
struct CommonOpts {
    std::string config_path;
    std::string domain, variant, out;
    std::string alpha_list = "";
    uint64_t seed = 0;
    int reps = 0;
    bool full_scale = false;
    bool seed_set = false, reps_set = false;

    void attach(CLI::App* cmd, bool with_variant) {
        cmd->add_option("--config", config_path, "JSON config file; flags override its values");
        cmd->add_option("--domain", domain, "ts or chess");
        if (with_variant) cmd->add_option("--variant", variant, "N, N1, N0, or all");
        cmd->add_option("--alpha", alpha_list, "corruption rate(s), comma separated");
        cmd->add_option("--seed", seed, "master seed")->each([this](const std::string&) { seed_set = true; });
        cmd->add_option("--reps", reps, "repetitions")->each([this](const std::string&) { reps_set = true; });
        cmd->add_option("--out", out, "output directory");
        cmd->add_flag("--full-scale", full_scale, "use the full-size protocol settings");
    }

    RunConfig resolve() const {
        RunConfig cfg;
        if (!config_path.empty()) cfg = load_config(config_path);
        if (!domain.empty()) cfg.domain = domain;
        if (!variant.empty() && variant != "all") cfg.variant = variant;
        if (!alpha_list.empty()) cfg.alpha = parse_alpha_list(alpha_list).front();
        if (seed_set) cfg.seed = seed;
        if (reps_set) cfg.reps = reps;
        if (!out.empty()) cfg.out_dir = out;
        if (full_scale) cfg.full_scale = true;
        if (cfg.domain != "ts" && cfg.domain != "chess")
            throw std::runtime_error("--domain must be ts or chess");
        return cfg;
    }
};

int cmd_gen_theory(const CommonOpts& opts) {
    const RunConfig cfg = opts.resolve();
    fs::create_directories(cfg.out_dir);
    Theory theory;
    if (cfg.domain == "chess") {
        theory = chess_theory();
    } else {
        Rng rng(derive_seed(cfg.seed, fnv1a("theory")));
        const FeatureSpace space = make_ts_space(rng);
        theory = sample_theory(space, {"a", "b", "c"}, cfg.lower, cfg.upper, rng);
    }
    const std::string path = cfg.out_dir + "/theory.txt";
    save_theory(path, theory);
    std::printf("wrote %s (%zu classes, %zu conjuncts)\n", path.c_str(), theory.classes.size(),
                theory.num_conjuncts());
    return 0;
}

int cmd_abduce(const CommonOpts& opts, const std::string& theory_path) {
    const RunConfig cfg = opts.resolve();
    fs::create_directories(cfg.out_dir);
    FeedbackSet fb;
    if (!theory_path.empty()) {
        const Theory theory = load_theory(theory_path);
        fb = build_feedback(theory);
    } else if (cfg.domain == "chess") {
        fb = build_chess_feedback();
    } else {
        throw std::runtime_error("abduce: pass --theory for the ts domain");
    }
    const std::string path = cfg.out_dir + "/feedback.txt";
    save_feedback(path, fb);
    std::printf("wrote %s\n", path.c_str());
    for (size_t s = 0; s < fb.labels.size(); ++s)
        std::printf("  %-8s %zu assignments\n", fb.labels[s].c_str(), fb.sets[s].size());
    return 0;
}

int cmd_gen_data(const CommonOpts& opts, int window) {
    const RunConfig cfg = opts.resolve();
    fs::create_directories(cfg.out_dir);
    if (cfg.domain == "ts") {
        if (window != 256 && window != 150) throw std::runtime_error("--window must be 256 or 150");
        const uint64_t rep_seed = derive_seed(cfg.seed, fnv1a("rep"), 0);
        Theory fixed;
        const bool have_fixed = !cfg.theory_path.empty();
        if (have_fixed) fixed = load_theory(cfg.theory_path);
        const TsRepData rep =
            make_ts_rep(rep_seed, cfg.sigma, cfg.lower, cfg.upper, have_fixed ? &fixed : nullptr);
        const TsDatasets& d = window == 256 ? rep.win256 : rep.win150;
        save_theory(cfg.out_dir + "/theory.txt", rep.theory);
        save_dataset(cfg.out_dir + "/train", d.train);
        save_dataset(cfg.out_dir + "/test", d.test);
        std::printf("wrote %s/{theory.txt,train,test}: %d train / %d test windows of %d\n",
                    cfg.out_dir.c_str(), d.train.n, d.test.n, window);
    } else {
        const ChessData data = make_chess_data(cfg.seed, cfg.resolved_chess_train(),
                                               cfg.resolved_chess_test(), cfg.glyph_images,
                                               cfg.glyph_labels);
        save_dataset(cfg.out_dir + "/train", data.train);
        save_dataset(cfg.out_dir + "/test", data.test);
        std::printf("wrote %s/{train,test}: %d train / %d test boards\n", cfg.out_dir.c_str(),
                    data.train.n, data.test.n);
    }
    return 0;
}

int cmd_pretrain(const CommonOpts& opts) {
    RunConfig cfg = opts.resolve();
    fs::create_directories(cfg.out_dir);
    const uint64_t rep_seed = derive_seed(cfg.seed, fnv1a("rep"), 0);
    Network<float> net;
    double train_pfa = 0.0, test_pfa = 0.0;
    if (cfg.domain == "ts") {
        Theory fixed;
        const bool have_fixed = !cfg.theory_path.empty();
        if (have_fixed) fixed = load_theory(cfg.theory_path);
        const TsRepData rep =
            make_ts_rep(rep_seed, cfg.sigma, cfg.lower, cfg.upper, have_fixed ? &fixed : nullptr);
        net = pretrain_extractor_ts(rep, cfg.alpha, cfg, rep_seed);
        train_pfa = per_feature_accuracy(net, rep.win256.train);
        test_pfa = per_feature_accuracy(net, rep.win256.test);
    } else {
        const ChessData data = make_chess_data(cfg.seed, cfg.resolved_chess_train(),
                                               cfg.resolved_chess_test(), cfg.glyph_images,
                                               cfg.glyph_labels);
        net = pretrain_extractor_chess(data, cfg.alpha, cfg, rep_seed);
        train_pfa = per_feature_accuracy(net, data.train);
        test_pfa = per_feature_accuracy(net, data.test);
    }
    char name[64];
    std::snprintf(name, sizeof(name), "pretrained-%s-a%g.bin", cfg.domain.c_str(), cfg.alpha);
    const std::string path = cfg.out_dir + "/" + name;
    save_weights(path, net);
    std::printf("wrote %s\nper-feature accuracy vs clean labels: train %.4f, test %.4f\n",
                path.c_str(), train_pfa, test_pfa);
    return 0;
}

int cmd_train(const CommonOpts& opts) {
    RunConfig cfg = opts.resolve();
    const std::vector<double> alphas =
        opts.alpha_list.empty() ? std::vector<double>{cfg.alpha} : parse_alpha_list(opts.alpha_list);

    std::vector<VariantSpec> variants;
    const std::string v = opts.variant.empty() ? cfg.variant : opts.variant;
    if (v == "all") {
        variants.push_back({"N", 0.0});
        for (const double a : alphas) variants.push_back({"N1", a});
        variants.push_back({"N0", 0.0});
    } else if (v == "N1") {
        for (const double a : alphas) variants.push_back({"N1", a});
    } else if (v == "N" || v == "N0") {
        variants.push_back({v, 0.0});
    } else {
        throw std::runtime_error("--variant must be N, N1, N0, or all");
    }

    fs::create_directories(cfg.out_dir);
    save_config(cfg.out_dir + "/config.json", cfg);
    const auto records = run_experiment(cfg, variants, cfg.out_dir);
    const Summary summary = aggregate_report(records);
    spit(cfg.out_dir + "/summary.csv", summary_csv(summary));
    spit(cfg.out_dir + "/summary.json", summary_json_text(summary));
    if (find_cell(summary, "N1", alphas.front())) emit_plots(summary, cfg.out_dir);

    std::printf("%-10s %-6s %5s %18s %18s\n", "variant", "alpha", "reps", "pred acc", "expl fid");
    for (const auto& c : summary.cells)
        std::printf("%-10s %-6g %5d %9.2f (%5.2f) %9.2f (%5.2f)\n", c.variant.c_str(), c.alpha,
                    c.n, 100.0 * c.acc_mean, 100.0 * c.acc_std, 100.0 * c.fid_mean,
                    100.0 * c.fid_std);
    for (const auto& cj : summary.conjectures)
        std::printf("better(%s, %s): %s\n", cj.left.c_str(), cj.right.c_str(),
                    cj.holds ? "yes" : "no");
    if (summary.zero_mass_events)
        std::printf("zero-mass feedback events: %d\n", summary.zero_mass_events);
    std::printf("wrote %s/{config.json,summary.csv,summary.json,*-metrics.csv}\n",
                cfg.out_dir.c_str());
    return 0;
}

// rebuilds the summary from per-run metrics CSVs already on disk
int cmd_report(const CommonOpts& opts) {
    const RunConfig cfg = opts.resolve();
    std::vector<RunRecord> records;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(cfg.out_dir))
        if (e.path().filename().string().ends_with("-metrics.csv")) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        const auto rows = load_metrics_csv(path.string());
        if (rows.empty()) continue;
        RunRecord rec;
        rec.run_id = rows.front().run_id;
        rec.variant = rows.front().variant;
        rec.alpha = rows.front().alpha;
        rec.domain = rec.run_id.substr(0, rec.run_id.find('-'));
        rec.epochs = rows;
        rec.initial = rows.front();
        rec.final_raw = rows.back();
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw std::runtime_error("report: no *-metrics.csv files in " + cfg.out_dir);
    const Summary summary = aggregate_report(records);
    spit(cfg.out_dir + "/summary.csv", summary_csv(summary));
    spit(cfg.out_dir + "/summary.json", summary_json_text(summary));
    std::printf("aggregated %zu runs into %s/summary.{csv,json}\n", records.size(),
                cfg.out_dir.c_str());
    return 0;
}

int cmd_plot(const CommonOpts& opts) {
    const RunConfig cfg = opts.resolve();
    const Summary summary = parse_summary_json(slurp(cfg.out_dir + "/summary.json"));
    emit_plots(summary, cfg.out_dir);
    std::printf("wrote %s/pretrain_vs_finetune.{csv,svg}\n", cfg.out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neuro-symbolic extractor training over DNF theories"};
    app.require_subcommand(1);

    CommonOpts gt, gd, ab, pt, tr, rp, pl;
    std::string theory_path;
    int window = 256;

    gt.attach(app.add_subcommand("gen-theory", "sample (ts) or emit (chess) a theory"), false);
    auto* c_gd = app.add_subcommand("gen-data", "generate a train/test dataset");
    gd.attach(c_gd, false);
    c_gd->add_option("--window", window, "ts window width: 256 or 150");
    auto* c_ab = app.add_subcommand("abduce", "build the per-class feedback cache");
    ab.attach(c_ab, false);
    c_ab->add_option("--theory", theory_path, "theory file (default: chess rules)");
    pt.attach(app.add_subcommand("pretrain", "train an extractor on corrupted labels"), false);
    tr.attach(app.add_subcommand("train", "run the repetition protocol and aggregate"), true);
    rp.attach(app.add_subcommand("report", "re-aggregate metrics CSVs into a summary"), false);
    pl.attach(app.add_subcommand("plot", "regenerate plots from summary.json"), false);

    CLI11_PARSE(app, argc, argv);
    try {
        if (app.got_subcommand("gen-theory")) return cmd_gen_theory(gt);
        if (app.got_subcommand("gen-data")) return cmd_gen_data(gd, window);
        if (app.got_subcommand("abduce")) return cmd_abduce(ab, theory_path);
        if (app.got_subcommand("pretrain")) return cmd_pretrain(pt);
        if (app.got_subcommand("train")) return cmd_train(tr);
        if (app.got_subcommand("report")) return cmd_report(rp);
        if (app.got_subcommand("plot")) return cmd_plot(pl);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
