#include "gchs/attacks.hpp"
#include "gchs/contrastive.hpp"
#include "gchs/eval.hpp"
#include "gchs/gradcheck_suite.hpp"
#include "gchs/io.hpp"
#include "gchs/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace gchs;

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;
constexpr int kDiverged = 3;
constexpr int kInfeasible = 4;

// Per-component seed streams derived from --seed.
constexpr std::uint64_t kGeneratorStream = 0;
constexpr std::uint64_t kAttackStream = 1;
constexpr std::uint64_t kClusterStream = 97;

const char* kEdgesFile = "edges.txt";
const char* kFeaturesFile = "features.csv";
const char* kLabelsFile = "labels.txt";

struct DataOptions {
    std::string dir;
    std::string edges;
    std::string features;
    std::string labels;
    bool generate = false;
    SbmParams sbm;
};

struct TrainOptions {
    TrainConfig cfg;
    std::string mode = "full";
    std::string mask_law = "gumbel";
};

struct Common {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
};

void add_common(CLI::App* app, Common& c, bool needs_out = true) {
    app->add_option("--config", c.config, "key = value file; command-line flags take precedence");
    app->add_option("--seed", c.seed, "global seed");
    if (needs_out) app->add_option("--out", c.out, "output directory");
}

void add_sbm(CLI::App* app, SbmParams& p) {
    app->add_option("--n", p.n, "SBM node count");
    app->add_option("--k", p.k_blocks, "SBM block count");
    app->add_option("--p-intra", p.p_intra, "SBM intra-block edge probability");
    app->add_option("--p-inter", p.p_inter, "SBM inter-block edge probability");
    app->add_option("--feature-dim", p.feature_dim, "SBM feature dimension");
    app->add_option("--mean-sep", p.mean_sep, "distance between class means");
    app->add_option("--feature-std", p.feature_std, "feature noise standard deviation");
}

void add_data(CLI::App* app, DataOptions& d) {
    app->add_option("--data", d.dir, "dataset directory with edges.txt, features.csv, labels.txt");
    app->add_option("--edges", d.edges, "edge list file");
    app->add_option("--features", d.features, "feature CSV file");
    app->add_option("--labels", d.labels, "label file");
    app->add_flag("--generate", d.generate, "use an SBM instance instead of files");
    add_sbm(app, d.sbm);
}

void add_train(CLI::App* app, TrainOptions& t) {
    TrainConfig& c = t.cfg;
    app->add_option("--mode", t.mode, "full | no_info | no_delta | baseline");
    app->add_option("--eta", c.eta, "weight of the feature homophily term");
    app->add_option("--epochs", c.epochs, "training epochs");
    app->add_option("--lr", c.lr, "Adam learning rate");
    app->add_option("--adam-beta1", c.adam_beta1);
    app->add_option("--adam-beta2", c.adam_beta2);
    app->add_option("--adam-eps", c.adam_eps);
    app->add_option("--sanitizer-step", c.sanitizer_step, "PGD step on drop probabilities");
    app->add_option("--tau-info", c.tau_info, "infoNCE temperature");
    app->add_option("--tau-gumbel", c.tau_gumbel, "mask relaxation temperature");
    app->add_option("--p-drop", c.p_drop, "random view edge drop rate");
    app->add_option("--budget", c.budget, "sanitation budget; negative means 0.1 |E|");
    app->add_option("--p-min", c.p_min, "lower bound on drop probabilities");
    app->add_option("--xi", c.xi, "budget tolerance of the projection");
    app->add_option("--mask-law", t.mask_law, "gumbel | logistic");
    app->add_option("--hidden-dim", c.hidden_dim);
    app->add_option("--out-dim", c.out_dim);
    app->add_option("--relu-output", c.relu_output, "apply relu to the encoder output");
    app->add_option("--pnc-window", c.pnc_window, "trailing window of the selection criterion");
    app->add_option("--pretrain-epochs", c.pretrain_epochs, "sanitizer pre-training epochs (no_info)");
    app->add_option("--sanitizer-enabled", c.sanitizer_enabled, "no_delta only: false uses a random view one");
}

std::string key_of(const CLI::Option* opt) {
    std::string key = opt->get_single_name();
    std::replace(key.begin(), key.end(), '-', '_');
    return key;
}

// Applies the --config file to every option the command line left unset.
void apply_config(CLI::App* app, const std::string& path) {
    if (path.empty()) return;
    for (const auto& [raw, value] : read_key_values(path)) {
        std::string key = raw;
        std::replace(key.begin(), key.end(), '_', '-');
        CLI::Option* opt = nullptr;
        try {
            opt = app->get_option("--" + key);
        } catch (const CLI::OptionNotFound&) {
            throw UsageError("unknown config key '" + raw + "' for " + app->get_name());
        }
        if (key == "config" || opt->count() > 0) continue;
        opt->clear();
        opt->add_result(value);
        try {
            opt->run_callback();
        } catch (const CLI::Error& e) {
            throw UsageError("config key '" + raw + "': " + e.what());
        }
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write " + path.string());
    out << text;
}

fs::path prepare_out(const std::string& out) {
    if (out.empty()) throw UsageError("--out is required");
    fs::create_directories(out);
    return out;
}

// Every option of the command with its effective value.
void write_resolved_config(CLI::App* app, const fs::path& dir) {
    std::ostringstream s;
    s << "# " << app->get_name() << "\n";
    for (const CLI::Option* opt : app->get_options()) {
        const std::string key = key_of(opt);
        if (key == "help" || key == "config" || key == "out") continue;
        std::string value;
        if (opt->count() > 0) {
            const auto& r = opt->results();
            value = r.empty() ? "true" : r.back();
        } else {
            value = opt->get_default_str();
        }
        s << key << " = " << value << "\n";
    }
    write_text(dir / "resolved-config.txt", s.str());
}

Graph load_data(const DataOptions& d, std::uint64_t seed) {
    const int sources = (d.generate ? 1 : 0) + (d.dir.empty() ? 0 : 1) + (d.edges.empty() && d.features.empty() ? 0 : 1);
    if (sources != 1) throw UsageError("give exactly one dataset source: --data, --edges/--features, or --generate");
    if (d.generate) {
        SbmParams p = d.sbm;
        p.seed = derive_seed(seed, kGeneratorStream);
        return generate_sbm(p);
    }
    if (!d.dir.empty()) {
        const fs::path dir = d.dir;
        std::optional<fs::path> labels;
        if (!d.labels.empty()) {
            labels = d.labels;
        } else if (fs::exists(dir / kLabelsFile)) {
            labels = dir / kLabelsFile;
        }
        return load_graph(dir / kEdgesFile, dir / kFeaturesFile, labels);
    }
    if (d.edges.empty() || d.features.empty()) throw UsageError("--edges and --features go together");
    std::optional<fs::path> labels;
    if (!d.labels.empty()) labels = d.labels;
    return load_graph(d.edges, d.features, labels);
}

void save_dataset(const fs::path& dir, const Graph& g) {
    write_edge_list(dir / kEdgesFile, g.edges());
    write_features_csv(dir / kFeaturesFile, g.features());
    if (g.has_labels()) write_labels(dir / kLabelsFile, g.labels());
}

TrainConfig resolve_train(const TrainOptions& t, std::uint64_t seed) {
    TrainConfig cfg = t.cfg;
    cfg.mode = parse_mode(t.mode);
    cfg.mask_law = parse_mask_law(t.mask_law);
    cfg.seed = seed;
    cfg.validate();
    return cfg;
}

nlohmann::ordered_json record_json(const EpochRecord& r) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["l_info"] = r.l_info;
    j["delta_x"] = r.delta_x;
    j["total"] = r.total;
    j["l_pnc"] = r.l_pnc;
    j["l_pnc_smoothed"] = r.l_pnc_smoothed;
    return j;
}

void write_history(const fs::path& path, const std::vector<EpochRecord>& history) {
    std::ostringstream s;
    for (const auto& r : history) s << record_json(r).dump() << "\n";
    write_text(path, s.str());
}

MetricsReport model_metrics(const Graph& g, const TrainedModel& m, std::uint64_t seed) {
    MetricsReport r;
    if (g.has_labels()) {
        try {
            r.accuracy = probe_accuracy(m.embeddings, g.labels(), seed);
        } catch (const DegenerateError& e) {
            std::cerr << "warning: accuracy skipped: " << e.what() << "\n";
        }
        r.nmi = kmeans_nmi(m.embeddings, g.labels(), g.num_classes(), 10, derive_seed(seed, kClusterStream));
    }
    if (g.num_edges() > 0) {
        const Graph sanitized = g.with_retained({m.view_weights.data(), static_cast<std::size_t>(m.view_weights.size())});
        if (g.has_labels()) {
            r.h_y_before = homophily_label(g);
            if (sanitized.num_edges() > 0) r.h_y_after = homophily_label(sanitized);
        }
        r.delta_x_before = homophily_feature(g);
        r.delta_x_after = homophily_feature(sanitized);
    }
    return r;
}

void save_model(const fs::path& dir, const Graph& g, const TrainedModel& m, std::uint64_t seed, double runtime) {
    write_history(dir / "history.jsonl", m.history);
    save_matrix(dir / "embeddings.txt", m.embeddings);
    save_vector(dir / "p.txt", m.p);
    save_vector(dir / "view_weights.txt", m.view_weights);
    save_named_matrices(dir / "model.txt", {{"w1", m.theta.w1},
                                            {"w2", m.theta.w2},
                                            {"u1", m.phi.u1},
                                            {"b1", m.phi.b1},
                                            {"u2", m.phi.u2},
                                            {"b2", m.phi.b2}});
    MetricsReport r = model_metrics(g, m, seed);
    r.runtime_s = runtime;
    write_text(dir / "metrics.json", r.to_json() + "\n");
    nlohmann::ordered_json sel;
    sel["best_epoch"] = m.best_epoch;
    sel["l_pnc_at_best"] = m.best().l_pnc_smoothed;
    write_text(dir / "selection.json", sel.dump(2) + "\n");
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int cmd_generate(CLI::App* app, const Common& c, SbmParams p) {
    p.seed = derive_seed(c.seed, kGeneratorStream);
    const Graph g = generate_sbm(p);
    const fs::path dir = prepare_out(c.out);
    save_dataset(dir, g);
    write_resolved_config(app, dir);
    std::cout << "generated " << g.num_nodes() << " nodes, " << g.num_edges() << " edges in " << dir.string() << "\n";
    return kOk;
}

int cmd_attack(CLI::App* app, const Common& c, const DataOptions& d, const TrainOptions& t, const std::string& kind,
               double power, const ClgaConfig& clga_in) {
    const Graph g = load_data(d, c.seed);
    if (!g.has_labels() && kind == "heterophily") throw UsageError("the heterophily injector needs labels");
    const AttackBudget budget = AttackBudget::from_power(power, g.num_edges());
    const std::uint64_t seed = derive_seed(c.seed, kAttackStream);
    AttackResult r;
    if (kind == "heterophily") {
        r = inject_heterophily(g, budget, seed);
    } else if (kind == "clga") {
        ClgaConfig clga = clga_in;
        clga.surrogate = resolve_train(t, c.seed);
        r = clga_greedy(g, budget, clga, seed);
    } else {
        throw UsageError("unknown attack kind '" + kind + "'");
    }
    const fs::path dir = prepare_out(c.out);
    save_dataset(dir, r.poisoned);
    std::ostringstream audit;
    for (const Edge& e : r.inserted) audit << "+ " << e.u << " " << e.v << "\n";
    for (const Edge& e : r.removed) audit << "- " << e.u << " " << e.v << "\n";
    write_text(dir / "audit.txt", audit.str());
    nlohmann::ordered_json j;
    j["kind"] = kind;
    j["power"] = power;
    j["flips"] = budget.flips;
    j["inserted"] = r.inserted.size();
    j["removed"] = r.removed.size();
    if (g.has_labels()) {
        j["h_y_before"] = homophily_label(g);
        j["h_y_after"] = homophily_label(r.poisoned);
    }
    j["delta_x_before"] = homophily_feature(g);
    j["delta_x_after"] = homophily_feature(r.poisoned);
    write_text(dir / "attack.json", j.dump(2) + "\n");
    write_resolved_config(app, dir);
    std::cout << kind << ": " << r.inserted.size() << " inserted, " << r.removed.size() << " removed\n";
    return kOk;
}

int cmd_train(CLI::App* app, const Common& c, const DataOptions& d, const TrainOptions& t) {
    const Graph g = load_data(d, c.seed);
    const TrainConfig cfg = resolve_train(t, c.seed);
    const fs::path dir = prepare_out(c.out);
    write_resolved_config(app, dir);
    const auto start = std::chrono::steady_clock::now();
    try {
        const TrainedModel m = train_gchs(g, cfg);
        if (m.history.empty()) {
            write_history(dir / "history.jsonl", {});
            save_vector(dir / "p.txt", m.p);
            std::cout << "no epochs run\n";
            return kOk;
        }
        save_model(dir, g, m, c.seed, seconds_since(start));
        std::cout << "best epoch " << m.best_epoch << ", L_pnc " << format_double(m.best().l_pnc_smoothed) << "\n";
    } catch (const TrainingDiverged& e) {
        write_history(dir / "history.jsonl", e.history);
        std::cerr << "error: " << e.what() << "\n";
        return kDiverged;
    }
    return kOk;
}

std::vector<double> parse_grid(const std::string& text) {
    if (text.empty() || text == "paper") return paper_eta_grid();
    std::vector<double> grid;
    std::stringstream s(text);
    std::string item;
    while (std::getline(s, item, ',')) grid.push_back(parse_double(item));
    return grid;
}

int cmd_sweep(CLI::App* app, const Common& c, const DataOptions& d, const TrainOptions& t, const std::string& grid_text) {
    const Graph g = load_data(d, c.seed);
    const TrainConfig cfg = resolve_train(t, c.seed);
    const std::vector<double> grid = parse_grid(grid_text);
    const fs::path dir = prepare_out(c.out);
    write_resolved_config(app, dir);
    const auto start = std::chrono::steady_clock::now();
    SweepResult r;
    try {
        r = sweep_eta(g, grid, cfg);
    } catch (const TrainingDiverged& e) {
        write_history(dir / "diverged-history.jsonl", e.history);
        std::cerr << "error: " << e.what() << "\n";
        return kDiverged;
    }
    const double runtime = seconds_since(start) / static_cast<double>(grid.size());
    std::ostringstream csv;
    csv << "index,eta,best_epoch,l_pnc_at_best" << (r.accuracy.empty() ? "" : ",accuracy") << "\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const fs::path sub = dir / ("eta_" + std::to_string(i));
        fs::create_directories(sub);
        save_model(sub, g, r.models[i], c.seed, runtime);
        csv << i << "," << format_double(grid[i]) << "," << r.models[i].best_epoch << ","
            << format_double(r.pnc_at_best[i]);
        if (!r.accuracy.empty()) csv << "," << format_double(r.accuracy[i]);
        csv << "\n";
    }
    write_text(dir / "sweep.csv", csv.str());
    nlohmann::ordered_json j;
    j["best_index"] = r.best_index;
    j["best_eta"] = r.best_eta();
    j["l_pnc_at_best"] = r.pnc_at_best[r.best_index];
    if (!r.accuracy.empty()) j["accuracy_at_best"] = r.accuracy[r.best_index];
    if (r.correlation) j["correlation"] = *r.correlation;
    write_text(dir / "selection.json", j.dump(2) + "\n");
    std::cout << "selected eta " << format_double(r.best_eta()) << "\n";
    return kOk;
}

struct EvalOptions {
    std::string embeddings;
    std::string labels;
    std::string edges;
    std::string features;
    std::string clean;
    std::string poisoned;
    bool accuracy = false;
    bool nmi = false;
    bool grv = false;
    int grv_samples = 16;
    int restarts = 10;
};

int cmd_eval(CLI::App* app, const Common& c, const EvalOptions& e, const TrainOptions& t) {
    MetricsReport r;
    const auto start = std::chrono::steady_clock::now();
    if (!e.accuracy && !e.nmi && !e.grv && e.edges.empty()) {
        throw UsageError("nothing to evaluate: pass --accuracy, --nmi, --grv or --edges");
    }
    if (e.accuracy || e.nmi) {
        if (e.embeddings.empty()) throw UsageError("--accuracy and --nmi need --embeddings");
        if (e.labels.empty()) throw UsageError("--accuracy and --nmi need --labels");
        const Matrix h = load_matrix(e.embeddings);
        const std::vector<int> y = read_labels(e.labels);
        if (e.accuracy) r.accuracy = probe_accuracy(h, y, c.seed);
        if (e.nmi) {
            const int k = *std::max_element(y.begin(), y.end()) + 1;
            r.nmi = kmeans_nmi(h, y, k, e.restarts, derive_seed(c.seed, kClusterStream));
        }
    }
    if (!e.edges.empty()) {
        if (e.features.empty()) throw UsageError("--edges needs --features");
        std::optional<fs::path> labels;
        if (!e.labels.empty()) labels = e.labels;
        const Graph g = load_graph(e.edges, e.features, labels);
        r.delta_x_before = homophily_feature(g);
        if (g.has_labels()) r.h_y_before = homophily_label(g);
    }
    if (e.grv) {
        if (e.clean.empty() || e.poisoned.empty()) throw UsageError("--grv needs --clean and --poisoned");
        DataOptions clean, poisoned;
        clean.dir = e.clean;
        poisoned.dir = e.poisoned;
        r.grv = grv(load_data(clean, c.seed), load_data(poisoned, c.seed), resolve_train(t, c.seed), e.grv_samples,
                    c.seed);
    }
    r.runtime_s = seconds_since(start);
    const std::string json = r.to_json() + "\n";
    if (c.out.empty()) {
        std::cout << json;
    } else {
        const fs::path dir = prepare_out(c.out);
        write_text(dir / "metrics.json", json);
        write_resolved_config(app, dir);
    }
    return kOk;
}

int cmd_gradcheck(const Common& c, double h) {
    bool ok = true;
    for (const auto& entry : run_gradcheck_suite(c.seed, h)) {
        std::cout << (entry.pass() ? "ok   " : "FAIL ") << entry.name << " " << format_double(entry.error) << "\n";
        ok = ok && entry.pass();
    }
    return ok ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GCHS: graph contrastive learning with a homophily-driven sanitation view"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    Common common;
    SbmParams sbm;
    DataOptions data;
    TrainOptions train;
    EvalOptions eval;
    std::string attack_kind = "heterophily";
    double attack_power = 0.05;
    ClgaConfig clga;
    std::string grid = "paper";
    double gradcheck_h = 1e-5;

    CLI::App* gen = app.add_subcommand("generate", "write an SBM dataset");
    add_common(gen, common);
    add_sbm(gen, sbm);

    CLI::App* atk = app.add_subcommand("attack", "poison a dataset and write an audit of flipped edges");
    add_common(atk, common);
    add_data(atk, data);
    atk->add_option("--kind", attack_kind, "heterophily | clga");
    atk->add_option("--power", attack_power, "fraction of |E| flipped");
    atk->add_option("--inner-epochs", clga.inner_epochs, "clga surrogate epochs per retraining");
    atk->add_option("--retrain-every", clga.retrain_every, "clga flips between retrainings; 0 = ceil(B/10)");
    atk->add_option("--verify-candidates", clga.verify_candidates, "clga candidates re-scored exactly");
    add_train(atk, train);

    CLI::App* trn = app.add_subcommand("train", "train GCHS and export history, embeddings and P");
    add_common(trn, common);
    add_data(trn, data);
    add_train(trn, train);

    CLI::App* swp = app.add_subcommand("sweep", "train over an eta grid and select by the pseudo normalized cut");
    add_common(swp, common);
    add_data(swp, data);
    add_train(swp, train);
    swp->add_option("--grid", grid, "comma-separated eta values or 'paper'");

    CLI::App* evl = app.add_subcommand("eval", "accuracy, NMI, homophily and GRV reports");
    add_common(evl, common);
    evl->add_option("--embeddings", eval.embeddings, "embedding matrix file");
    evl->add_option("--labels", eval.labels, "label file");
    evl->add_option("--edges", eval.edges, "edge list for homophily metrics");
    evl->add_option("--features", eval.features, "feature CSV for homophily metrics");
    evl->add_flag("--accuracy", eval.accuracy, "linear probe accuracy");
    evl->add_flag("--nmi", eval.nmi, "k-means NMI");
    evl->add_flag("--grv", eval.grv, "graph representation vulnerability");
    evl->add_option("--clean", eval.clean, "clean dataset directory for GRV");
    evl->add_option("--poisoned", eval.poisoned, "poisoned dataset directory for GRV");
    evl->add_option("--grv-samples", eval.grv_samples, "view samples per MI estimate");
    evl->add_option("--restarts", eval.restarts, "k-means restarts");
    add_train(evl, train);

    CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference checks of the autodiff engine");
    add_common(grad, common, false);
    grad->add_option("--step", gradcheck_h, "central difference step");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        CLI::App* cmd = app.get_subcommands().front();
        apply_config(cmd, common.config);
        if (cmd == gen) return cmd_generate(cmd, common, sbm);
        if (cmd == atk) return cmd_attack(cmd, common, data, train, attack_kind, attack_power, clga);
        if (cmd == trn) return cmd_train(cmd, common, data, train);
        if (cmd == swp) return cmd_sweep(cmd, common, data, train, grid);
        if (cmd == evl) return cmd_eval(cmd, common, eval, train);
        return cmd_gradcheck(common, gradcheck_h);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kInfeasible;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
}
