#include "gchs/trainer.hpp"

#include "gchs/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gchs {

namespace {

// Seed streams derived from TrainConfig::seed.
enum Stream : std::uint64_t {
    kEncoderInit = 1,
    kProjectionInit = 2,
    kMaskNoise = 10,
    kView2 = 11,
    kView1Random = 12,
    kPretrainNoise = 13,
};

std::uint64_t epoch_seed(std::uint64_t seed, Stream stream, int epoch) {
    return derive_seed(derive_seed(seed, stream), static_cast<std::uint64_t>(epoch));
}

class Adam {
public:
    Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // Updates `params` in place; the i-th call order must stay fixed.
    void step(std::vector<Matrix*> params, const std::vector<const Matrix*>& grads) {
        if (m_.empty()) {
            for (auto* p : params) {
                m_.push_back(Matrix::Zero(p->rows(), p->cols()));
                v_.push_back(Matrix::Zero(p->rows(), p->cols()));
            }
        }
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, t_);
        const double c2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            const Matrix& g = *grads[i];
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
            params[i]->array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
        }
    }

private:
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    std::vector<Matrix> m_, v_;
};

Vector ones(int n) { return Vector::Ones(n); }

std::span<const double> as_span(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

SanitizerState make_sanitizer(const Graph& g, const TrainConfig& cfg) {
    SanitizerState s = init_sanitizer(g.num_edges(), cfg.resolved_budget(g.num_edges()), cfg.tau_gumbel, cfg.p_min,
                                      cfg.sanitizer_step, cfg.mask_law);
    s.tolerance = cfg.xi;
    return s;
}

// Removes the floor(budget) edges with the largest drop probability.
Vector top_k_removed(const Vector& p, double budget) {
    const auto m = static_cast<std::size_t>(p.size());
    const auto k = std::min(m, static_cast<std::size_t>(std::floor(budget)));
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p(a) > p(b); });
    Vector w = Vector::Ones(static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < k; ++i) w(order[i]) = 0.0;
    return w;
}

SanitizerState pretrain_sanitizer(const Graph& g, const TrainConfig& cfg, SanitizerState s) {
    for (int t = 0; t < cfg.pretrain_epochs; ++t) {
        ad::Tape tape;
        const ad::Var x = tape.constant(g.features());
        const ad::Var p = tape.parameter(s.p);
        const MaskSample ms = sample_mask(s, p, epoch_seed(cfg.seed, kPretrainNoise, t));
        const ad::Var loss = ad::scale(feature_smoothness(ad::normalized_adjacency(g, ms.retain), x), cfg.eta);
        if (!std::isfinite(loss.scalar())) throw NumericError("sanitizer pre-training diverged");
        tape.backward(loss);
        s = pgd_step(s, p.grad().col(0));
    }
    return s;
}

bool random_first_view(const TrainConfig& cfg) {
    return cfg.mode == Mode::baseline || (cfg.mode == Mode::no_delta && !cfg.sanitizer_enabled);
}

}  // namespace

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::full:
            return "full";
        case Mode::no_info:
            return "no_info";
        case Mode::no_delta:
            return "no_delta";
        case Mode::baseline:
            return "baseline";
    }
    return "?";
}

Mode parse_mode(const std::string& text) {
    if (text == "full") return Mode::full;
    if (text == "no_info") return Mode::no_info;
    if (text == "no_delta") return Mode::no_delta;
    if (text == "baseline") return Mode::baseline;
    throw UsageError("unknown mode '" + text + "' (full | no_info | no_delta | baseline)");
}

std::string to_string(MaskLaw law) { return law == MaskLaw::gumbel ? "gumbel" : "logistic"; }

MaskLaw parse_mask_law(const std::string& text) {
    if (text == "gumbel") return MaskLaw::gumbel;
    if (text == "logistic") return MaskLaw::logistic;
    throw UsageError("unknown mask law '" + text + "' (gumbel | logistic)");
}

void TrainConfig::validate() const {
    if (!(eta >= 0.0)) throw UsageError("eta must be non-negative");
    if (epochs < 0) throw UsageError("epochs must be non-negative");
    if (!(lr > 0.0)) throw UsageError("learning rate must be positive");
    if (!(sanitizer_step >= 0.0)) throw UsageError("sanitizer step must be non-negative");
    if (!(tau_info > 0.0) || !(tau_gumbel > 0.0)) throw UsageError("temperatures must be positive");
    if (!(p_drop >= 0.0 && p_drop < 1.0)) throw UsageError("p_drop must lie in [0, 1)");
    if (!(p_min > 0.0 && p_min < 1.0)) throw UsageError("p_min must lie in (0, 1)");
    if (!(xi > 0.0)) throw UsageError("xi must be positive");
    if (hidden_dim <= 0 || out_dim <= 0) throw UsageError("layer widths must be positive");
    if (pnc_window < 1) throw UsageError("pnc_window must be at least 1");
    if (pretrain_epochs < 0) throw UsageError("pretrain_epochs must be non-negative");
}

double TrainConfig::resolved_budget(int num_edges) const { return budget > 0.0 ? budget : 0.1 * num_edges; }

const EpochRecord& TrainedModel::best() const {
    if (best_epoch < 0 || history.empty()) throw UsageError("model has no epochs to select from");
    return history.at(static_cast<std::size_t>(best_epoch));
}

Vector random_view(const Graph& g, double p_drop, std::uint64_t seed) {
    if (!(p_drop >= 0.0 && p_drop < 1.0)) throw UsageError("p_drop must lie in [0, 1)");
    Rng rng(seed);
    Vector w(g.num_edges());
    for (Eigen::Index e = 0; e < w.size(); ++e) w(e) = rng.uniform() < p_drop ? 0.0 : 1.0;
    return w;
}

double pseudo_normalized_cut(const Matrix& h, const Matrix& laplacian, const Vector& degrees) {
    if (laplacian.rows() != h.rows() || degrees.size() != h.rows()) {
        throw DimensionError("pseudo_normalized_cut: graph size differs from embedding rows");
    }
    const Matrix s = h.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    const Vector num = (s.array() * (laplacian * s).array()).colwise().sum();
    const Vector den = (s.array().square().colwise() * degrees.array()).colwise().sum();
    return (num.array() / den.array()).sum();
}

ad::Var feature_smoothness(const ad::Var& adj_hat, const ad::Var& x) {
    ad::Tape& t = *x.tape();
    const ad::Var energy = t.constant(Matrix::Constant(1, 1, x.value().squaredNorm()));
    return ad::sub(energy, ad::sum(ad::mul(x, ad::matmul(adj_hat, x))));
}

LossParts build_loss(const Graph& g, const TrainConfig& cfg, const ad::Var& x, const ad::EncoderVars& theta,
                     const ad::ProjectionVars& phi, const SanitizerState* sanitizer, const ad::Var* p,
                     const Vector& view1_noise, const Vector* view1_fixed, const Vector& view2_weights,
                     bool straight_through) {
    ad::Tape& t = *x.tape();
    LossParts out;
    ad::Var w1;
    if (view1_fixed) {
        w1 = t.constant(*view1_fixed);
        out.view1_hard = *view1_fixed;
    } else {
        if (!sanitizer || !p) throw UsageError("build_loss: sanitizer view requested without sanitizer state");
        const MaskSample ms = sample_mask(*sanitizer, *p, view1_noise, straight_through);
        w1 = ms.retain;
        out.view1_hard = (1.0 - ms.hard.array()).matrix();
    }
    const ad::Var adj1 = ad::normalized_adjacency(g, w1);
    const ad::Var adj2 = ad::normalized_adjacency(g, t.constant(view2_weights));
    out.h1 = ad::encode(adj1, x, theta, cfg.relu_output);
    const ad::Var h2 = ad::encode(adj2, x, theta, cfg.relu_output);
    out.l_info = ad::info_nce(out.h1, h2, phi, {cfg.tau_info});
    out.total = out.l_info;
    if (cfg.mode == Mode::full && cfg.eta > 0.0) {
        out.delta = feature_smoothness(adj1, x);
        out.total = ad::add(out.l_info, ad::scale(out.delta, cfg.eta));
    }
    return out;
}

TrainedModel train_gchs(const Graph& g, const TrainConfig& cfg) {
    cfg.validate();
    if (g.num_nodes() == 0) throw UsageError("cannot train on an empty graph");

    TrainedModel model;
    model.config = cfg;
    model.theta = init_encoder(g.feature_dim(), cfg.hidden_dim, cfg.out_dim, derive_seed(cfg.seed, kEncoderInit));
    model.phi = init_projection(cfg.out_dim, derive_seed(cfg.seed, kProjectionInit));

    std::optional<SanitizerState> sanitizer;
    if (cfg.uses_sanitizer()) sanitizer = make_sanitizer(g, cfg);
    if (cfg.mode == Mode::no_info) {
        sanitizer = pretrain_sanitizer(g, cfg, *sanitizer);
        model.frozen_weights = top_k_removed(sanitizer->p, sanitizer->budget);
    }
    const bool learn_p = sanitizer && cfg.mode != Mode::no_info;
    // Modes without a sanitizer still report the untouched initialization.
    if (sanitizer) {
        model.p = sanitizer->p;
    } else if (g.num_edges() > 0) {
        model.p = make_sanitizer(g, cfg).p;
    }

    EncoderParams theta = model.theta;
    ProjectionParams phi = model.phi;
    Adam adam(cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    double best = std::numeric_limits<double>::infinity();
    double window_sum = 0.0;
    const Vector full_graph = ones(g.num_edges());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        ad::Tape tape;
        const ad::Var x = tape.constant(g.features());
        const auto theta_vars = ad::bind(tape, theta);
        const auto phi_vars = ad::bind(tape, phi);
        ad::Var p_var;
        Vector noise;
        Vector fixed;
        const Vector* fixed_ptr = nullptr;
        if (learn_p) {
            p_var = tape.parameter(sanitizer->p);
            noise = mask_noise(cfg.mask_law, g.num_edges(), epoch_seed(cfg.seed, kMaskNoise, epoch));
        } else if (cfg.mode == Mode::no_info) {
            fixed_ptr = &model.frozen_weights;
        } else {
            fixed = random_view(g, cfg.p_drop, epoch_seed(cfg.seed, kView1Random, epoch));
            fixed_ptr = &fixed;
        }
        const Vector view2 = random_view(g, cfg.p_drop, epoch_seed(cfg.seed, kView2, epoch));
        const LossParts parts = build_loss(g, cfg, x, theta_vars, phi_vars, learn_p ? &*sanitizer : nullptr,
                                           learn_p ? &p_var : nullptr, noise, fixed_ptr, view2);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.l_info = parts.l_info.scalar();
        rec.total = parts.total.scalar();
        if (!std::isfinite(rec.total)) {
            model.history.push_back(rec);
            throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch), model.history);
        }

        tape.backward(parts.total);
        if (learn_p) *sanitizer = pgd_step(*sanitizer, p_var.grad().col(0));
        adam.step({&theta.w1, &theta.w2, &phi.u1, &phi.b1, &phi.u2, &phi.b2},
                  {&theta_vars.w1.grad(), &theta_vars.w2.grad(), &phi_vars.u1.grad(), &phi_vars.b1.grad(),
                   &phi_vars.u2.grad(), &phi_vars.b2.grad()});

        // Selection criterion on the hard view-one graph with the updated encoder.
        const Vector& eval_weights = random_first_view(cfg) ? full_graph : parts.view1_hard;
        const Matrix adj_hat = normalized_adjacency(g, as_span(eval_weights));
        const Matrix h = encode(adj_hat, g.features(), theta, cfg.relu_output);
        const Matrix lap = Matrix::Identity(g.num_nodes(), g.num_nodes()) - adj_hat;
        rec.l_pnc = pseudo_normalized_cut(h, lap, self_loop_degrees(g, as_span(eval_weights)));
        rec.delta_x = (g.features().array() * (lap * g.features()).array()).sum();
        if (!std::isfinite(rec.l_pnc)) {
            model.history.push_back(rec);
            throw TrainingDiverged("non-finite selection criterion at epoch " + std::to_string(epoch), model.history);
        }

        window_sum += rec.l_pnc;
        if (epoch >= cfg.pnc_window) window_sum -= model.history[static_cast<std::size_t>(epoch - cfg.pnc_window)].l_pnc;
        rec.l_pnc_smoothed = window_sum / std::min(epoch + 1, cfg.pnc_window);
        model.history.push_back(rec);

        // Partial windows at the start average fewer samples and would win the
        // argmin on noise alone.
        const bool eligible = epoch + 1 >= std::min(cfg.pnc_window, cfg.epochs);
        if (eligible && rec.l_pnc_smoothed < best) {
            best = rec.l_pnc_smoothed;
            model.best_epoch = epoch;
            model.theta = theta;
            model.phi = phi;
            model.embeddings = h;
            model.view_weights = eval_weights;
        }
    }
    if (sanitizer) model.p = sanitizer->p;
    return model;
}

ViewPair sample_views(const Graph& g, const TrainedModel& model, std::uint64_t seed) {
    const TrainConfig& cfg = model.config;
    Vector first;
    if (cfg.mode == Mode::no_info) {
        first = model.frozen_weights;
    } else if (cfg.uses_sanitizer()) {
        SanitizerState s = make_sanitizer(g, cfg);
        if (model.p.size() != g.num_edges()) throw DimensionError("model probabilities do not match graph edges");
        s.p = model.p;
        first = apply_mask(g.edges(), draw_mask(s, derive_seed(seed, kMaskNoise)));
    } else {
        first = random_view(g, cfg.p_drop, derive_seed(seed, kView1Random));
    }
    return {std::move(first), random_view(g, cfg.p_drop, derive_seed(seed, kView2))};
}

std::vector<double> paper_eta_grid() { return {0.0, 0.0001, 0.001, 0.01, 0.1, 1.0, 3.0, 5.0}; }

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw UsageError("pearson needs two equal-length samples of size >= 2");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

SweepResult sweep_eta(const Graph& g, const std::vector<double>& grid, const TrainConfig& cfg) {
    if (grid.empty()) throw UsageError("eta grid is empty");
    SweepResult out;
    out.grid = grid;
    for (double eta : grid) {
        TrainConfig run = cfg;
        run.eta = eta;
        out.models.push_back(train_gchs(g, run));
        out.pnc_at_best.push_back(out.models.back().best().l_pnc_smoothed);
    }
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double a = out.pnc_at_best[i], b = out.pnc_at_best[out.best_index];
        if (a < b || (a == b && grid[i] < grid[out.best_index])) out.best_index = i;
    }
    if (g.has_labels()) {
        for (const auto& m : out.models) out.accuracy.push_back(probe_accuracy(m.embeddings, g.labels(), cfg.seed));
        if (grid.size() >= 2) out.correlation = pearson(out.pnc_at_best, out.accuracy);
    }
    return out;
}

}  // namespace gchs
