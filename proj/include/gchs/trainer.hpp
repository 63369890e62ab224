#pragma once

#include "gchs/autodiff.hpp"
#include "gchs/contrastive.hpp"
#include "gchs/encoder.hpp"
#include "gchs/graph.hpp"
#include "gchs/sanitizer.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gchs {

// full:     L_info + eta * tr(X^T L_S X), sanitizer and encoder trained jointly.
// no_delta: L_info only, sanitizer still learned.
// no_info:  sanitizer pre-trained on eta * tr(X^T L_S X) alone, then the
//           contrastive model is trained on the frozen sanitized graph.
// baseline: two random edge-drop views, no sanitizer.
enum class Mode { full, no_info, no_delta, baseline };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& text);
std::string to_string(MaskLaw law);
MaskLaw parse_mask_law(const std::string& text);

struct TrainConfig {
    Mode mode = Mode::full;
    double eta = 1.0;
    int epochs = 1000;
    double lr = 5e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double sanitizer_step = 0.01;
    double tau_info = 0.5;
    double tau_gumbel = 0.5;
    double p_drop = 0.3;
    // Negative means 0.1 * |E|.
    double budget = -1.0;
    double p_min = 1e-4;
    double xi = 1e-8;
    MaskLaw mask_law = MaskLaw::gumbel;
    int hidden_dim = 128;
    int out_dim = 32;
    bool relu_output = true;
    int pnc_window = 5;
    int pretrain_epochs = 300;
    // When false in no_delta mode, view one is a random drop like view two.
    bool sanitizer_enabled = true;
    std::uint64_t seed = 0;

    void validate() const;
    double resolved_budget(int num_edges) const;
    bool uses_sanitizer() const { return mode != Mode::baseline && sanitizer_enabled; }
};

struct EpochRecord {
    int epoch = 0;
    double l_info = 0.0;
    double delta_x = 0.0;  // tr(X^T L X) on the hard view-one graph
    double total = 0.0;
    double l_pnc = 0.0;          // raw
    double l_pnc_smoothed = 0.0;  // trailing mean used for selection
};

struct TrainedModel {
    TrainConfig config;
    EncoderParams theta;  // snapshot at best_epoch
    ProjectionParams phi;
    Vector p;  // final drop probabilities; the untouched initialization in baseline mode
    // Edge weights of the view-one graph at best_epoch and the embeddings
    // computed on it.
    Vector view_weights;
    Matrix embeddings;
    // Hard sanitized edge weights used by the no_info variant.
    Vector frozen_weights;
    std::vector<EpochRecord> history;
    int best_epoch = -1;

    const EpochRecord& best() const;
};

// Raised when a loss turns non-finite. Carries the history up to and
// including the offending epoch.
struct TrainingDiverged : NumericError {
    TrainingDiverged(const std::string& what, std::vector<EpochRecord> partial)
        : NumericError(what), history(std::move(partial)) {}
    std::vector<EpochRecord> history;
};

// Each edge independently kept with probability 1 - p_drop.
Vector random_view(const Graph& g, double p_drop, std::uint64_t seed);

// Σ_k (σ(H)^T L σ(H))_kk / (σ(H)^T D σ(H))_kk with σ the logistic sigmoid.
double pseudo_normalized_cut(const Matrix& h, const Matrix& laplacian, const Vector& degrees);

// tr(X^T L_S X) = tr(X^T X) - <X, Â_S X> on the tape.
ad::Var feature_smoothness(const ad::Var& adj_hat, const ad::Var& x);

struct LossParts {
    ad::Var l_info;
    ad::Var delta;  // invalid when the mode has no homophily term
    ad::Var total;
    ad::Var h1;
    Vector view1_hard;  // retention weights of the view-one graph
};

// The joint objective for one epoch. `p` is the tape variable holding the
// sanitizer probabilities (ignored unless the config uses a sanitizer).
// `view1_fixed` overrides view one with constant weights.
LossParts build_loss(const Graph& g, const TrainConfig& cfg, const ad::Var& x, const ad::EncoderVars& theta,
                     const ad::ProjectionVars& phi, const SanitizerState* sanitizer, const ad::Var* p,
                     const Vector& view1_noise, const Vector* view1_fixed, const Vector& view2_weights,
                     bool straight_through = true);

TrainedModel train_gchs(const Graph& g, const TrainConfig& cfg);

// The two views the model would train on for this seed (used by MI
// estimation): sanitizer draw (or frozen / random view) and a random drop.
using ViewPair = std::pair<Vector, Vector>;
ViewPair sample_views(const Graph& g, const TrainedModel& model, std::uint64_t seed);

struct SweepResult {
    std::vector<double> grid;
    std::vector<TrainedModel> models;
    std::vector<double> pnc_at_best;
    std::vector<double> accuracy;  // empty without labels
    std::optional<double> correlation;
    std::size_t best_index = 0;
    double best_eta() const { return grid.at(best_index); }
};

std::vector<double> paper_eta_grid();

// Trains one model per eta with identical seeds and selects the one with the
// smallest selection criterion at its best epoch (ties go to smaller eta).
SweepResult sweep_eta(const Graph& g, const std::vector<double>& grid, const TrainConfig& cfg);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace gchs
