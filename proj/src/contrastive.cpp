#include "gchs/contrastive.hpp"

#include "gchs/trainer.hpp"

namespace gchs {

namespace ad {

namespace {

Var unit_rows(const Var& z) {
    Tape& t = *z.tape();
    const Var inv = power(row_norms(z, kNormFloor), -1.0);
    return mul(z, matmul(inv, t.constant(Matrix::Ones(1, z.cols()))));
}

// Mean over anchors of log(Σ exp(logits)) - positive, with the anchor's own
// intra-view similarity excluded.
Var anchor_losses(const Var& cross, const Var& intra, double tau) {
    const Eigen::Index n = cross.rows();
    Matrix exclude = Matrix::Zero(n, 2 * n);
    for (Eigen::Index i = 0; i < n; ++i) exclude(i, n + i) = 1.0;
    const Var logits = scale(concat_cols(cross, intra), 1.0 / tau);
    const Var positive = scale(diagonal(cross), 1.0 / tau);
    return sub(row_logsumexp(logits, &exclude), positive);
}

}  // namespace

Var cosine_matrix(const Var& a, const Var& b) {
    if (a.cols() != b.cols()) throw DimensionError("cosine_matrix: embedding widths differ");
    return matmul(unit_rows(a), transpose(unit_rows(b)));
}

Var info_nce_projected(const Var& z1, const Var& z2, const InfoNceConfig& cfg) {
    if (!(cfg.temperature > 0.0)) throw UsageError("infoNCE temperature must be positive");
    if (z1.rows() != z2.rows() || z1.cols() != z2.cols()) throw DimensionError("info_nce: view shapes differ");
    if (z1.rows() == 0) throw UsageError("info_nce needs at least one node");
    const Var u = unit_rows(z1);
    const Var v = unit_rows(z2);
    const Var uv = matmul(u, transpose(v));
    const Var vu = transpose(uv);
    const Var uu = matmul(u, transpose(u));
    const Var vv = matmul(v, transpose(v));
    const Var total = add(sum(anchor_losses(uv, uu, cfg.temperature)), sum(anchor_losses(vu, vv, cfg.temperature)));
    return scale(total, 1.0 / (2.0 * static_cast<double>(z1.rows())));
}

Var info_nce(const Var& h1, const Var& h2, const ProjectionVars& phi, const InfoNceConfig& cfg) {
    return info_nce_projected(project(h1, phi), project(h2, phi), cfg);
}

}  // namespace ad

double mi_estimate(const Graph& g, const TrainedModel& model, int n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw UsageError("mi_estimate needs at least one sample");
    double total = 0.0;
    for (int s = 0; s < n_samples; ++s) {
        const ViewPair views = sample_views(g, model, derive_seed(seed, static_cast<std::uint64_t>(s)));
        ad::Tape tape;
        const ad::Var x = tape.constant(g.features());
        const auto theta = ad::bind(tape, model.theta, false);
        const auto phi = ad::bind(tape, model.phi, false);
        const auto w1 = tape.constant(views.first);
        const auto w2 = tape.constant(views.second);
        const ad::Var h1 = ad::encode(ad::normalized_adjacency(g, w1), x, theta, model.config.relu_output);
        const ad::Var h2 = ad::encode(ad::normalized_adjacency(g, w2), x, theta, model.config.relu_output);
        total -= ad::info_nce(h1, h2, phi, {model.config.tau_info}).scalar();
    }
    return total / n_samples;
}

}  // namespace gchs
