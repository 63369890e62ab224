#include "gchs/gradcheck_suite.hpp"

#include "gchs/autodiff.hpp"
#include "gchs/encoder.hpp"
#include "gchs/sanitizer.hpp"
#include "gchs/trainer.hpp"

#include <functional>

namespace gchs {

namespace {

using ad::Tape;
using ad::Var;

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double lo, double hi) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = lo + (hi - lo) * rng.uniform();
    return m;
}

// Entries in ±[0.1, 1], away from the kinks of relu / elu / rounding.
Matrix signed_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
    Matrix m = random_matrix(rng, r, c, 0.1, 1.0);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        if (rng.uniform() < 0.5) m(i) = -m(i);
    }
    return m;
}

// Contracts a matrix-valued op to a scalar with fixed random weights so every
// output entry contributes.
std::function<Var(Tape&, const Var&)> contract(std::function<Var(Tape&, const Var&)> op, const Matrix& weights) {
    return [op = std::move(op), weights](Tape& t, const Var& x) {
        const Var y = op(t, x);
        if (y.rows() != weights.rows() || y.cols() != weights.cols()) throw DimensionError("contraction weight shape");
        return ad::sum(ad::mul(y, t.constant(weights)));
    };
}

}  // namespace

std::vector<GradcheckEntry> run_primitive_gradchecks(std::uint64_t seed, double h) {
    Rng rng(seed);
    std::vector<GradcheckEntry> out;
    const Matrix x34 = signed_matrix(rng, 3, 4);
    const Matrix pos34 = random_matrix(rng, 3, 4, 0.5, 2.0);
    const Matrix other34 = signed_matrix(rng, 3, 4);
    const Matrix right43 = signed_matrix(rng, 4, 3);
    const Matrix row14 = signed_matrix(rng, 1, 4);
    const Matrix w34 = signed_matrix(rng, 3, 4);
    const Matrix w33 = signed_matrix(rng, 3, 3);
    const Matrix w43 = signed_matrix(rng, 4, 3);
    const Matrix w31 = signed_matrix(rng, 3, 1);
    const Matrix w38 = signed_matrix(rng, 3, 8);
    const Matrix w64 = signed_matrix(rng, 6, 4);
    const Matrix w24 = signed_matrix(rng, 2, 4);

    auto check = [&](const std::string& name, const std::function<Var(Tape&, const Var&)>& f, const Matrix& at) {
        out.push_back({name, ad::gradcheck(f, at, h)});
    };
    auto elementwise = [&](const std::string& name, Var (*op)(const Var&), const Matrix& at) {
        check(name, contract([op](Tape&, const Var& x) { return op(x); }, w34), at);
    };

    check("matmul", contract([&](Tape& t, const Var& x) { return ad::matmul(x, t.constant(right43)); }, w33), x34);
    check("matmul_right", contract([&](Tape& t, const Var& x) { return ad::matmul(t.constant(right43), x); },
                                   signed_matrix(rng, 4, 4)),
          x34);
    check("add", contract([&](Tape& t, const Var& x) { return ad::add(x, t.constant(other34)); }, w34), x34);
    check("add_row", contract([&](Tape& t, const Var& x) { return ad::add(t.constant(other34), x); }, w34), row14);
    check("sub", contract([&](Tape& t, const Var& x) { return ad::sub(t.constant(other34), x); }, w34), x34);
    check("mul", contract([&](Tape& t, const Var& x) { return ad::mul(x, t.constant(other34)); }, w34), x34);
    check("mul_scalar", contract([&](Tape& t, const Var& x) { return ad::mul(t.constant(other34), x); }, w34),
          Matrix::Constant(1, 1, 0.7));
    check("div_numerator", contract([&](Tape& t, const Var& x) { return ad::div(x, t.constant(pos34)); }, w34), x34);
    check("div_denominator", contract([&](Tape& t, const Var& x) { return ad::div(t.constant(other34), x); }, w34),
          pos34);
    check("scale", contract([](Tape&, const Var& x) { return ad::scale(x, -1.7); }, w34), x34);
    check("shift", contract([](Tape&, const Var& x) { return ad::shift(x, 0.3); }, w34), x34);
    elementwise("exp", ad::exp, x34);
    elementwise("log", ad::log, pos34);
    elementwise("sigmoid", ad::sigmoid, x34);
    elementwise("relu", ad::relu, x34);
    elementwise("elu", ad::elu, x34);
    check("power", contract([](Tape&, const Var& x) { return ad::power(x, -0.5); }, w34), pos34);
    check("sum", [](Tape&, const Var& x) { return ad::scale(ad::sum(x), 0.5); }, x34);
    check("trace", [](Tape&, const Var& x) { return ad::trace(x); }, signed_matrix(rng, 4, 4));
    check("transpose", contract([](Tape&, const Var& x) { return ad::transpose(x); }, w43), x34);
    check("row_norms", contract([](Tape&, const Var& x) { return ad::row_norms(x, 1e-8); }, w31), x34);
    check("diagonal", contract([](Tape&, const Var& x) { return ad::diagonal(x); }, w31), signed_matrix(rng, 3, 3));
    {
        Matrix exclude = Matrix::Zero(3, 4);
        exclude(0, 1) = exclude(2, 3) = 1.0;
        check("row_logsumexp",
              contract([exclude](Tape&, const Var& x) { return ad::row_logsumexp(x, &exclude); }, w31), x34);
    }
    check("concat_cols", contract([&](Tape& t, const Var& x) { return ad::concat_cols(x, t.constant(other34)); }, w38),
          x34);
    check("concat_rows", contract([&](Tape& t, const Var& x) { return ad::concat_rows(t.constant(other34), x); },
                                  w64),
          x34);
    {
        const std::vector<int> rows{2, 0};
        check("select_rows", contract([rows](Tape&, const Var& x) { return ad::select_rows(x, rows); }, w24), x34);
    }
    {
        const std::vector<Edge> edges{{0, 1}, {1, 2}, {0, 3}};
        const Matrix w = random_matrix(rng, 3, 1, 0.2, 1.0);
        check("scatter_adjacency",
              contract([edges](Tape&, const Var& x) { return ad::scatter_adjacency(x, edges, 4); },
                       signed_matrix(rng, 4, 4)),
              w);
        check("edge_degrees",
              contract([edges](Tape&, const Var& x) { return ad::edge_degrees(x, edges, 4); }, signed_matrix(rng, 4, 1)),
              w);
    }
    return out;
}

std::vector<GradcheckEntry> run_full_loss_gradchecks(std::uint64_t seed, double h) {
    SbmParams sbm;
    sbm.n = 6;
    sbm.k_blocks = 2;
    sbm.p_intra = 0.8;
    sbm.p_inter = 0.3;
    sbm.feature_dim = 3;
    sbm.seed = seed;
    Graph g = generate_sbm(sbm);
    if (g.num_edges() == 0) g = g.with_edges({{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}});

    TrainConfig cfg;
    cfg.mode = Mode::full;
    cfg.eta = 0.5;
    cfg.hidden_dim = 5;
    cfg.out_dim = 4;
    cfg.seed = seed;
    const EncoderParams theta = init_encoder(g.feature_dim(), cfg.hidden_dim, cfg.out_dim, derive_seed(seed, 1));
    ProjectionParams phi = init_projection(cfg.out_dim, derive_seed(seed, 2));
    Rng rng(derive_seed(seed, 3));
    phi.b1 = signed_matrix(rng, 1, cfg.out_dim) * 0.1;
    phi.b2 = signed_matrix(rng, 1, cfg.out_dim) * 0.1;

    SanitizerState san = init_sanitizer(g.num_edges(), 0.5 * g.num_edges(), cfg.tau_gumbel, cfg.p_min);
    san.p = random_matrix(rng, g.num_edges(), 1, 0.05, 0.6);
    const Vector noise = mask_noise(san.law, g.num_edges(), derive_seed(seed, 4));
    const Vector view2 = random_view(g, cfg.p_drop, derive_seed(seed, 5));

    enum class Slot { w1, w2, u1, b1, u2, b2, p };
    auto loss_for = [&](Slot slot) {
        return [&, slot](Tape& t, const Var& v) {
            const Var x = t.constant(g.features());
            ad::EncoderVars th{t.constant(theta.w1), t.constant(theta.w2)};
            ad::ProjectionVars ph{t.constant(phi.u1), t.constant(phi.b1), t.constant(phi.u2), t.constant(phi.b2)};
            Var p = t.constant(san.p);
            switch (slot) {
                case Slot::w1: th.w1 = v; break;
                case Slot::w2: th.w2 = v; break;
                case Slot::u1: ph.u1 = v; break;
                case Slot::b1: ph.b1 = v; break;
                case Slot::u2: ph.u2 = v; break;
                case Slot::b2: ph.b2 = v; break;
                case Slot::p: p = v; break;
            }
            SanitizerState s = san;
            s.p = p.value().col(0);
            return build_loss(g, cfg, x, th, ph, &s, &p, noise, nullptr, view2, false).total;
        };
    };

    std::vector<GradcheckEntry> out;
    out.push_back({"loss_wrt_W1", ad::gradcheck(loss_for(Slot::w1), theta.w1, h)});
    out.push_back({"loss_wrt_W2", ad::gradcheck(loss_for(Slot::w2), theta.w2, h)});
    out.push_back({"loss_wrt_U1", ad::gradcheck(loss_for(Slot::u1), phi.u1, h)});
    out.push_back({"loss_wrt_b1", ad::gradcheck(loss_for(Slot::b1), phi.b1, h)});
    out.push_back({"loss_wrt_U2", ad::gradcheck(loss_for(Slot::u2), phi.u2, h)});
    out.push_back({"loss_wrt_b2", ad::gradcheck(loss_for(Slot::b2), phi.b2, h)});
    out.push_back({"loss_wrt_P", ad::gradcheck(loss_for(Slot::p), san.p, h)});
    return out;
}

std::vector<GradcheckEntry> run_gradcheck_suite(std::uint64_t seed, double h) {
    auto out = run_primitive_gradchecks(seed, h);
    auto full = run_full_loss_gradchecks(seed, h);
    out.insert(out.end(), full.begin(), full.end());
    return out;
}

}  // namespace gchs
