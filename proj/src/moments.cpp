#include "fpilco/moments.hpp"

namespace fpilco {

GaussianVec::GaussianVec(Vec m, Mat c) : mean(std::move(m)) {
    if (c.rows() != c.cols() || c.rows() != mean.size())
        throw NumericalError("GaussianVec: covariance shape mismatch");
    if (!mean.allFinite() || !c.allFinite()) throw NumericalError("GaussianVec: non-finite input");
    double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
    if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw NumericalError("GaussianVec: covariance not symmetric");
    double lo = min_eigenvalue(c);
    if (lo < -1e-10 * scale) throw NumericalError("GaussianVec: covariance indefinite");
    cov = lo < 0.0 ? psd_clip(c) : symmetrize(c);
}

namespace builders {

GpRef::GpRef(const GPModel& m) {
    inputs = &m.inputs;
    n = m.size();
    d_in = m.input_dim();
    for (const GPDim& dim : m.dims) dims.push_back({&dim.beta, &dim.kinv, dim.ell2, dim.sf2, dim.phi});
}

Var training_offsets(Graph& g, const GpRef& gp, Var mu) {
    return g.rows_minus_row(gp.inputs, mu);
}

QParts q_parts(Graph& g, Var nu, Var lam_diag, Var lam_logdet, Var v) {
    const int d = static_cast<int>(g.value(lam_diag).rows());
    Var m = v.valid() ? g.add(lam_diag, v) : lam_diag;
    Var prec = g.solve_spd(m, g.constant(Mat::Identity(d, d)));
    Var alpha = g.matmul(nu, prec);
    Var ones_d = g.constant(Mat::Ones(d, 1));
    Var quad = g.matmul(g.hadamard(nu, alpha), ones_d);
    QParts parts;
    parts.alpha = alpha;
    parts.prec = prec;
    if (v.valid()) {
        Var ld = g.scale(g.sub(g.logdet_spd(m), lam_logdet), -0.5);
        parts.lq = g.add_scalar(g.scale(quad, -0.5), ld);
    } else {
        parts.lq = g.scale(quad, -0.5);
    }
    return parts;
}

Var q_cross(Graph& g, const QParts& pa, const QParts& pb, Var sigma) {
    const int d = static_cast<int>(g.value(sigma).rows());
    Var r = g.add(g.matmul(sigma, g.add(pa.prec, pb.prec)), g.constant(Mat::Identity(d, d)));
    Var t = g.symmetrize(g.solve_lu(r, sigma));
    Var ats = g.matmul(pa.alpha, t);
    Var bts = g.matmul(pb.alpha, t);
    Var ones_d = g.constant(Mat::Ones(d, 1));
    Var ra = g.add(pa.lq, g.scale(g.matmul(g.hadamard(ats, pa.alpha), ones_d), 0.5));
    Var rb = g.add(pb.lq, g.scale(g.matmul(g.hadamard(bts, pb.alpha), ones_d), 0.5));
    Var c0 = g.scale(g.logdet_lu(r), -0.5);
    return g.exp_rank1(g.matmul(ats, g.transpose(pb.alpha)), ra, rb, c0);
}

namespace {

struct DimConsts {
    Var lam_diag;
    Var lam_logdet;
    Var beta;  // n x 1 constant node
    Var phi;   // d x 1 constant node
};

std::vector<DimConsts> dim_constants(Graph& g, const GpRef& gp) {
    std::vector<DimConsts> c;
    for (const GpDimRef& dim : gp.dims) {
        DimConsts dc;
        dc.lam_diag = g.constant(Mat(dim.lam.asDiagonal()));
        dc.lam_logdet = g.scalar_constant(dim.lam.array().log().sum());
        dc.beta = g.constant(*dim.beta);
        dc.phi = g.constant(dim.phi);
        c.push_back(dc);
    }
    return c;
}

}  // namespace

UncertainVars gp_predict_uncertain(Graph& g, const GpRef& gp, Var mu, Var sigma_in) {
    const int dout = static_cast<int>(gp.dims.size());
    auto dc = dim_constants(g, gp);
    Var nu = training_offsets(g, gp, mu);

    std::vector<QParts> parts_q(dout), parts_0(dout);
    std::vector<Var> qv(dout), bdot(dout), cpre_cols(dout), mean_parts(dout), sphi(dout);
    for (int a = 0; a < dout; ++a) {
        parts_q[a] = q_parts(g, nu, dc[a].lam_diag, dc[a].lam_logdet, sigma_in);
        parts_0[a] = q_parts(g, nu, dc[a].lam_diag, dc[a].lam_logdet, Var{});
        qv[a] = g.cwise_exp(parts_q[a].lq);
        bdot[a] = g.dot_all(qv[a], dc[a].beta);
        double sf2 = gp.dims[a].sf2;
        mean_parts[a] = g.add(g.scale(bdot[a], sf2), g.dot_all(mu, dc[a].phi));
        Var weighted = g.matmul(g.transpose(nu), g.hadamard(qv[a], dc[a].beta));
        cpre_cols[a] = g.scale(g.matmul(parts_q[a].prec, weighted), sf2);
        sphi[a] = g.matmul(sigma_in, dc[a].phi);
    }

    std::vector<std::tuple<int, int, Var>> cov_entries;
    for (int a = 0; a < dout; ++a) {
        for (int b = a; b < dout; ++b) {
            double sa2 = gp.dims[a].sf2, sb2 = gp.dims[b].sf2;
            Var qab = q_cross(g, parts_0[a], parts_0[b], sigma_in);
            Var term = g.sub(g.scale(g.bilinear(dc[a].beta, qab, dc[b].beta), sa2 * sb2),
                             g.scalar_mul(g.scale(bdot[a], sa2), g.scale(bdot[b], sb2)));
            if (a == b) {
                Var tr = g.dot_ext(qab, gp.dims[a].kinv);
                term = g.add(term, g.sub(g.scalar_constant(sa2), g.scale(tr, sa2 * sa2)));
            }
            Var lin = g.add(g.add(g.dot_all(cpre_cols[a], sphi[b]), g.dot_all(sphi[a], cpre_cols[b])),
                            g.dot_all(sphi[a], dc[b].phi));
            term = g.add(term, lin);
            cov_entries.emplace_back(a, b, term);
            if (a != b) cov_entries.emplace_back(b, a, term);
        }
    }

    UncertainVars out;
    out.mean = g.vcat(mean_parts);
    out.cov = g.assemble(dout, dout, cov_entries);
    out.cpre = g.hcat(cpre_cols);
    return out;
}

HierVars gp_predict_hier(Graph& g, const GpRef& gp, Var mu, Var sigma_outer, Var v_inner) {
    const int dout = static_cast<int>(gp.dims.size());
    auto dc = dim_constants(g, gp);
    Var nu = training_offsets(g, gp, mu);
    Var sigma_total = g.add(sigma_outer, v_inner);

    std::vector<QParts> parts_hat(dout), parts_plain(dout), parts_qhat(dout);
    std::vector<Var> qhat(dout), bdot(dout), cpre_cols(dout), mean_parts(dout);
    std::vector<Var> so_phi(dout), vi_phi(dout);
    for (int a = 0; a < dout; ++a) {
        parts_hat[a] = q_parts(g, nu, dc[a].lam_diag, dc[a].lam_logdet, v_inner);
        parts_plain[a] = q_parts(g, nu, dc[a].lam_diag, dc[a].lam_logdet, Var{});
        parts_qhat[a] = q_parts(g, nu, dc[a].lam_diag, dc[a].lam_logdet, sigma_total);
        qhat[a] = g.cwise_exp(parts_qhat[a].lq);
        bdot[a] = g.dot_all(qhat[a], dc[a].beta);
        double sf2 = gp.dims[a].sf2;
        mean_parts[a] = g.add(g.scale(bdot[a], sf2), g.dot_all(mu, dc[a].phi));
        Var weighted = g.matmul(g.transpose(nu), g.hadamard(qhat[a], dc[a].beta));
        cpre_cols[a] = g.scale(g.matmul(parts_qhat[a].prec, weighted), sf2);
        so_phi[a] = g.matmul(sigma_outer, dc[a].phi);
        vi_phi[a] = g.matmul(v_inner, dc[a].phi);
    }

    std::vector<std::tuple<int, int, Var>> com_entries, mov_entries;
    for (int a = 0; a < dout; ++a) {
        for (int b = a; b < dout; ++b) {
            double sa2 = gp.dims[a].sf2, sb2 = gp.dims[b].sf2;
            Var qhat_ab = q_cross(g, parts_hat[a], parts_hat[b], sigma_outer);
            Var qtil_ab = q_cross(g, parts_plain[a], parts_plain[b], sigma_total);
            Var bil_hat = g.bilinear(dc[a].beta, qhat_ab, dc[b].beta);
            Var bil_til = g.bilinear(dc[a].beta, qtil_ab, dc[b].beta);

            // covariance of the output mean
            Var com = g.sub(g.scale(bil_hat, sa2 * sb2),
                            g.scalar_mul(g.scale(bdot[a], sa2), g.scale(bdot[b], sb2)));
            com = g.add(com, g.add(g.add(g.dot_all(cpre_cols[a], so_phi[b]),
                                         g.dot_all(so_phi[a], cpre_cols[b])),
                                   g.dot_all(so_phi[a], dc[b].phi)));
            com_entries.emplace_back(a, b, com);
            if (a != b) com_entries.emplace_back(b, a, com);

            // expected output variance
            Var mov = g.scale(g.sub(bil_til, bil_hat), sa2 * sb2);
            if (a == b) {
                Var tr = g.dot_ext(qtil_ab, gp.dims[a].kinv);
                mov = g.add(mov, g.sub(g.scalar_constant(sa2), g.scale(tr, sa2 * sa2)));
            }
            mov = g.add(mov, g.add(g.add(g.dot_all(cpre_cols[a], vi_phi[b]),
                                         g.dot_all(vi_phi[a], cpre_cols[b])),
                                   g.dot_all(vi_phi[a], dc[b].phi)));
            mov_entries.emplace_back(a, b, mov);
            if (a != b) mov_entries.emplace_back(b, a, mov);
        }
    }

    HierVars out;
    out.mean_of_mean = g.vcat(mean_parts);
    out.cov_of_mean = g.assemble(dout, dout, com_entries);
    out.mean_of_var = g.assemble(dout, dout, mov_entries);
    out.cpre = g.hcat(cpre_cols);
    return out;
}

}  // namespace builders

// ---------------------------------------------------------------------
// plain wrappers

namespace {

void check_input_dim(const GPModel& model, const Vec& mu) {
    if (mu.size() != model.input_dim())
        throw NumericalError("moment input dimension does not match model");
    if (!mu.allFinite()) throw NumericalError("non-finite moment input");
}

}  // namespace

Vec q_vec(const GPModel& model, int a, const Vec& mu, const Mat& v) {
    check_input_dim(model, mu);
    ad::Graph g;
    builders::GpRef ref(model);
    ad::Var nu = builders::training_offsets(g, ref, g.constant(mu));
    const GPDim& dim = model.dims[static_cast<std::size_t>(a)];
    ad::Var lam = g.constant(Mat(dim.ell2.asDiagonal()));
    ad::Var ld = g.scalar_constant(dim.ell2.array().log().sum());
    bool zero_v = v.size() == 0 || v.cwiseAbs().maxCoeff() == 0.0;
    auto parts =
        builders::q_parts(g, nu, lam, ld, zero_v ? ad::Var{} : g.constant(symmetrize(v)));
    return g.value(g.cwise_exp(parts.lq)).col(0);
}

Mat Q_mat(const GPModel& model, int a, int b, const Vec& mu, const Mat& sigma, const Mat& v) {
    check_input_dim(model, mu);
    ad::Graph g;
    builders::GpRef ref(model);
    ad::Var nu = builders::training_offsets(g, ref, g.constant(mu));
    bool zero_v = v.size() == 0 || v.cwiseAbs().maxCoeff() == 0.0;
    ad::Var vv = zero_v ? ad::Var{} : g.constant(symmetrize(v));
    auto make_parts = [&](int dimidx) {
        const GPDim& dim = model.dims[static_cast<std::size_t>(dimidx)];
        ad::Var lam = g.constant(Mat(dim.ell2.asDiagonal()));
        ad::Var ld = g.scalar_constant(dim.ell2.array().log().sum());
        return builders::q_parts(g, nu, lam, ld, vv);
    };
    auto pa = make_parts(a);
    auto pb = a == b ? pa : make_parts(b);
    return g.value(builders::q_cross(g, pa, pb, g.constant(symmetrize(sigma))));
}

MomentOut predict_uncertain(const GPModel& model, const GaussianVec& input) {
    check_input_dim(model, input.mean);
    ad::Graph g;
    builders::GpRef ref(model);
    auto vars = builders::gp_predict_uncertain(g, ref, g.constant(input.mean), g.constant(input.cov));
    MomentOut out;
    out.mean = g.value(vars.mean).col(0);
    out.cov = psd_clip(g.value(vars.cov));
    out.cpre = g.value(vars.cpre);
    return out;
}

HierOut predict_hierarchical(const GPModel& model, const GaussianVec& outer, const Mat& inner_var) {
    check_input_dim(model, outer.mean);
    if (inner_var.rows() != outer.mean.size() || inner_var.cols() != outer.mean.size())
        throw NumericalError("predict_hierarchical: inner variance shape mismatch");
    ad::Graph g;
    builders::GpRef ref(model);
    auto vars = builders::gp_predict_hier(g, ref, g.constant(outer.mean), g.constant(outer.cov),
                                          g.constant(symmetrize(inner_var)));
    HierOut out;
    out.mean_of_mean = g.value(vars.mean_of_mean).col(0);
    out.cov_of_mean = psd_clip(g.value(vars.cov_of_mean));
    out.mean_of_var = psd_clip(g.value(vars.mean_of_var));
    out.cpre = g.value(vars.cpre);
    return out;
}

}  // namespace fpilco
