#include "fpilco/tape.hpp"

#include <cmath>

namespace fpilco::ad {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw NumericalError(std::string("tape: ") + what);
}

}  // namespace

Var Graph::push(Node&& n) {
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

bool Graph::any_wants(const std::vector<int>& parents) const {
    for (int p : parents)
        if (node(p).wants_grad) return true;
    return false;
}

Var Graph::input(Mat value) {
    Node n;
    n.op = Op::Leaf;
    n.wants_grad = true;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Graph::constant(Mat value) {
    Node n;
    n.op = Op::Leaf;
    n.wants_grad = false;
    n.value = std::move(value);
    return push(std::move(n));
}

double Graph::scalar(Var v) const {
    const Mat& m = value(v);
    require(m.size() == 1, "scalar() on non-scalar var");
    return m(0, 0);
}

Mat Graph::grad(Var v) const {
    const Node& n = node(v.id);
    if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
}

void Graph::clear() { nodes_.clear(); }

void Graph::accum(int id, const Mat& g) {
    Node& n = node(id);
    if (!n.wants_grad) return;
    if (n.grad.size() == 0)
        n.grad = g;
    else
        n.grad += g;
}

// ---------------------------------------------------------------------
// forward construction

Var Graph::add(Var a, Var b) {
    const Mat &A = value(a), &B = value(b);
    require(A.rows() == B.rows() && A.cols() == B.cols(), "add shape mismatch");
    Node n;
    n.op = Op::Add;
    n.parents = {a.id, b.id};
    n.wants_grad = any_wants(n.parents);
    n.value = A + B;
    return push(std::move(n));
}

Var Graph::sub(Var a, Var b) {
    const Mat &A = value(a), &B = value(b);
    require(A.rows() == B.rows() && A.cols() == B.cols(), "sub shape mismatch");
    Node n;
    n.op = Op::Sub;
    n.parents = {a.id, b.id};
    n.wants_grad = any_wants(n.parents);
    n.value = A - B;
    return push(std::move(n));
}

Var Graph::scale(Var a, double c) {
    Node n;
    n.op = Op::ScaleC;
    n.parents = {a.id};
    n.cpay = c;
    n.wants_grad = any_wants(n.parents);
    n.value = c * value(a);
    return push(std::move(n));
}

Var Graph::add_scalar(Var a, Var s) {
    require(value(s).size() == 1, "add_scalar: s not 1x1");
    Node n;
    n.op = Op::AddScalar;
    n.parents = {a.id, s.id};
    n.wants_grad = any_wants(n.parents);
    n.value = value(a).array() + value(s)(0, 0);
    return push(std::move(n));
}

Var Graph::scalar_mul(Var s, Var a) {
    require(value(s).size() == 1, "scalar_mul: s not 1x1");
    Node n;
    n.op = Op::ScalarMul;
    n.parents = {s.id, a.id};
    n.wants_grad = any_wants(n.parents);
    n.value = value(s)(0, 0) * value(a);
    return push(std::move(n));
}

Var Graph::matmul(Var a, Var b) {
    const Mat &A = value(a), &B = value(b);
    require(A.cols() == B.rows(), "matmul shape mismatch");
    Node n;
    n.op = Op::Matmul;
    n.parents = {a.id, b.id};
    n.wants_grad = any_wants(n.parents);
    n.value.noalias() = A * B;
    return push(std::move(n));
}

Var Graph::hadamard(Var a, Var b) {
    const Mat &A = value(a), &B = value(b);
    require(A.rows() == B.rows() && A.cols() == B.cols(), "hadamard shape mismatch");
    Node n;
    n.op = Op::Hadamard;
    n.parents = {a.id, b.id};
    n.wants_grad = any_wants(n.parents);
    n.value = A.cwiseProduct(B);
    return push(std::move(n));
}

Var Graph::transpose(Var a) {
    Node n;
    n.op = Op::Transpose;
    n.parents = {a.id};
    n.wants_grad = any_wants(n.parents);
    n.value = value(a).transpose();
    return push(std::move(n));
}

Var Graph::cwise_exp(Var a) {
    Node n;
    n.op = Op::CwiseExp;
    n.parents = {a.id};
    n.wants_grad = any_wants(n.parents);
    n.value = value(a).array().exp();
    return push(std::move(n));
}

Var Graph::cwise_log(Var a) {
    require((value(a).array() > 0.0).all(), "cwise_log of non-positive entry");
    Node n;
    n.op = Op::CwiseLog;
    n.parents = {a.id};
    n.wants_grad = any_wants(n.parents);
    n.value = value(a).array().log();
    return push(std::move(n));
}

Var Graph::cwise_sin(Var a) {
    Node n;
    n.op = Op::CwiseSin;
    n.parents = {a.id};
    n.wants_grad = any_wants(n.parents);
    n.value = value(a).array().sin();
    return push(std::move(n));
}

Var Graph::cwise_cos(Var a) {
    Node n;
    n.op = Op::CwiseCos;
    n.parents = {a.id};
    n.wants_grad = any_wants(n.parents);
    n.value = value(a).array().cos();
    return push(std::move(n));
}

Var Graph::solve_spd(Var a, Var b) {
    const Mat &A = value(a), &B = value(b);
    require(A.rows() == A.cols() && A.rows() == B.rows(), "solve_spd shape mismatch");
    auto llt = std::make_shared<Eigen::LLT<Mat>>(A);
    if (llt->info() != Eigen::Success)
        throw NumericalError("solve_spd: matrix not positive definite");
    Node n;
    n.op = Op::SolveSpd;
    n.parents = {a.id, b.id};
    n.wants_grad = any_wants(n.parents);
    n.value = llt->solve(B);
    n.llt = std::move(llt);
    return push(std::move(n));
}

Var Graph::solve_lu(Var a, Var b) {
    const Mat &A = value(a), &B = value(b);
    require(A.rows() == A.cols() && A.rows() == B.rows(), "solve_lu shape mismatch");
    auto lu = std::make_shared<Eigen::PartialPivLU<Mat>>(A);
    Node n;
    n.op = Op::SolveLu;
    n.parents = {a.id, b.id};
    n.wants_grad = any_wants(n.parents);
    n.value = lu->solve(B);
    n.lu = std::move(lu);
    if (!n.value.allFinite()) throw NumericalError("solve_lu: singular system");
    return push(std::move(n));
}

Var Graph::logdet_spd(Var a) {
    const Mat& A = value(a);
    require(A.rows() == A.cols(), "logdet_spd: not square");
    auto llt = std::make_shared<Eigen::LLT<Mat>>(A);
    if (llt->info() != Eigen::Success)
        throw NumericalError("logdet_spd: matrix not positive definite");
    double ld = 0.0;
    for (int i = 0; i < A.rows(); ++i) ld += std::log(llt->matrixLLT()(i, i));
    Node n;
    n.op = Op::LogdetSpd;
    n.parents = {a.id};
    n.wants_grad = any_wants(n.parents);
    n.value = Mat::Constant(1, 1, 2.0 * ld);
    n.llt = std::move(llt);
    return push(std::move(n));
}

Var Graph::logdet_lu(Var a) {
    const Mat& A = value(a);
    require(A.rows() == A.cols(), "logdet_lu: not square");
    auto lu = std::make_shared<Eigen::PartialPivLU<Mat>>(A);
    double det = lu->determinant();
    if (!(det > 0.0)) throw NumericalError("logdet_lu: determinant not positive");
    Node n;
    n.op = Op::LogdetLu;
    n.parents = {a.id};
    n.wants_grad = any_wants(n.parents);
    n.value = Mat::Constant(1, 1, std::log(det));
    n.lu = std::move(lu);
    return push(std::move(n));
}

Var Graph::sum_all(Var a) {
    Node n;
    n.op = Op::SumAll;
    n.parents = {a.id};
    n.wants_grad = any_wants(n.parents);
    n.value = Mat::Constant(1, 1, value(a).sum());
    return push(std::move(n));
}

Var Graph::dot_all(Var a, Var b) {
    const Mat &A = value(a), &B = value(b);
    require(A.rows() == B.rows() && A.cols() == B.cols(), "dot_all shape mismatch");
    Node n;
    n.op = Op::DotAll;
    n.parents = {a.id, b.id};
    n.wants_grad = any_wants(n.parents);
    n.value = Mat::Constant(1, 1, A.cwiseProduct(B).sum());
    return push(std::move(n));
}

Var Graph::bilinear(Var u, Var q, Var v) {
    const Mat &U = value(u), &Q = value(q), &V = value(v);
    require(U.cols() == 1 && V.cols() == 1 && Q.rows() == U.rows() && Q.cols() == V.rows(),
            "bilinear shape mismatch");
    Node n;
    n.op = Op::Bilinear;
    n.parents = {u.id, q.id, v.id};
    n.wants_grad = any_wants(n.parents);
    n.value = Mat::Constant(1, 1, (U.transpose() * Q * V)(0, 0));
    return push(std::move(n));
}

Var Graph::rows_minus_row(const Mat* x, Var mu) {
    const Mat& M = value(mu);
    require(M.cols() == 1 && M.rows() == x->cols(), "rows_minus_row shape mismatch");
    Node n;
    n.op = Op::RowsMinusRow;
    n.parents = {mu.id};
    n.wants_grad = any_wants(n.parents);
    n.ext = x;
    n.value = x->rowwise() - M.col(0).transpose();
    return push(std::move(n));
}

Var Graph::dot_ext(Var a, const Mat* w) {
    const Mat& A = value(a);
    require(A.rows() == w->rows() && A.cols() == w->cols(), "dot_ext shape mismatch");
    Node n;
    n.op = Op::DotExt;
    n.parents = {a.id};
    n.wants_grad = any_wants(n.parents);
    n.ext = w;
    n.value = Mat::Constant(1, 1, A.cwiseProduct(*w).sum());
    return push(std::move(n));
}

Var Graph::exp_rank1(Var g, Var r, Var s, Var c) {
    const Mat &G = value(g), &R = value(r), &S = value(s);
    require(R.cols() == 1 && S.cols() == 1 && G.rows() == R.rows() && G.cols() == S.rows(),
            "exp_rank1 shape mismatch");
    require(value(c).size() == 1, "exp_rank1: c not 1x1");
    Node n;
    n.op = Op::ExpRank1;
    n.parents = {g.id, r.id, s.id, c.id};
    n.wants_grad = any_wants(n.parents);
    n.value = (((G.colwise() + R.col(0)).rowwise() + S.col(0).transpose()).array() + value(c)(0, 0))
                  .exp()
                  .matrix();
    return push(std::move(n));
}

Var Graph::block(Var a, int i0, int j0, int rows, int cols) {
    const Mat& A = value(a);
    require(i0 >= 0 && j0 >= 0 && i0 + rows <= A.rows() && j0 + cols <= A.cols(),
            "block out of range");
    Node n;
    n.op = Op::Block;
    n.parents = {a.id};
    n.wants_grad = any_wants(n.parents);
    n.i0 = i0;
    n.j0 = j0;
    n.br = rows;
    n.bc = cols;
    n.value = A.block(i0, j0, rows, cols);
    return push(std::move(n));
}

Var Graph::vcat(const std::vector<Var>& parts) {
    require(!parts.empty(), "vcat: empty");
    Eigen::Index rows = 0, cols = value(parts[0]).cols();
    for (Var p : parts) {
        require(value(p).cols() == cols, "vcat: column mismatch");
        rows += value(p).rows();
    }
    Node n;
    n.op = Op::Vcat;
    for (Var p : parts) n.parents.push_back(p.id);
    n.wants_grad = any_wants(n.parents);
    n.value.resize(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
        n.value.middleRows(at, value(p).rows()) = value(p);
        at += value(p).rows();
    }
    return push(std::move(n));
}

Var Graph::hcat(const std::vector<Var>& parts) {
    require(!parts.empty(), "hcat: empty");
    Eigen::Index cols = 0, rows = value(parts[0]).rows();
    for (Var p : parts) {
        require(value(p).rows() == rows, "hcat: row mismatch");
        cols += value(p).cols();
    }
    Node n;
    n.op = Op::Hcat;
    for (Var p : parts) n.parents.push_back(p.id);
    n.wants_grad = any_wants(n.parents);
    n.value.resize(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
        n.value.middleCols(at, value(p).cols()) = value(p);
        at += value(p).cols();
    }
    return push(std::move(n));
}

Var Graph::diag(Var v) {
    const Mat& V = value(v);
    require(V.cols() == 1, "diag expects a column vector");
    Node n;
    n.op = Op::Diag;
    n.parents = {v.id};
    n.wants_grad = any_wants(n.parents);
    n.value = V.col(0).asDiagonal();
    return push(std::move(n));
}

Var Graph::assemble(int rows, int cols, const std::vector<std::tuple<int, int, Var>>& entries) {
    Node n;
    n.op = Op::Assemble;
    n.value = Mat::Zero(rows, cols);
    for (const auto& [i, j, v] : entries) {
        require(i >= 0 && i < rows && j >= 0 && j < cols, "assemble: entry out of range");
        require(value(v).size() == 1, "assemble: entry not scalar");
        n.value(i, j) += value(v)(0, 0);
        n.entries.emplace_back(i, j, v.id);
        n.parents.push_back(v.id);
    }
    n.wants_grad = any_wants(n.parents);
    return push(std::move(n));
}

Var Graph::clamp_min(Var a, double lo) {
    Node n;
    n.op = Op::ClampMin;
    n.parents = {a.id};
    n.wants_grad = any_wants(n.parents);
    n.value = value(a).cwiseMax(lo);
    return push(std::move(n));
}

Var Graph::psd_clip_guard(Var a, double neg_tol, long* counter) {
    Node n;
    n.op = Op::PsdClip;
    n.parents = {a.id};
    n.wants_grad = any_wants(n.parents);
    n.value = fpilco::psd_clip(value(a), neg_tol, counter);
    n.counter = counter;
    return push(std::move(n));
}

// ---------------------------------------------------------------------
// reverse sweep

void Graph::backward(const std::vector<std::pair<Var, Mat>>& seeds) {
    for (const auto& [v, seed] : seeds) {
        const Mat& val = value(v);
        require(seed.rows() == val.rows() && seed.cols() == val.cols(), "backward: seed shape");
        accum(v.id, seed);
    }
    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) backward_node(id);
}

void Graph::backward_node(int id) {
    Node& n = node(id);
    if (!n.wants_grad || n.grad.size() == 0 || n.op == Op::Leaf) return;
    const Mat& g = n.grad;
    auto P = [&](int k) -> int { return n.parents[static_cast<std::size_t>(k)]; };
    switch (n.op) {
        case Op::Leaf:
            break;
        case Op::Add:
            accum(P(0), g);
            accum(P(1), g);
            break;
        case Op::Sub:
            accum(P(0), g);
            accum(P(1), -g);
            break;
        case Op::ScaleC:
            accum(P(0), n.cpay * g);
            break;
        case Op::AddScalar:
            accum(P(0), g);
            accum(P(1), Mat::Constant(1, 1, g.sum()));
            break;
        case Op::ScalarMul: {
            const Mat& A = node(P(1)).value;
            if (node(P(0)).wants_grad) accum(P(0), Mat::Constant(1, 1, g.cwiseProduct(A).sum()));
            if (node(P(1)).wants_grad) accum(P(1), node(P(0)).value(0, 0) * g);
            break;
        }
        case Op::Matmul:
            if (node(P(0)).wants_grad) accum(P(0), g * node(P(1)).value.transpose());
            if (node(P(1)).wants_grad) accum(P(1), node(P(0)).value.transpose() * g);
            break;
        case Op::Hadamard:
            if (node(P(0)).wants_grad) accum(P(0), g.cwiseProduct(node(P(1)).value));
            if (node(P(1)).wants_grad) accum(P(1), g.cwiseProduct(node(P(0)).value));
            break;
        case Op::Transpose:
            accum(P(0), g.transpose());
            break;
        case Op::CwiseExp:
            accum(P(0), g.cwiseProduct(n.value));
            break;
        case Op::CwiseLog:
            accum(P(0), g.cwiseQuotient(node(P(0)).value));
            break;
        case Op::CwiseSin:
            accum(P(0), g.cwiseProduct(node(P(0)).value.array().cos().matrix()));
            break;
        case Op::CwiseCos:
            accum(P(0), -g.cwiseProduct(node(P(0)).value.array().sin().matrix()));
            break;
        case Op::SolveSpd: {
            Mat w = n.llt->solve(g);
            if (node(P(0)).wants_grad) accum(P(0), -w * n.value.transpose());
            if (node(P(1)).wants_grad) accum(P(1), w);
            break;
        }
        case Op::SolveLu: {
            Mat w = n.lu->transpose().solve(g);
            if (node(P(0)).wants_grad) accum(P(0), -w * n.value.transpose());
            if (node(P(1)).wants_grad) accum(P(1), w);
            break;
        }
        case Op::LogdetSpd: {
            Mat inv = n.llt->solve(Mat::Identity(node(P(0)).value.rows(), node(P(0)).value.rows()));
            accum(P(0), g(0, 0) * inv);
            break;
        }
        case Op::LogdetLu: {
            Mat inv_t =
                n.lu->transpose().solve(Mat::Identity(node(P(0)).value.rows(), node(P(0)).value.rows()));
            accum(P(0), g(0, 0) * inv_t);
            break;
        }
        case Op::SumAll:
            accum(P(0), Mat::Constant(node(P(0)).value.rows(), node(P(0)).value.cols(), g(0, 0)));
            break;
        case Op::DotAll:
            if (node(P(0)).wants_grad) accum(P(0), g(0, 0) * node(P(1)).value);
            if (node(P(1)).wants_grad) accum(P(1), g(0, 0) * node(P(0)).value);
            break;
        case Op::Bilinear: {
            const Mat &U = node(P(0)).value, &Q = node(P(1)).value, &V = node(P(2)).value;
            double gs = g(0, 0);
            if (node(P(0)).wants_grad) accum(P(0), gs * (Q * V));
            if (node(P(1)).wants_grad) accum(P(1), gs * (U * V.transpose()));
            if (node(P(2)).wants_grad) accum(P(2), gs * (Q.transpose() * U));
            break;
        }
        case Op::ExpRank1: {
            Mat p = g.cwiseProduct(n.value);
            accum(P(0), p);
            accum(P(1), p.rowwise().sum());
            accum(P(2), p.colwise().sum().transpose());
            accum(P(3), Mat::Constant(1, 1, p.sum()));
            break;
        }
        case Op::RowsMinusRow:
            accum(P(0), -g.colwise().sum().transpose());
            break;
        case Op::DotExt:
            accum(P(0), g(0, 0) * (*n.ext));
            break;
        case Op::Block: {
            const Node& a = node(P(0));
            Mat ga = Mat::Zero(a.value.rows(), a.value.cols());
            ga.block(n.i0, n.j0, n.br, n.bc) = g;
            accum(P(0), ga);
            break;
        }
        case Op::Vcat: {
            Eigen::Index at = 0;
            for (int pid : n.parents) {
                accum(pid, g.middleRows(at, node(pid).value.rows()));
                at += node(pid).value.rows();
            }
            break;
        }
        case Op::Hcat: {
            Eigen::Index at = 0;
            for (int pid : n.parents) {
                accum(pid, g.middleCols(at, node(pid).value.cols()));
                at += node(pid).value.cols();
            }
            break;
        }
        case Op::Diag:
            accum(P(0), g.diagonal());
            break;
        case Op::Assemble:
            for (const auto& [i, j, pid] : n.entries)
                accum(pid, Mat::Constant(1, 1, g(i, j)));
            break;
        case Op::ClampMin:
        case Op::PsdClip:
            accum(P(0), g);
            break;
    }
    // free the cotangent for interior nodes as soon as it is consumed
    n.grad.resize(0, 0);
}

}  // namespace fpilco::ad
