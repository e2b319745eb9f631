#pragma once

#include <memory>
#include <tuple>
#include <utility>
#include <vector>

#include "fpilco/linalg.hpp"

namespace fpilco::ad {

using fpilco::Mat;
using fpilco::Vec;

/// Handle into a Graph. Cheap to copy, only meaningful for the graph
/// that produced it.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over dense matrices. Values are computed eagerly as
/// nodes are built, so a Graph doubles as a plain evaluator when no
/// backward pass is requested.
///
/// The op set is the closed set of primitives needed by the moment
/// formulas: linear algebra, elementwise transcendentals, SPD/LU solves
/// with cached factorizations, and a few fused ops that keep node counts
/// and n-by-n temporaries down on the hot path.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var input(Mat value);     // leaf, participates in gradients
    Var constant(Mat value);  // no gradient tracking
    Var scalar_input(double v) { return input(Mat::Constant(1, 1, v)); }
    Var scalar_constant(double v) { return constant(Mat::Constant(1, 1, v)); }

    const Mat& value(Var v) const { return node(v.id).value; }
    double scalar(Var v) const;

    /// Gradient of the seeded objective w.r.t. `v`; zero matrix of the
    /// right shape if nothing flowed. Valid after backward().
    Mat grad(Var v) const;

    /// Reverse sweep. Each (var, seed) pair injects a cotangent; seeds
    /// must match the var's shape.
    void backward(const std::vector<std::pair<Var, Mat>>& seeds);

    /// Drop all nodes, keeping allocated capacity where possible.
    void clear();

    std::size_t size() const { return nodes_.size(); }

    // -- arithmetic ---------------------------------------------------
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var scale(Var a, double c);
    Var add_scalar(Var a, Var s);  // A + s, s 1x1
    Var scalar_mul(Var s, Var a);  // s * A, s 1x1
    Var matmul(Var a, Var b);
    Var hadamard(Var a, Var b);
    Var transpose(Var a);
    Var symmetrize(Var a) { return scale(add(a, transpose(a)), 0.5); }

    // -- elementwise --------------------------------------------------
    Var cwise_exp(Var a);
    Var cwise_log(Var a);
    Var cwise_sin(Var a);
    Var cwise_cos(Var a);

    // -- factorizations -----------------------------------------------
    Var solve_spd(Var a, Var b);  // a^{-1} b with a symmetric positive definite
    Var solve_lu(Var a, Var b);   // a^{-1} b with a general square
    Var logdet_spd(Var a);
    Var logdet_lu(Var a);  // log det, requires det > 0

    // -- reductions ----------------------------------------------------
    Var sum_all(Var a);
    Var dot_all(Var a, Var b);          // sum(A .* B)
    Var bilinear(Var u, Var q, Var v);  // u^T Q v -> 1x1

    // -- external constants ---------------------------------------------
    // Large model-owned matrices enter by pointer so per-step graphs do
    // not copy them. The pointee must outlive the graph.
    Var rows_minus_row(const Mat* x, Var mu);  // X - 1 mu^T, mu is d x 1
    Var dot_ext(Var a, const Mat* w);          // sum(A .* W) -> 1x1

    /// exp(G_ij + r_i + s_j + c): the body of the pairwise kernel
    /// expectation matrices. Fusing the rank-one shifts avoids two
    /// full-size temporaries per call.
    Var exp_rank1(Var g, Var r, Var s, Var c);

    // -- structure -----------------------------------------------------
    Var block(Var a, int i0, int j0, int rows, int cols);
    Var entry(Var a, int i, int j) { return block(a, i, j, 1, 1); }
    Var vcat(const std::vector<Var>& parts);
    Var hcat(const std::vector<Var>& parts);
    Var diag(Var v);  // column vector -> diagonal matrix

    /// Build a rows-by-cols matrix from scalar entries; repeated
    /// positions accumulate, untouched positions are zero.
    Var assemble(int rows, int cols, const std::vector<std::tuple<int, int, Var>>& entries);

    // -- guards ---------------------------------------------------------
    /// max(A, lo) elementwise on the value; gradient passes through.
    Var clamp_min(Var a, double lo);
    /// Symmetrize + clip negative eigenvalues on the value side;
    /// gradient passes through. Repairs beyond -neg_tol bump *counter.
    Var psd_clip_guard(Var a, double neg_tol, long* counter);

private:
    enum class Op : std::uint8_t {
        Leaf, Add, Sub, ScaleC, AddScalar, ScalarMul, Matmul, Hadamard, Transpose,
        CwiseExp, CwiseLog, CwiseSin, CwiseCos,
        SolveSpd, SolveLu, LogdetSpd, LogdetLu,
        SumAll, DotAll, Bilinear, ExpRank1, RowsMinusRow, DotExt,
        Block, Vcat, Hcat, Diag, Assemble, ClampMin, PsdClip,
    };

    struct Node {
        Op op = Op::Leaf;
        bool wants_grad = false;
        Mat value;
        Mat grad;
        std::vector<int> parents;
        double cpay = 0.0;
        int i0 = 0, j0 = 0, br = 0, bc = 0;
        std::vector<std::tuple<int, int, int>> entries;
        std::shared_ptr<Eigen::LLT<Mat>> llt;
        std::shared_ptr<Eigen::PartialPivLU<Mat>> lu;
        const Mat* ext = nullptr;
        long* counter = nullptr;
    };

    Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

    Var push(Node&& n);
    bool any_wants(const std::vector<int>& parents) const;
    void accum(int id, const Mat& g);
    void backward_node(int id);

    std::vector<Node> nodes_;
};

}  // namespace fpilco::ad
