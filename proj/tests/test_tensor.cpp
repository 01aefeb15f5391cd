#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "cdrdiff/checkpoint.hpp"
#include "cdrdiff/geometry.hpp"
#include "cdrdiff/kernels.hpp"
#include "gradcheck.hpp"

using namespace cdrdiff;
using testkit::random_tensor;

namespace {

/// Scalar probe: sum of out * W for fixed random W.
ad::Var probe(ad::Graph& g, const ad::Var& out, std::uint64_t seed) {
    Rng rng = make_stream(seed, "probe");
    return ad::sum_all(ad::mul_const(out, random_tensor(out.shape(), rng)));
}

double check_op(std::vector<Shape> shapes, const std::function<ad::Var(ad::Graph&, std::vector<ad::Var>&)>& op,
                std::uint64_t seed, double scale = 1.0, double offset = 0.0) {
    ParameterSet ps;
    Rng rng = make_stream(seed, "inputs");
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        Tensor t = random_tensor(shapes[i], rng, scale);
        for (double& v : t.values()) v += offset;
        ps.add("x" + std::to_string(i), t);
    }
    return testkit::gradient_check(
               ps,
               [&](ad::Graph& g) {
                   std::vector<ad::Var> in;
                   for (std::size_t i = 0; i < shapes.size(); ++i) in.push_back(g.param(i));
                   return probe(g, op(g, in), seed);
               },
               1e-4, 1e-4)
        .max_relative;
}

Tensor frames(std::size_t n, Rng& rng) {
    Tensor out = Tensor::matrix(n, 9);
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::Vector4d q(standard_normal(rng), standard_normal(rng), standard_normal(rng), standard_normal(rng));
        q.normalize();
        const Eigen::Matrix3d r = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) out.at(i, static_cast<std::size_t>(3 * a + b)) = r(a, b);
    }
    return out;
}

constexpr double kTol = 1e-6;

}  // namespace

TEST(Tensor, ShapeAndAccess) {
    Tensor t = Tensor::matrix(2, 3, 1.5);
    EXPECT_EQ(t.rows(), 2u);
    EXPECT_EQ(t.cols(), 3u);
    EXPECT_EQ(t.size(), 6u);
    t.at(1, 2) = 4.0;
    EXPECT_EQ(t[5], 4.0);
    EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
    EXPECT_THROW(t.reshaped({4}), std::invalid_argument);
    EXPECT_EQ(t.reshaped({3, 2}).values()[5], 4.0);
}

TEST(Tensor, ParameterNamesAreUnique) {
    ParameterSet ps;
    ps.add("w", Tensor({2}));
    EXPECT_THROW(ps.add("w", Tensor({2})), std::invalid_argument);
    EXPECT_EQ(ps.index_of("w"), 0u);
    EXPECT_FALSE(ps.find("missing").has_value());
}

TEST(Autodiff, ElementwiseGradients) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const Shape s{3, 4};
        EXPECT_LT(check_op({s, s}, [](ad::Graph&, auto& x) { return ad::add(x[0], x[1]); }, seed), kTol);
        EXPECT_LT(check_op({s, s}, [](ad::Graph&, auto& x) { return ad::sub(x[0], x[1]); }, seed), kTol);
        EXPECT_LT(check_op({s, s}, [](ad::Graph&, auto& x) { return ad::mul(x[0], x[1]); }, seed), kTol);
        EXPECT_LT(check_op({s}, [](ad::Graph&, auto& x) { return ad::scale(x[0], -2.5); }, seed), kTol);
        EXPECT_LT(check_op({s}, [](ad::Graph&, auto& x) { return ad::square(x[0]); }, seed), kTol);
        EXPECT_LT(check_op({s}, [](ad::Graph&, auto& x) { return ad::silu(x[0]); }, seed), kTol);
        EXPECT_LT(check_op({s}, [](ad::Graph&, auto& x) { return ad::sigmoid(x[0]); }, seed), kTol);
        EXPECT_LT(check_op({s}, [](ad::Graph&, auto& x) { return ad::exp(x[0]); }, seed), kTol);
        EXPECT_LT(check_op({s}, [](ad::Graph&, auto& x) { return ad::log_clamped(x[0], 1e-10); }, seed, 0.2, 2.0),
                  kTol);
        EXPECT_LT(check_op({s}, [](ad::Graph&, auto& x) { return ad::sqrt_eps(x[0], 1e-3); }, seed, 0.2, 2.0),
                  kTol);
        EXPECT_LT(check_op({s}, [](ad::Graph&, auto& x) { return ad::reciprocal(x[0]); }, seed, 0.2, 2.0), kTol);
        Rng rng = make_stream(seed, "const");
        const Tensor c = random_tensor(s, rng);
        EXPECT_LT(check_op({s}, [&](ad::Graph&, auto& x) { return ad::add_const(x[0], c); }, seed), kTol);
        EXPECT_LT(check_op({s}, [&](ad::Graph&, auto& x) { return ad::mul_const(x[0], c); }, seed), kTol);
    }
}

TEST(Autodiff, LinearAlgebraGradients) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        EXPECT_LT(check_op({{3, 4}, {4, 5}}, [](ad::Graph&, auto& x) { return ad::matmul(x[0], x[1]); }, seed),
                  kTol);
        EXPECT_LT(check_op({{3, 4}, {4}}, [](ad::Graph&, auto& x) { return ad::add_row(x[0], x[1]); }, seed), kTol);
        EXPECT_LT(check_op({{3, 4}, {4}}, [](ad::Graph&, auto& x) { return ad::mul_row(x[0], x[1]); }, seed), kTol);
        EXPECT_LT(check_op({{3, 6}, {3, 2}}, [](ad::Graph&, auto& x) { return ad::mul_groups(x[0], x[1]); }, seed),
                  kTol);
        EXPECT_LT(check_op({{3, 6}}, [](ad::Graph&, auto& x) { return ad::group_sum(x[0], 2); }, seed), kTol);
        EXPECT_LT(check_op({{3, 2}}, [](ad::Graph&, auto& x) { return ad::expand_groups(x[0], 3); }, seed), kTol);
    }
}

TEST(Autodiff, StructureGradients) {
    const auto idx = ad::make_index({2, 0, 2, 1});
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        EXPECT_LT(check_op({{3, 2}, {3, 3}},
                           [](ad::Graph&, auto& x) { return ad::concat_cols({x[0], x[1]}); }, seed),
                  kTol);
        EXPECT_LT(check_op({{3, 5}}, [](ad::Graph&, auto& x) { return ad::slice_cols(x[0], 1, 4); }, seed), kTol);
        EXPECT_LT(check_op({{3, 4}}, [](ad::Graph&, auto& x) { return ad::reshape(x[0], {6, 2}); }, seed), kTol);
        EXPECT_LT(check_op({{3, 2}}, [&](ad::Graph&, auto& x) { return ad::gather_rows(x[0], idx); }, seed), kTol);
        EXPECT_LT(check_op({{9, 2}}, [&](ad::Graph&, auto& x) { return ad::gather_rows(x[0], idx, 3); }, seed),
                  kTol);
        EXPECT_LT(check_op({{4, 2}}, [&](ad::Graph&, auto& x) { return ad::scatter_add_rows(x[0], idx, 3); }, seed),
                  kTol);
        EXPECT_LT(
            check_op({{12, 2}}, [&](ad::Graph&, auto& x) { return ad::scatter_add_rows(x[0], idx, 3, 3); }, seed),
            kTol);
        EXPECT_LT(check_op({{3, 4}}, [](ad::Graph&, auto& x) { return ad::mean_all(x[0]); }, seed), kTol);
    }
}

TEST(Autodiff, NormalizationGradients) {
    const auto seg = ad::make_index({0, 1, 0, 2, 1});
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        EXPECT_LT(check_op({{3, 5}}, [](ad::Graph&, auto& x) { return ad::softmax_rows(x[0]); }, seed), kTol);
        EXPECT_LT(check_op({{5, 2}}, [&](ad::Graph&, auto& x) { return ad::segment_softmax(x[0], seg, 3); }, seed),
                  kTol);
        EXPECT_LT(check_op({{3, 6}}, [](ad::Graph&, auto& x) { return ad::layer_norm_rows(x[0]); }, seed), 1e-6);
    }
}

TEST(Autodiff, VectorLayoutGradients) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        Rng rng = make_stream(seed, "dirs");
        const Tensor fr = frames(2, rng);
        Tensor dirs = random_tensor({2, 3}, rng);
        for (std::size_t i = 0; i < 2; ++i) {
            double n = 0;
            for (std::size_t d = 0; d < 3; ++d) n += dirs.at(i, d) * dirs.at(i, d);
            for (std::size_t d = 0; d < 3; ++d) dirs.at(i, d) /= std::sqrt(n);
        }
        EXPECT_LT(check_op({{6, 3}, {6, 3}}, [](ad::Graph&, auto& x) { return ad::vec_dot(x[0], x[1]); }, seed),
                  kTol);
        EXPECT_LT(check_op({{6, 3}, {2, 3}}, [](ad::Graph&, auto& x) { return ad::vec_scale(x[0], x[1]); }, seed),
                  kTol);
        EXPECT_LT(check_op({{2, 3}}, [&](ad::Graph&, auto& x) { return ad::dir_outer(dirs, x[0]); }, seed), kTol);
        EXPECT_LT(check_op({{6, 3}}, [&](ad::Graph&, auto& x) { return ad::reject(x[0], dirs); }, seed), kTol);
        EXPECT_LT(check_op({{6, 3}}, [&](ad::Graph&, auto& x) { return ad::rotate_vec(x[0], fr); }, seed), kTol);
        EXPECT_LT(check_op({{6, 3}}, [&](ad::Graph&, auto& x) { return ad::rotate_vec(x[0], fr, true); }, seed),
                  kTol);
        EXPECT_LT(check_op({{6, 3}, {6, 3}}, [](ad::Graph&, auto& x) { return ad::vec_cross(x[0], x[1]); }, seed),
                  kTol);
    }
}

TEST(Autodiff, ForwardValues) {
    ad::Graph g;
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 2}, {5, 6, 7, 8});
    const auto m = ad::matmul(g.constant(a), g.constant(b));
    EXPECT_EQ(m.value(), Tensor({2, 2}, {19, 22, 43, 50}));
    const auto s = ad::softmax_rows(g.constant(Tensor({1, 2}, {0.0, std::log(3.0)})));
    EXPECT_NEAR(s.value()[0], 0.25, 1e-15);
    EXPECT_NEAR(s.value()[1], 0.75, 1e-15);
    // Vector layout: item 0 is (1,0,0), item 1 is (0,2,0).
    const auto v = g.constant(Tensor({6, 1}, {1, 0, 0, 0, 2, 0}));
    const auto w = g.constant(Tensor({6, 1}, {0, 1, 0, 0, 0, 3}));
    EXPECT_EQ(ad::vec_dot(v, w).value(), Tensor({2, 1}, {0, 0}));
    EXPECT_EQ(ad::vec_cross(v, w).value(), Tensor({6, 1}, {0, 0, 1, 6, 0, 0}));
}

TEST(Autodiff, LogClampedHasZeroGradientBelowFloor) {
    ParameterSet ps;
    ps.add("p", Tensor({1, 2}, {1e-12, 0.5}));
    const auto r = ad::evaluate_with_gradients(ps, [](ad::Graph& g) {
        return ad::sum_all(ad::log_clamped(g.param(0), 1e-10));
    });
    EXPECT_NEAR(r.value, std::log(1e-10) + std::log(0.5), 1e-12);
    EXPECT_EQ(r.gradients[0][0], 0.0);
    EXPECT_NEAR(r.gradients[0][1], 2.0, 1e-12);
}

TEST(Autodiff, ReusedNodesAccumulate) {
    ParameterSet ps;
    ps.add("x", Tensor({1}, {3.0}));
    const auto r = ad::evaluate_with_gradients(ps, [](ad::Graph& g) {
        const auto x = g.param(0);
        return ad::sum_all(ad::add(ad::mul(x, x), x));
    });
    EXPECT_DOUBLE_EQ(r.value, 12.0);
    EXPECT_DOUBLE_EQ(r.gradients[0][0], 7.0);
}

TEST(Autodiff, InferenceGraphKeepsNoGradients) {
    ParameterSet ps;
    ps.add("x", Tensor({1}, {3.0}));
    ad::Graph g(&ps, false);
    const auto y = ad::square(g.param(0));
    EXPECT_FALSE(g.requires_grad(y));
    EXPECT_DOUBLE_EQ(y.value()[0], 9.0);
}

TEST(Autodiff, NonScalarOutputRejected) {
    ParameterSet ps;
    ps.add("x", Tensor({2}, {1.0, 2.0}));
    EXPECT_THROW(ad::evaluate_with_gradients(ps, [](ad::Graph& g) { return g.param(0); }), std::invalid_argument);
}

TEST(Kernels, ParallelMatchesSerialBitwise) {
    Rng rng = make_stream(5, "kernels");
    for (const auto& [n, k, m] : {std::tuple{3, 4, 5}, std::tuple{64, 48, 80}, std::tuple{200, 33, 17}}) {
        const Tensor a = random_tensor({std::size_t(n), std::size_t(k)}, rng);
        const Tensor b = random_tensor({std::size_t(k), std::size_t(m)}, rng);
        Tensor c1 = Tensor::matrix(n, m), c2 = Tensor::matrix(n, m);
        kernels::gemm_nn(a.data(), b.data(), c1.data(), n, k, m);
        kernels::serial::gemm_nn(a.data(), b.data(), c2.data(), n, k, m);
        EXPECT_EQ(c1, c2);

        const Tensor d = random_tensor({std::size_t(n), std::size_t(m)}, rng);
        Tensor e1 = Tensor::matrix(k, m), e2 = Tensor::matrix(k, m);
        kernels::gemm_tn(a.data(), d.data(), e1.data(), n, k, m);
        kernels::serial::gemm_tn(a.data(), d.data(), e2.data(), n, k, m);
        EXPECT_EQ(e1, e2);

        const Tensor f = random_tensor({std::size_t(k), std::size_t(m)}, rng);
        Tensor g1 = Tensor::matrix(n, k), g2 = Tensor::matrix(n, k);
        kernels::gemm_nt(d.data(), f.data(), g1.data(), n, m, k);
        kernels::serial::gemm_nt(d.data(), f.data(), g2.data(), n, m, k);
        EXPECT_EQ(g1, g2);

        std::vector<std::size_t> index;
        for (int e = 0; e < 3 * n; ++e) index.push_back(static_cast<std::size_t>(e * 7 % n));
        Tensor s1 = Tensor::matrix(n, m), s2 = Tensor::matrix(n, m);
        Tensor src = random_tensor({3 * std::size_t(n), std::size_t(m)}, rng);
        kernels::scatter_add_rows(src.data(), index, 1, m, s1.data(), n);
        kernels::serial::scatter_add_rows(src.data(), index, 1, m, s2.data(), n);
        EXPECT_EQ(s1, s2);
        Tensor h1 = Tensor::matrix(3 * n, m), h2 = Tensor::matrix(3 * n, m);
        kernels::gather_rows(d.data(), index, 1, m, h1.data());
        kernels::serial::gather_rows(d.data(), index, 1, m, h2.data());
        EXPECT_EQ(h1, h2);
    }
}

TEST(Kernels, GemmMatchesNaiveProduct) {
    Rng rng = make_stream(6, "kernels");
    const Tensor a = random_tensor({5, 7}, rng), b = random_tensor({7, 3}, rng);
    Tensor c = Tensor::matrix(5, 3);
    kernels::gemm_nn(a.data(), b.data(), c.data(), 5, 7, 3);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            double s = 0;
            for (std::size_t k = 0; k < 7; ++k) s += a.at(i, k) * b.at(k, j);
            EXPECT_NEAR(c.at(i, j), s, 1e-12);
        }
}

TEST(Adam, FirstStepMovesByLearningRate) {
    ParameterSet ps;
    ps.add("w", Tensor({2}, {1.0, -1.0}));
    AdamState st = make_adam_state(ps);
    AdamConfig cfg;
    cfg.learning_rate = 0.1;
    adam_step(ps, {Tensor({2}, {0.5, -2.0})}, st, cfg);
    EXPECT_NEAR(ps.value(0)[0], 0.9, 1e-7);
    EXPECT_NEAR(ps.value(0)[1], -0.9, 1e-7);
    EXPECT_EQ(st.step, 1u);
}

TEST(Adam, MinimizesQuadratic) {
    ParameterSet ps;
    ps.add("w", Tensor({3}, {2.0, -3.0, 0.5}));
    AdamState st = make_adam_state(ps);
    AdamConfig cfg;
    cfg.learning_rate = 0.05;
    for (int i = 0; i < 2000; ++i) {
        const auto r = ad::evaluate_with_gradients(ps, [](ad::Graph& g) { return ad::sum_all(ad::square(g.param(0))); });
        adam_step(ps, r.gradients, st, cfg);
    }
    for (double v : ps.value(0).values()) EXPECT_LT(std::abs(v), 1e-3);
}

TEST(Adam, NonFiniteGradientLeavesParametersUntouched) {
    ParameterSet ps;
    ps.add("w", Tensor({2}, {1.0, 2.0}));
    AdamState st = make_adam_state(ps);
    EXPECT_THROW(adam_step(ps, {Tensor({2}, {NAN, 0.0})}, st, {}), NumericError);
    EXPECT_EQ(ps.value(0), Tensor({2}, {1.0, 2.0}));
    EXPECT_EQ(st.step, 0u);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    ParameterSet ps;
    Rng rng = make_stream(1, "ckpt");
    ps.add("a", random_tensor({3, 4}, rng));
    ps.add("b", Tensor({2}, {-0.0, 1e-310}));
    AdamState st = make_adam_state(ps);
    st.step = 7;
    st.first_moment[0].values()[3] = 0.25;
    const auto bytes = encode_checkpoint(make_checkpoint(ps, &st, {{"note", "x"}}));
    const Checkpoint back = decode_checkpoint(bytes);
    EXPECT_EQ(encode_checkpoint(back), bytes);
    ParameterSet restored;
    restored.add("a", Tensor({3, 4}));
    restored.add("b", Tensor({2}));
    restore_parameters(back, restored);
    EXPECT_EQ(restored.value(0), ps.value(0));
    EXPECT_TRUE(std::signbit(restored.value(1)[0]));
    EXPECT_EQ(restored.value(1)[1], 1e-310);
    const AdamState st2 = restore_adam(back, restored);
    EXPECT_EQ(st2.step, 7u);
    EXPECT_EQ(st2.first_moment[0], st.first_moment[0]);

    const auto path = std::filesystem::temp_directory_path() / "cdrdiff_ckpt_test.ckpt";
    save_checkpoint(path, back);
    EXPECT_EQ(encode_checkpoint(load_checkpoint(path)), bytes);
    std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsCorruptInput) {
    ParameterSet ps;
    ps.add("a", Tensor({2}, {1, 2}));
    auto bytes = encode_checkpoint(make_checkpoint(ps, nullptr, {}));
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(decode_checkpoint(bad), CheckpointError);
    auto truncated = bytes;
    truncated.pop_back();
    EXPECT_THROW(decode_checkpoint(truncated), CheckpointError);
    auto trailing = bytes;
    trailing.push_back(0);
    EXPECT_THROW(decode_checkpoint(trailing), CheckpointError);
    EXPECT_THROW(restore_adam(decode_checkpoint(bytes), ps), CheckpointError);
}

TEST(Checkpoint, MismatchNamesFirstOffendingParameter) {
    ParameterSet ps;
    ps.add("a", Tensor({2}));
    ps.add("b", Tensor({3}));
    const Checkpoint ck = make_checkpoint(ps, nullptr, {});
    ParameterSet other;
    other.add("a", Tensor({2}));
    other.add("b", Tensor({4}));
    try {
        restore_parameters(ck, other);
        FAIL();
    } catch (const CheckpointError& e) {
        EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
    }
    ParameterSet missing;
    missing.add("c", Tensor({2}));
    EXPECT_THROW(restore_parameters(ck, missing), CheckpointError);
}
