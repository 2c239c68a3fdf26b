#include <doctest.h>

#include <cmath>

#include "fanet/dem_rfb.hpp"
#include "test_util.hpp"

using fanet::DemModule;
using fanet::GradTape;
using fanet::RfbConfig;
using fanet::RfbModule;
using fanet::Shape;
using fanet::Tensor;
namespace ops = fanet::ops;

TEST_CASE("dem: identity convolutions on all-ones inputs keep everything at one") {
    DemModule<float> dem(3, 1, "dem");
    dem.up32.set_identity(1.0f);
    dem.up21.set_identity(1.0f);
    Tensor f1 = Tensor::full(Shape{1, 3, 8, 8}, 1.0f);
    Tensor f2 = Tensor::full(Shape{1, 3, 4, 4}, 1.0f);
    Tensor f3 = Tensor::full(Shape{1, 3, 2, 2}, 1.0f);
    auto fused = dem.fuse(nullptr, f1, f2, f3);
    CHECK(fused.d1.shape() == Shape{1, 3, 8, 8});
    CHECK(fused.d2.shape() == Shape{1, 3, 4, 4});
    CHECK(fused.d3.shape() == Shape{1, 3, 2, 2});
    for (std::int64_t i = 0; i < fused.d1.numel(); ++i) CHECK(fused.d1.data()[i] == doctest::Approx(1.0f));
    for (std::int64_t i = 0; i < fused.d2.numel(); ++i) CHECK(fused.d2.data()[i] == doctest::Approx(1.0f));
}

TEST_CASE("dem: zero fine level forces a zero fused output regardless of coarser levels") {
    DemModule<float> dem(3, 2, "dem");
    Tensor f1 = Tensor::zeros(Shape{1, 3, 8, 8});
    Tensor f2 = testutil::random_tensor<float>(Shape{1, 3, 4, 4}, 70);
    Tensor f3 = testutil::random_tensor<float>(Shape{1, 3, 2, 2}, 71);
    auto fused = dem.fuse(nullptr, f1, f2, f3);
    for (std::int64_t i = 0; i < fused.d1.numel(); ++i) CHECK(fused.d1.data()[i] == 0.0f);
}

TEST_CASE("dem: random inputs match the step-by-step oracle") {
    DemModule<float> dem(4, 3, "dem");
    oracle::Grid f1 = oracle::random_grid(2, 4, 8, 8, 72);
    oracle::Grid f2 = oracle::random_grid(2, 4, 4, 4, 73);
    oracle::Grid f3 = oracle::random_grid(2, 4, 2, 2, 74);
    oracle::Grid w32 = testutil::to_grid(dem.up32.weight());
    oracle::Grid w21 = testutil::to_grid(dem.up21.weight());
    std::vector<double> b32(dem.up32.bias().data().begin(), dem.up32.bias().data().end());
    std::vector<double> b21(dem.up21.bias().data().begin(), dem.up21.bias().data().end());

    oracle::Grid d3 = f3;
    oracle::Grid g2 = oracle::conv2d(oracle::bilinear(d3, 4, 4), w32, b32, 1, 1, 1);
    oracle::Grid d2(2, 4, 4, 4);
    for (std::size_t i = 0; i < d2.size(); ++i) d2.v[i] = f2.v[i] * g2.v[i];
    oracle::Grid g1 = oracle::conv2d(oracle::bilinear(d2, 8, 8), w21, b21, 1, 1, 1);
    oracle::Grid d1(2, 4, 8, 8);
    for (std::size_t i = 0; i < d1.size(); ++i) d1.v[i] = f1.v[i] * g1.v[i];

    auto fused = dem.fuse(nullptr, testutil::from_grid(f1), testutil::from_grid(f2), testutil::from_grid(f3));
    CHECK(testutil::max_abs_diff(fused.d2, d2) < 1e-6);
    CHECK(testutil::max_abs_diff(fused.d1, d1) < 1e-6);
}

TEST_CASE("dem: a non-halving pyramid is a shape error") {
    DemModule<float> dem(3, 4, "dem");
    Tensor f1 = Tensor::zeros(Shape{1, 3, 8, 8});
    Tensor f2 = Tensor::zeros(Shape{1, 3, 3, 4});
    Tensor f3 = Tensor::zeros(Shape{1, 3, 2, 2});
    CHECK_THROWS_AS(dem.fuse(nullptr, f1, f2, f3), fanet::ShapeError);
}

TEST_CASE("rfb: zero weights give zero output, and channel mismatch is rejected") {
    RfbModule<float> rfb(RfbConfig::for_channels(8), 5, "rfb1");
    fanet::ParamList<float> params;
    rfb.collect("rfb1", params);
    for (auto& p : params) std::fill(p.tensor.data().begin(), p.tensor.data().end(), 0.0f);
    Tensor x = testutil::random_tensor<float>(Shape{1, 8, 6, 6}, 75);
    Tensor out = rfb.forward(nullptr, x);
    for (std::int64_t i = 0; i < out.numel(); ++i) CHECK(out.data()[i] == 0.0f);

    Tensor bad = Tensor::zeros(Shape{1, 4, 6, 6});
    CHECK_THROWS_AS(rfb.forward(nullptr, bad), fanet::ShapeError);
}

TEST_CASE("rfb: preserves spatial size and channel count on 16x16 input") {
    RfbModule<float> rfb(RfbConfig::for_channels(16), 6, "rfb1");
    Tensor x = testutil::random_tensor<float>(Shape{2, 16, 16, 16}, 76);
    CHECK(rfb.forward(nullptr, x).shape() == Shape{2, 16, 16, 16});
}

TEST_CASE("rfb: impulse response reaches radius 1+7 and beats a single 3x3") {
    RfbModule<float> rfb(RfbConfig::for_channels(8), 7, "rfb1");
    Tensor x = Tensor::zeros(Shape{1, 8, 17, 17});
    x.at(0, 0, 8, 8) = 1.0f;
    Tensor out = rfb.forward(nullptr, x);
    int radius = 0;
    for (int c = 0; c < 8; ++c)
        for (int y = 0; y < 17; ++y)
            for (int xx = 0; xx < 17; ++xx)
                if (out.at(0, c, y, xx) != 0.0f) {
                    radius = std::max(radius, std::max(std::abs(y - 8), std::abs(xx - 8)));
                }
    CHECK(radius >= 8);
    CHECK(radius > 1);  // strictly beyond any single 3x3 convolution
}

TEST_CASE("rfb gradcheck in double precision") {
    RfbModule<float> rfb32(RfbConfig::for_channels(4), 8, "rfb1");
    auto rfb = rfb32.cast<double>();
    fanet::DTensor x = testutil::random_tensor<double>(Shape{1, 4, 8, 8}, 77);
    fanet::ParamList<double> params;
    rfb.collect("rfb1", params);
    testutil::randomize_biases(params, 821);
    std::vector<fanet::DTensor> leaves{x};
    for (auto& p : params) leaves.push_back(p.tensor);
    auto build = [&](GradTape<double>* t) {
        return testutil::weighted_sum(t, rfb.forward(t, x), 820);
    };
    CHECK(testutil::fd_max_rel_error(leaves, build, 1e-6, 1e-6) < 1e-5);
}

TEST_CASE("dem gradcheck in double precision") {
    DemModule<float> dem32(3, 9, "dem");
    auto dem = dem32.cast<double>();
    fanet::DTensor f1 = testutil::random_tensor<double>(Shape{1, 3, 8, 8}, 78);
    fanet::DTensor f2 = testutil::random_tensor<double>(Shape{1, 3, 4, 4}, 79);
    fanet::DTensor f3 = testutil::random_tensor<double>(Shape{1, 3, 2, 2}, 80);
    std::vector<fanet::DTensor> leaves{f1, f2, f3, dem.up32.weight(), dem.up32.bias(),
                                       dem.up21.weight(), dem.up21.bias()};
    auto build = [&](GradTape<double>* t) {
        auto fused = dem.fuse(t, f1, f2, f3);
        fanet::DTensor l = ops::add(t, testutil::weighted_sum(t, fused.d1, 830),
                                    testutil::weighted_sum(t, fused.d2, 831));
        return ops::add(t, l, testutil::weighted_sum(t, fused.d3, 832));
    };
    CHECK(testutil::fd_max_rel_error(leaves, build, 1e-6, 1e-6) < 1e-5);
}
