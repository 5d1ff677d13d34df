#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "vtester/error.hpp"
#include "vtester/picture.hpp"

using namespace vtester;

namespace {

FrameBuffer constant(int w, int h, uint8_t luma) {
    FrameBuffer f(w, h);
    for (auto& b : f.y()) b = luma;
    return f;
}

// Analytic patterns shared with the offline oracle.
FrameBuffer pattern_ref() {
    FrameBuffer f(24, 20);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 24; ++x) f.luma(x, y) = static_cast<uint8_t>((x * x * 3 + y * 7 + x * y) % 256);
    return f;
}

FrameBuffer pattern_rx() {
    FrameBuffer f(24, 20);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 24; ++x) f.luma(x, y) = static_cast<uint8_t>((x * 5 + y * y * 2 + 17) % 256);
    return f;
}

vq::G1070Coefficients fixture_coefficients() {
    return {{1.431, 2.228e-2, 3.759, 184.1, 1.161, 1.446, 3.881e-4, 2.116, 467.4, 2.736, 15.28, 4.170}};
}

}  // namespace

TEST(Psnr, IdenticalFramesClampTo100) {
    const RawVideo v = moving_square(64, 48, 5, 16, 3);
    for (double p : vq::psnr_series(v, v)) EXPECT_EQ(p, 100.0);
}

TEST(Psnr, UnitMse) {
    EXPECT_NEAR(vq::psnr(constant(16, 16, 1), constant(16, 16, 0)), 48.1308036086791, 1e-3);
    EXPECT_NEAR(vq::psnr(constant(16, 16, 1), constant(16, 16, 0)), 48.130803608679103, 1e-12);
}

TEST(Psnr, PatternOracle) {
    EXPECT_NEAR(vq::psnr(pattern_rx(), pattern_ref()), 8.3574779660764552, 1e-12);
}

TEST(Psnr, ChromaIgnored) {
    FrameBuffer a = constant(8, 8, 50), b = constant(8, 8, 50);
    b.u()[0] = 255;
    EXPECT_EQ(vq::psnr(a, b), 100.0);
}

TEST(Psnr, SeriesRejectsLengthMismatch) {
    const RawVideo v = moving_square(64, 48, 5, 16, 3);
    RawVideo w = v;
    w.frames.pop_back();
    EXPECT_THROW(vq::psnr_series(v, w), MetricError);
}

TEST(Ssim, IdentityIsOne) {
    const RawVideo v = moving_square(64, 48, 3, 16, 3);
    for (double s : vq::ssim_series(v, v)) EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Ssim, ConstantImagesClosedForm) {
    const double s = vq::ssim(constant(32, 32, 100), constant(32, 32, 105));
    EXPECT_NEAR(s, 0.99881, 1e-4);
    EXPECT_NEAR(s, 0.99881130699054906, 1e-12);
}

TEST(Ssim, PatternOracle) {
    EXPECT_NEAR(vq::ssim(pattern_rx(), pattern_ref()), -0.057943793544993759, 1e-12);
}

TEST(Ssim, SymmetricAndBounded) {
    std::mt19937_64 rng(31);
    for (int i = 0; i < 20; ++i) {
        const RawVideo a = fixtures::random_video(rng, 16, 14, 1), b = fixtures::random_video(rng, 16, 14, 1);
        const double ab = vq::ssim(a.frames[0], b.frames[0]);
        EXPECT_NEAR(ab, vq::ssim(b.frames[0], a.frames[0]), 1e-12);
        EXPECT_GE(ab, -1.0);
        EXPECT_LE(ab, 1.0);
    }
}

TEST(Ssim, RejectsTinyFrames) {
    EXPECT_THROW(vq::ssim(constant(10, 10, 0), constant(10, 10, 0)), MetricError);
}

TEST(Mos, TableLookups) {
    const auto t = vq::MosTable::evalvid();
    EXPECT_EQ(t.lookup(100.0), 5);
    EXPECT_EQ(t.lookup(37.0), 4);
    EXPECT_EQ(t.lookup(31.0), 4);
    EXPECT_EQ(t.lookup(24.9), 2);
    EXPECT_EQ(t.lookup(25.0), 3);
    EXPECT_EQ(t.lookup(19.99), 1);
}

TEST(Mos, MonotoneSweep) {
    const auto t = vq::MosTable::evalvid();
    int last = 0;
    for (int i = 0; i <= 10000; ++i) {
        const int s = t.lookup(i * 0.01);
        EXPECT_GE(s, last);
        last = s;
    }
}

TEST(Div, Fractions) {
    const std::vector<int> fives(10, 5), ones(10, 1);
    EXPECT_EQ(vq::div_from_mos(fives, fives), 0.0);
    EXPECT_EQ(vq::div_from_mos(ones, fives), 1.0);
    EXPECT_EQ(vq::div_from_mos(std::vector<int>{5, 4, 5, 3}, std::vector<int>{5, 5, 5, 5}), 0.5);
    EXPECT_EQ(vq::div_intervals(std::vector<int>{1, 1, 5, 5}, std::vector<int>{5, 5, 5, 5}, 2),
              (std::vector<double>{1.0, 0.0}));
    EXPECT_THROW(vq::div_from_mos(std::vector<int>{1}, std::vector<int>{1, 2}), MetricError);
}

TEST(G1070, GoldenValue) {
    const auto r = vq::g1070_vq(fixture_coefficients(), {300.0, 25.0, 2.0});
    EXPECT_NEAR(r.vq, 2.2335688752958792, 1e-9);
    EXPECT_NEAR(r.optimal_frame_rate, 8.115, 1e-12);
    EXPECT_NEAR(r.coding_quality, 1.8506188909607251, 1e-9);
    EXPECT_NEAR(r.loss_robustness, 4.9308616025141976, 1e-9);
}

TEST(G1070, SecondOperatingPoint) {
    EXPECT_NEAR(vq::g1070_vq(fixture_coefficients(), {1000.0, 10.0, 5.0}).vq, 1.6670326140145068, 1e-9);
}

TEST(G1070, NoLossGivesOnePlusCodingQuality) {
    const auto r = vq::g1070_vq(fixture_coefficients(), {300.0, 25.0, 0.0});
    EXPECT_NEAR(r.vq, 1.0 + r.coding_quality, 1e-12);
}

TEST(G1070, OptimalFrameRateKeepsMaxQuality) {
    const auto c = fixture_coefficients();
    const double ofr = c.v[0] + c.v[1] * 300.0;
    const auto r = vq::g1070_vq(c, {300.0, ofr, 1.0});
    EXPECT_NEAR(r.coding_quality, r.max_coding_quality, 1e-12);
}

TEST(G1070, DecreasesWithLoss) {
    double last = 6.0;
    for (double ppl = 0.0; ppl <= 50.0; ppl += 0.5) {
        const double v = vq::g1070_vq(fixture_coefficients(), {300.0, 25.0, ppl}).vq;
        EXPECT_LT(v, last);
        last = v;
    }
    EXPECT_NEAR(vq::g1070_vq(fixture_coefficients(), {300.0, 25.0, 1e6}).vq, 1.0, 1e-9);
}

TEST(G1070, RejectsInvariantViolations) {
    auto c = fixture_coefficients();
    c.v[0] = 100.0;  // O_fr > 30
    EXPECT_THROW(vq::g1070_vq(c, {300.0, 25.0, 1.0}), MetricError);
    c = fixture_coefficients();
    c.v[2] = 10.0;  // I_Ofr can exceed 4
    EXPECT_THROW(vq::g1070_vq(c, {5000.0, 25.0, 1.0}), MetricError);
}

TEST(G1070, BoundedOnRandomValidCoefficients) {
    std::mt19937_64 rng(1070);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    size_t valid = 0, tries = 0;
    while (valid < 1000) {
        ASSERT_LT(++tries, 100000u);
        vq::G1070Coefficients c{{1 + 5 * u(rng), 0.05 * u(rng), 4 * u(rng), 1 + 500 * u(rng), 0.2 + 3 * u(rng),
                                 0.1 + 3 * u(rng), 0.001 * u(rng), 0.5 + 5 * u(rng), 10 + 1000 * u(rng),
                                 0.1 + 5 * u(rng), 30 * u(rng), 10 * u(rng)}};
        const vq::G1070Inputs in{10 + 2000 * u(rng), 1 + 29 * u(rng), 20 * u(rng)};
        try {
            const double v = vq::g1070_vq(c, in).vq;
            ++valid;
            ASSERT_GE(v, 1.0);
            ASSERT_LE(v, 5.0);
        } catch (const MetricError&) {
        }
    }
}
