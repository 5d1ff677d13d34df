#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "vtester/rawvideo.hpp"

namespace vtester::vq {

inline constexpr double kPsnrCeiling = 100.0;

double psnr(const FrameBuffer& rx, const FrameBuffer& ref);
std::vector<double> psnr_series(const RawVideo& rx, const RawVideo& ref);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

/// Mean luma SSIM over every fully contained 11x11 Gaussian window.
double ssim(const FrameBuffer& rx, const FrameBuffer& ref);
std::vector<double> ssim_series(const RawVideo& rx, const RawVideo& ref);

/// PSNR to MOS lookup. Rows are tried in order; the first whose bound is met
/// gives the score, otherwise `floor_score`.
struct MosTable {
    struct Row {
        double bound = 0.0;
        bool inclusive = false;  // psnr >= bound instead of psnr > bound
        int score = 1;
    };
    std::vector<Row> rows;
    int floor_score = 1;

    int lookup(double psnr_db) const;
    std::string describe() const;

    /// > 37 -> 5, >= 31 -> 4, >= 25 -> 3, >= 20 -> 2, else 1.
    static MosTable evalvid();
};

std::vector<int> mos_from_psnr(std::span<const double> psnr_db, const MosTable& table);

/// Fraction of frames whose MOS fell below the reference encoding's MOS.
double div_from_mos(std::span<const int> rx_mos, std::span<const int> ref_mos);
/// The same fraction over `intervals` consecutive, equally long frame ranges.
std::vector<double> div_intervals(std::span<const int> rx_mos, std::span<const int> ref_mos, size_t intervals);

struct G1070Coefficients {
    std::array<double, 12> v{};  // v1..v12
};

struct G1070Inputs {
    double bitrate_kbps = 0.0;     // Br_v
    double frame_rate = 0.0;       // Fr_v
    double packet_loss_pct = 0.0;  // Ppl_v
};

struct G1070Result {
    double optimal_frame_rate = 0.0;  // O_fr
    double max_coding_quality = 0.0;  // I_Ofr
    double frame_rate_spread = 0.0;   // D_FrV
    double coding_quality = 0.0;      // I_coding
    double loss_robustness = 0.0;     // D_PplV
    double vq = 0.0;
};

/// Video quality estimate; throws MetricError if a derived term leaves its valid range.
G1070Result g1070_vq(const G1070Coefficients& c, const G1070Inputs& in);

}  // namespace vtester::vq
