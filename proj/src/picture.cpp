#include "vtester/picture.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vtester/error.hpp"

namespace vtester::vq {

namespace {

void check_pair(const RawVideo& rx, const RawVideo& ref) {
    if (rx.frames.size() != ref.frames.size())
        throw MetricError("frame count mismatch: received " + std::to_string(rx.frames.size()) + ", reference " +
                          std::to_string(ref.frames.size()) + " (videos are misaligned)");
    if (rx.width != ref.width || rx.height != ref.height) throw MetricError("geometry mismatch between videos");
}

void check_frames(const FrameBuffer& a, const FrameBuffer& b) {
    if (a.width() != b.width() || a.height() != b.height()) throw MetricError("geometry mismatch between frames");
}

std::array<double, kSsimWindow> gaussian_taps() {
    std::array<double, kSsimWindow> taps{};
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - kSsimWindow / 2;
        taps[i] = std::exp(-(d * d) / (2.0 * kSsimSigma * kSsimSigma));
        sum += taps[i];
    }
    for (double& t : taps) t /= sum;
    return taps;
}

// Valid-region separable filtering: out is (w-10) x (h-10).
std::vector<double> filter_valid(const std::vector<double>& img, int w, int h,
                                 const std::array<double, kSsimWindow>& taps) {
    const int ow = w - kSsimWindow + 1;
    const int oh = h - kSsimWindow + 1;
    std::vector<double> rows(static_cast<size_t>(ow) * h);
    for (int y = 0; y < h; ++y) {
        const double* src = &img[static_cast<size_t>(y) * w];
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kSsimWindow; ++k) acc += taps[k] * src[x + k];
            rows[static_cast<size_t>(y) * ow + x] = acc;
        }
    }
    std::vector<double> out(static_cast<size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kSsimWindow; ++k) acc += taps[k] * rows[static_cast<size_t>(y + k) * ow + x];
            out[static_cast<size_t>(y) * ow + x] = acc;
        }
    return out;
}

}  // namespace

double psnr(const FrameBuffer& rx, const FrameBuffer& ref) {
    check_frames(rx, ref);
    auto a = rx.y();
    auto b = ref.y();
    uint64_t sse = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        const int d = static_cast<int>(a[i]) - static_cast<int>(b[i]);
        sse += static_cast<uint64_t>(d * d);
    }
    if (sse == 0) return kPsnrCeiling;
    const double mse = static_cast<double>(sse) / static_cast<double>(a.size());
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

std::vector<double> psnr_series(const RawVideo& rx, const RawVideo& ref) {
    check_pair(rx, ref);
    std::vector<double> out;
    out.reserve(rx.frames.size());
    for (size_t i = 0; i < rx.frames.size(); ++i) out.push_back(psnr(rx.frames[i], ref.frames[i]));
    return out;
}

double ssim(const FrameBuffer& rx, const FrameBuffer& ref) {
    check_frames(rx, ref);
    const int w = rx.width();
    const int h = rx.height();
    if (w < kSsimWindow || h < kSsimWindow) throw MetricError("SSIM needs frames of at least 11x11 pixels");

    static const auto taps = gaussian_taps();
    const size_t n = static_cast<size_t>(w) * h;
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (size_t i = 0; i < n; ++i) {
        x[i] = rx.y()[i];
        y[i] = ref.y()[i];
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, w, h, taps);
    const auto my = filter_valid(y, w, h, taps);
    const auto mxx = filter_valid(xx, w, h, taps);
    const auto myy = filter_valid(yy, w, h, taps);
    const auto mxy = filter_valid(xy, w, h, taps);

    constexpr double c1 = (0.01 * 255) * (0.01 * 255);
    constexpr double c2 = (0.03 * 255) * (0.03 * 255);
    double total = 0.0;
    for (size_t i = 0; i < mx.size(); ++i) {
        const double mux = mx[i], muy = my[i];
        const double vx = mxx[i] - mux * mux;
        const double vy = myy[i] - muy * muy;
        const double cov = mxy[i] - mux * muy;
        total += ((2 * mux * muy + c1) * (2 * cov + c2)) / ((mux * mux + muy * muy + c1) * (vx + vy + c2));
    }
    return total / static_cast<double>(mx.size());
}

std::vector<double> ssim_series(const RawVideo& rx, const RawVideo& ref) {
    check_pair(rx, ref);
    std::vector<double> out;
    out.reserve(rx.frames.size());
    for (size_t i = 0; i < rx.frames.size(); ++i) out.push_back(ssim(rx.frames[i], ref.frames[i]));
    return out;
}

int MosTable::lookup(double psnr_db) const {
    for (const Row& row : rows)
        if (row.inclusive ? psnr_db >= row.bound : psnr_db > row.bound) return row.score;
    return floor_score;
}

std::string MosTable::describe() const {
    std::ostringstream os;
    for (const Row& row : rows) os << (row.inclusive ? ">=" : ">") << row.bound << " -> " << row.score << "; ";
    os << "else " << floor_score;
    return os.str();
}

MosTable MosTable::evalvid() {
    return {{{37.0, false, 5}, {31.0, true, 4}, {25.0, true, 3}, {20.0, true, 2}}, 1};
}

std::vector<int> mos_from_psnr(std::span<const double> psnr_db, const MosTable& table) {
    std::vector<int> out;
    out.reserve(psnr_db.size());
    for (double p : psnr_db) out.push_back(table.lookup(p));
    return out;
}

double div_from_mos(std::span<const int> rx_mos, std::span<const int> ref_mos) {
    if (rx_mos.size() != ref_mos.size()) throw MetricError("DIV needs MOS series of equal length");
    if (rx_mos.empty()) return 0.0;
    size_t worse = 0;
    for (size_t i = 0; i < rx_mos.size(); ++i)
        if (rx_mos[i] < ref_mos[i]) ++worse;
    return static_cast<double>(worse) / static_cast<double>(rx_mos.size());
}

std::vector<double> div_intervals(std::span<const int> rx_mos, std::span<const int> ref_mos, size_t intervals) {
    if (rx_mos.size() != ref_mos.size()) throw MetricError("DIV needs MOS series of equal length");
    if (intervals == 0) throw MetricError("DIV needs at least one interval");
    std::vector<double> out;
    const size_t n = rx_mos.size();
    for (size_t k = 0; k < intervals; ++k) {
        const size_t lo = n * k / intervals;
        const size_t hi = n * (k + 1) / intervals;
        out.push_back(div_from_mos(rx_mos.subspan(lo, hi - lo), ref_mos.subspan(lo, hi - lo)));
    }
    return out;
}

G1070Result g1070_vq(const G1070Coefficients& c, const G1070Inputs& in) {
    const auto& v = c.v;
    if (in.bitrate_kbps <= 0.0 || in.frame_rate <= 0.0 || in.packet_loss_pct < 0.0)
        throw MetricError("G.1070 needs positive bitrate and frame rate and non-negative loss");
    G1070Result r;
    r.optimal_frame_rate = v[0] + v[1] * in.bitrate_kbps;
    if (!(r.optimal_frame_rate >= 1.0 && r.optimal_frame_rate <= 30.0))
        throw MetricError("G.1070: O_fr = " + std::to_string(r.optimal_frame_rate) + " outside [1, 30]");
    r.max_coding_quality = v[2] - v[2] / (1.0 + std::pow(in.bitrate_kbps / v[3], v[4]));
    if (!(r.max_coding_quality >= 0.0 && r.max_coding_quality <= 4.0))
        throw MetricError("G.1070: I_Ofr = " + std::to_string(r.max_coding_quality) + " outside [0, 4]");
    r.frame_rate_spread = v[5] + v[6] * in.bitrate_kbps;
    if (!(r.frame_rate_spread > 0.0))
        throw MetricError("G.1070: D_FrV = " + std::to_string(r.frame_rate_spread) + " is not positive");
    const double log_gap = std::log(in.frame_rate) - std::log(r.optimal_frame_rate);
    r.coding_quality =
        r.max_coding_quality * std::exp(-(log_gap * log_gap) / (2.0 * r.frame_rate_spread * r.frame_rate_spread));
    r.loss_robustness = v[9] + v[10] * std::exp(-in.frame_rate / v[7]) + v[11] * std::exp(-in.bitrate_kbps / v[8]);
    if (!(r.loss_robustness > 0.0))
        throw MetricError("G.1070: D_PplV = " + std::to_string(r.loss_robustness) + " is not positive");
    r.vq = 1.0 + r.coding_quality * std::exp(-in.packet_loss_pct / r.loss_robustness);
    return r;
}

}  // namespace vtester::vq
