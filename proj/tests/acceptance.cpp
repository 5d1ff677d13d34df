// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <thread>

#include "support.hpp"
#include "vtester/bitstream.hpp"
#include "vtester/error.hpp"
#include "vtester/picture.hpp"
#include "vtester/qos.hpp"
#include "vtester/report.hpp"

using namespace vtester;
using namespace std::chrono_literals;
namespace fs = std::filesystem;

namespace {

constexpr int kWidth = 352;
constexpr int kHeight = 288;
constexpr size_t kFrames = 299;
constexpr int kGop = 15;

// Collects failed requirements of one criterion.
class Check {
public:
    void require(bool ok, const std::string& what) {
        if (!ok && failures_.size() < 5) failures_.push_back(what);
        if (!ok) ++failed_;
    }
    bool ok() const { return failed_ == 0; }
    std::string summary() const {
        std::string s = std::to_string(failed_) + " failed";
        for (const auto& f : failures_) s += "; " + f;
        return s;
    }
    std::string detail;

private:
    std::vector<std::string> failures_;
    size_t failed_ = 0;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

uint16_t free_udp_port() {
    net::Socket s = net::udp_socket();
    return net::bind_socket(s, "127.0.0.1", 0);
}

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (size_t i = 0; i < idx.size();) {
        size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

// Pearson correlation of average ranks; NaN when either side is constant.
double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

vq::G1070Coefficients fixture_coefficients() {
    return {{1.431, 2.228e-2, 3.759, 184.1, 1.161, 1.446, 3.881e-4, 2.116, 467.4, 2.736, 15.28, 4.170}};
}

// Loopback server over a database holding the CIF test clip.
class Bench {
public:
    Bench() : tmp_("acceptance") {
        fs::create_directories(db());
        write_y4m_file(db() / "cif.y4m", moving_square(kWidth, kHeight, kFrames, 32, 3));
        server_ = std::make_unique<Server>(db(), 0);
        server_->start();
    }

    fs::path db() const { return tmp_ / "db"; }
    fs::path dir(const std::string& name) const { return tmp_ / name; }

    SessionConfig config() const {
        SessionConfig c;
        c.video_id = "cif";
        c.gop_size = kGop;
        c.control = {"127.0.0.1", server_->port()};
        c.pacing = 0.0;
        c.rtt_probes = 1;
        c.idle_timeout = 2000ms;
        return c;
    }

    struct Run {
        TestArtifacts artifacts;
        ProxyStats proxy;
        std::vector<uint64_t> drops;
    };

    /// One session through a seeded loss proxy.
    Run impaired(double loss, uint64_t seed, const fs::path& out) const {
        SessionConfig c = config();
        c.rtp_port = free_udp_port();
        ImpairProxy proxy(0, {"127.0.0.1", c.rtp_port}, loss, seed);
        proxy.start();
        c.send_to = net::Endpoint{"127.0.0.1", proxy.port()};
        Run r{run_client(c, db(), out), {}, {}};
        proxy.stop();
        r.proxy = proxy.stats();
        r.drops = proxy.drop_log();
        return r;
    }

private:
    fixtures::TempDir tmp_;
    std::unique_ptr<Server> server_;
};

Check criterion1() {
    Check c;
    auto timed = [](std::vector<double> r, std::vector<double> s) {
        std::vector<PacketRecord> out;
        for (size_t i = 0; i < r.size(); ++i) out.push_back({1000, static_cast<int64_t>(i), s[i], r[i]});
        return out;
    };
    const auto j = qos::jitter(timed({0, 0.050, 0.080}, {0, 0.040, 0.080}));
    const std::vector<double> expect{0, 0.000625, 0.0012109375};
    c.require(j.size() == 3, "jitter length");
    for (size_t i = 0; i < 3 && i < j.size(); ++i)
        c.require(std::abs(j[i] - expect[i]) <= 1e-12, "jitter[" + std::to_string(i) + "]");
    c.require(qos::plr(fixtures::records_with_seqs({0, 1, 3, 4})) == 0.25, "plr");

    std::mt19937_64 rng(1);
    std::bernoulli_distribution lost(0.1);
    for (int f = 0; f < 100; ++f) {
        std::vector<int64_t> seqs;
        for (int64_t s = 0; s < 200; ++s)
            if (s == 0 || s == 199 || !lost(rng)) seqs.push_back(s);
        const auto rec = fixtures::records_with_seqs(seqs);
        c.require(qos::pld(rec, 1).values == std::vector<double>{qos::plr(rec)}, "pld K=1 vs plr");
    }
    const std::vector<int> gops{15, 15, 30, 15};
    c.require(bs::gop_size_estimate(gops).value == 15.0, "gop estimate");
    c.require(bs::iframe_loss(gops).count == 1, "iframe loss count");
    c.require(qos::latency(std::vector<double>{0.080, 0.120}) == 0.050, "latency");
    c.detail = "jitter, plr, pld(K=1) x100, gop, I-loss, latency";
    return c;
}

Check criterion2() {
    Check c;
    constexpr int kCases = 1000;
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> dim(1, 12);
    for (int i = 0; i < kCases; ++i) {
        const RawVideo v = fixtures::random_video(rng, 2 * dim(rng), 2 * dim(rng), 1 + i % 3);
        std::stringstream ss;
        write_y4m(ss, v);
        c.require(read_y4m(ss) == v, "y4m");
    }
    for (int i = 0; i < kCases; ++i) {
        const auto data = fixtures::random_bytes(rng, rng() % 2000, (i % 10) / 10.0);
        c.require(rle_decompress(rle_compress(data)) == data, "rle");
    }
    for (int i = 0; i < kCases; ++i) {
        const RawVideo v = fixtures::random_video(rng, 2 * dim(rng), 2 * dim(rng), 1 + i % 4);
        const EncodedStream s = encode(v, 1 + i % 5, i % 3);
        c.require(parse_vtes(serialize_vtes(s)) == s, "vtes");
    }
    for (int i = 0; i < kCases; ++i) {
        std::vector<CapturedPacket> pk;
        for (size_t k = rng() % 5; k > 0; --k)
            pk.push_back({static_cast<uint32_t>(rng()), static_cast<uint32_t>(rng() % 1000000),
                          fixtures::random_bytes(rng, rng() % 300)});
        const auto order = i % 2 ? PcapByteOrder::big : PcapByteOrder::little;
        c.require(parse_pcap(serialize_pcap(pk, order)) == pk, "pcap");
    }
    std::vector<RtpPacket> all;
    for (int i = 0; i < kCases; ++i) {
        RtpPacket p;
        p.marker = rng() & 1;
        p.payload_type = static_cast<uint8_t>(rng() % 128);
        p.sequence = static_cast<uint16_t>(rng());
        p.timestamp = static_cast<uint32_t>(rng());
        p.ssrc = static_cast<uint32_t>(rng());
        p.payload = fixtures::random_bytes(rng, rng() % 1400);
        c.require(parse_packet(serialize_packet(p)) == p, "rtp header");
        all.push_back(std::move(p));
    }
    std::vector<uint8_t> framed;
    for (const auto& p : all) {
        const auto f = frame_tcp(p);
        c.require(unframe_tcp(f) == std::vector<RtpPacket>{p}, "tcp frame");
        framed.insert(framed.end(), f.begin(), f.end());
    }
    c.require(unframe_tcp(framed) == all, "tcp stream");
    c.detail = "y4m, rle, vtes, pcap, rtp, tcp framing x1000 each";
    return c;
}

Check criterion3(const Bench& bench) {
    Check c;
    constexpr int kRuns = 200;
    size_t frame0_kept = 0, frame0_lost = 0, realigned = 0, psnr_ok = 0;
    for (int run = 0; run < kRuns; ++run) {
        const fs::path out = bench.dir("c3_" + std::to_string(run));
        try {
            const auto r = bench.impaired(0.02, 3000 + static_cast<uint64_t>(run), out);
            const EncodedStream rx_enc = read_vtes_file(r.artifacts.rx_encoded_path);
            auto has = [&](uint32_t n) {
                return std::any_of(rx_enc.frames.begin(), rx_enc.frames.end(),
                                   [&](const EncodedFrame& f) { return f.number == n; });
            };
            const RawVideo rx = read_y4m_file(r.artifacts.rx_raw_path);
            const RawVideo ref = read_y4m_file(r.artifacts.ref_raw_path);
            const DecodeReport& rep = r.artifacts.decode_report;
            const std::string tag = "run " + std::to_string(run);
            if (has(0)) {
                ++frame0_kept;
                c.require(rx.frames.size() == kFrames, tag + ": " + std::to_string(rx.frames.size()) + " frames");
            } else {
                ++frame0_lost;
                if (has(kGop)) {
                    ++realigned;
                    c.require(rep.start_offset == -kGop, tag + ": start_offset " + std::to_string(rep.start_offset));
                }
            }
            auto [a, b] = dismiss_first_gop(rx, ref, rep, kGop);
            const auto p = vq::psnr_series(a, b);
            c.require(p.size() == a.frames.size(), tag + ": psnr length");
            ++psnr_ok;
        } catch (const std::exception& e) {
            c.require(false, "run " + std::to_string(run) + ": " + e.what());
        }
        fs::remove_all(out);
    }
    c.detail = std::to_string(kRuns) + " runs, frame 0 kept " + std::to_string(frame0_kept) + ", lost " +
               std::to_string(frame0_lost) + " (" + std::to_string(realigned) + " with GOP 2 I-frame), psnr ok " +
               std::to_string(psnr_ok);
    return c;
}

Check criterion4(const Bench& bench) {
    Check c;
    const auto registry = MeterRegistry::with_builtins();
    const std::vector<std::string> sel{"mos", "iframe_loss", "plr"};
    std::vector<double> loss, mean_mos, iloss;
    std::string table;
    for (int i = 0; i < 10; ++i) {
        const double p = 0.001 + 0.004 * i;
        const fs::path out = bench.dir("c4_" + std::to_string(i));
        const auto r = bench.impaired(p, 4000 + static_cast<uint64_t>(i), out);
        const auto ctx = load_context(AnalysisInputs::from_directory(out), AnalysisOptions{});
        const auto res = registry.run(sel, ctx);
        for (const auto& o : res) c.require(o.ok(), o.name + ": " + o.reason);
        if (!res[0].ok() || !res[1].ok()) continue;
        const auto& mos = std::get<Series>(res[0].result->data);
        double sum = 0;
        for (const auto& pt : mos) sum += pt.y;
        loss.push_back(p);
        mean_mos.push_back(sum / static_cast<double>(mos.size()));
        iloss.push_back(std::get<double>(res[1].result->data));
        table += " " + fmt("%.3f", p) + ":" + fmt("%.3f", mean_mos.back()) + "/" + fmt("%.3f", iloss.back());
        fs::remove_all(out);
    }
    const double rho_mos = spearman(loss, mean_mos);
    const double rho_iloss = spearman(loss, iloss);
    c.require(rho_mos <= 0.0, "rho(loss, mean MOS) = " + fmt("%.3f", rho_mos));
    c.require(rho_iloss >= 0.0, "rho(loss, I-frame loss) = " + fmt("%.3f", rho_iloss));
    c.detail = "rho(loss,MOS) " + fmt("%.3f", rho_mos) + ", rho(loss,I-loss) " + fmt("%.3f", rho_iloss) +
               "; p:MOS/I-loss" + table;
    return c;
}

Check criterion5(const Bench& bench) {
    Check c;
    const fs::path out = bench.dir("c5");
    const TestArtifacts a = run_client(bench.config(), bench.db(), out);
    c.require(slurp(a.rx_raw_path) == slurp(a.ref_raw_path), "rx raw differs from reference");
    c.require(a.decode_report.duplicated == 0, "duplicated frames");
    const std::vector<std::string> sel{"plr", "jitter", "div"};
    const auto run = analyze_artifacts(AnalysisInputs::from_directory(out), AnalysisOptions{}, sel, {}, out / "report");
    for (const auto& o : run.outcomes) c.require(o.ok(), o.name + ": " + o.reason);
    if (run.outcomes[0].ok()) c.require(std::get<double>(run.outcomes[0].result->data) == 0.0, "plr");
    if (run.outcomes[1].ok())
        for (const auto& p : std::get<Series>(run.outcomes[1].result->data))
            c.require(std::isfinite(p.y), "jitter not finite");
    if (run.outcomes[2].ok()) c.require(std::get<double>(run.outcomes[2].result->data) == 0.0, "div");
    c.detail = "CIF " + std::to_string(kFrames) + " frames, " +
               std::to_string(a.session_meta.at("packets_received").get<size_t>()) + " packets";
    fs::remove_all(out);
    return c;
}

Check criterion6() {
    Check c;
    const RawVideo v = moving_square(kWidth, kHeight, 5, 32, 3);
    for (double s : vq::ssim_series(v, v)) c.require(std::abs(s - 1.0) <= 1e-12, "ssim(x,x)");
    auto constant = [](uint8_t luma) {
        FrameBuffer f(32, 32);
        for (auto& b : f.y()) b = luma;
        return f;
    };
    const double s = vq::ssim(constant(100), constant(105));
    c.require(std::abs(s - 0.99881) <= 1e-4, "constant ssim " + fmt("%.6f", s));
    const double p = vq::psnr(constant(1), constant(0));
    c.require(std::abs(p - 48.1308) <= 1e-3, "psnr mse=1 " + fmt("%.6f", p));
    const double g = vq::g1070_vq(fixture_coefficients(), {300.0, 25.0, 2.0}).vq;
    c.require(std::abs(g - 2.2335688752958792) <= 1e-9, "g1070 golden " + fmt("%.12f", g));

    std::mt19937_64 rng(1070);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    size_t valid = 0, tries = 0;
    while (valid < 1000 && ++tries < 100000) {
        vq::G1070Coefficients k{{1 + 5 * u(rng), 0.05 * u(rng), 4 * u(rng), 1 + 500 * u(rng), 0.2 + 3 * u(rng),
                                 0.1 + 3 * u(rng), 0.001 * u(rng), 0.5 + 5 * u(rng), 10 + 1000 * u(rng),
                                 0.1 + 5 * u(rng), 30 * u(rng), 10 * u(rng)}};
        const vq::G1070Inputs in{10 + 2000 * u(rng), 1 + 29 * u(rng), 20 * u(rng)};
        try {
            const double vqv = vq::g1070_vq(k, in).vq;
            ++valid;
            c.require(vqv >= 1.0 && vqv <= 5.0, "vq out of range " + fmt("%.6f", vqv));
        } catch (const MetricError&) {
        }
    }
    c.require(valid == 1000, "valid sweep points " + std::to_string(valid));
    c.detail = "ssim " + fmt("%.8f", s) + ", psnr " + fmt("%.6f", p) + ", vq " + fmt("%.12f", g) + ", " +
               std::to_string(valid) + " sweep points";
    return c;
}

Check criterion7(const Bench& bench) {
    Check c;
    const auto a = bench.impaired(0.02, 7, bench.dir("c7a"));
    const auto b = bench.impaired(0.02, 7, bench.dir("c7b"));
    c.require(a.drops == b.drops, "drop logs differ");
    c.require(!a.drops.empty(), "no drops at p=0.02");
    c.require(slurp(a.artifacts.rx_encoded_path) == slurp(b.artifacts.rx_encoded_path), "rx VTES differs");
    fs::remove_all(bench.dir("c7a"));
    fs::remove_all(bench.dir("c7b"));

    net::Socket sink = net::udp_socket();
    const uint16_t sink_port = net::bind_socket(sink, "127.0.0.1", 0);
    ImpairProxy proxy(0, {"127.0.0.1", sink_port}, 0.02, 7);
    proxy.start();
    net::Socket src = net::udp_socket();
    net::grow_buffers(src, 1 << 22);
    sockaddr_in to{};
    to.sin_family = AF_INET;
    to.sin_port = htons(proxy.port());
    to.sin_addr.s_addr = htonl(0x7F000001);
    const std::vector<uint8_t> payload(64, 0x5A);
    constexpr uint64_t kPackets = 100000;
    for (uint64_t i = 0; i < kPackets; ++i) {
        ::sendto(src.fd(), payload.data(), payload.size(), 0, reinterpret_cast<const sockaddr*>(&to), sizeof to);
        if (i % 200 == 199) std::this_thread::sleep_for(1ms);
    }
    for (int i = 0; i < 500 && proxy.stats().received < kPackets; ++i) std::this_thread::sleep_for(10ms);
    proxy.stop();
    const ProxyStats st = proxy.stats();
    const double rate = st.received ? static_cast<double>(st.dropped) / static_cast<double>(st.received) : 0.0;
    c.require(st.received == kPackets, "proxy saw " + std::to_string(st.received) + " packets");
    c.require(rate >= 0.015 && rate <= 0.025, "drop rate " + fmt("%.5f", rate));
    c.detail = "seed 7 twice: " + std::to_string(a.drops.size()) + " identical drops; " +
               std::to_string(st.received) + " packets, drop rate " + fmt("%.5f", rate);
    return c;
}

bool report(int n, const char* title, const std::function<Check()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Check c;
    try {
        c = body();
    } catch (const std::exception& e) {
        c.require(false, std::string("exception: ") + e.what());
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (c.ok() ? "PASS" : "FAIL") << " criterion " << n << " (" << title << "): "
              << (c.ok() ? c.detail : c.summary() + (c.detail.empty() ? "" : " | " + c.detail)) << " ["
              << fmt("%.1f", s) << " s]" << std::endl;
    return c.ok();
}

}  // namespace

int main() {
    bool ok = true;
    ok &= report(1, "formula oracles", criterion1);
    ok &= report(2, "round-trip identities", criterion2);
    std::unique_ptr<Bench> bench;
    try {
        bench = std::make_unique<Bench>();
    } catch (const std::exception& e) {
        std::cout << "FAIL loopback bench setup: " << e.what() << std::endl;
        return 1;
    }
    ok &= report(3, "frame alignment, 200 runs at 2% loss", [&] { return criterion3(*bench); });
    ok &= report(4, "loss sweep 0.1% to 3.7%", [&] { return criterion4(*bench); });
    ok &= report(5, "end-to-end lossless", [&] { return criterion5(*bench); });
    ok &= report(6, "metric sanity", criterion6);
    ok &= report(7, "impairment determinism", [&] { return criterion7(*bench); });
    return ok ? 0 : 1;
}
