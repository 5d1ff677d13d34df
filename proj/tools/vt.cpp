// vt: command-line front end for the video transmission tester.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vtester/codec.hpp"
#include "vtester/config.hpp"
#include "vtester/error.hpp"
#include "vtester/netharness.hpp"
#include "vtester/rawvideo.hpp"
#include "vtester/report.hpp"
#include "vtester/rtp.hpp"
#include "vtester/trace.hpp"

namespace fs = std::filesystem;
using namespace vtester;

namespace {

ToolConfig config_or_default(const std::string& path) { return path.empty() ? ToolConfig{} : load_config(path); }

void print_outcomes(const std::vector<MeasureOutcome>& outcomes) {
    for (const auto& o : outcomes) {
        std::cout << o.meter << "." << o.name << " ";
        if (!o.ok()) {
            std::cout << (o.status == OutcomeStatus::skipped ? "skipped: " : "failed: ") << o.reason << "\n";
            continue;
        }
        const MeasureResult& r = *o.result;
        if (r.kind() == ResultKind::value)
            std::cout << exact(std::get<double>(r.data)) << " " << r.units << "\n";
        else if (r.kind() == ResultKind::series)
            std::cout << std::get<Series>(r.data).size() << " points (" << r.units << ")\n";
        else
            std::cout << std::get<Histogram>(r.data).size() << " bins (" << r.units << ")\n";
    }
}

AnalysisRun analyze_dir(const AnalysisInputs& inputs, const ToolConfig& cfg, const fs::path& out) {
    return analyze_artifacts(inputs, cfg.analysis, cfg.measures, cfg.provenance, out);
}

int cmd_serve(const std::string& config_path, std::optional<uint16_t> port) {
    const ToolConfig cfg = config_or_default(config_path);
    Server server(cfg.database_dir, port.value_or(cfg.session.control.port), cfg.session.control.host);
    std::cout << "serving " << cfg.database_dir << " on " << cfg.session.control.host << ":" << server.port()
              << std::endl;
    server.run_forever();
    return 0;
}

int cmd_run(const std::string& config_path, bool with_server) {
    ToolConfig cfg = load_config(config_path);

    std::optional<Server> server;
    if (with_server) {
        server.emplace(cfg.database_dir, cfg.session.control.port, cfg.session.control.host);
        server->start();
        cfg.session.control.port = server->port();
    }
    std::optional<ImpairProxy> proxy;
    if (cfg.impair_enabled) {
        if (cfg.session.rtp_port == 0) throw ConfigError("[impair] needs a fixed [session] rtp_port");
        const net::Endpoint forward =
            cfg.impair.forward.port != 0 ? cfg.impair.forward : net::Endpoint{"127.0.0.1", cfg.session.rtp_port};
        proxy.emplace(cfg.impair.listen_port, forward, cfg.impair.loss, cfg.seed);
        proxy->start();
        cfg.session.send_to = net::Endpoint{"127.0.0.1", proxy->port()};
    }
    cfg.session.validate();

    const TestArtifacts artifacts = run_client(cfg.session, cfg.database_dir, cfg.output_dir);
    if (proxy) {
        proxy->stop();
        const ProxyStats st = proxy->stats();
        std::cout << "impair: received " << st.received << " dropped " << st.dropped << "\n";
    }
    if (server) server->stop();

    std::cout << "artifacts in " << cfg.output_dir << "\n";
    const AnalysisRun run = analyze_dir(AnalysisInputs::from_directory(cfg.output_dir), cfg, cfg.output_dir);
    print_outcomes(run.outcomes);
    std::cout << "report: " << run.written.json_path.string() << "\n";
    return 0;
}

int cmd_send(const std::string& vtes, const std::string& to, const std::string& transport, double pacing,
             size_t mtu) {
    const EncodedStream stream = read_vtes_file(vtes);
    const auto packets = packetize(stream, mtu);
    const SendReport r = send_stream(packets, parse_transport(transport), net::Endpoint::parse(to), pacing);
    std::cout << nlohmann::json{{"packets", r.packets}, {"bytes", r.bytes}, {"seconds", r.seconds}}.dump() << "\n";
    return 0;
}

int cmd_recv(uint16_t port, const std::string& transport, const std::string& group, int idle_ms,
             const std::string& trace_out) {
    std::optional<std::string> mgroup;
    if (!group.empty()) mgroup = group;
    StreamReceiver receiver(parse_transport(transport), port, mgroup, mgroup ? "0.0.0.0" : "127.0.0.1");
    std::cerr << "listening on port " << receiver.port() << std::endl;
    CaptureSink sink;
    const auto received = receiver.run(std::chrono::milliseconds(idle_ms), &sink);
    write_pcap(sink.snapshot(), trace_out);
    std::cout << nlohmann::json{{"packets", received.size()}, {"malformed", receiver.malformed()},
                                {"trace", trace_out}}
                     .dump()
              << "\n";
    return 0;
}

int cmd_impair(const std::string& config_path, std::optional<double> loss, std::optional<uint64_t> seed,
               std::optional<uint16_t> listen, const std::string& forward) {
    const ToolConfig cfg = config_or_default(config_path);
    const double p = loss.value_or(cfg.impair.loss);
    if (p < 0.0 || p > 1.0) throw ConfigError("--loss must be in [0, 1]");
    net::Endpoint fwd = cfg.impair.forward;
    if (!forward.empty()) fwd = net::Endpoint::parse(forward);
    if (fwd.port == 0) throw ConfigError("impair: no forward endpoint given");
    ImpairProxy proxy(listen.value_or(cfg.impair.listen_port), fwd, p, seed.value_or(cfg.seed));
    std::cout << "impair: 127.0.0.1:" << proxy.port() << " -> " << fwd.str() << " loss " << p << std::endl;
    proxy.run_forever();
    return 0;
}

int cmd_encode(const std::string& in, const std::string& out, int gop, int quant) {
    const EncodedStream s = encode(read_y4m_file(in), gop, quant);
    write_vtes_file(out, s);
    std::cout << nlohmann::json{{"frames", s.frames.size()}, {"bytes", s.total_bytes()}}.dump() << "\n";
    return 0;
}

int cmd_synth(const std::string& out, int width, int height, size_t frames, int fps) {
    const RawVideo v = moving_square(width, height, frames, 32, 3, fps);
    write_y4m_file(out, v);
    std::cout << nlohmann::json{{"frames", v.frames.size()}, {"width", width}, {"height", height}}.dump() << "\n";
    return 0;
}

int cmd_decode(const std::string& in, const std::string& out, size_t frames) {
    const EncodedStream s = read_vtes_file(in);
    if (frames == 0 && !s.frames.empty()) frames = s.frames.back().number + 1;
    auto [video, report] = decode(s, frames);
    if (!out.empty()) write_y4m_file(out, video);
    std::cout << to_json(report).dump() << "\n";
    return 0;
}

struct AnalyzeArgs {
    std::string config;
    std::vector<std::string> dirs;
    std::string trace, rx_vtes, rx_y4m, ref_y4m, decode_report, session;
    std::string out = "";
};

int cmd_analyze(const AnalyzeArgs& a) {
    const ToolConfig cfg = config_or_default(a.config);
    const fs::path out = a.out.empty() ? cfg.output_dir : fs::path(a.out);
    auto opt = [](const std::string& s) -> std::optional<fs::path> {
        if (s.empty()) return std::nullopt;
        if (!fs::exists(s)) throw ConfigError("analyze: no such file " + s);
        return fs::path(s);
    };
    AnalysisInputs files{opt(a.trace), opt(a.rx_vtes), opt(a.rx_y4m), opt(a.ref_y4m), opt(a.decode_report),
                         opt(a.session)};
    if (!a.dirs.empty() && files.any()) throw ConfigError("analyze: give run directories or files, not both");

    if (a.dirs.size() <= 1) {
        const AnalysisInputs inputs = a.dirs.empty() ? files : AnalysisInputs::from_directory(a.dirs.front());
        const AnalysisRun run = analyze_dir(inputs, cfg, out);
        print_outcomes(run.outcomes);
        std::cout << "report: " << run.written.json_path.string() << "\n";
        return 0;
    }
    std::vector<std::pair<std::string, MosLevels>> levels;
    for (size_t i = 0; i < a.dirs.size(); ++i) {
        const fs::path dir = a.dirs[i];
        const std::string label = std::to_string(i) + "_" + dir.filename().string();
        const AnalysisRun run = analyze_dir(AnalysisInputs::from_directory(dir), cfg, out / label);
        std::cout << "[" << label << "]\n";
        print_outcomes(run.outcomes);
        if (auto l = mos_levels(run.outcomes)) levels.emplace_back(label, *l);
    }
    if (!levels.empty()) {
        const std::string data = mos_stacked_data(levels);
        fs::create_directories(out);
        FILE* f = std::fopen((out / "mos_levels.dat").c_str(), "w");
        if (!f) throw Error("cannot write " + (out / "mos_levels.dat").string());
        std::fputs(data.c_str(), f);
        std::fclose(f);
        std::cout << "mos levels: " << (out / "mos_levels.dat").string() << "\n";
    }
    return 0;
}

int exit_code(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const FormatError*>(&e)) return 2;
    if (dynamic_cast<const NetError*>(&e)) return 3;
    if (dynamic_cast<const MetricError*>(&e)) return 4;
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vt: video transmission tester"};
    app.require_subcommand(1);

    std::string config;
    std::optional<uint16_t> port;
    auto* serve = app.add_subcommand("serve", "Serve videos from the database to test clients");
    serve->add_option("-c,--config", config, "Config file");
    serve->add_option("-p,--port", port, "Control port (overrides [session] control)");

    bool with_server = false;
    auto* run = app.add_subcommand("run", "Run one test session, then analyze it");
    run->add_option("-c,--config", config, "Config file")->required();
    run->add_flag("--with-server", with_server, "Start an in-process server on the control endpoint");

    std::string vtes, to = "127.0.0.1:6004", transport = "udp_unicast";
    double pacing = 1.0;
    size_t mtu = 1400;
    auto* send = app.add_subcommand("send", "Packetize a VTES file and send it as RTP");
    send->add_option("vtes", vtes, "Encoded stream")->required();
    send->add_option("--to", to, "Destination host:port");
    send->add_option("--transport", transport, "udp_unicast, udp_multicast or tcp");
    send->add_option("--pacing", pacing, "1 = real time, 0 = as fast as possible");
    send->add_option("--mtu", mtu, "RTP payload bytes per packet");

    uint16_t recv_port = 6004;
    std::string group, trace_out = "trace.pcap";
    int idle_ms = 2000;
    auto* recv = app.add_subcommand("recv", "Receive an RTP stream into a PCAP trace");
    recv->add_option("-p,--port", recv_port, "Receive port");
    recv->add_option("--transport", transport, "udp_unicast, udp_multicast or tcp");
    recv->add_option("--group", group, "Multicast group");
    recv->add_option("--idle-ms", idle_ms, "Stop after this long without data");
    recv->add_option("-o,--trace", trace_out, "Output PCAP");

    std::optional<double> loss;
    std::optional<uint64_t> seed;
    std::optional<uint16_t> listen;
    std::string forward;
    auto* impair = app.add_subcommand("impair", "Forward UDP while dropping packets at random");
    impair->add_option("-c,--config", config, "Config file");
    impair->add_option("--loss", loss, "Drop probability");
    impair->add_option("--seed", seed, "Generator seed");
    impair->add_option("--listen", listen, "Listen port");
    impair->add_option("--forward", forward, "Forward host:port");

    std::string in, out;
    int gop = 15, quant = 0;
    auto* enc = app.add_subcommand("encode", "Encode a Y4M file to VTES");
    enc->add_option("input", in, "Y4M input")->required();
    enc->add_option("output", out, "VTES output")->required();
    enc->add_option("--gop", gop, "GOP size");
    enc->add_option("--quant", quant, "Quantizer shift");

    size_t frames = 0;
    auto* dec = app.add_subcommand("decode", "Decode VTES to Y4M and print the decode report");
    dec->add_option("input", in, "VTES input")->required();
    dec->add_option("output", out, "Y4M output");
    dec->add_option("--frames", frames, "Expected frame count (default: last frame number + 1)");

    int width = 352, height = 288, fps = 25;
    size_t synth_frames = 299;
    auto* synth = app.add_subcommand("synth", "Write a synthetic moving-square Y4M clip");
    synth->add_option("output", out, "Y4M output")->required();
    synth->add_option("--width", width, "Frame width");
    synth->add_option("--height", height, "Frame height");
    synth->add_option("--frames", synth_frames, "Frame count");
    synth->add_option("--fps", fps, "Frames per second");

    AnalyzeArgs aa;
    auto* ana = app.add_subcommand("analyze", "Compute measures and write reports");
    ana->add_option("-c,--config", aa.config, "Config file");
    ana->add_option("-d,--dir", aa.dirs, "Run directory (repeat for a multi-run comparison)");
    ana->add_option("--trace", aa.trace, "PCAP trace");
    ana->add_option("--rx-vtes", aa.rx_vtes, "Received VTES");
    ana->add_option("--rx-y4m", aa.rx_y4m, "Received raw video");
    ana->add_option("--ref-y4m", aa.ref_y4m, "Reference raw video");
    ana->add_option("--decode-report", aa.decode_report, "Decode report JSON");
    ana->add_option("--session", aa.session, "Session JSON");
    ana->add_option("-o,--out", aa.out, "Report directory (default: config output_dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*serve) return cmd_serve(config, port);
        if (*run) return cmd_run(config, with_server);
        if (*send) return cmd_send(vtes, to, transport, pacing, mtu);
        if (*recv) return cmd_recv(recv_port, transport, group, idle_ms, trace_out);
        if (*impair) return cmd_impair(config, loss, seed, listen, forward);
        if (*enc) return cmd_encode(in, out, gop, quant);
        if (*dec) return cmd_decode(in, out, frames);
        if (*synth) return cmd_synth(out, width, height, synth_frames, fps);
        if (*ana) return cmd_analyze(aa);
    } catch (const std::exception& e) {
        std::cerr << "vt: " << e.what() << "\n";
        return exit_code(e);
    }
    return 1;
}
