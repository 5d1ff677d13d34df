#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vtester/metrics.hpp"
#include "vtester/netharness.hpp"

namespace vtester {

struct ImpairSettings {
    double loss = 0.0;
    uint16_t listen_port = 0;
    net::Endpoint forward;
};

/// Everything the command-line tool can be configured with.
struct ToolConfig {
    SessionConfig session;
    std::filesystem::path database_dir = "videos";
    std::filesystem::path output_dir = "out";
    uint64_t seed = 1;
    std::vector<std::string> measures;  // empty: every registered measure
    AnalysisOptions analysis;
    ImpairSettings impair;
    bool impair_enabled = false;  // [impair] section present: run() routes through a local proxy
    /// Where each configurable mapping came from: "file:line" or "built-in".
    std::map<std::string, std::string> provenance{
        {"mos_table", "built-in"}, {"g1070", "unset"}, {"pld_intervals", "built-in"}};
};

/// Parses the sectioned `key = value` dialect. `origin` names the source in
/// error messages ("file:line: ..."). Unknown sections or keys are errors.
ToolConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ToolConfig load_config(const std::filesystem::path& path);

/// "> 37 : 5, >= 31 : 4" style rows.
vq::MosTable parse_mos_rows(const std::string& text, int floor_score);

}  // namespace vtester
