#include "vtester/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "vtester/error.hpp"

namespace vtester {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
        if (auto t = trim(item); !t.empty()) out.push_back(t);
    return out;
}

double to_double(const std::string& v) {
    size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return d;
}

int64_t to_int(const std::string& v) {
    int64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument("not an integer");
    return out;
}

uint16_t to_port(const std::string& v) {
    const int64_t p = to_int(v);
    if (p < 0 || p > 65535) throw std::invalid_argument("port out of range");
    return static_cast<uint16_t>(p);
}

using Setter = std::function<void(ToolConfig&, const std::string&)>;

const std::map<std::string, std::map<std::string, Setter>>& schema() {
    static const std::map<std::string, std::map<std::string, Setter>> s = {
        {"general",
         {
             {"database_dir", [](ToolConfig& c, const std::string& v) { c.database_dir = v; }},
             {"output_dir", [](ToolConfig& c, const std::string& v) { c.output_dir = v; }},
             {"seed", [](ToolConfig& c, const std::string& v) { c.seed = static_cast<uint64_t>(to_int(v)); }},
         }},
        {"session",
         {
             {"video", [](ToolConfig& c, const std::string& v) { c.session.video_id = v; }},
             {"gop_size", [](ToolConfig& c, const std::string& v) { c.session.gop_size = static_cast<int>(to_int(v)); }},
             {"quant_shift",
              [](ToolConfig& c, const std::string& v) { c.session.quant_shift = static_cast<int>(to_int(v)); }},
             {"fps",
              [](ToolConfig& c, const std::string& v) {
                  const auto parts = split(v, '/');
                  if (parts.empty() || parts.size() > 2) throw std::invalid_argument("expected num or num/den");
                  c.session.fps_num = static_cast<int>(to_int(parts[0]));
                  c.session.fps_den = parts.size() == 2 ? static_cast<int>(to_int(parts[1])) : 1;
              }},
             {"transport", [](ToolConfig& c, const std::string& v) { c.session.transport = parse_transport(v); }},
             {"rtp_port", [](ToolConfig& c, const std::string& v) { c.session.rtp_port = to_port(v); }},
             {"control", [](ToolConfig& c, const std::string& v) { c.session.control = net::Endpoint::parse(v); }},
             {"multicast_group", [](ToolConfig& c, const std::string& v) { c.session.multicast_group = v; }},
             {"send_to", [](ToolConfig& c, const std::string& v) { c.session.send_to = net::Endpoint::parse(v); }},
             {"pacing", [](ToolConfig& c, const std::string& v) { c.session.pacing = to_double(v); }},
             {"mtu_payload",
              [](ToolConfig& c, const std::string& v) { c.session.mtu_payload = static_cast<size_t>(to_int(v)); }},
             {"ssrc", [](ToolConfig& c, const std::string& v) { c.session.ssrc = static_cast<uint32_t>(to_int(v)); }},
             {"seq0", [](ToolConfig& c, const std::string& v) { c.session.seq0 = to_port(v); }},
             {"rtt_probes",
              [](ToolConfig& c, const std::string& v) { c.session.rtt_probes = static_cast<size_t>(to_int(v)); }},
             {"idle_timeout_ms",
              [](ToolConfig& c, const std::string& v) { c.session.idle_timeout = std::chrono::milliseconds(to_int(v)); }},
         }},
        {"analysis",
         {
             {"measures", [](ToolConfig& c, const std::string& v) { c.measures = split(v, ','); }},
             {"pld_intervals",
              [](ToolConfig& c, const std::string& v) {
                  const int64_t k = to_int(v);
                  if (k < 1) throw std::invalid_argument("must be >= 1");
                  c.analysis.pld_intervals = static_cast<size_t>(k);
              }},
         }},
        {"impair",
         {
             {"loss",
              [](ToolConfig& c, const std::string& v) {
                  c.impair.loss = to_double(v);
                  if (c.impair.loss < 0.0 || c.impair.loss > 1.0) throw std::invalid_argument("must be in [0, 1]");
              }},
             {"listen", [](ToolConfig& c, const std::string& v) { c.impair.listen_port = to_port(v); }},
             {"forward", [](ToolConfig& c, const std::string& v) { c.impair.forward = net::Endpoint::parse(v); }},
         }},
        {"mos",
         {
             {"rows",
              [](ToolConfig& c, const std::string& v) {
                  c.analysis.mos_table = parse_mos_rows(v, c.analysis.mos_table.floor_score);
              }},
             {"floor",
              [](ToolConfig& c, const std::string& v) {
                  c.analysis.mos_table.floor_score = static_cast<int>(to_int(v));
              }},
         }},
    };
    return s;
}

}  // namespace

vq::MosTable parse_mos_rows(const std::string& text, int floor_score) {
    vq::MosTable table;
    table.floor_score = floor_score;
    for (const std::string& item : split(text, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("MOS row '" + item + "' must be '<op> <psnr> : <score>'");
        std::string cond = trim(item.substr(0, colon));
        vq::MosTable::Row row;
        if (cond.starts_with(">=")) {
            row.inclusive = true;
            cond = trim(cond.substr(2));
        } else if (cond.starts_with(">")) {
            cond = trim(cond.substr(1));
        } else {
            throw ConfigError("MOS row '" + item + "' must start with > or >=");
        }
        try {
            row.bound = to_double(cond);
            row.score = static_cast<int>(to_int(trim(item.substr(colon + 1))));
        } catch (const std::exception&) {
            throw ConfigError("MOS row '" + item + "' has a malformed number");
        }
        if (!table.rows.empty() && row.bound > table.rows.back().bound)
            throw ConfigError("MOS rows must be listed from the highest PSNR bound down");
        table.rows.push_back(row);
    }
    return table;
}

ToolConfig parse_config(const std::string& text, const std::string& origin) {
    ToolConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    bool have_g1070 = false;
    vq::G1070Coefficients g1070;
    std::vector<bool> g1070_seen(12, false);

    auto where = [&] { return origin + ":" + std::to_string(lineno) + ": "; };
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError(where() + "malformed section header");
            section = trim(t.substr(1, t.size() - 2));
            if (section == "g1070") have_g1070 = true;
            else if (section == "impair") cfg.impair_enabled = true;
            else if (!schema().contains(section)) throw ConfigError(where() + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError(where() + "expected key = value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (section.empty()) throw ConfigError(where() + "key '" + key + "' outside any section");

        if (section == "g1070") {
            int idx = 0;
            if (key.size() >= 2 && key[0] == 'v') {
                try {
                    idx = static_cast<int>(to_int(key.substr(1)));
                } catch (const std::exception&) {
                    idx = 0;
                }
            }
            if (idx < 1 || idx > 12) throw ConfigError(where() + "unknown key '" + key + "' in [g1070]");
            try {
                g1070.v[static_cast<size_t>(idx - 1)] = to_double(value);
            } catch (const std::exception&) {
                throw ConfigError(where() + "bad value for '" + key + "'");
            }
            g1070_seen[static_cast<size_t>(idx - 1)] = true;
            cfg.provenance["g1070"] = origin + ":" + std::to_string(lineno);
            continue;
        }
        const auto& keys = schema().at(section);
        auto it = keys.find(key);
        if (it == keys.end()) throw ConfigError(where() + "unknown key '" + key + "' in [" + section + "]");
        try {
            it->second(cfg, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where() + e.what());
        } catch (const std::exception& e) {
            throw ConfigError(where() + "bad value for '" + key + "': " + e.what());
        }
        if (section == "mos") cfg.provenance["mos_table"] = origin + ":" + std::to_string(lineno);
        if (key == "pld_intervals") cfg.provenance["pld_intervals"] = origin + ":" + std::to_string(lineno);
    }
    if (have_g1070) {
        for (size_t i = 0; i < g1070_seen.size(); ++i)
            if (!g1070_seen[i]) throw ConfigError(origin + ": [g1070] lacks v" + std::to_string(i + 1));
        cfg.analysis.g1070 = g1070;
    }
    return cfg;
}

ToolConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

}  // namespace vtester
