#include <array>

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "loadshift/cli.hpp"
#include "loadshift/error.hpp"
#include "loadshift/report_io.hpp"

namespace loadshift::cli {

using nlohmann::json;
using nlohmann::ordered_json;

const char* tool_version() { return LOADSHIFT_VERSION; }

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string file_sha256(const std::filesystem::path& path) {
  return sha256_hex(read_text_file(path));
}

std::string manifest_json(const RunManifest& m) {
  const SimConfig& c = m.config;
  ordered_json config;
  config["mode"] = c.mode.label();
  config["cpu_hz"] = c.cpu_hz;
  config["queue_capacity"] = c.queue_capacity;
  config["poll_interval"] = c.poll_interval;
  config["export_window"] = c.export_window;
  config["export_swap"] = c.export_swap;
  config["export_cost_per_flow"] = c.effective_export_cost();
  config["mon_window"] = c.selector.mon_window;
  config["dec_factor"] = c.selector.dec_factor;
  config["floor_decrease"] = c.selector.floor_decrease;
  config["flow_table_capacity"] = c.flow_table_capacity;
  config["flow_idle_timeout"] = c.flow_idle_timeout;
  config["first_n_packets"] = c.first_n_packets ? json(*c.first_n_packets) : json(nullptr);
  config["seed"] = c.seed;

  ordered_json j;
  j["format"] = "loadshift-manifest";
  j["version"] = kReportFormatVersion;
  j["tool_version"] = m.tool_version;
  j["trace"] = {{"path", m.trace_path.string()}, {"sha256", m.trace_sha256}};
  j["front"] = {{"path", m.front_path.string()}, {"sha256", m.front_sha256}};
  j["scale"] = m.scale;
  j["write_features"] = m.write_features;
  j["config"] = std::move(config);
  ordered_json outputs = ordered_json::object();
  for (const auto& [name, digest] : m.outputs) outputs[name] = digest;
  j["outputs"] = std::move(outputs);
  return j.dump(2) + "\n";
}

RunManifest parse_manifest(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.value("format", "") != "loadshift-manifest") throw InputError("not a run manifest");
    RunManifest m;
    m.tool_version = j.at("tool_version");
    m.trace_path = j.at("trace").at("path").get<std::string>();
    m.trace_sha256 = j.at("trace").at("sha256");
    m.front_path = j.at("front").at("path").get<std::string>();
    m.front_sha256 = j.at("front").at("sha256");
    m.scale = j.at("scale");
    m.write_features = j.value("write_features", false);
    const auto& c = j.at("config");
    m.config.mode = RunMode::parse(c.at("mode").get<std::string>());
    m.config.cpu_hz = c.at("cpu_hz");
    m.config.queue_capacity = c.at("queue_capacity");
    m.config.poll_interval = c.at("poll_interval");
    m.config.export_window = c.at("export_window");
    m.config.export_swap = c.at("export_swap");
    m.config.export_cost_per_flow = c.at("export_cost_per_flow").get<Cycles>();
    m.config.selector.mon_window = c.at("mon_window");
    m.config.selector.dec_factor = c.at("dec_factor");
    m.config.selector.floor_decrease = c.at("floor_decrease");
    m.config.flow_table_capacity = c.at("flow_table_capacity");
    m.config.flow_idle_timeout = c.at("flow_idle_timeout");
    if (!c.at("first_n_packets").is_null()) {
      m.config.first_n_packets = c.at("first_n_packets").get<std::uint32_t>();
    }
    m.config.seed = c.at("seed");
    for (const auto& [name, digest] : j.at("outputs").items()) {
      m.outputs[name] = digest.get<std::string>();
    }
    return m;
  } catch (const json::exception& e) {
    throw InputError(fmt::format("malformed manifest: {}", e.what()));
  }
}

}  // namespace loadshift::cli
