#include "loadshift/flow_key.hpp"

#include <charconv>
#include <tuple>

#include <fmt/format.h>

namespace loadshift {

const std::array<std::uint8_t, 40> kSymmetricRssKey = [] {
  std::array<std::uint8_t, 40> key{};
  for (std::size_t i = 0; i < key.size(); i += 2) {
    key[i] = 0x6d;
    key[i + 1] = 0x5a;
  }
  return key;
}();

std::string FlowKey::to_string() const {
  return fmt::format("{}:{}-{}:{}/{}", format_ipv4(ip_a), port_a, format_ipv4(ip_b), port_b,
                     proto);
}

std::optional<FlowKey> canonical_flow_key(const PacketRecord& packet) {
  if (packet.proto != kProtoTcp && packet.proto != kProtoUdp) return std::nullopt;
  FlowKey key;
  key.proto = packet.proto;
  if (std::tie(packet.src_ip, packet.src_port) <= std::tie(packet.dst_ip, packet.dst_port)) {
    key.ip_a = packet.src_ip;
    key.port_a = packet.src_port;
    key.ip_b = packet.dst_ip;
    key.port_b = packet.dst_port;
  } else {
    key.ip_a = packet.dst_ip;
    key.port_a = packet.dst_port;
    key.ip_b = packet.src_ip;
    key.port_b = packet.src_port;
  }
  return key;
}

bool from_endpoint_a(const PacketRecord& packet, const FlowKey& key) {
  return packet.src_ip == key.ip_a && packet.src_port == key.port_a;
}

PacketRecord reversed(const PacketRecord& packet) {
  PacketRecord out = packet;
  std::swap(out.src_ip, out.dst_ip);
  std::swap(out.src_port, out.dst_port);
  return out;
}

std::string format_ipv4(std::uint32_t ip) {
  return fmt::format("{}.{}.{}.{}", ip >> 24, (ip >> 16) & 0xff, (ip >> 8) & 0xff, ip & 0xff);
}

std::optional<std::uint32_t> parse_ipv4(std::string_view text) {
  std::uint32_t ip = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int octet = 0; octet < 4; ++octet) {
    unsigned value = 0;
    auto [next, ec] = std::from_chars(p, end, value);
    if (ec != std::errc{} || next == p || value > 255) return std::nullopt;
    ip = (ip << 8) | value;
    p = next;
    if (octet < 3) {
      if (p == end || *p != '.') return std::nullopt;
      ++p;
    }
  }
  if (p != end) return std::nullopt;
  return ip;
}

std::uint32_t toeplitz_hash(const FlowKey& key) {
  std::array<std::uint8_t, 12> input{};
  auto put32 = [&](std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) input[at + i] = static_cast<std::uint8_t>(v >> (24 - 8 * i));
  };
  put32(0, key.ip_a);
  put32(4, key.ip_b);
  input[8] = static_cast<std::uint8_t>(key.port_a >> 8);
  input[9] = static_cast<std::uint8_t>(key.port_a);
  input[10] = static_cast<std::uint8_t>(key.port_b >> 8);
  input[11] = static_cast<std::uint8_t>(key.port_b);

  std::uint32_t result = 0;
  // Sliding 32-bit window over the key, advanced one bit per input bit.
  std::uint32_t window = (std::uint32_t{kSymmetricRssKey[0]} << 24) |
                         (std::uint32_t{kSymmetricRssKey[1]} << 16) |
                         (std::uint32_t{kSymmetricRssKey[2]} << 8) | kSymmetricRssKey[3];
  for (std::size_t byte = 0; byte < input.size(); ++byte) {
    const std::uint8_t next_key = kSymmetricRssKey[byte + 4];
    for (int bit = 7; bit >= 0; --bit) {
      if ((input[byte] >> bit) & 1u) result ^= window;
      window = (window << 1) | ((next_key >> bit) & 1u);
    }
  }
  return result;
}

std::size_t FlowKeyHash::operator()(const FlowKey& key) const noexcept {
  // splitmix64 finalizer over the packed tuple.
  std::uint64_t x = (std::uint64_t{key.ip_a} << 32) | key.ip_b;
  x ^= (std::uint64_t{key.port_a} << 24) ^ (std::uint64_t{key.port_b} << 8) ^ key.proto;
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return static_cast<std::size_t>(x ^ (x >> 31));
}

}  // namespace loadshift
