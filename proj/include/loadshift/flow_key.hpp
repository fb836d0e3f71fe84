#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "loadshift/packet.hpp"

namespace loadshift {

// Direction-independent 5-tuple: the (ip, port) pair that compares lower is
// always endpoint a.
struct FlowKey {
  std::uint32_t ip_a = 0;
  std::uint32_t ip_b = 0;
  std::uint16_t port_a = 0;
  std::uint16_t port_b = 0;
  std::uint8_t proto = 0;

  auto operator<=>(const FlowKey&) const = default;
  bool operator==(const FlowKey&) const = default;

  std::string to_string() const;
};

// nullopt for protocols the pipeline does not track (anything but TCP/UDP);
// such packets bypass the workers.
std::optional<FlowKey> canonical_flow_key(const PacketRecord& packet);

// True when the packet travels from endpoint a to endpoint b of its key.
bool from_endpoint_a(const PacketRecord& packet, const FlowKey& key);

PacketRecord reversed(const PacketRecord& packet);

std::string format_ipv4(std::uint32_t ip);
std::optional<std::uint32_t> parse_ipv4(std::string_view text);

// Toeplitz hash as computed by RSS NICs, over (ip_a, ip_b, port_a, port_b).
std::uint32_t toeplitz_hash(const FlowKey& key);

// 40-byte symmetric key (0x6d5a repeated) so swapped endpoints hash alike.
extern const std::array<std::uint8_t, 40> kSymmetricRssKey;

struct FlowKeyHash {
  std::size_t operator()(const FlowKey& key) const noexcept;
};

}  // namespace loadshift
