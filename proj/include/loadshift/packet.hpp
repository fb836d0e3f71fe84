#pragma once

#include <cstdint>

namespace loadshift {

using Nanos = std::int64_t;

inline constexpr std::uint8_t kProtoTcp = 6;
inline constexpr std::uint8_t kProtoUdp = 17;

inline constexpr std::uint8_t kTcpFin = 0x01;
inline constexpr std::uint8_t kTcpSyn = 0x02;
inline constexpr std::uint8_t kTcpRst = 0x04;
inline constexpr std::uint8_t kTcpPsh = 0x08;
inline constexpr std::uint8_t kTcpAck = 0x10;

// Header-only view of one captured packet. Addresses are IPv4 in host order.
struct PacketRecord {
  Nanos ts_ns = 0;  // from trace start
  std::uint32_t src_ip = 0;
  std::uint32_t dst_ip = 0;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t proto = 0;
  std::uint16_t size = 0;  // bytes on the wire
  std::uint8_t tcp_flags = 0;

  bool operator==(const PacketRecord&) const = default;
};

}  // namespace loadshift
