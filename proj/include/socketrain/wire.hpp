// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace socketrain {

// Framed wire protocol, all integers little-endian:
//
//   frame   := length:u32 | msg_type:u8 | payload
//              (length = 1 + payload size)
//   HELLO   := worker_id:u32 | ring_port:u16     (ring_port = the sender's
//              ring listen port; the coordinator pairs it with the peer IP
//              it observes on the HELLO connection)
//   RING    := num_workers:u32 | num_workers x (len:u16 | "host:port")
//   CHUNK   := round:u16 | segment_index:u32 | count:u32 | count x f32
//   BARRIER := epoch:u32 | decision:u8           (0 continue, 1 stop)
//   BYE     := optional UTF-8 error message      (empty payload = clean)

enum class MsgType : std::uint8_t {
  kHello = 0x01,
  kRing = 0x02,
  kChunk = 0x03,
  kBarrier = 0x04,
  kBye = 0x05,
};

struct WireFrame {
  MsgType type = MsgType::kBye;
  std::vector<std::uint8_t> payload;
};

/// Serialize including the length prefix.
std::vector<std::uint8_t> encode_frame(const WireFrame& frame);

/// Parse one frame from a complete buffer (length prefix included). Throws
/// on truncation, length/payload disagreement, or an unknown msg_type.
WireFrame decode_frame(const std::vector<std::uint8_t>& buffer);

struct HelloPayload {
  std::uint32_t worker_id = 0;
  std::uint16_t ring_port = 0;
};

struct RingPayload {
  std::uint32_t num_workers = 0;
  std::vector<std::string> peer_addrs;  // index = rank
};

struct ChunkPayload {
  std::uint16_t round = 0;
  std::uint32_t segment_index = 0;
  std::vector<float> values;
};

struct BarrierPayload {
  std::uint32_t epoch = 0;
  bool stop = false;
};

WireFrame make_hello(const HelloPayload& p);
WireFrame make_ring(const RingPayload& p);
WireFrame make_chunk(const ChunkPayload& p);
WireFrame make_barrier(const BarrierPayload& p);
WireFrame make_bye(const std::string& error = "");

HelloPayload parse_hello(const WireFrame& frame);
RingPayload parse_ring(const WireFrame& frame);
ChunkPayload parse_chunk(const WireFrame& frame);
BarrierPayload parse_barrier(const WireFrame& frame);
std::string parse_bye(const WireFrame& frame);

}  // namespace socketrain
