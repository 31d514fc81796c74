// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#include "socketrain/wire.hpp"

#include <stdexcept>

#include "socketrain/bytes.hpp"

namespace socketrain {

namespace {

constexpr std::size_t kMaxFrameLength = 256u << 20;  // 256 MiB sanity cap

void expect_type(const WireFrame& frame, MsgType type, const char* name) {
  if (frame.type != type) {
    throw std::runtime_error(std::string("wire: expected ") + name + " frame");
  }
}

}  // namespace

std::vector<std::uint8_t> encode_frame(const WireFrame& frame) {
  std::vector<std::uint8_t> out;
  out.reserve(5 + frame.payload.size());
  put_u32le(out, static_cast<std::uint32_t>(1 + frame.payload.size()));
  out.push_back(static_cast<std::uint8_t>(frame.type));
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

WireFrame decode_frame(const std::vector<std::uint8_t>& buffer) {
  ByteReader reader(buffer);
  const std::uint32_t length = reader.u32le();
  if (length < 1 || length > kMaxFrameLength) {
    throw std::runtime_error("wire: bad frame length " + std::to_string(length));
  }
  if (reader.remaining() != length) {
    throw std::runtime_error("wire: frame length does not match buffer");
  }
  const std::uint8_t type = reader.u8();
  if (type < 0x01 || type > 0x05) {
    throw std::runtime_error("wire: unknown msg_type " + std::to_string(type));
  }
  WireFrame frame;
  frame.type = static_cast<MsgType>(type);
  frame.payload.assign(buffer.begin() + 5, buffer.end());
  return frame;
}

WireFrame make_hello(const HelloPayload& p) {
  WireFrame frame;
  frame.type = MsgType::kHello;
  put_u32le(frame.payload, p.worker_id);
  put_u16le(frame.payload, p.ring_port);
  return frame;
}

WireFrame make_ring(const RingPayload& p) {
  WireFrame frame;
  frame.type = MsgType::kRing;
  put_u32le(frame.payload, p.num_workers);
  for (const std::string& addr : p.peer_addrs) {
    put_u16le(frame.payload, static_cast<std::uint16_t>(addr.size()));
    frame.payload.insert(frame.payload.end(), addr.begin(), addr.end());
  }
  return frame;
}

WireFrame make_chunk(const ChunkPayload& p) {
  WireFrame frame;
  frame.type = MsgType::kChunk;
  frame.payload.reserve(10 + p.values.size() * 4);
  put_u16le(frame.payload, p.round);
  put_u32le(frame.payload, p.segment_index);
  put_u32le(frame.payload, static_cast<std::uint32_t>(p.values.size()));
  for (float v : p.values) put_f32le(frame.payload, v);
  return frame;
}

WireFrame make_barrier(const BarrierPayload& p) {
  WireFrame frame;
  frame.type = MsgType::kBarrier;
  put_u32le(frame.payload, p.epoch);
  frame.payload.push_back(p.stop ? 1 : 0);
  return frame;
}

WireFrame make_bye(const std::string& error) {
  WireFrame frame;
  frame.type = MsgType::kBye;
  frame.payload.assign(error.begin(), error.end());
  return frame;
}

HelloPayload parse_hello(const WireFrame& frame) {
  expect_type(frame, MsgType::kHello, "HELLO");
  ByteReader reader(frame.payload);
  HelloPayload p;
  p.worker_id = reader.u32le();
  p.ring_port = reader.u16le();
  if (reader.remaining() != 0) throw std::runtime_error("wire: trailing bytes in HELLO");
  return p;
}

RingPayload parse_ring(const WireFrame& frame) {
  expect_type(frame, MsgType::kRing, "RING");
  ByteReader reader(frame.payload);
  RingPayload p;
  p.num_workers = reader.u32le();
  p.peer_addrs.reserve(p.num_workers);
  for (std::uint32_t i = 0; i < p.num_workers; ++i) {
    const std::uint16_t len = reader.u16le();
    p.peer_addrs.push_back(reader.bytes(len));
  }
  if (reader.remaining() != 0) throw std::runtime_error("wire: trailing bytes in RING");
  return p;
}

ChunkPayload parse_chunk(const WireFrame& frame) {
  expect_type(frame, MsgType::kChunk, "CHUNK");
  ByteReader reader(frame.payload);
  ChunkPayload p;
  p.round = reader.u16le();
  p.segment_index = reader.u32le();
  const std::uint32_t count = reader.u32le();
  if (reader.remaining() != static_cast<std::size_t>(count) * 4) {
    throw std::runtime_error("wire: CHUNK count does not match payload size");
  }
  p.values.resize(count);
  for (float& v : p.values) v = reader.f32le();
  return p;
}

BarrierPayload parse_barrier(const WireFrame& frame) {
  expect_type(frame, MsgType::kBarrier, "BARRIER");
  ByteReader reader(frame.payload);
  BarrierPayload p;
  p.epoch = reader.u32le();
  p.stop = reader.u8() != 0;
  if (reader.remaining() != 0) throw std::runtime_error("wire: trailing bytes in BARRIER");
  return p;
}

std::string parse_bye(const WireFrame& frame) {
  expect_type(frame, MsgType::kBye, "BYE");
  return std::string(frame.payload.begin(), frame.payload.end());
}

}  // namespace socketrain
