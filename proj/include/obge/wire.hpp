/*
 *  Copyright 2026 The OBGE Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

#include <cstdint>
#include <string>
#include <type_traits>
#include <variant>

#include "obge/bytes.hpp"

// Binary framing between clients, the controller and the storage server.
//
//   magic "OB" (2) | version (1) | msg_type (1) | payload_len (4, BE) | payload
namespace obge {

using TreeId = std::uint32_t;
using Leaf = std::uint64_t;

inline constexpr std::uint8_t kFrameMagic0 = 'O';
inline constexpr std::uint8_t kFrameMagic1 = 'B';
inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kFrameHeaderBytes = 8;
inline constexpr std::uint32_t kMaxPayloadBytes = 1u << 30;

enum class MsgType : std::uint8_t {
  ReadPath = 0x01,
  PathData = 0x02,
  WritePath = 0x03,
  Ack = 0x04,
  EnclaveRequest = 0x05,
  EnclaveResponse = 0x06,
  UploadTree = 0x07,
  Error = 0x08,
  // Trace-local boundary record; never valid on the wire.
  Marker = 0xF0,
};

inline const char* to_string(MsgType t) {
  switch (t) {
    case MsgType::ReadPath: return "ReadPath";
    case MsgType::PathData: return "PathData";
    case MsgType::WritePath: return "WritePath";
    case MsgType::Ack: return "Ack";
    case MsgType::EnclaveRequest: return "EnclaveRequest";
    case MsgType::EnclaveResponse: return "EnclaveResponse";
    case MsgType::UploadTree: return "UploadTree";
    case MsgType::Error: return "Error";
    case MsgType::Marker: return "Marker";
  }
  return "?";
}

inline bool is_wire_type(std::uint8_t t) { return t >= 0x01 && t <= 0x08; }

enum class ErrorCode : std::uint16_t {
  Malformed = 1,
  UnknownType = 2,
  Range = 3,
  Integrity = 4,
  Capacity = 5,
  Internal = 6,
  Session = 7,
};

struct ReadPath {
  TreeId tree;
  Leaf leaf;
};
struct PathData {
  Bytes buckets;
};
struct WritePath {
  TreeId tree;
  Leaf leaf;
  Bytes buckets;
};
struct Ack {};
struct EnclaveRequest {
  Bytes ct;
};
struct EnclaveResponse {
  Bytes ct;
};
// `image` is a complete tree file: header followed by buckets in heap order.
struct UploadTree {
  TreeId tree;
  Bytes image;
};
struct ErrorReply {
  ErrorCode code;
  std::string detail;
};

using Message = std::variant<ReadPath, PathData, WritePath, Ack, EnclaveRequest, EnclaveResponse,
                             UploadTree, ErrorReply>;

inline MsgType type_of(const Message& m) {
  static constexpr MsgType kTypes[] = {MsgType::ReadPath,       MsgType::PathData,
                                       MsgType::WritePath,      MsgType::Ack,
                                       MsgType::EnclaveRequest, MsgType::EnclaveResponse,
                                       MsgType::UploadTree,     MsgType::Error};
  return kTypes[m.index()];
}

struct Frame {
  std::uint8_t version = kWireVersion;
  std::uint8_t type = 0;
  Bytes payload;

  bool operator==(const Frame&) const = default;
};

struct FrameHeader {
  std::uint8_t version;
  std::uint8_t type;
  std::uint32_t payload_len;
};

// Validates magic, version and length bound; the type is checked later so
// that an unknown type can still be skipped and answered.
inline FrameHeader parse_frame_header(ByteSpan header) {
  if (header.size() < kFrameHeaderBytes) throw ProtocolError("short frame header");
  if (header[0] != kFrameMagic0 || header[1] != kFrameMagic1) throw ProtocolError("bad frame magic");
  FrameHeader h{header[2], header[3], static_cast<std::uint32_t>(load_be(header.subspan(4, 4), 4))};
  if (h.version != kWireVersion) {
    throw ProtocolError("unsupported wire version " + std::to_string(h.version));
  }
  if (h.payload_len > kMaxPayloadBytes) throw ProtocolError("frame payload too large");
  return h;
}

inline Bytes encode_frame(const Frame& f) {
  if (f.payload.size() > kMaxPayloadBytes) throw ProtocolError("frame payload too large");
  ByteWriter w(kFrameHeaderBytes + f.payload.size());
  w.u8(kFrameMagic0).u8(kFrameMagic1).u8(f.version).u8(f.type);
  w.u32(static_cast<std::uint32_t>(f.payload.size())).raw(f.payload);
  return std::move(w).take();
}

inline Frame decode_frame(ByteSpan data) {
  auto h = parse_frame_header(data);
  if (data.size() - kFrameHeaderBytes != h.payload_len) {
    throw ProtocolError("payload_len does not match frame size");
  }
  auto body = data.subspan(kFrameHeaderBytes);
  return Frame{h.version, h.type, Bytes(body.begin(), body.end())};
}

inline Frame to_frame(const Message& m) {
  ByteWriter w;
  std::visit(
      [&](const auto& msg) {
        using T = std::decay_t<decltype(msg)>;
        if constexpr (std::is_same_v<T, ReadPath>) {
          w.u32(msg.tree).u64(msg.leaf);
        } else if constexpr (std::is_same_v<T, PathData>) {
          w.raw(msg.buckets);
        } else if constexpr (std::is_same_v<T, WritePath>) {
          w.u32(msg.tree).u64(msg.leaf).raw(msg.buckets);
        } else if constexpr (std::is_same_v<T, Ack>) {
        } else if constexpr (std::is_same_v<T, EnclaveRequest> ||
                             std::is_same_v<T, EnclaveResponse>) {
          w.raw(msg.ct);
        } else if constexpr (std::is_same_v<T, UploadTree>) {
          w.u32(msg.tree).raw(msg.image);
        } else if constexpr (std::is_same_v<T, ErrorReply>) {
          w.u16(static_cast<std::uint16_t>(msg.code)).raw(msg.detail);
        }
      },
      m);
  return Frame{kWireVersion, static_cast<std::uint8_t>(type_of(m)), std::move(w).take()};
}

class UnknownMessageType : public ProtocolError {
 public:
  explicit UnknownMessageType(std::uint8_t t)
      : ProtocolError("unknown msg_type " + std::to_string(t)) {}
};

inline Message from_frame(const Frame& f) {
  if (!is_wire_type(f.type)) throw UnknownMessageType(f.type);
  ByteReader r(f.payload);
  auto rest_bytes = [&] {
    auto s = r.rest();
    return Bytes(s.begin(), s.end());
  };
  Message m;
  switch (static_cast<MsgType>(f.type)) {
    case MsgType::ReadPath: {
      auto tree = r.u32();
      m = ReadPath{tree, r.u64()};
      break;
    }
    case MsgType::PathData: m = PathData{rest_bytes()}; break;
    case MsgType::WritePath: {
      auto tree = r.u32();
      auto leaf = r.u64();
      m = WritePath{tree, leaf, rest_bytes()};
      break;
    }
    case MsgType::Ack: m = Ack{}; break;
    case MsgType::EnclaveRequest: m = EnclaveRequest{rest_bytes()}; break;
    case MsgType::EnclaveResponse: m = EnclaveResponse{rest_bytes()}; break;
    case MsgType::UploadTree: {
      auto tree = r.u32();
      m = UploadTree{tree, rest_bytes()};
      break;
    }
    case MsgType::Error: {
      auto code = static_cast<ErrorCode>(r.u16());
      auto s = r.rest();
      m = ErrorReply{code, std::string(s.begin(), s.end())};
      break;
    }
    default: throw UnknownMessageType(f.type);
  }
  r.expect_end();
  return m;
}

inline Bytes encode_message(const Message& m) { return encode_frame(to_frame(m)); }
inline Message decode_message(ByteSpan data) { return from_frame(decode_frame(data)); }

}  // namespace obge
