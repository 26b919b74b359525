#pragma once

// Modbus-RTU frame codec and an in-process glove device emulator.
//
// Wire format: address(1) function(1) payload CRC16-lo CRC16-hi, at most
// 256 bytes total. CRC-16/MODBUS: reflected poly 0xA001, init 0xFFFF.
//
// Register map (16-bit registers, big-endian values in payloads):
//   0x0000-0x000F  encoder counts, raw (read-only over the bus)
//   0x0100-0x0104  servo targets, signed centi-radians
//   0x0200-0x0204  LRA waveform IDs (0 = off, 1, 2)
//   0x0300-0x0304  force/current channels, mA
// Supported functions: 0x03 read holding, 0x04 read input (alias of the same
// space), 0x06 write single, 0x10 write multiple. Everything else answers
// with a Modbus exception frame.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "exoglove/model.hpp"

namespace exoglove::bus {

inline constexpr std::size_t kMaxFrameBytes = 256;
inline constexpr int kDefaultBitrate = 500000;  // 0.5 Mbit/s

struct BusSettings {
  std::uint8_t address = 1;
  int bitrate = kDefaultBitrate;

  void validate() const {
    if (address == 0) throw ConfigValidationError("bus.address must be non-zero");
    if (bitrate <= 0) throw ConfigValidationError("bus.bitrate must be strictly positive");
  }
};

namespace detail {

inline const std::array<std::uint16_t, 256>& crc16_table() {
  static const std::array<std::uint16_t, 256> table = [] {
    std::array<std::uint16_t, 256> t{};
    for (int i = 0; i < 256; ++i) {
      std::uint16_t crc = static_cast<std::uint16_t>(i);
      for (int bit = 0; bit < 8; ++bit)
        crc = (crc & 1u) ? static_cast<std::uint16_t>((crc >> 1) ^ 0xA001u)
                         : static_cast<std::uint16_t>(crc >> 1);
      t[i] = crc;
    }
    return t;
  }();
  return table;
}

}  // namespace detail

inline std::uint16_t crc16(std::span<const std::uint8_t> data) {
  if (data.empty()) throw std::invalid_argument("crc16 input must be non-empty");
  const auto& table = detail::crc16_table();
  std::uint16_t crc = 0xFFFFu;
  for (std::uint8_t byte : data)
    crc = static_cast<std::uint16_t>((crc >> 8) ^ table[(crc ^ byte) & 0xFFu]);
  return crc;
}

struct BusFrame {
  std::uint8_t address = 0;
  std::uint8_t function = 0;
  std::vector<std::uint8_t> payload;
  std::uint16_t crc = 0;  // filled by encode/decode

  bool operator==(const BusFrame& other) const {
    return address == other.address && function == other.function && payload == other.payload;
  }
};

inline std::vector<std::uint8_t> encode_frame(const BusFrame& frame) {
  if (frame.payload.size() + 4 > kMaxFrameBytes)
    throw std::length_error("frame exceeds 256 bytes");
  std::vector<std::uint8_t> wire;
  wire.reserve(frame.payload.size() + 4);
  wire.push_back(frame.address);
  wire.push_back(frame.function);
  wire.insert(wire.end(), frame.payload.begin(), frame.payload.end());
  const std::uint16_t crc = crc16(wire);
  wire.push_back(static_cast<std::uint8_t>(crc & 0xFFu));  // low byte first on the wire
  wire.push_back(static_cast<std::uint8_t>(crc >> 8));
  return wire;
}

enum class DecodeStatus { Ok, ShortFrame, BadCrc, FrameTooLong };

inline const char* decode_status_name(DecodeStatus s) {
  switch (s) {
    case DecodeStatus::Ok: return "ok";
    case DecodeStatus::ShortFrame: return "short frame";
    case DecodeStatus::BadCrc: return "bad CRC";
    case DecodeStatus::FrameTooLong: return "frame too long";
  }
  return "?";
}

struct DecodeResult {
  DecodeStatus status = DecodeStatus::ShortFrame;
  BusFrame frame;
};

inline DecodeResult decode_frame(std::span<const std::uint8_t> wire) {
  DecodeResult r;
  if (wire.size() < 4) {
    r.status = DecodeStatus::ShortFrame;
    return r;
  }
  if (wire.size() > kMaxFrameBytes) {
    r.status = DecodeStatus::FrameTooLong;
    return r;
  }
  const std::uint16_t received = static_cast<std::uint16_t>(
      wire[wire.size() - 2] | (static_cast<std::uint16_t>(wire[wire.size() - 1]) << 8));
  const std::uint16_t computed = crc16(wire.subspan(0, wire.size() - 2));
  if (received != computed) {
    r.status = DecodeStatus::BadCrc;
    return r;
  }
  r.status = DecodeStatus::Ok;
  r.frame.address = wire[0];
  r.frame.function = wire[1];
  r.frame.payload.assign(wire.begin() + 2, wire.end() - 2);
  r.frame.crc = received;
  return r;
}

// Function codes handled by the emulator.
inline constexpr std::uint8_t kReadHolding = 0x03;
inline constexpr std::uint8_t kReadInput = 0x04;
inline constexpr std::uint8_t kWriteSingle = 0x06;
inline constexpr std::uint8_t kWriteMultiple = 0x10;

inline constexpr std::uint8_t kExceptionIllegalFunction = 0x01;
inline constexpr std::uint8_t kExceptionIllegalAddress = 0x02;
inline constexpr std::uint8_t kExceptionIllegalValue = 0x03;

inline constexpr std::uint16_t kRegEncoderBase = 0x0000;  // 16 registers
inline constexpr std::uint16_t kRegServoBase = 0x0100;    // 5 registers
inline constexpr std::uint16_t kRegWaveformBase = 0x0200; // 5 registers
inline constexpr std::uint16_t kRegForceBase = 0x0300;    // 5 registers

// Holding-register file of the glove device. Reads and bus writes are range
// checked; encoder counts are device-side measurements and reject bus writes.
class RegisterMap {
 public:
  bool try_read(std::uint16_t addr, std::uint16_t& value) const {
    if (const std::uint16_t* reg = locate(addr)) {
      value = *reg;
      return true;
    }
    return false;
  }

  bool writable_over_bus(std::uint16_t addr) const {
    return locate(addr) != nullptr && !(addr >= kRegEncoderBase && addr < kRegEncoderBase + 16);
  }

  bool try_write(std::uint16_t addr, std::uint16_t value) {
    if (!writable_over_bus(addr)) return false;
    *const_cast<std::uint16_t*>(locate(addr)) = value;
    return true;
  }

  // Device-side access, not subject to the bus write mask.
  void set_encoder_count(int channel, std::uint16_t count) { encoders_[channel] = count; }
  std::uint16_t encoder_count(int channel) const { return encoders_[channel]; }
  std::uint16_t servo_target(int finger) const { return servo_[finger]; }
  std::uint16_t waveform(int finger) const { return waveform_[finger]; }
  std::uint16_t force_ma(int finger) const { return force_[finger]; }
  void set_force_ma(int finger, std::uint16_t ma) { force_[finger] = ma; }

 private:
  const std::uint16_t* locate(std::uint16_t addr) const {
    if (addr >= kRegEncoderBase && addr < kRegEncoderBase + 16)
      return &encoders_[addr - kRegEncoderBase];
    if (addr >= kRegServoBase && addr < kRegServoBase + 5) return &servo_[addr - kRegServoBase];
    if (addr >= kRegWaveformBase && addr < kRegWaveformBase + 5)
      return &waveform_[addr - kRegWaveformBase];
    if (addr >= kRegForceBase && addr < kRegForceBase + 5) return &force_[addr - kRegForceBase];
    return nullptr;
  }

  std::array<std::uint16_t, 16> encoders_{};
  std::array<std::uint16_t, 5> servo_{};
  std::array<std::uint16_t, 5> waveform_{};
  std::array<std::uint16_t, 5> force_{};
};

// In-process glove device: answers CRC-valid requests addressed to it,
// stays silent otherwise (as a serial slave would).
class DeviceEmulator {
 public:
  explicit DeviceEmulator(std::uint8_t address = 1) : address_(address) {}

  RegisterMap& registers() { return regs_; }
  const RegisterMap& registers() const { return regs_; }
  std::uint8_t address() const { return address_; }

  std::optional<BusFrame> step(const BusFrame& request) {
    if (request.address != address_) return std::nullopt;
    switch (request.function) {
      case kReadHolding:
      case kReadInput:
        return handle_read(request);
      case kWriteSingle:
        return handle_write_single(request);
      case kWriteMultiple:
        return handle_write_multiple(request);
      default:
        return exception(request, kExceptionIllegalFunction);
    }
  }

 private:
  static std::uint16_t be16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
  }
  static void push_be16(std::vector<std::uint8_t>& v, std::uint16_t value) {
    v.push_back(static_cast<std::uint8_t>(value >> 8));
    v.push_back(static_cast<std::uint8_t>(value & 0xFFu));
  }

  BusFrame exception(const BusFrame& request, std::uint8_t code) const {
    BusFrame resp;
    resp.address = address_;
    resp.function = request.function | 0x80u;
    resp.payload = {code};
    return resp;
  }

  std::optional<BusFrame> handle_read(const BusFrame& req) {
    if (req.payload.size() != 4) return exception(req, kExceptionIllegalValue);
    const std::uint16_t start = be16(req.payload.data());
    const std::uint16_t count = be16(req.payload.data() + 2);
    if (count == 0 || count > 125) return exception(req, kExceptionIllegalValue);
    BusFrame resp;
    resp.address = address_;
    resp.function = req.function;
    resp.payload.push_back(static_cast<std::uint8_t>(count * 2));
    for (std::uint16_t i = 0; i < count; ++i) {
      std::uint16_t value = 0;
      if (!regs_.try_read(static_cast<std::uint16_t>(start + i), value))
        return exception(req, kExceptionIllegalAddress);
      push_be16(resp.payload, value);
    }
    return resp;
  }

  std::optional<BusFrame> handle_write_single(const BusFrame& req) {
    if (req.payload.size() != 4) return exception(req, kExceptionIllegalValue);
    const std::uint16_t addr = be16(req.payload.data());
    const std::uint16_t value = be16(req.payload.data() + 2);
    if (!regs_.try_write(addr, value)) return exception(req, kExceptionIllegalAddress);
    BusFrame resp = req;  // write-single echoes the request
    resp.address = address_;
    return resp;
  }

  std::optional<BusFrame> handle_write_multiple(const BusFrame& req) {
    if (req.payload.size() < 5) return exception(req, kExceptionIllegalValue);
    const std::uint16_t start = be16(req.payload.data());
    const std::uint16_t count = be16(req.payload.data() + 2);
    const std::uint8_t byte_count = req.payload[4];
    if (count == 0 || count > 123 || byte_count != count * 2 ||
        req.payload.size() != 5u + byte_count)
      return exception(req, kExceptionIllegalValue);
    for (std::uint16_t i = 0; i < count; ++i)
      if (!regs_.writable_over_bus(static_cast<std::uint16_t>(start + i)))
        return exception(req, kExceptionIllegalAddress);
    for (std::uint16_t i = 0; i < count; ++i)
      regs_.try_write(static_cast<std::uint16_t>(start + i), be16(req.payload.data() + 5 + 2 * i));
    BusFrame resp;
    resp.address = address_;
    resp.function = kWriteMultiple;
    push_be16(resp.payload, start);
    push_be16(resp.payload, count);
    return resp;
  }

  std::uint8_t address_;
  RegisterMap regs_;
};

// Serial timing at 8N1 (10 bits per character) plus the 3.5-character
// inter-frame gap mandated by RTU framing.
struct WireDelay {
  double transmission_us = 0.0;
  double gap_us = 0.0;
  double total_us() const { return transmission_us + gap_us; }
};

inline WireDelay wire_delay(std::size_t frame_bytes, int bitrate = kDefaultBitrate) {
  if (frame_bytes == 0) throw std::invalid_argument("frame length must be positive");
  if (bitrate <= 0) throw std::invalid_argument("bitrate must be positive");
  WireDelay d;
  d.transmission_us = static_cast<double>(frame_bytes) * 10.0 * 1e6 / bitrate;
  d.gap_us = 3.5 * 10.0 * 1e6 / bitrate;
  return d;
}

// Servo targets travel the bus as signed centi-radians.
inline std::uint16_t servo_angle_to_register(double radians) {
  const auto centi = static_cast<std::int32_t>(std::llround(radians * 100.0));
  return static_cast<std::uint16_t>(static_cast<std::int16_t>(centi));
}

inline double servo_register_to_angle(std::uint16_t reg) {
  return static_cast<double>(static_cast<std::int16_t>(reg)) / 100.0;
}

inline std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xFu]);
  }
  return s;
}

inline std::vector<std::uint8_t> from_hex(const std::string& hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  std::vector<std::uint8_t> out;
  std::string compact;
  for (char c : hex)
    if (c != ' ' && c != '\t') compact.push_back(c);
  if (compact.size() % 2 != 0) throw std::invalid_argument("hex string must have even length");
  out.reserve(compact.size() / 2);
  for (std::size_t i = 0; i < compact.size(); i += 2) {
    const int hi = nibble(compact[i]);
    const int lo = nibble(compact[i + 1]);
    if (hi < 0 || lo < 0) throw std::invalid_argument("invalid hex digit");
    out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
  }
  return out;
}

}  // namespace exoglove::bus
