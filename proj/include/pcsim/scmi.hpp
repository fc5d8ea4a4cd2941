#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pcsim/common.hpp"

namespace pcsim::scmi {

// Single-channel shared-memory record, little-endian:
//
//   offset  size  field
//   0x00    4     channel status (bit 0: free, bit 1: error)
//   0x04    4     flags (bit 0: completion interrupt requested)
//   0x08    4     length (header + used payload bytes)
//   0x0C    1     protocol_id
//   0x0D    1     message_id
//   0x0E    2     token
//   0x10    8     payload
//   0x18    4     agent_id (reserved field)
//   0x1C    12    reserved, zero
constexpr std::size_t kChannelBytes = 40;
constexpr std::size_t kChannelCount = 64;
constexpr std::size_t kRegionBytes = kChannelBytes * kChannelCount;

constexpr std::size_t kStatusOffset = 0x00;
constexpr std::size_t kFlagsOffset = 0x04;
constexpr std::size_t kLengthOffset = 0x08;
constexpr std::size_t kHeaderOffset = 0x0C;
constexpr std::size_t kPayloadOffset = 0x10;
constexpr std::size_t kAgentOffset = 0x18;
constexpr std::size_t kHeaderBytes = 4;
constexpr std::size_t kPayloadBytes = 8;

constexpr std::uint32_t kStatusFree = 1U << 0;
constexpr std::uint32_t kStatusError = 1U << 1;
constexpr std::uint32_t kFlagIrq = 1U << 0;

constexpr std::uint8_t kProtocolBase = 0x10;
constexpr std::uint8_t kMessageBaseVersion = 0x00;
constexpr std::uint8_t kProtocolPerf = 0x13;
constexpr std::uint8_t kMessagePerfLevelSet = 0x07;
constexpr std::uint8_t kProtocolPowercap = 0x18;
constexpr std::uint8_t kMessagePowercapSet = 0x06;

// Version reported by the platform for BASE_PROTOCOL_VERSION (major.minor in
// the upper and lower 16 bits).
constexpr std::uint32_t kImplementationVersion = 0x0002'0000;

constexpr std::int32_t kStatusSuccess = 0;
constexpr std::int32_t kStatusNotSupported = -1;
constexpr std::int32_t kStatusInvalidParameters = -2;

struct BaseVersion {
  bool operator==(const BaseVersion&) const = default;
};

// OS governor target for one core; frequency carried in kHz.
struct PerfLevelSet {
  std::uint32_t core = 0;
  std::uint32_t freq_khz = 0;
  double hertz() const { return static_cast<double>(freq_khz) * 1e3; }
  bool operator==(const PerfLevelSet&) const = default;
};

// BMC power budget; carried in mW.
struct PowerCapSet {
  std::uint32_t budget_mw = 0;
  double watts() const { return static_cast<double>(budget_mw) * 1e-3; }
  bool operator==(const PowerCapSet&) const = default;
};

using Message = std::variant<BaseVersion, PerfLevelSet, PowerCapSet>;

struct Command {
  Message message;
  std::uint32_t agent_id = 0;
  std::uint16_t token = 0;
  bool operator==(const Command&) const = default;
};

using ChannelBytes = std::array<std::uint8_t, kChannelBytes>;

// Pure codec: the bytes an agent writes for `cmd` (status busy, doorbell not included).
ChannelBytes encode_record(const Command& cmd);
// Decodes a request record. Returns nullopt for unknown protocol/message or a
// bad length.
std::optional<Command> decode_record(std::span<const std::uint8_t, kChannelBytes> record);
// Response the platform writes back: header echo, int32 status, then
// version for BaseVersion. Channel marked free.
ChannelBytes encode_response(const Command& request, std::int32_t status);

// 64 channels of 40 bytes plus one doorbell bit per channel.
class MailboxRegion {
 public:
  MailboxRegion();

  // Agent side. Throws ChannelBusy (record untouched) if the channel holds
  // an unconsumed message.
  void encode(const Command& cmd, std::size_t channel);
  bool busy(std::size_t channel) const;
  bool doorbell(std::size_t channel) const { return doorbells_.at(channel); }
  std::size_t pending_count() const;

  std::span<const std::uint8_t, kChannelBytes> channel(std::size_t index) const;
  std::span<const std::uint8_t> bytes() const { return bytes_; }
  // Raw write used by tests and fault injection; rings the doorbell.
  void write_raw(std::size_t channel, std::span<const std::uint8_t, kChannelBytes> record);
  // Platform side: overwrite the record with a response and drop the doorbell.
  void respond(std::size_t channel, const ChannelBytes& response);

 private:
  std::array<std::uint8_t, kRegionBytes> bytes_{};
  std::array<bool, kChannelCount> doorbells_{};
};

struct DrainResult {
  std::vector<Command> commands;  // channel order
  std::vector<std::size_t> channels;
  std::size_t malformed = 0;
};

// Platform side: consumes every pending doorbell in ascending channel order,
// writes a response, frees the channel. Malformed records are answered with an
// error status and reported to `log`.
DrainResult platform_drain(MailboxRegion& region, DiagnosticLog* log = nullptr, SimTime now = 0);

std::string hexdump(std::span<const std::uint8_t> bytes, std::size_t base_offset = 0);

std::string describe(const Command& cmd);

}  // namespace pcsim::scmi
