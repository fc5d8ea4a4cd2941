#include "pcsim/scmi.hpp"

#include <algorithm>
#include <cstdio>

namespace pcsim::scmi {

namespace {

void put32(std::span<std::uint8_t> out, std::size_t off, std::uint32_t v) {
  for (std::size_t i = 0; i < 4; ++i) out[off + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void put16(std::span<std::uint8_t> out, std::size_t off, std::uint16_t v) {
  out[off] = static_cast<std::uint8_t>(v);
  out[off + 1] = static_cast<std::uint8_t>(v >> 8);
}

std::uint32_t get32(std::span<const std::uint8_t> in, std::size_t off) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[off + i]) << (8 * i);
  return v;
}

std::uint16_t get16(std::span<const std::uint8_t> in, std::size_t off) {
  return static_cast<std::uint16_t>(in[off] | (in[off + 1] << 8));
}

struct Ids {
  std::uint8_t protocol;
  std::uint8_t message;
  std::uint32_t payload_len;
};

Ids ids_of(const Message& m) {
  struct V {
    Ids operator()(const BaseVersion&) const { return {kProtocolBase, kMessageBaseVersion, 0}; }
    Ids operator()(const PerfLevelSet&) const { return {kProtocolPerf, kMessagePerfLevelSet, 8}; }
    Ids operator()(const PowerCapSet&) const { return {kProtocolPowercap, kMessagePowercapSet, 4}; }
  };
  return std::visit(V{}, m);
}

void write_header(std::span<std::uint8_t> out, std::uint8_t protocol, std::uint8_t message, std::uint16_t token) {
  out[kHeaderOffset] = protocol;
  out[kHeaderOffset + 1] = message;
  put16(out, kHeaderOffset + 2, token);
}

std::size_t check_channel(std::size_t channel) {
  if (channel >= kChannelCount) throw OutOfRange("mailbox channel " + std::to_string(channel) + " out of range");
  return channel;
}

}  // namespace

ChannelBytes encode_record(const Command& cmd) {
  ChannelBytes out{};
  const Ids ids = ids_of(cmd.message);
  put32(out, kStatusOffset, 0);  // busy
  put32(out, kFlagsOffset, kFlagIrq);
  put32(out, kLengthOffset, static_cast<std::uint32_t>(kHeaderBytes) + ids.payload_len);
  write_header(out, ids.protocol, ids.message, cmd.token);
  if (const auto* p = std::get_if<PerfLevelSet>(&cmd.message)) {
    put32(out, kPayloadOffset, p->core);
    put32(out, kPayloadOffset + 4, p->freq_khz);
  } else if (const auto* c = std::get_if<PowerCapSet>(&cmd.message)) {
    put32(out, kPayloadOffset, c->budget_mw);
  }
  put32(out, kAgentOffset, cmd.agent_id);
  return out;
}

std::optional<Command> decode_record(std::span<const std::uint8_t, kChannelBytes> record) {
  const std::uint8_t protocol = record[kHeaderOffset];
  const std::uint8_t message = record[kHeaderOffset + 1];
  const std::uint32_t length = get32(record, kLengthOffset);
  Command cmd;
  cmd.token = get16(record, kHeaderOffset + 2);
  cmd.agent_id = get32(record, kAgentOffset);

  if (protocol == kProtocolBase && message == kMessageBaseVersion) {
    cmd.message = BaseVersion{};
  } else if (protocol == kProtocolPerf && message == kMessagePerfLevelSet) {
    cmd.message = PerfLevelSet{get32(record, kPayloadOffset), get32(record, kPayloadOffset + 4)};
  } else if (protocol == kProtocolPowercap && message == kMessagePowercapSet) {
    cmd.message = PowerCapSet{get32(record, kPayloadOffset)};
  } else {
    return std::nullopt;
  }
  if (length != kHeaderBytes + ids_of(cmd.message).payload_len) return std::nullopt;
  return cmd;
}

ChannelBytes encode_response(const Command& request, std::int32_t status) {
  ChannelBytes out{};
  const Ids ids = ids_of(request.message);
  const bool version = std::holds_alternative<BaseVersion>(request.message) && status == kStatusSuccess;
  put32(out, kStatusOffset, kStatusFree);
  put32(out, kFlagsOffset, kFlagIrq);
  put32(out, kLengthOffset, static_cast<std::uint32_t>(kHeaderBytes + (version ? 8 : 4)));
  write_header(out, ids.protocol, ids.message, request.token);
  put32(out, kPayloadOffset, static_cast<std::uint32_t>(status));
  if (version) put32(out, kPayloadOffset + 4, kImplementationVersion);
  put32(out, kAgentOffset, request.agent_id);
  return out;
}

MailboxRegion::MailboxRegion() {
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    put32(std::span(bytes_).subspan(c * kChannelBytes, kChannelBytes), kStatusOffset, kStatusFree);
  }
}

bool MailboxRegion::busy(std::size_t channel) const { return doorbells_.at(check_channel(channel)); }

std::size_t MailboxRegion::pending_count() const {
  return static_cast<std::size_t>(std::count(doorbells_.begin(), doorbells_.end(), true));
}

std::span<const std::uint8_t, kChannelBytes> MailboxRegion::channel(std::size_t index) const {
  return std::span<const std::uint8_t, kChannelBytes>(bytes_.data() + check_channel(index) * kChannelBytes,
                                                      kChannelBytes);
}

void MailboxRegion::encode(const Command& cmd, std::size_t channel) {
  if (busy(channel)) throw ChannelBusy("mailbox channel " + std::to_string(channel) + " holds an unconsumed message");
  const ChannelBytes rec = encode_record(cmd);
  std::copy(rec.begin(), rec.end(), bytes_.begin() + static_cast<std::ptrdiff_t>(channel * kChannelBytes));
  doorbells_[channel] = true;
}

void MailboxRegion::write_raw(std::size_t channel, std::span<const std::uint8_t, kChannelBytes> record) {
  check_channel(channel);
  std::copy(record.begin(), record.end(), bytes_.begin() + static_cast<std::ptrdiff_t>(channel * kChannelBytes));
  doorbells_[channel] = true;
}

void MailboxRegion::respond(std::size_t channel, const ChannelBytes& response) {
  check_channel(channel);
  std::copy(response.begin(), response.end(), bytes_.begin() + static_cast<std::ptrdiff_t>(channel * kChannelBytes));
  doorbells_[channel] = false;
}

DrainResult platform_drain(MailboxRegion& region, DiagnosticLog* log, SimTime now) {
  DrainResult out;
  for (std::size_t ch = 0; ch < kChannelCount; ++ch) {
    if (!region.doorbell(ch)) continue;
    const auto decoded = decode_record(region.channel(ch));
    if (!decoded) {
      ChannelBytes cleared{};
      put32(cleared, kStatusOffset, kStatusFree | kStatusError);
      region.respond(ch, cleared);
      ++out.malformed;
      if (log) log->emit(now, "MalformedMessage", "channel " + std::to_string(ch) + ": undecodable record");
      continue;
    }
    region.respond(ch, encode_response(*decoded, kStatusSuccess));
    out.commands.push_back(*decoded);
    out.channels.push_back(ch);
  }
  return out;
}

std::string hexdump(std::span<const std::uint8_t> bytes, std::size_t base_offset) {
  std::string out;
  char buf[16];
  for (std::size_t i = 0; i < bytes.size(); i += 16) {
    std::snprintf(buf, sizeof buf, "%08zx ", base_offset + i);
    out += buf;
    for (std::size_t j = i; j < i + 16; ++j) {
      if (j < bytes.size()) {
        std::snprintf(buf, sizeof buf, " %02x", bytes[j]);
        out += buf;
      } else {
        out += "   ";
      }
    }
    out += '\n';
  }
  return out;
}

std::string describe(const Command& cmd) {
  struct V {
    std::string operator()(const BaseVersion&) const { return "BaseVersion"; }
    std::string operator()(const PerfLevelSet& p) const {
      return "PerfLevelSet{core=" + std::to_string(p.core) + ", freq_khz=" + std::to_string(p.freq_khz) + "}";
    }
    std::string operator()(const PowerCapSet& p) const {
      return "PowerCapSet{budget_mw=" + std::to_string(p.budget_mw) + "}";
    }
  };
  return std::visit(V{}, cmd.message) + " agent=" + std::to_string(cmd.agent_id) +
         " token=" + std::to_string(cmd.token);
}

}  // namespace pcsim::scmi
