#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "metaems/agent.hpp"
#include "metaems/meta.hpp"

namespace metaems::checkpoint {

inline constexpr std::uint32_t kFormatVersion = 1;

enum class Kind : std::uint32_t { kMetaState = 1, kAgent = 2 };

// File layout: 8-byte magic, u32 format version, u32 kind, u64 payload
// length, payload, u32 CRC-32 of the payload.
// Wrong magic, truncation or checksum failure -> IoError; unknown version or
// a different kind -> VersionMismatch.
void Save(const std::filesystem::path& path, const meta::MetaState& state);
void Save(const std::filesystem::path& path, const agent::ActorCritic& agent);

meta::MetaState LoadMetaState(const std::filesystem::path& path);
agent::ActorCritic LoadAgent(const std::filesystem::path& path);

// In-memory framing used by the file functions.
std::string Frame(Kind kind, const std::string& payload);
std::string Unframe(Kind kind, const std::string& bytes, const std::string& origin = "<memory>");

}  // namespace metaems::checkpoint
