#pragma once

#include "flowcast/seq2seq.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>

namespace flowcast {

/// Lower-case hex SHA-256.
std::string sha256_hex(std::span<const std::byte> bytes);
std::string sha256_file(const std::filesystem::path& path);

/// SHA-256 over the raw bytes of every parameter block, in block order.
/// Equal digests mean bitwise-equal parameters.
std::string parameter_digest(const Seq2SeqModel& model);

} // namespace flowcast
