#pragma once

#include <stdexcept>
#include <string>

#include "msgan/volume.hpp"

namespace msgan {

enum class IoErrorKind {
    open_failed,
    malformed_header,
    truncated_payload,
    trailing_payload,
    unsupported_ndim,
    unsupported_dtype,
    nonfinite_data,
};

struct IoError : std::runtime_error {
    IoErrorKind kind;
    IoError(IoErrorKind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

/// NDIMG: UTF-8 `key = value` header lines (`ndim`, `shape`, `spacing`,
/// `dtype = f32le`), a terminating `data:` line, then raw little-endian
/// 32-bit floats in row-major order, slowest axis first. Round-trips are
/// bit-exact on (shape, spacing, data).
Volume load_volume(const std::string& path);
void save_volume(const Volume& v, const std::string& path);

}  // namespace msgan
