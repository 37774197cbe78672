#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pktcam {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class PcapErrorKind { UnknownMagic, TruncatedHeader, TruncatedRecord, Io };

class PcapError : public Error {
public:
    PcapError(PcapErrorKind kind, std::uint64_t offset, const std::string& what)
        : Error(what), kind_(kind), offset_(offset) {}

    PcapErrorKind kind() const noexcept { return kind_; }
    /// File offset where the problem was detected.
    std::uint64_t offset() const noexcept { return offset_; }

private:
    PcapErrorKind kind_;
    std::uint64_t offset_;
};

const char* to_string(PcapErrorKind kind) noexcept;

/// Tensor dimensions do not agree with a layer or model.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Bad training or evaluation input (unknown label, class too small to split, ...).
class DataError : public Error {
public:
    using Error::Error;
};

enum class ModelFormatErrorKind { BadMagic, VersionMismatch, ChecksumMismatch, Malformed, Io };

class ModelFormatError : public Error {
public:
    ModelFormatError(ModelFormatErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
    ModelFormatErrorKind kind() const noexcept { return kind_; }

private:
    ModelFormatErrorKind kind_;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class ConflictError : public Error {
public:
    using Error::Error;
};

/// Underlying database failure.
class StoreError : public Error {
public:
    using Error::Error;
};

/// A request parameter failed validation (HTTP 422).
class ValidationError : public Error {
public:
    using Error::Error;
};

} // namespace pktcam
