#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mapsat {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Value outside the valid domain (latitude beyond Mercator bounds, bad zoom, ...).
class DomainError : public Error
{
public:
    using Error::Error;
};

class ParseError : public Error
{
public:
    ParseError(std::string const &what, std::size_t byte_offset)
    : Error(what), m_offset(byte_offset)
    {}

    std::size_t byte_offset() const noexcept { return m_offset; }

private:
    std::size_t m_offset;
};

class UnsupportedGeometryError : public Error
{
public:
    using Error::Error;
};

class ValidationError : public Error
{
public:
    using Error::Error;
};

class ResourceLimitError : public Error
{
public:
    using Error::Error;
};

/// Requested more samples than there are candidates.
class CapacityError : public Error
{
public:
    CapacityError(std::string const &what, std::size_t candidates)
    : Error(what), m_candidates(candidates)
    {}

    std::size_t candidates() const noexcept { return m_candidates; }

private:
    std::size_t m_candidates;
};

class ConfigError : public Error
{
public:
    using Error::Error;
};

class InvalidImageError : public Error
{
public:
    using Error::Error;
};

class DimensionError : public Error
{
public:
    DimensionError(std::string const &what, int width, int height)
    : Error(what), m_width(width), m_height(height)
    {}

    int width() const noexcept { return m_width; }
    int height() const noexcept { return m_height; }

private:
    int m_width;
    int m_height;
};

/// HTTP 4xx (other than 429) or an undecodable body: retrying will not help.
class PermanentFetchError : public Error
{
public:
    PermanentFetchError(std::string const &what, int status)
    : Error(what), m_status(status)
    {}

    int status() const noexcept { return m_status; }

private:
    int m_status;
};

/// Retries exhausted on 5xx / 429 / connection errors.
class TransientFetchError : public Error
{
public:
    TransientFetchError(std::string const &what, int attempts)
    : Error(what), m_attempts(attempts)
    {}

    int attempts() const noexcept { return m_attempts; }

private:
    int m_attempts;
};

class ManifestError : public Error
{
public:
    ManifestError(std::string const &what, std::size_t line)
    : Error(what), m_line(line)
    {}

    /// 1-based line number, 0 when not tied to a line.
    std::size_t line() const noexcept { return m_line; }

private:
    std::size_t m_line;
};

class IntegrityError : public ManifestError
{
public:
    using ManifestError::ManifestError;
};

} // namespace mapsat
