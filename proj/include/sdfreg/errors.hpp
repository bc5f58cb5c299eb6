// Copyright (c) 2026 the sdfreg authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace sdfreg {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A precondition on caller-supplied values was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Point correspondences that admit no unique rigid fit (collinear, < 3 pairs).
class DegenerateConfiguration : public Error {
public:
    using Error::Error;
};

/// The normal matrix of the Gauss-Newton system is numerically singular;
/// the point geometry does not constrain all six pose degrees of freedom.
class RankDeficient : public Error {
public:
    using Error::Error;
};

/// Fewer than six usable points remain, so the pose is underdetermined.
class TooFewInliers : public Error {
public:
    using Error::Error;
};

class EmptyMesh : public Error {
public:
    using Error::Error;
};

class EmptyCloud : public Error {
public:
    using Error::Error;
};

class CountMismatch : public Error {
public:
    using Error::Error;
};

/// The masked mesh region is too small for the requested stroke pattern.
class RegionTooSmall : public Error {
public:
    using Error::Error;
};

class UnsupportedFormat : public Error {
public:
    using Error::Error;
};

/// Malformed file content. Carries a 1-based line (text formats) or a byte
/// offset (binary formats) when one is known; -1 otherwise.
class ParseError : public Error {
public:
    ParseError(const std::string& what, long line = -1, long offset = -1)
        : Error(decorate(what, line, offset)), line_(line), offset_(offset) {}

    long line() const { return line_; }
    long offset() const { return offset_; }

private:
    static std::string decorate(const std::string& what, long line, long offset) {
        std::string s = what;
        if (line >= 0) s += " (line " + std::to_string(line) + ")";
        if (offset >= 0) s += " (offset " + std::to_string(offset) + ")";
        return s;
    }
    long line_;
    long offset_;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Grid (de)serialization errors.
class BadMagic : public Error {
public:
    using Error::Error;
};

class UnsupportedVersion : public Error {
public:
    using Error::Error;
};

class TruncatedStream : public Error {
public:
    using Error::Error;
};

}  // namespace sdfreg
