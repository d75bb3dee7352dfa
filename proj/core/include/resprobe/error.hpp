// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace resprobe {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input-side failures: CLI maps these to exit code 2.
class DimensionError : public Error { using Error::Error; };
class VocabError : public Error { using Error::Error; };
class InputError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class GridError : public Error { using Error::Error; };
class CorpusError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };

// Data/geometry failures: CLI maps these to exit code 3.
class DegenerateError : public Error { using Error::Error; };
class DegenerateLineError : public DegenerateError { using DegenerateError::DegenerateError; };
class DegeneratePairError : public DegenerateError { using DegenerateError::DegenerateError; };
class DegenerateSliceError : public DegenerateError { using DegenerateError::DegenerateError; };

/// Training produced a non-finite loss.
class DivergenceError : public Error { using Error::Error; };

}  // namespace resprobe
