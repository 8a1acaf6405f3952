// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace growprune {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor shapes or layer arities disagree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration or arguments (CLI exit code 1).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Unreadable or inconsistent input data (CLI exit code 2).
class DataError : public Error {
public:
    using Error::Error;
};

}  // namespace growprune
