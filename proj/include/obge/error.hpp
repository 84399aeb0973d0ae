/*
 *  Copyright 2026 The OBGE Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace obge {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed text input (edge lists, config files, CSV traces).
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Input violates a structural invariant (self-loop, negative weight, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Tree + stash cannot hold the real blocks.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class StashOverflow : public CapacityError {
 public:
  using CapacityError::CapacityError;
};

// Authentication failure or inconsistent decrypted state.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// Bad frames, bad file magic/version, truncated binary data.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace obge
